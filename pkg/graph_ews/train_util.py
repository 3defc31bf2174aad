import csv
import io
import math
from dataclasses import dataclass, field
from typing import List

import blobfile as bf
import numpy as np
from scipy.special import softmax

from . import autodiff as ad
from . import logger
from .dataset import DatasetFile, HeldOutDataset, Label, to_arrays
from .losses import balanced_class_weights, cross_entropy
from .seq_models import ModelSpec, build_model, forward, load_parameters, parameter_snapshot


class SingleClassError(ValueError):
    """
    Raised when a training set holds only one outcome class.
    """


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 50
    early_stop_patience: int = 5
    validation_fraction: float = 0.1
    seed: int = 0
    rebalance: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("batch_size", "max_epochs", "early_stop_patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_acc: List[float] = field(default_factory=list)
    initial_loss: float = float("nan")
    best_epoch: int = -1

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        return [
            dict(epoch=i, train_loss=t, val_loss=v, val_acc=a)
            for i, (t, v, a) in enumerate(zip(self.train_loss, self.val_loss, self.val_acc))
        ]

    def write_csv(self, path):
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=["epoch", "train_loss", "val_loss", "val_acc"], lineterminator="\n"
        )
        writer.writeheader()
        writer.writerows(self.rows())
        with bf.BlobFile(path, "w") as f:
            f.write(buf.getvalue())


@dataclass
class AdamState:
    step: int
    m: List[np.ndarray]
    v: List[np.ndarray]


def adam_step(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """
    One bias-corrected Adam update, applied to the parameter values in
    place. A None gradient is treated as zero.
    """
    if len(params) != len(grads):
        raise ad.ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.values)
        if g.shape != p.shape:
            raise ad.ShapeError(f"gradient {g.shape} does not match parameter {p.shape}")
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState(
            step=0,
            m=[np.zeros_like(p.values) for p in self.params],
            v=[np.zeros_like(p.values) for p in self.params],
        )

    def step(self, grads):
        """
        :param grads: dict from parameter Tensor to gradient, as returned by
                      autodiff.backward.
        """
        adam_step(
            self.params,
            [grads.get(p) for p in self.params],
            self.state,
            self.lr,
            self.betas[0],
            self.betas[1],
            self.eps,
        )


def _validation_split(y, fraction, rng):
    """
    Stratified hold-out indices. Each class keeps at least one training
    example.
    """
    val = []
    for label in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == label))
        k = int(math.floor(fraction * len(idx) + 0.5))
        k = min(k, len(idx) - 1)
        val.extend(idx[:k].tolist())
    val = np.array(sorted(val), dtype=np.int64)
    train = np.setdiff1d(np.arange(len(y)), val)
    return train, val


class TrainLoop:
    def __init__(self, *, model, X, y, config: TrainConfig, log_context=None):
        self.model = model
        self.config = config
        self.log_context = dict(log_context or {})
        self.params = model.parameters()
        self.opt = Adam(self.params, lr=config.learning_rate)

        seeds = np.random.SeedSequence(config.seed).spawn(2)
        self.shuffle_rng = np.random.default_rng(seeds[0])
        train_idx, val_idx = _validation_split(
            y, config.validation_fraction, np.random.default_rng(seeds[1])
        )
        self.X_train, self.y_train = X[train_idx], y[train_idx]
        self.X_val, self.y_val = X[val_idx], y[val_idx]
        if len(self.y_val) == 0:
            logger.warn("validation set is empty; early stopping uses training loss")

        self.class_weights = (
            balanced_class_weights(self.y_train) if config.rebalance else None
        )
        self.history = TrainHistory()
        self.best_loss = math.inf
        self.best_params = None
        self.bad_epochs = 0
        self.epoch = 0

    def run_loop(self):
        self.history.initial_loss = self.loss_on(self.X_train, self.y_train)
        while self.epoch < self.config.max_epochs:
            train_loss = self.run_epoch()
            if len(self.y_val):
                val_loss = self.loss_on(self.X_val, self.y_val)
                val_acc = accuracy_on(self.model, self.X_val, self.y_val)
            else:
                val_loss, val_acc = train_loss, float("nan")
            self.history.train_loss.append(train_loss)
            self.history.val_loss.append(val_loss)
            self.history.val_acc.append(val_acc)
            self.log_epoch()

            if val_loss < self.best_loss:
                self.best_loss = val_loss
                self.best_params = parameter_snapshot(self.model)
                self.history.best_epoch = self.epoch
                self.bad_epochs = 0
            else:
                self.bad_epochs += 1
            self.epoch += 1
            if self.bad_epochs >= self.config.early_stop_patience:
                logger.log(f"early stop after epoch {self.epoch - 1}")
                break

        if self.best_params is not None:
            load_parameters(self.model, self.best_params)
        return self.model, self.history

    def run_epoch(self):
        order = self.shuffle_rng.permutation(len(self.y_train))
        total, count = 0.0, 0
        for start in range(0, len(order), self.config.batch_size):
            idx = order[start : start + self.config.batch_size]
            total += self.run_step(self.X_train[idx], self.y_train[idx]) * len(idx)
            count += len(idx)
        return total / count

    def run_step(self, xb, yb):
        with ad.Tape() as tape:
            loss = cross_entropy(forward(self.model, xb), yb, self.class_weights)
        grads = ad.backward(tape, loss)
        self.opt.step(grads)
        tape.free()
        return loss.item()

    def loss_on(self, X, y):
        if len(y) == 0:
            return float("nan")
        total = 0.0
        for start in range(0, len(y), self.config.batch_size):
            xb = X[start : start + self.config.batch_size]
            yb = y[start : start + self.config.batch_size]
            total += cross_entropy(forward(self.model, xb), yb, self.class_weights).item() * len(yb)
        return total / len(y)

    def log_epoch(self):
        logger.logkvs(self.log_context)
        logger.logkv("epoch", self.epoch)
        logger.logkv("train_loss", self.history.train_loss[-1])
        logger.logkv("val_loss", self.history.val_loss[-1])
        logger.logkv("val_acc", self.history.val_acc[-1])
        logger.dumpkvs()


def train(spec: ModelSpec, dataset: DatasetFile, config: TrainConfig, log_context=None):
    """
    Fit a fresh model and return the parameters with the lowest
    validation loss.

    :param log_context: extra key/values written with every epoch row.

    :return: (Model, TrainHistory).
    """
    if isinstance(dataset, HeldOutDataset):
        raise TypeError("refusing to train on held-out test records")
    if dataset.ws != spec.ws:
        raise ValueError(f"dataset ws={dataset.ws}, model spec ws={spec.ws}")
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    X, y = to_arrays(dataset)
    if len(np.unique(y)) < 2:
        only = Label(int(y[0])).to_outcome().value
        raise SingleClassError(f"training data contains only {only} records")
    logger.log(
        f"training {spec.kind.value} on {len(y)} records "
        f"({int((y == 1).sum())} collapse, ws={spec.ws})"
    )
    model = build_model(spec)
    return TrainLoop(model=model, X=X, y=y, config=config, log_context=log_context).run_loop()


def predict_logits(logits):
    """
    Decide labels from [N x 2] logits. Ties go to Recovery.

    :return: (labels, probabilities of the chosen label).
    """
    logits = np.asarray(logits, dtype=np.float64)
    probs = softmax(logits, axis=-1)
    labels = np.argmax(probs, axis=-1)
    return labels, probs[np.arange(len(labels)), labels]


def predict_batch(model, X, batch_size=256):
    X = np.asarray(X, dtype=np.float64)
    labels, probs = [], []
    for start in range(0, len(X), batch_size):
        logits = forward(model, X[start : start + batch_size]).values
        l, p = predict_logits(logits)
        labels.append(l)
        probs.append(p)
    if not labels:
        return np.zeros((0,), dtype=np.int64), np.zeros((0,))
    return np.concatenate(labels), np.concatenate(probs)


def predict(model, sequence):
    """
    Classify one normalized [ws x 5] sequence.

    :return: (Label, probability of that label).
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    labels, probs = predict_batch(model, sequence[None])
    return Label(int(labels[0])), float(probs[0])


def accuracy_on(model, X, y):
    labels, _ = predict_batch(model, X)
    return float((labels == y).mean())


def evaluate(model, dataset: DatasetFile):
    """
    :return: (predictions, labels) as integer arrays.
    """
    if dataset.ws != model.spec.ws:
        raise ValueError(f"dataset ws={dataset.ws}, model ws={model.spec.ws}")
    X, y = to_arrays(dataset)
    predictions, _ = predict_batch(model, X)
    return predictions, y
