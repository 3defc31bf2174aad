"""
The five sequence classifiers and their snapshot format.

Every model maps a normalized [N x ws x 5] batch to [N x 2] logits, where
column 0 is Recovery (AllC) and column 1 is Collapse (AllD).
"""

import enum
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Tuple

import blobfile as bf
import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError
from .evodyn import NUM_CHANNELS
from .nn import (
    LSTM,
    Conv,
    LayerNorm,
    Linear,
    Module,
    PositionalEmbedding,
    SelfAttention,
    maxpool,
)

SNAPSHOT_VERSION = 1
NUM_CLASSES = 2


class ModelKind(enum.Enum):
    SEQ_LSTM = "SeqLstm"
    CNN_SEQ_LSTM = "CnnSeqLstm"
    CNN_LSTM = "CnnLstm"
    TEXT_CNN = "TextCnn"
    TRANSFORMER = "Transformer"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    ws: int
    input_channels: int = NUM_CHANNELS
    hidden_size: int = 64
    lstm_layers: int = 2
    conv_channels: int = 32
    conv_kernel: int = 3
    conv2d_kernel: Tuple[int, int] = (3, NUM_CHANNELS)
    text_kernels: Tuple[int, ...] = (3, 4, 5)
    text_channels: int = 32
    pool_window: int = 2
    pool_stride: int = 2
    d_model: int = 64
    ff_size: int = 128
    encoder_layers: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in (
            "ws",
            "input_channels",
            "hidden_size",
            "lstm_layers",
            "conv_channels",
            "conv_kernel",
            "text_channels",
            "pool_window",
            "pool_stride",
            "d_model",
            "ff_size",
            "encoder_layers",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.kind is ModelKind.CNN_SEQ_LSTM:
            if self.ws - self.conv_kernel + 1 < self.pool_window:
                raise ValueError(
                    f"ws={self.ws} too short for conv kernel {self.conv_kernel} "
                    f"and pool window {self.pool_window}"
                )
        elif self.kind is ModelKind.CNN_LSTM:
            kh, kw = self.conv2d_kernel
            if kw > self.input_channels:
                raise ValueError(f"conv2d kernel width {kw} exceeds {self.input_channels} channels")
            if self.ws - kh + 1 < self.pool_window:
                raise ValueError(
                    f"ws={self.ws} too short for conv2d kernel height {kh} "
                    f"and pool window {self.pool_window}"
                )
        elif self.kind is ModelKind.TEXT_CNN:
            if not self.text_kernels:
                raise ValueError("text_kernels must not be empty")
            if max(self.text_kernels) > self.ws:
                raise ValueError(f"ws={self.ws} shorter than kernel {max(self.text_kernels)}")

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        d["conv2d_kernel"] = list(self.conv2d_kernel)
        d["text_kernels"] = list(self.text_kernels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["kind"] = ModelKind(d["kind"])
        d["conv2d_kernel"] = tuple(d["conv2d_kernel"])
        d["text_kernels"] = tuple(d["text_kernels"])
        return cls(**d)


class SeqLstm(Module):
    """
    Stacked LSTM over the raw sequence; the last hidden state feeds the
    logit head.
    """

    def __init__(self, spec: ModelSpec, rng):
        sizes = [spec.input_channels] + [spec.hidden_size] * spec.lstm_layers
        self.lstms = [LSTM(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.head = Linear(spec.hidden_size, NUM_CLASSES, rng)

    def forward(self, x):
        for lstm in self.lstms:
            x = lstm(x)
        return self.head(x[:, -1, :])


class CnnSeqLstm(Module):
    """
    conv1d -> relu -> maxpool over time -> stacked LSTM -> head.
    """

    def __init__(self, spec: ModelSpec, rng):
        self.pool_window = spec.pool_window
        self.pool_stride = spec.pool_stride
        self.conv = Conv(spec.input_channels, spec.conv_channels, spec.conv_kernel, rng)
        sizes = [spec.conv_channels] + [spec.hidden_size] * spec.lstm_layers
        self.lstms = [LSTM(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.head = Linear(spec.hidden_size, NUM_CLASSES, rng)

    def forward(self, x):
        h = ad.relu(self.conv(x))
        h = maxpool(h, self.pool_window, self.pool_stride, axis=1)
        for lstm in self.lstms:
            h = lstm(h)
        return self.head(h[:, -1, :])


class CnnLstm(Module):
    """
    The sequence is read as a single-channel [ws x 5] plane; conv2d mixes
    neighbouring time steps and channels together before pooling and the
    LSTM stack.
    """

    def __init__(self, spec: ModelSpec, rng):
        self.pool_window = spec.pool_window
        self.pool_stride = spec.pool_stride
        kh, kw = spec.conv2d_kernel
        self.conv = Conv(1, spec.conv_channels, (kh, kw), rng)
        features = spec.conv_channels * (spec.input_channels - kw + 1)
        sizes = [features] + [spec.hidden_size] * spec.lstm_layers
        self.lstms = [LSTM(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.head = Linear(spec.hidden_size, NUM_CLASSES, rng)

    def forward(self, x):
        n, length, channels = x.shape
        h = ad.relu(self.conv(ad.reshape(x, (n, 1, length, channels))))
        _, out_ch, steps, width = h.shape
        h = ad.reshape(ad.transpose(h, (0, 2, 1, 3)), (n, steps, out_ch * width))
        h = maxpool(h, self.pool_window, self.pool_stride, axis=1)
        for lstm in self.lstms:
            h = lstm(h)
        return self.head(h[:, -1, :])


class TextCnn(Module):
    """
    Parallel conv1d branches with distinct kernel sizes, each max-pooled
    over the whole sequence, concatenated into the head.
    """

    def __init__(self, spec: ModelSpec, rng):
        self.convs = [
            Conv(spec.input_channels, spec.text_channels, k, rng) for k in spec.text_kernels
        ]
        self.head = Linear(spec.text_channels * len(spec.text_kernels), NUM_CLASSES, rng)

    def forward(self, x):
        pooled = [ad.reduce_max(ad.relu(conv(x)), axis=1) for conv in self.convs]
        return self.head(ad.concat(pooled, axis=-1))


class EncoderBlock(Module):
    """
    Post-norm encoder block: x = LN(x + attn(x)); x = LN(x + FF(x)).
    """

    def __init__(self, d, ff_size, rng):
        self.attn = SelfAttention(d, rng)
        self.norm1 = LayerNorm(d)
        self.ff1 = Linear(d, ff_size, rng, activation="relu")
        self.ff2 = Linear(ff_size, d, rng)
        self.norm2 = LayerNorm(d)

    def forward(self, x):
        x = self.norm1(x + self.attn(x))
        return self.norm2(x + self.ff2(self.ff1(x)))


class Transformer(Module):
    def __init__(self, spec: ModelSpec, rng):
        self.proj = Linear(spec.input_channels, spec.d_model, rng)
        self.pos = PositionalEmbedding(spec.ws, spec.d_model, rng)
        self.blocks = [
            EncoderBlock(spec.d_model, spec.ff_size, rng) for _ in range(spec.encoder_layers)
        ]
        self.head = Linear(spec.d_model, NUM_CLASSES, rng)

    def forward(self, x):
        h = self.proj(x) + self.pos(x.shape[1])
        for block in self.blocks:
            h = block(h)
        # Mean over positions before the head.
        return self.head(ad.reduce_mean(h, axis=1))


_ARCHITECTURES = {
    ModelKind.SEQ_LSTM: SeqLstm,
    ModelKind.CNN_SEQ_LSTM: CnnSeqLstm,
    ModelKind.CNN_LSTM: CnnLstm,
    ModelKind.TEXT_CNN: TextCnn,
    ModelKind.TRANSFORMER: Transformer,
}


@dataclass(eq=False)
class Model:
    spec: ModelSpec
    net: Module = field(repr=False)

    def named_parameters(self):
        return self.net.named_parameters()

    def parameters(self):
        return self.net.parameters()


def build_model(spec: ModelSpec):
    """
    Instantiate an architecture with parameters drawn from spec.seed.
    """
    if spec.kind not in _ARCHITECTURES:
        raise NotImplementedError(f"unknown model kind: {spec.kind}")
    rng = np.random.default_rng(spec.seed)
    return Model(spec=spec, net=_ARCHITECTURES[spec.kind](spec, rng))


def forward(model: Model, batch):
    """
    :param batch: an [N x ws x 5] array or Tensor.
    :return: [N x 2] logits.
    """
    batch = ad.as_tensor(batch)
    if batch.ndim != 3:
        raise ShapeError(f"expected an [N x ws x C] batch, got {batch.shape}")
    if batch.shape[1] != model.spec.ws:
        raise ShapeError(f"batch ws={batch.shape[1]}, model expects {model.spec.ws}")
    if batch.shape[2] != model.spec.input_channels:
        raise ShapeError(
            f"batch has {batch.shape[2]} channels, model expects {model.spec.input_channels}"
        )
    return model.net(batch)


def parameter_snapshot(model: Model):
    return {name: p.values.copy() for name, p in model.named_parameters()}


def load_parameters(model: Model, snapshot):
    params = dict(model.named_parameters())
    missing = set(params) - set(snapshot)
    if missing:
        raise ValueError(f"snapshot is missing parameters: {sorted(missing)}")
    for name, p in params.items():
        values = np.asarray(snapshot[name], dtype=np.float64)
        if values.shape != p.shape:
            raise ShapeError(f"{name}: snapshot shape {values.shape}, model {p.shape}")
        p.values[...] = values
    return model


def save_model(model: Model, path):
    arrays = parameter_snapshot(model)
    arrays["__spec__"] = np.array(json.dumps(model.spec.to_dict()))
    arrays["__version__"] = np.array(SNAPSHOT_VERSION)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with bf.BlobFile(path, "wb") as f:
        f.write(buf.getvalue())


def load_model(path):
    with bf.BlobFile(path, "rb") as f:
        data = np.load(io.BytesIO(f.read()), allow_pickle=False)
        arrays = {k: data[k] for k in data.files}
    version = int(arrays.pop("__version__"))
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"snapshot version {version}, expected {SNAPSHOT_VERSION}")
    spec = ModelSpec.from_dict(json.loads(str(arrays.pop("__spec__"))))
    return load_parameters(build_model(spec), arrays)
