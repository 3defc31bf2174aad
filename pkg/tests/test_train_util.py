import numpy as np
import pytest

from graph_ews import logger
from graph_ews.autodiff import ShapeError, Tensor
from graph_ews.dataset import DatasetFile, FeatureSequence, Label, split
from graph_ews.seq_models import ModelKind, ModelSpec, build_model
from graph_ews.train_util import (
    Adam,
    AdamState,
    SingleClassError,
    TrainConfig,
    TrainHistory,
    TrainLoop,
    _validation_split,
    adam_step,
    evaluate,
    predict,
    predict_logits,
    train,
)


def separable_dataset(n_per_class=20, ws=4, seed=0):
    """
    Recovery runs keep about 90% cooperators, collapse runs about 90%
    defectors; n=10 nodes and 20 edges.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i in range(2 * n_per_class):
        label = Label.RECOVERY if i % 2 == 0 else Label.COLLAPSE
        d = rng.integers(0, 2, size=ws) + (8 if label is Label.COLLAPSE else 0)
        dd = 2 * d
        frames = np.stack([10 - d, d, 20 - dd, np.zeros(ws, dtype=np.int64), dd], axis=1)
        records.append(FeatureSequence(frames.astype(np.int64), label, run_id=i))
    return DatasetFile(ws=ws, n=10, edge_count=20, records=records)


def tiny_spec(ws=4, kind=ModelKind.SEQ_LSTM):
    return ModelSpec(kind=kind, ws=ws, hidden_size=4, lstm_layers=1, seed=1)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=1.0)


def test_adam_first_step_moves_by_learning_rate():
    p = Tensor(np.array([1.0, 1.0, 1.0]), requires_grad=True)
    state = AdamState(step=0, m=[np.zeros(3)], v=[np.zeros(3)])
    adam_step([p], [np.array([2.0, -3.0, 0.0])], state, lr=0.1)
    assert p.values == pytest.approx([0.9, 1.1, 1.0])
    assert state.step == 1


def test_adam_none_gradient_and_mismatch():
    p = Tensor(np.ones(2), requires_grad=True)
    opt = Adam([p], lr=0.1)
    opt.step({})
    assert p.values.tolist() == [1.0, 1.0]
    with pytest.raises(ShapeError):
        opt.step({p: np.ones(3)})
    with pytest.raises(ShapeError):
        adam_step([p], [], AdamState(0, [np.zeros(2)], [np.zeros(2)]), lr=0.1)


def test_adam_minimizes_quadratic():
    p = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    for _ in range(500):
        opt.step({p: 2 * p.values})
    assert np.allclose(p.values, 0.0, atol=5e-2)


def test_validation_split_keeps_training_examples():
    y = np.array([0] * 9 + [1])
    train_idx, val_idx = _validation_split(y, 0.5, np.random.default_rng(0))
    assert 9 in train_idx
    assert len(val_idx) == 5
    assert not set(train_idx) & set(val_idx)
    assert len(train_idx) + len(val_idx) == 10


def constant_fraction_dataset(n_per_class=32, ws=8, seed=0):
    """
    Cooperator fraction held at 0.9 for recovery runs and 0.1 for collapse
    runs; the edge channels jitter between records. n=10 nodes, 20 edges.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i in range(2 * n_per_class):
        label = Label.RECOVERY if i % 2 == 0 else Label.COLLAPSE
        c = 9 if label is Label.RECOVERY else 1
        cd = rng.integers(2, 5, size=ws)
        cc = (20 - cd) if c == 9 else np.zeros(ws, dtype=np.int64)
        dd = 20 - cd - cc
        frames = np.stack([np.full(ws, c), np.full(ws, 10 - c), cc, cd, dd], axis=1)
        records.append(FeatureSequence(frames.astype(np.int64), label, run_id=i))
    return DatasetFile(ws=ws, n=10, edge_count=20, records=records)


def small_spec(kind, ws=8):
    return ModelSpec(
        kind=kind,
        ws=ws,
        hidden_size=6,
        lstm_layers=1,
        conv_channels=4,
        text_kernels=(2, 3),
        text_channels=4,
        d_model=8,
        ff_size=16,
        encoder_layers=1,
        seed=1,
    )


@pytest.mark.parametrize("kind", list(ModelKind))
def test_every_model_learns_separable_data(kind):
    data = constant_fraction_dataset()
    parts = split(data, test_fraction=0.25, seed=0)
    config = TrainConfig(
        learning_rate=0.02, batch_size=8, max_epochs=20, early_stop_patience=20, seed=0
    )
    model, history = train(small_spec(kind), parts.train, config)
    assert len(history) == 20
    assert history.train_loss[-1] < history.initial_loss
    assert 0 <= history.best_epoch < 20
    assert history.val_loss[history.best_epoch] == min(history.val_loss)
    predictions, labels = evaluate(model, parts.test)
    assert np.mean(predictions == labels) == 1.0


def test_train_is_deterministic():
    data = separable_dataset(n_per_class=6)
    config = TrainConfig(learning_rate=0.01, batch_size=4, max_epochs=3, seed=7)
    _, a = train(tiny_spec(), data, config)
    _, b = train(tiny_spec(), data, config)
    assert a.train_loss == b.train_loss
    assert a.val_loss == b.val_loss


def test_early_stopping(monkeypatch):
    data = separable_dataset(n_per_class=6)
    monkeypatch.setattr(TrainLoop, "loss_on", lambda self, X, y: 1.0)
    config = TrainConfig(batch_size=4, max_epochs=30, early_stop_patience=2)
    _, history = train(tiny_spec(), data, config)
    # The first epoch sets the best loss; two flat epochs exhaust patience.
    assert len(history) == 3
    assert history.best_epoch == 0



def test_train_rebalanced_runs():
    data = separable_dataset(n_per_class=4)
    data = data.with_records(data.records[:6])
    config = TrainConfig(max_epochs=2, batch_size=3, rebalance=True)
    _, history = train(tiny_spec(), data, config)
    assert np.isfinite(history.train_loss).all()


def test_train_rejects_bad_inputs():
    data = separable_dataset(n_per_class=4)
    config = TrainConfig(max_epochs=1)
    with pytest.raises(TypeError):
        train(tiny_spec(), split(data, 0.25).test, config)
    with pytest.raises(ValueError, match="ws"):
        train(tiny_spec(ws=5), data, config)
    with pytest.raises(ValueError, match="empty"):
        train(tiny_spec(), data.with_records([]), config)
    only_recovery = data.with_records([r for r in data.records if r.label is Label.RECOVERY])
    with pytest.raises(SingleClassError, match="AllC"):
        train(tiny_spec(), only_recovery, config)


def test_predict_logits_and_ties():
    labels, probs = predict_logits([[2.0, 0.0], [0.0, 0.0], [-1.0, 1.0]])
    assert labels.tolist() == [0, 0, 1]
    assert probs == pytest.approx([0.8808, 0.5, 0.8808], abs=1e-4)


def test_predict_with_fixed_head():
    model = build_model(tiny_spec())
    head = model.net.head
    head.W.values[...] = 0.0
    head.b.values[...] = [2.0, 0.0]
    label, prob = predict(model, np.zeros((4, 5)))
    assert label is Label.RECOVERY
    assert prob == pytest.approx(0.8808, abs=1e-4)
    head.b.values[...] = [0.0, 0.0]
    assert predict(model, np.zeros((4, 5)))[0] is Label.RECOVERY


def test_evaluate_checks_window():
    model = build_model(tiny_spec(ws=5))
    with pytest.raises(ValueError):
        evaluate(model, separable_dataset(n_per_class=2))


def test_history_csv(tmp_path):
    history = TrainHistory(train_loss=[0.7, 0.5], val_loss=[0.6, 0.4], val_acc=[0.5, 1.0])
    path = tmp_path / "history.csv"
    history.write_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,val_acc"
    assert lines[2] == "1,0.5,0.4,1.0"


def test_training_logs_epochs(tmp_path):
    data = separable_dataset(n_per_class=4)
    with logger.scoped_configure(dir=str(tmp_path), format_strs=["csv"]):
        train(tiny_spec(), data, TrainConfig(max_epochs=2, early_stop_patience=5))
    header = (tmp_path / "progress.csv").read_text().splitlines()[0].split(",")
    assert {"epoch", "train_loss", "val_loss", "val_acc"} <= set(header)


def test_training_logs_context_with_each_epoch(tmp_path):
    data = separable_dataset(n_per_class=4)
    context = dict(model="SeqLstm", ws=4, network="random", seed=3)
    with logger.scoped_configure(dir=str(tmp_path), format_strs=["csv"]):
        train(tiny_spec(), data, TrainConfig(max_epochs=2), log_context=context)
    lines = (tmp_path / "progress.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert len(lines) == 3
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        assert row["network"] == "random" and row["ws"] == "4" and row["seed"] == "3"
