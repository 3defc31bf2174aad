import numpy as np
import pytest

from graph_ews.autodiff import Tensor, check_gradients
from graph_ews.losses import balanced_class_weights, cross_entropy


def test_uniform_logits_give_log2():
    loss = cross_entropy(Tensor(np.zeros((4, 2))), [0, 1, 0, 1])
    assert loss.item() == pytest.approx(np.log(2))


def test_matches_direct_formula():
    logits = np.array([[2.0, 0.0], [0.5, 1.5], [-1.0, 3.0]])
    labels = np.array([0, 1, 0])
    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    expected = -np.mean(np.log(probs[np.arange(3), labels]))
    assert cross_entropy(Tensor(logits), labels).item() == pytest.approx(expected)


def test_large_logits_are_finite():
    loss = cross_entropy(Tensor(np.array([[1000.0, -1000.0]])), [1])
    assert loss.item() == pytest.approx(2000.0)


def test_weighted_mean():
    logits = np.array([[2.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    labels = [0, 1, 1]
    per_example = [
        cross_entropy(Tensor(logits[i : i + 1]), [labels[i]]).item() for i in range(3)
    ]
    weights = np.array([3.0, 1.0])
    loss = cross_entropy(Tensor(logits), labels, class_weights=weights)
    expected = (3.0 * per_example[0] + per_example[1] + per_example[2]) / 5.0
    assert loss.item() == pytest.approx(expected)
    unit = cross_entropy(Tensor(logits), labels, class_weights=[1.0, 1.0])
    assert unit.item() == pytest.approx(cross_entropy(Tensor(logits), labels).item())


def test_gradient():
    logits = np.random.default_rng(0).normal(size=(5, 2))
    labels = [0, 1, 1, 0, 1]
    assert check_gradients(lambda t: cross_entropy(t, labels), logits) < 1e-4
    assert check_gradients(lambda t: cross_entropy(t, labels, [0.2, 1.8]), logits) < 1e-4


def test_errors():
    with pytest.raises(ValueError):
        cross_entropy(Tensor(np.zeros((0, 2))), [])
    with pytest.raises(ValueError):
        cross_entropy(Tensor(np.zeros((1, 2))), [2])
    with pytest.raises(ValueError):
        cross_entropy(Tensor(np.zeros((2, 2))), [0])


def test_balanced_class_weights():
    assert balanced_class_weights([0, 0, 0, 1]).tolist() == pytest.approx([2 / 3, 2.0])
    assert balanced_class_weights([0, 1]).tolist() == [1.0, 1.0]
    assert balanced_class_weights([1, 1]).tolist() == [0.0, 1.0]
