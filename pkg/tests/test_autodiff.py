import numpy as np
import pytest

from graph_ews import autodiff as ad
from graph_ews.autodiff import ShapeError, Tape, Tensor, backward, check_gradients

TOL = 1e-4


def _grad(f, *values):
    leaves = [Tensor(v, requires_grad=True) for v in values]
    with Tape() as tape:
        out = f(*leaves)
    grads = backward(tape, out)
    return [grads.get(leaf) for leaf in leaves]


def test_outside_tape_records_nothing():
    w = Tensor(np.ones(3), requires_grad=True)
    out = (w * 2.0).sum()
    assert out._vjp is None
    assert out.item() == 6.0


def test_add_mul_broadcast_gradients():
    a = np.arange(6.0).reshape(2, 3)
    b = np.array([1.0, 2.0, 3.0])
    ga, gb = _grad(lambda x, y: (x * y + y).sum(), a, b)
    assert np.allclose(ga, np.tile(b, (2, 1)))
    assert np.allclose(gb, a.sum(axis=0) + 2.0)


def test_shared_leaf_accumulates():
    (g,) = _grad(lambda x: (x * x + x).sum(), np.array([1.0, -2.0]))
    assert np.allclose(g, [3.0, -3.0])


def test_backward_resets_leaf_gradients():
    x = Tensor(np.array([2.0]), requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            loss = (x * 3.0).sum()
        grads = backward(tape, loss)
    assert np.allclose(grads[x], [3.0])


def test_backward_needs_scalar():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        out = x * 2.0
    with pytest.raises(ShapeError):
        backward(tape, out)


def test_elementwise_names():
    x = Tensor(np.array([-1.0, 0.5]))
    assert np.allclose(ad.elementwise("relu", x).values, [0.0, 0.5])
    assert np.allclose(ad.elementwise("identity", x).values, x.values)
    with pytest.raises(ShapeError):
        ad.elementwise("add", x, Tensor(np.ones(3)))
    with pytest.raises(ShapeError):
        ad.elementwise("mul", x, Tensor(np.ones((2, 1))))
    with pytest.raises(NotImplementedError):
        ad.elementwise("softplus", x)


def test_matmul_shapes():
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 1))))
    with pytest.raises(ShapeError):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))


@pytest.mark.parametrize(
    "name,f",
    [
        ("sigmoid", lambda x: x.sigmoid().sum()),
        ("tanh", lambda x: (x.tanh() * x).sum()),
        ("exp_log", lambda x: (x.exp() + 1.0).log().sum()),
        ("div_pow", lambda x: (1.0 / (x ** 2 + 1.0)).sum()),
        ("mean", lambda x: (x * x).mean(axis=0).sum()),
        ("max", lambda x: x.max(axis=1).sum()),
        ("softmax", lambda x: (ad.softmax(x) * np.arange(4.0)).sum()),
        ("log_softmax", lambda x: ad.log_softmax(x)[:, 1].sum()),
        ("transpose", lambda x: (x.transpose() @ x).sum()),
        ("reshape", lambda x: (x.reshape(4, 3) @ np.ones((3, 2))).tanh().sum()),
    ],
)
def test_gradients_match_finite_differences(name, f):
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert check_gradients(f, x) < TOL, name


def test_matmul_batched_gradient():
    rng = np.random.default_rng(1)
    b = Tensor(rng.normal(size=(3, 2)))
    x = rng.normal(size=(2, 4, 3))
    assert check_gradients(lambda t: (t @ b).sigmoid().sum(), x) < TOL


def test_gather_repeated_indices():
    index = np.array([0, 2, 2])
    (g,) = _grad(lambda x: ad.gather(x, index).sum(), np.zeros(4))
    assert g.tolist() == [1.0, 0.0, 2.0, 0.0]


def test_gather_slice_and_concat_stack():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 3))

    def f(t):
        parts = ad.concat([t[:2], t[2:] * 2.0], axis=0)
        return ad.stack([parts, parts.sigmoid()], axis=1).sum()

    assert check_gradients(f, x) < TOL


def test_reduce_max_first_argmax():
    (g,) = _grad(lambda x: x.max(axis=0).sum(), np.array([1.0, 3.0, 3.0]))
    assert g.tolist() == [0.0, 1.0, 0.0]


def test_log_softmax_is_stable():
    out = ad.log_softmax(Tensor(np.array([[1000.0, 0.0]])))
    assert np.all(np.isfinite(out.values))
    assert out.values[0, 0] == pytest.approx(0.0)


def test_check_finite_flag():
    ad.set_check_finite(True)
    try:
        x = Tensor(np.array([0.0]), requires_grad=True)
        with Tape():
            with pytest.raises(FloatingPointError):
                ad.log(x)
    finally:
        ad.set_check_finite(False)


def test_tape_free_drops_graph():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    tape.free()
    assert y._vjp is None and tape.nodes == []


def test_check_gradients_detects_wrong_gradient():
    x = np.array([1.0, 2.0])
    wrong = np.array([1.0, 1.0])
    assert check_gradients(lambda t: (t * t).sum(), x, analytic=wrong) > 0.1
