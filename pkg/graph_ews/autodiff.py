"""
Dense float64 tensors with reverse-mode differentiation.

Operations executed inside a `Tape` context are recorded in creation order,
which is a valid topological order, and `backward` walks that record in
reverse. Outside a tape, operations only compute values.

    w = Tensor(np.zeros((3, 2)), requires_grad=True)
    with Tape() as tape:
        loss = (x @ w).sigmoid().sum()
    grads = backward(tape, loss)
"""

import numpy as np
from scipy.special import expit, logsumexp


class ShapeError(ValueError):
    """
    Raised when operand shapes are incompatible.
    """


# When set, every recorded forward value is checked for NaN/Inf.
CHECK_FINITE = False


def set_check_finite(flag):
    global CHECK_FINITE
    CHECK_FINITE = bool(flag)


class Tape:
    """
    Records differentiable operations while active. Tapes nest; the
    innermost active tape receives new nodes.
    """

    _stack = []

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        Tape._stack.append(self)
        return self

    def __exit__(self, *exc):
        Tape._stack.pop()
        return False

    @classmethod
    def current(cls):
        return cls._stack[-1] if cls._stack else None

    def record(self, node):
        self.nodes.append(node)

    def free(self):
        for node in self.nodes:
            node._parents = ()
            node._vjp = None
        self.nodes = []


class Tensor:
    __array_priority__ = 100

    def __init__(self, values, requires_grad=False, name=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = ()
        self._vjp = None

    # ---------------------------------------------------------------
    # shape helpers

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def numpy(self):
        return self.values

    def item(self):
        return float(self.values.reshape(-1)[0]) if self.size == 1 else self._not_scalar()

    def _not_scalar(self):
        raise ShapeError(f"tensor of shape {self.shape} is not a scalar")

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ---------------------------------------------------------------
    # operators

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return gather(self, index)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def max(self, axis):
        return reduce_max(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(values, parents, vjp):
    """
    Wrap an op result. `vjp(g)` maps the output gradient to one gradient
    (or None) per parent.
    """
    out = Tensor(values)
    tape = Tape.current()
    if tape is not None and any(p.requires_grad for p in parents):
        if CHECK_FINITE and not np.all(np.isfinite(out.values)):
            raise FloatingPointError("non-finite value in forward pass")
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
        tape.record(out)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


# -------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.values + b.values,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(
        a.values - b.values,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.values * b.values,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.values, a.shape),
            _unbroadcast(g * a.values, b.shape),
        ),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.values / b.values
    return _make(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.values, a.shape),
            _unbroadcast(-g * out / b.values, b.shape),
        ),
    )


def neg(a):
    a = as_tensor(a)
    return _make(-a.values, (a,), lambda g: (-g,))


def power(a, exponent):
    a = as_tensor(a)
    if isinstance(exponent, Tensor):
        raise TypeError("only constant exponents are supported")
    p = float(exponent)
    return _make(
        a.values ** p, (a,), lambda g: (g * p * a.values ** (p - 1.0),)
    )


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.values)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    return _make(np.log(a.values), (a,), lambda g: (g / a.values,))


def sigmoid(a):
    a = as_tensor(a)
    out = expit(a.values)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.values)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a):
    a = as_tensor(a)
    mask = a.values > 0
    return _make(a.values * mask, (a,), lambda g: (g * mask,))


def identity(a):
    return as_tensor(a)


_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "identity": identity,
}


def elementwise(op, *args):
    """
    Apply a named pointwise op ("add", "mul", "sigmoid", "tanh", ...).
    Binary ops require equal shapes.
    """
    if op not in _ELEMENTWISE:
        raise NotImplementedError(f"unknown elementwise op: {op}")
    args = [as_tensor(a) for a in args]
    if len(args) == 2 and args[0].shape != args[1].shape:
        raise ShapeError(f"{op}: shapes {args[0].shape} and {args[1].shape} differ")
    return _ELEMENTWISE[op](*args)


# -------------------------------------------------------------------
# linear algebra and reductions


def matmul(a, b):
    """
    Matrix product over the last two axes, leading axes broadcast.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    return _make(
        np.matmul(a.values, b.values),
        (a, b),
        lambda g: (
            _unbroadcast(np.matmul(g, np.swapaxes(b.values, -1, -2)), a.shape),
            _unbroadcast(np.matmul(np.swapaxes(a.values, -1, -2), g), b.shape),
        ),
    )


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def reduce_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    return _make(
        a.values.sum(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand_reduced(g, a.shape, axis, keepdims).copy(),),
    )


def reduce_mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return _make(
        a.values.mean(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand_reduced(g, a.shape, axis, keepdims) / count,),
    )


def reduce_max(a, axis):
    """
    Maximum along one axis; the gradient goes to the first maximal entry.
    """
    a = as_tensor(a)
    idx = np.expand_dims(np.argmax(a.values, axis=axis), axis)
    out = np.take_along_axis(a.values, idx, axis=axis)

    def vjp(g):
        grad = np.zeros_like(a.values)
        np.put_along_axis(grad, idx, np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _make(np.squeeze(out, axis=axis), (a,), vjp)


def softmax(x, axis=-1):
    """
    Softmax along `axis`, computed with max subtraction.
    """
    x = as_tensor(x)
    shifted = x.values - x.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _make(
        out,
        (x,),
        lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),),
    )


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    out = x.values - logsumexp(x.values, axis=axis, keepdims=True)
    probs = np.exp(out)
    return _make(
        out,
        (x,),
        lambda g: (g - probs * g.sum(axis=axis, keepdims=True),),
    )


# -------------------------------------------------------------------
# structure


def reshape(a, shape):
    a = as_tensor(a)
    return _make(
        a.values.reshape(shape), (a,), lambda g: (g.reshape(a.shape),)
    )


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _make(
        np.transpose(a.values, axes), (a,), lambda g: (np.transpose(g, inverse),)
    )


class _Scatter:
    """
    Gradient of an indexing op, added into the parent's gradient in place
    instead of materializing a full-size array per use.
    """

    def __init__(self, index, values):
        self.index = index
        self.values = values

    def add_to(self, grad):
        index = self.index if isinstance(self.index, tuple) else (self.index,)
        if any(isinstance(i, (np.ndarray, list)) for i in index):
            np.add.at(grad, self.index, self.values)
        else:
            grad[self.index] += self.values


def gather(a, index):
    """
    Basic or advanced indexing; the gradient scatters back with
    accumulation, so repeated indices add up.
    """
    a = as_tensor(a)
    return _make(a.values[index], (a,), lambda g: (_Scatter(index, g),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    try:
        out = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from e
    return _make(out, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.values for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: {e}") from e
    return _make(
        out,
        tuple(tensors),
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))),
    )


# -------------------------------------------------------------------
# reverse pass


def backward(tape: Tape, loss: Tensor):
    """
    Propagate d(loss)/d(node) through every node recorded on `tape`.

    Leaf gradients are reset, then accumulated, so a tensor used several
    times receives the sum of its contributions.

    :return: dict mapping each leaf tensor that requires grad to its
             gradient array.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    leaves = {}
    for node in tape.nodes:
        node.grad = None
        for p in node._parents:
            if p.requires_grad and p._vjp is None:
                leaves[id(p)] = p
    for leaf in leaves.values():
        leaf.grad = None

    if loss._vjp is None:
        if loss.requires_grad:
            loss.grad = np.ones_like(loss.values)
            return {loss: loss.grad}
        return {}

    loss.grad = np.ones_like(loss.values)
    for node in reversed(tape.nodes):
        if node.grad is None or node._vjp is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            if g is None or not parent.requires_grad:
                continue
            if isinstance(g, _Scatter):
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.values)
                g.add_to(parent.grad)
                continue
            g = np.asarray(g, dtype=np.float64)
            if g.shape != parent.shape:
                g = np.broadcast_to(g, parent.shape)
            if parent.grad is None:
                parent.grad = np.array(g, dtype=np.float64)
            else:
                parent.grad = parent.grad + g
    return {leaf: leaf.grad for leaf in leaves.values() if leaf.grad is not None}


def check_gradients(f, x, eps=1e-5, analytic=None, floor=1e-6):
    """
    Compare the tape gradient of a scalar function against central
    differences.

    :param f: maps a Tensor shaped like x to a scalar Tensor.
    :param x: point of evaluation (Tensor or array).
    :param eps: finite-difference step.
    :param analytic: optional gradient to test instead of the tape's.
    :param floor: lower bound on the relative-error denominator, so
                  coordinates where both gradients vanish compare as absolute
                  error.
    :return: the maximum relative error over coordinates.
    """
    base = np.array(as_tensor(x).values, dtype=np.float64)
    if analytic is None:
        leaf = Tensor(base.copy(), requires_grad=True)
        with Tape() as tape:
            out = f(leaf)
        backward(tape, out)
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)
        tape.free()
    analytic = np.asarray(analytic, dtype=np.float64)

    numeric = np.zeros_like(base)
    for i in np.ndindex(base.shape):
        plus = base.copy()
        plus[i] += eps
        minus = base.copy()
        minus[i] -= eps
        numeric[i] = (f(Tensor(plus)).item() - f(Tensor(minus)).item()) / (2 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
