"""
Assembly units for the sequence classifiers: LSTM, 1-D/2-D convolution,
max-pooling, self-attention, layer norm, positional embedding and
fully-connected layers, built on the autodiff tensors.

Sequences are batch-first: [N x T x C].
"""

import enum
import math

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


class Module:
    """
    Minimal parameter container. Parameters are Tensors with requires_grad
    set, discovered from attributes in assignment order, so the naming and
    ordering of `named_parameters` is stable for a given architecture.
    """

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def uniform_init(rng, shape, fan_in):
    """
    Uniform(-a, a) parameter with a = sqrt(1 / fan_in).
    """
    bound = math.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def param(values):
    return Tensor(np.array(values, dtype=np.float64), requires_grad=True)


def _swap_last(x):
    axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    return ad.transpose(x, axes)


# -------------------------------------------------------------------
# fully connected


def fully_connected(x, W, b, activation="identity"):
    """
    y = activation(x W^T + b).

    :param x: an [... x in] tensor.
    :param W: an [out x in] weight.
    :param b: an [out] bias.
    :param activation: "identity", "relu", "sigmoid" or "tanh".
    """
    x = ad.as_tensor(x)
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"fully_connected: input width {x.shape[-1]}, weight {W.shape}")
    return ad.elementwise(activation, ad.matmul(x, ad.transpose(W)) + b)


class Linear(Module):
    def __init__(self, in_features, out_features, rng, activation="identity"):
        self.activation = activation
        self.W = uniform_init(rng, (out_features, in_features), in_features)
        self.b = uniform_init(rng, (out_features,), in_features)

    def forward(self, x):
        return fully_connected(x, self.W, self.b, self.activation)


# -------------------------------------------------------------------
# LSTM


class LstmCell(Module):
    """
    Gate weights over the concatenation [h_{t-1}, x_t], each of shape
    [hidden x (hidden + input)].
    """

    def __init__(self, input_size, hidden_size, rng):
        self.input_size = input_size
        self.hidden_size = hidden_size
        fan_in = hidden_size + input_size
        shape = (hidden_size, fan_in)
        self.W_f = uniform_init(rng, shape, fan_in)
        self.W_i = uniform_init(rng, shape, fan_in)
        self.W_o = uniform_init(rng, shape, fan_in)
        self.W_c = uniform_init(rng, shape, fan_in)
        self.b_f = param(np.ones(hidden_size))
        self.b_i = param(np.zeros(hidden_size))
        self.b_o = param(np.zeros(hidden_size))
        self.b_c = param(np.zeros(hidden_size))

    @classmethod
    def zeros(cls, input_size, hidden_size):
        cell = cls(input_size, hidden_size, np.random.default_rng(0))
        for p in cell.parameters():
            p.values[...] = 0.0
        return cell

    def forward(self, x_t, h_prev, C_prev):
        return lstm_cell(x_t, h_prev, C_prev, self)


def lstm_cell(x_t, h_prev, C_prev, params: LstmCell):
    """
    One LSTM step.

    :param x_t: an [N x input] tensor.
    :param h_prev: previous hidden state, [N x hidden].
    :param C_prev: previous cell state, [N x hidden].
    :return: (h_t, C_t).
    """
    x_t, h_prev, C_prev = ad.as_tensor(x_t), ad.as_tensor(h_prev), ad.as_tensor(C_prev)
    if x_t.shape[-1] != params.input_size:
        raise ShapeError(f"lstm_cell: input width {x_t.shape[-1]}, expected {params.input_size}")
    if h_prev.shape[-1] != params.hidden_size or C_prev.shape != h_prev.shape:
        raise ShapeError(f"lstm_cell: state shapes {h_prev.shape}, {C_prev.shape}")
    z = ad.concat([h_prev, x_t], axis=-1)
    f = ad.sigmoid(fully_connected(z, params.W_f, params.b_f))
    i = ad.sigmoid(fully_connected(z, params.W_i, params.b_i))
    o = ad.sigmoid(fully_connected(z, params.W_o, params.b_o))
    C_tilde = ad.tanh(fully_connected(z, params.W_c, params.b_c))
    C_t = f * C_prev + i * C_tilde
    h_t = o * ad.tanh(C_t)
    return h_t, C_t


def lstm_layer(seq, params: LstmCell, h0=None, C0=None):
    """
    Scan lstm_cell over time and emit every hidden state.

    The four gates are fused into one [4H x (H + in)] weight and the input
    projection is computed for all steps at once; the result equals
    repeated lstm_cell calls.

    :param seq: an [N x T x in] (or [T x in]) tensor.
    :return: an [N x T x hidden] (or [T x hidden]) tensor.
    """
    seq = ad.as_tensor(seq)
    unbatched = seq.ndim == 2
    if unbatched:
        seq = ad.reshape(seq, (1,) + seq.shape)
    if seq.ndim != 3 or seq.shape[-1] != params.input_size:
        raise ShapeError(f"lstm_layer: input shape {seq.shape}, width {params.input_size}")
    n, length, _ = seq.shape
    H = params.hidden_size
    if h0 is None:
        h0 = Tensor(np.zeros((n, H)))
    if C0 is None:
        C0 = Tensor(np.zeros((n, H)))

    W = ad.concat([params.W_f, params.W_i, params.W_o, params.W_c], axis=0)
    b = ad.concat([params.b_f, params.b_i, params.b_o, params.b_c], axis=0)
    W_hT = ad.transpose(W[:, :H])
    x_proj = ad.matmul(seq, ad.transpose(W[:, H:])) + b

    h, C = ad.as_tensor(h0), ad.as_tensor(C0)
    outputs = []
    for t in range(length):
        gates = x_proj[:, t, :] + ad.matmul(h, W_hT)
        sig = ad.sigmoid(gates[:, : 3 * H])
        f, i, o = sig[:, :H], sig[:, H : 2 * H], sig[:, 2 * H :]
        C_tilde = ad.tanh(gates[:, 3 * H :])
        C = f * C + i * C_tilde
        h = o * ad.tanh(C)
        outputs.append(h)
    out = ad.stack(outputs, axis=1)
    if unbatched:
        out = ad.reshape(out, out.shape[1:])
    return out


class LSTM(Module):
    def __init__(self, input_size, hidden_size, rng):
        self.cell = LstmCell(input_size, hidden_size, rng)

    def forward(self, seq, h0=None, C0=None):
        return lstm_layer(seq, self.cell, h0, C0)


# -------------------------------------------------------------------
# convolution and pooling


class ConvMode(enum.Enum):
    ONE_D = "1d"
    TWO_D = "2d"


class Conv(Module):
    """
    Convolution parameters.

    For ONE_D the kernel is [out x in x k] and inputs are [N x T x in].
    For TWO_D the kernel is [out x in x kh x kw] and inputs are
    [N x in x H x W].
    """

    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1):
        if isinstance(kernel_size, int):
            self.mode = ConvMode.ONE_D
            kernel_shape = (kernel_size,)
        else:
            self.mode = ConvMode.TWO_D
            kernel_shape = tuple(kernel_size)
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        self.stride = stride
        fan_in = in_channels * int(np.prod(kernel_shape))
        self.g = uniform_init(rng, (out_channels, in_channels) + kernel_shape, fan_in)
        self.bias = uniform_init(rng, (out_channels,), fan_in)

    def forward(self, x):
        if self.mode is ConvMode.ONE_D:
            return conv1d(x, self)
        return conv2d(x, self)


def conv1d(seq, params: Conv):
    """
    Valid cross-correlation along time with full channel mixing.

    :param seq: an [N x T x in] (or [T x in]) tensor.
    :return: an [N x T' x out] tensor with T' = (T - k) // stride + 1.
    """
    seq = ad.as_tensor(seq)
    unbatched = seq.ndim == 2
    if unbatched:
        seq = ad.reshape(seq, (1,) + seq.shape)
    out_ch, in_ch, k = params.g.shape
    n, length, channels = seq.shape
    if channels != in_ch:
        raise ShapeError(f"conv1d: {channels} input channels, kernel expects {in_ch}")
    if k > length:
        raise ShapeError(f"conv1d: kernel {k} longer than sequence {length}")
    starts = np.arange(0, length - k + 1, params.stride)
    idx = starts[:, None] + np.arange(k)[None, :]
    windows = seq[:, idx, :]  # [N x T' x k x in]
    windows = ad.reshape(windows, (n, len(starts), k * in_ch))
    kernel = ad.reshape(ad.transpose(params.g, (2, 1, 0)), (k * in_ch, out_ch))
    out = ad.matmul(windows, kernel) + params.bias
    if unbatched:
        out = ad.reshape(out, out.shape[1:])
    return out


def conv2d(x, params: Conv):
    """
    Valid 2-D cross-correlation.

    :param x: an [N x in x H x W] tensor.
    :return: an [N x out x H' x W'] tensor.
    """
    x = ad.as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects [N x C x H x W], got {x.shape}")
    out_ch, in_ch, kh, kw = params.g.shape
    n, channels, height, width = x.shape
    if channels != in_ch:
        raise ShapeError(f"conv2d: {channels} input channels, kernel expects {in_ch}")
    if kh > height or kw > width:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than input {height}x{width}")
    rows = np.arange(0, height - kh + 1, params.stride)
    cols = np.arange(0, width - kw + 1, params.stride)
    ih = rows[:, None, None, None] + np.arange(kh)[None, None, :, None]
    iw = cols[None, :, None, None] + np.arange(kw)[None, None, None, :]
    patches = x[:, :, ih, iw]  # [N x in x H' x W' x kh x kw]
    patches = ad.transpose(patches, (0, 2, 3, 1, 4, 5))
    patches = ad.reshape(patches, (n, len(rows), len(cols), in_ch * kh * kw))
    kernel = ad.transpose(ad.reshape(params.g, (out_ch, in_ch * kh * kw)))
    out = ad.matmul(patches, kernel) + params.bias
    return ad.transpose(out, (0, 3, 1, 2))


def maxpool(x, window, stride=None, axis=-1):
    """
    Max over sliding windows along one axis. The gradient routes to the
    first maximal element of each window.
    """
    x = ad.as_tensor(x)
    stride = window if stride is None else stride
    axis = axis % x.ndim
    length = x.shape[axis]
    if window < 1 or window > length:
        raise ShapeError(f"maxpool: window {window} does not fit length {length}")
    starts = np.arange(0, length - window + 1, stride)
    idx = starts[:, None] + np.arange(window)[None, :]
    index = (slice(None),) * axis + (idx,)
    return ad.reduce_max(x[index], axis=axis + 1)


# -------------------------------------------------------------------
# attention block parts


class SelfAttention(Module):
    def __init__(self, d, rng):
        self.d = d
        self.W_q = uniform_init(rng, (d, d), d)
        self.W_k = uniform_init(rng, (d, d), d)
        self.W_v = uniform_init(rng, (d, d), d)

    def forward(self, X):
        return self_attention(X, self)


def attention_weights(X, params: SelfAttention):
    X = ad.as_tensor(X)
    if X.shape[-1] != params.d:
        raise ShapeError(f"self_attention: width {X.shape[-1]}, expected {params.d}")
    q = ad.matmul(X, params.W_q)
    k = ad.matmul(X, params.W_k)
    scores = ad.matmul(q, _swap_last(k)) / math.sqrt(params.d)
    return ad.softmax(scores, axis=-1)


def self_attention(X, params: SelfAttention):
    """
    softmax((X W_q)(X W_k)^T / sqrt(d)) X W_v, single head.

    :param X: an [N x T x d] (or [T x d]) tensor.
    """
    weights = attention_weights(X, params)
    return ad.matmul(weights, ad.matmul(X, params.W_v))


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.eps = eps
        self.gain = param(np.ones(d))
        self.bias = param(np.zeros(d))

    def forward(self, x):
        return layer_norm(x, self.gain, self.bias, self.eps)


def layer_norm(x, gain, bias, eps=1e-5):
    x = ad.as_tensor(x)
    mu = ad.reduce_mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = ad.reduce_mean(centered * centered, axis=-1, keepdims=True)
    return centered / (var + eps) ** 0.5 * gain + bias


class PositionalEmbedding(Module):
    def __init__(self, max_len, d, rng):
        self.table = uniform_init(rng, (max_len, d), d)

    def forward(self, ws):
        return positional_embedding(ws, self)


def positional_embedding(ws, params: PositionalEmbedding):
    """
    Rows 0..ws-1 of the learnable position table, [ws x d].
    """
    max_len = params.table.shape[0]
    if not 1 <= ws <= max_len:
        raise IndexError(f"ws={ws} out of range for a table of {max_len} positions")
    return params.table[np.arange(ws)]
