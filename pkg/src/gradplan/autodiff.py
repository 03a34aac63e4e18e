"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and records the operations applied to it,
so that calling backward() on a scalar result fills in .grad for every
tensor that participated -- inputs included, which is what lets a plan of
action vectors be optimized by gradient ascent through a frozen network.

Gradients accumulate across backward() calls until explicitly zeroed.
Everything is double precision; there is no broadcasting beyond what the
individual ops document.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    """Node in the computation graph: values, and after backward(), grads."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Backpropagate from a scalar output through the recorded graph."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar output, got shape {self.data.shape}"
            )
        topo = _toposort(self)
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __sub__(self, other):
        return add(self, mul_scalar(_lift(other), -1.0))

    def __rsub__(self, other):
        return add(_lift(other), mul_scalar(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tsum(self)

    def mean(self):
        return mul_scalar(tsum(self), 1.0 / self.data.size)

    def reshape(self, *shape):
        return reshape(self, shape)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)


def _lift(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=False)


def _toposort(root):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for child in node._prev:
            if id(child) not in visited:
                stack.append((child, False))
    return order


def _make(data, parents):
    """Build an op output; grads only flow to parents that want them."""
    needs = tuple(p for p in parents if p.requires_grad)
    out = Tensor(data, requires_grad=bool(needs))
    if out.requires_grad:
        out._prev = needs
    return out


def _unbroadcast(g, shape):
    """Sum g down to `shape` after a broadcasted forward op."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise and reduction ops -------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = _make(a.data + b.data, (a, b))
    if out.requires_grad:
        def _backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad, b.data.shape))
        out._backward = _backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = _make(a.data * b.data, (a, b))
    if out.requires_grad:
        def _backward():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))
        out._backward = _backward
    return out


def mul_scalar(a: Tensor, c: float) -> Tensor:
    out = _make(a.data * c, (a,))
    if out.requires_grad:
        def _backward():
            a._accumulate(out.grad * c)
        out._backward = _backward
    return out


def tsum(a: Tensor) -> Tensor:
    out = _make(a.data.sum(), (a,))
    if out.requires_grad:
        def _backward():
            a._accumulate(np.full_like(a.data, float(out.grad)))
        out._backward = _backward
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = _make(a.data.reshape(shape), (a,))
    if out.requires_grad:
        def _backward():
            a._accumulate(out.grad.reshape(a.data.shape))
        out._backward = _backward
    return out


def concat(tensors, axis=-1) -> Tensor:
    parts = [t for t in tensors]
    out = _make(np.concatenate([t.data for t in parts], axis=axis), tuple(parts))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in parts]
        def _backward():
            splits = np.split(out.grad, np.cumsum(sizes)[:-1], axis=axis)
            for t, g in zip(parts, splits):
                if t.requires_grad:
                    t._accumulate(g)
        out._backward = _backward
    return out


# -- activations --------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    out = _make(np.maximum(a.data, 0.0), (a,))
    if out.requires_grad:
        def _backward():
            a._accumulate(out.grad * (a.data > 0))
        out._backward = _backward
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = _make(y, (a,))
    if out.requires_grad:
        def _backward():
            a._accumulate(out.grad * (1.0 - y * y))
        out._backward = _backward
    return out


def prelu(a: Tensor, slope: Tensor) -> Tensor:
    """PReLU with one learnable slope per layer (slope is a shape-(1,) tensor)."""
    pos = a.data > 0
    out = _make(np.where(pos, a.data, slope.data.reshape(()) * a.data), (a, slope))
    if out.requires_grad:
        def _backward():
            if a.requires_grad:
                a._accumulate(out.grad * np.where(pos, 1.0, slope.data.reshape(())))
            if slope.requires_grad:
                slope._accumulate(
                    np.array([(out.grad * np.where(pos, 0.0, a.data)).sum()])
                )
        out._backward = _backward
    return out


def softmax(a: Tensor) -> Tensor:
    """Softmax along the last axis, stabilized by max-subtraction."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = _make(y, (a,))
    if out.requires_grad:
        def _backward():
            dot = (out.grad * y).sum(axis=-1, keepdims=True)
            a._accumulate(y * (out.grad - dot))
        out._backward = _backward
    return out


def log_softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = _make(z - lse, (a,))
    if out.requires_grad:
        sm = np.exp(out.data)
        def _backward():
            a._accumulate(out.grad - sm * out.grad.sum(axis=-1, keepdims=True))
        out._backward = _backward
    return out


# -- linear algebra ------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}"
        )
    out = _make(a.data @ b.data, (a, b))
    if out.requires_grad:
        def _backward():
            if a.requires_grad:
                a._accumulate(out.grad @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ out.grad)
        out._backward = _backward
    return out


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b for x of shape (n, d_in), w (d_in, d_out), b (d_out,)."""
    if x.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ValueError(
            f"linear shape mismatch: x {x.data.shape} vs weight {w.data.shape}"
        )
    if b.data.shape != (w.data.shape[1],):
        raise ValueError(
            f"linear bias shape {b.data.shape} does not match output dim {w.data.shape[1]}"
        )
    out = _make(x.data @ w.data + b.data, (x, w, b))
    if out.requires_grad:
        def _backward():
            if x.requires_grad:
                x._accumulate(out.grad @ w.data.T)
            if w.requires_grad:
                w._accumulate(x.data.T @ out.grad)
            if b.requires_grad:
                b._accumulate(out.grad.sum(axis=0))
        out._backward = _backward
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, padding=None) -> Tensor:
    """Stride-1 cross-correlation plus bias.

    x: (n, c_in, h, w), weight: (c_out, c_in, kh, kw) with odd kh, kw,
    bias: (c_out,). padding defaults to kh//2, which preserves the spatial
    size of the input.
    """
    n, c_in, h, w = x.data.shape
    c_out, c_k, kh, kw = weight.data.shape
    if c_k != c_in:
        raise ValueError(
            f"conv2d channel mismatch: input has {c_in}, kernel expects {c_k}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d requires odd kernel sizes, got {kh}x{kw}")
    ph = pw = kh // 2 if padding is None else int(padding)
    if kh > h + 2 * ph or kw > w + 2 * pw:
        raise ValueError(
            f"kernel {kh}x{kw} larger than padded input {h + 2 * ph}x{w + 2 * pw}"
        )
    ho, wo = h + 2 * ph - kh + 1, w + 2 * pw - kw + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    # (n, c_in, ho, wo, kh, kw) view over the padded input
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    col = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * ho * wo, c_in * kh * kw
    )
    wmat = weight.data.reshape(c_out, -1)
    y = (col @ wmat.T).reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2) + bias.data.reshape(
        1, c_out, 1, 1
    )
    out = _make(y, (x, weight, bias))
    if out.requires_grad:
        def _backward():
            gy = out.grad
            gflat = gy.transpose(0, 2, 3, 1).reshape(n * ho * wo, c_out)
            if weight.requires_grad:
                weight._accumulate((gflat.T @ col).reshape(weight.data.shape))
            if bias.requires_grad:
                bias._accumulate(gy.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                # full correlation of gy with the flipped kernel gives dx;
                # padding kh-1-ph realigns output windows with input cells
                qh, qw = kh - 1 - ph, kw - 1 - pw
                gp = np.pad(gy, ((0, 0), (0, 0), (qh, qh), (qw, qw)))
                gwin = sliding_window_view(gp, (kh, kw), axis=(2, 3))
                gcol = np.ascontiguousarray(gwin.transpose(0, 2, 3, 1, 4, 5)).reshape(
                    n * h * w, c_out * kh * kw
                )
                wflip = weight.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(
                    c_in, -1
                )
                dx = (gcol @ wflip.T).reshape(n, h, w, c_in).transpose(0, 3, 1, 2)
                x._accumulate(dx)
        out._backward = _backward
    return out


# -- losses --------------------------------------------------------------


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences over all elements; scalar output."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"mse shape mismatch: pred {pred.data.shape} vs target {target.data.shape}"
        )
    diff = pred.data - target.data
    out = _make(np.array((diff * diff).mean()), (pred, target))
    if out.requires_grad:
        scale = 2.0 / diff.size
        def _backward():
            if pred.requires_grad:
                pred._accumulate(scale * diff * out.grad)
            if target.requires_grad:
                target._accumulate(-scale * diff * out.grad)
        out._backward = _backward
    return out


def cross_entropy(logits: Tensor, onehot: Tensor) -> Tensor:
    """Mean cross-entropy between rows of logits and one-hot target rows."""
    if logits.data.shape != onehot.data.shape:
        raise ValueError(
            f"cross_entropy shape mismatch: {logits.data.shape} vs {onehot.data.shape}"
        )
    rows = logits.data.shape[0] if logits.data.ndim > 1 else 1
    prod = mul(log_softmax(logits), onehot)
    return mul_scalar(tsum(prod), -1.0 / rows)
