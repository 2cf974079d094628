"""Dense float64 tensors with tape-based reverse-mode differentiation.

Ops executed while a Tape is active append their backward rules to it in
execution order; Tape.backward walks the records in reverse, accumulating
gradients into .grad. Every forward result is checked for NaN/Inf
(NumericError). Reductions use numpy's fixed evaluation order, so repeated
forward passes over the same inputs are bit-identical.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import NumericError
from .rng import SplitMix64

_TAPES: list["Tape"] = []


def _active() -> "Tape | None":
    return _TAPES[-1] if _TAPES else None


def _check(data: np.ndarray, op: str) -> np.ndarray:
    # A single fused reduction: any NaN/Inf in the array makes the sum
    # non-finite, so this is one pass with no temporaries.
    with np.errstate(over="ignore", invalid="ignore"):
        total = float(np.sum(data))
    if not np.isfinite(total) and not np.isfinite(data).all():
        raise NumericError(f"non-finite value produced by {op}")
    return data


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return multiply(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return sum_reduce(self, axis)

    def mean(self, axis=None):
        return mean_reduce(self, axis)

    def max(self, axis):
        return max_reduce(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


class Tape:
    """Append-only record of executed ops for one reverse sweep."""

    def __init__(self):
        self._backwards: list[Callable[[], None]] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def _record(self, fn: Callable[[], None]) -> None:
        self._backwards.append(fn)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and sweep the records in reverse."""
        if loss.data.size != 1:
            raise ValueError("backward requires a scalar loss")
        if not loss.requires_grad:
            raise ValueError("loss is not connected to any tracked tensor")
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._backwards):
            fn()


def _accumulate(t: Tensor, g: np.ndarray, owned: bool = False) -> None:
    """Add g into t.grad. owned=True promises g is a fresh array the caller
    will not touch again, letting the first accumulation adopt it without a
    copy; t.grad is always exclusively held, so later adds run in place."""
    if t.grad is None:
        t.grad = g if owned else np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, op: str, inputs: Iterable[Tensor],
            backward: Callable[[Tensor], Callable[[], None]] | None) -> Tensor:
    _check(data, op)
    tape = _active()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if track and backward is not None:
        inner = backward(out)

        def guarded():
            # out may never have been consumed on the way to the loss
            if out.grad is not None:
                inner()

        tape._record(guarded)
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bwd(out):
        def fn():
            # out.grad may be donated to at most one input; the other must
            # copy unless unbroadcasting already produced a fresh array
            if a.requires_grad:
                _accumulate(a, _unbroadcast(out.grad, a.data.shape), owned=True)
            if b.requires_grad:
                g = _unbroadcast(out.grad, b.data.shape)
                _accumulate(b, g, owned=g is not out.grad or not a.requires_grad)
        return fn

    return _result(a.data + b.data, "add", (a, b), bwd)


def subtract(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bwd(out):
        def fn():
            if a.requires_grad:
                _accumulate(a, _unbroadcast(out.grad, a.data.shape), owned=True)
            if b.requires_grad:
                _accumulate(b, _unbroadcast(-out.grad, b.data.shape), owned=True)
        return fn

    return _result(a.data - b.data, "subtract", (a, b), bwd)


def multiply(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bwd(out):
        def fn():
            if a.requires_grad:
                _accumulate(a, _unbroadcast(out.grad * b.data, a.data.shape), owned=True)
            if b.requires_grad:
                _accumulate(b, _unbroadcast(out.grad * a.data, b.data.shape), owned=True)
        return fn

    return _result(a.data * b.data, "multiply", (a, b), bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")

    def bwd(out):
        def fn():
            if a.requires_grad:
                _accumulate(a, out.grad @ b.data.T, owned=True)
            if b.requires_grad:
                _accumulate(b, a.data.T @ out.grad, owned=True)
        return fn

    return _result(a.data @ b.data, "matmul", (a, b), bwd)


def linear(x, w, b) -> Tensor:
    """x @ w.T + b over the last axis; w has shape (out, in).

    Computes against a contiguous (in, out) copy of the weights: BLAS on
    this layout is several times faster for the tall-skinny activations
    this model produces, in both the forward and input-gradient products.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    in_dim = x.data.shape[-1]
    lead = x.data.shape[:-1]
    xm = x.data.reshape(-1, in_dim)
    wt = np.ascontiguousarray(w.data.T)
    y = xm @ wt
    y += b.data

    def bwd(out):
        def fn():
            gm = out.grad.reshape(-1, wt.shape[1])
            if w.requires_grad:
                _accumulate(w, gm.T @ xm, owned=True)
            if b.requires_grad:
                _accumulate(b, gm.sum(axis=0), owned=True)
            if x.requires_grad:
                _accumulate(x, (gm @ wt.T).reshape(x.data.shape), owned=True)
        return fn

    return _result(y.reshape(*lead, -1), "linear", (x, w, b), bwd)


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    """Negative-slope branch is taken at exactly 0 (both value and grad)."""
    x = as_tensor(x)
    # max(x, slope*x) equals the two-branch form for slope in [0, 1]
    y = slope * x.data
    np.maximum(x.data, y, out=y)

    def bwd(out):
        def fn():
            if x.requires_grad:
                _accumulate(x, out.grad * np.where(x.data > 0.0, 1.0, slope), owned=True)
        return fn

    return _result(y, "leaky_relu", (x,), bwd)


def softmax(x, axis: int) -> Tensor:
    """Max-shifted exponentials normalized along the axis."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(out):
        def fn():
            if x.requires_grad:
                g = out.grad
                dot = (g * y).sum(axis=axis, keepdims=True)
                _accumulate(x, (g - dot) * y, owned=True)
        return fn

    return _result(y, "softmax", (x,), bwd)


def max_reduce(x, axis: int) -> Tensor:
    """Max along the axis; the subgradient goes to the first max position.

    The winner positions are recovered lazily in the backward pass (a bool
    argmax over an equality mask picks the first tie), keeping gradient-free
    forward passes cheap.
    """
    x = as_tensor(x)
    y = x.data.max(axis=axis)

    def bwd(out):
        def fn():
            if x.requires_grad:
                arg = (x.data == np.expand_dims(y, axis)).argmax(axis=axis)
                buf = np.zeros_like(x.data)
                np.put_along_axis(
                    buf, np.expand_dims(arg, axis),
                    np.expand_dims(out.grad, axis), axis=axis,
                )
                _accumulate(x, buf, owned=True)
        return fn

    return _result(y, "max_reduce", (x,), bwd)


def sum_reduce(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)

    def bwd(out):
        def fn():
            if x.requires_grad:
                if axis is None:
                    _accumulate(x, np.broadcast_to(out.grad, x.data.shape))
                else:
                    _accumulate(x, np.broadcast_to(
                        np.expand_dims(out.grad, axis), x.data.shape))
        return fn

    return _result(x.data.sum(axis=axis), "sum_reduce", (x,), bwd)


def mean_reduce(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.data.shape[axis]

    def bwd(out):
        def fn():
            if x.requires_grad:
                g = out.grad / count
                if axis is None:
                    _accumulate(x, np.broadcast_to(g, x.data.shape))
                else:
                    _accumulate(x, np.broadcast_to(
                        np.expand_dims(g, axis), x.data.shape))
        return fn

    return _result(x.data.mean(axis=axis), "mean_reduce", (x,), bwd)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd(out):
        def fn():
            offset = 0
            for t, size in zip(tensors, sizes):
                if t.requires_grad:
                    sl = [slice(None)] * out.grad.ndim
                    sl[axis] = slice(offset, offset + size)
                    # disjoint views of out.grad, safe to adopt
                    _accumulate(t, out.grad[tuple(sl)], owned=True)
                offset += size
        return fn

    return _result(np.concatenate([t.data for t in tensors], axis=axis),
                   "concat", tensors, bwd)


def gather_rows(x, indices) -> Tensor:
    """Select rows along axis 0; gradients scatter-add back to the source.
    Not differentiable with respect to the indices."""
    x = as_tensor(x)
    idx = np.ascontiguousarray(indices, dtype=np.int64)

    def bwd(out):
        def fn():
            if x.requires_grad:
                buf = np.zeros_like(x.data)
                np.add.at(buf, idx, out.grad)
                _accumulate(x, buf, owned=True)
        return fn

    return _result(x.data[idx], "gather_rows", (x,), bwd)


def gathered_max_rows(y, indices) -> Tensor:
    """Column-wise gathered max: out[j, :] = max over i of y[indices[i, j], :].

    Fused equivalent of gather_rows -> reshape(n, k, c) -> max_reduce(axis=0),
    including the first-max tie routing, without materializing the
    (n, k, c) cube. The subgradient scatters straight back into y.
    """
    y = as_tensor(y)
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    n, k = idx.shape
    c = y.data.shape[1]
    out_data = np.empty((k, c))
    for j in range(k):
        out_data[j] = y.data[idx[:, j]].max(axis=0)

    def bwd(out):
        def fn():
            if y.requires_grad:
                buf = np.zeros_like(y.data)
                cols = np.arange(c)
                for j in range(k):
                    block = y.data[idx[:, j]]
                    first = (block == out_data[j]).argmax(axis=0)
                    np.add.at(buf, (idx[first, j], cols), out.grad[j])
                _accumulate(y, buf, owned=True)
        return fn

    return _result(out_data, "gathered_max_rows", (y,), bwd)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)

    def bwd(out):
        def fn():
            if x.requires_grad:
                _accumulate(x, out.grad.reshape(x.data.shape), owned=True)
        return fn

    return _result(x.data.reshape(shape), "reshape", (x,), bwd)


def broadcast_rows(v, n: int) -> Tensor:
    """Tile a 1-D tensor into n identical rows; gradient sums over rows."""
    v = as_tensor(v)

    def bwd(out):
        def fn():
            if v.requires_grad:
                _accumulate(v, out.grad.sum(axis=0), owned=True)
        return fn

    return _result(np.broadcast_to(v.data, (n, v.data.shape[0])).copy(),
                   "broadcast_rows", (v,), bwd)


def cross_entropy_with_logits(logits, labels) -> Tensor:
    """Mean over rows of -log softmax(logits)[label], max-shift stabilized."""
    logits = as_tensor(logits)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    n = logits.data.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=1, keepdims=True)
    log_p = shifted - np.log(denom)
    loss = -log_p[np.arange(n), labels].mean()

    def bwd(out):
        def fn():
            if logits.requires_grad:
                p = e / denom
                p[np.arange(n), labels] -= 1.0
                _accumulate(logits, p * (out.grad / n), owned=True)
        return fn

    return _result(np.asarray(loss), "cross_entropy_with_logits", (logits,), bwd)


class ParamStore:
    """Named learnable tensors with deterministic initialization.

    Weights draw from one splitmix64 stream in creation order (documented
    by the model builder); a weight matrix of shape (out, in) is uniform
    in +-sqrt(6 / (in + out)). Biases start at zero and consume no draws.
    """

    def __init__(self, seed: int = 0):
        self._params: dict[str, Tensor] = {}
        self._rng = SplitMix64(seed)

    def glorot(self, name: str, out_dim: int, in_dim: int) -> Tensor:
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        vals = (self._rng.uniforms(out_dim * in_dim) * 2.0 - 1.0) * limit
        return self.add_param(name, vals.reshape(out_dim, in_dim))

    def glorot_vector(self, name: str, dim: int) -> Tensor:
        """Score-projection vector treated as a (1, dim) fan pair."""
        limit = np.sqrt(6.0 / (dim + 1))
        vals = (self._rng.uniforms(dim) * 2.0 - 1.0) * limit
        return self.add_param(name, vals)

    def zeros(self, name: str, *shape: int) -> Tensor:
        return self.add_param(name, np.zeros(shape))

    def add_param(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(values, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient per parameter (zeros when untouched); NumericError on
        any non-finite entry."""
        out = {}
        for name, t in self._params.items():
            g = t.grad if t.grad is not None else np.zeros_like(t.data)
            if not np.isfinite(g).all():
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            out[name] = g
        return out


def finite_diff_check(f, params: ParamStore, h: float = 1.0e-5,
                      samples: int = 200, seed: int = 12345) -> float:
    """Max relative error between recorded gradients and central differences.

    Perturbs `samples` parameter entries (chosen by a seeded stream, with
    replacement) by +-h; the relative error denominator is
    max(1, |analytic|). f must be a deterministic closure over `params`
    returning the scalar loss tensor.
    """
    params.zero_grads()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    grads = params.grads()

    entries: list[tuple[str, int]] = []
    for name, t in params.items():
        entries.extend((name, i) for i in range(t.data.size))
    rng = SplitMix64(seed)
    worst = 0.0
    for _ in range(samples):
        name, i = entries[rng.below(len(entries))]
        t = params[name]
        saved = t.data.flat[i]
        t.data.flat[i] = saved + h
        lp = float(f().data)
        t.data.flat[i] = saved - h
        lm = float(f().data)
        t.data.flat[i] = saved
        fd = (lp - lm) / (2.0 * h)
        rel = abs(fd - grads[name].flat[i]) / max(1.0, abs(grads[name].flat[i]))
        worst = max(worst, rel)
    return worst
