"""Dense float64 tensors with tape-based reverse-mode differentiation.

The operator set is exactly what the re-identification network needs:
2-D cross-correlation, linear maps, batch normalization, global average
pooling, pointwise arithmetic with trailing-axis broadcasting, channel
split/concat, flat gather, and pairwise Euclidean distances.

Recording is opt-in: operations append to the thread's active `Tape` only
while one is open, so inference and finite-difference probes run tape-free.
Backward walks the tape in reverse execution order and accumulates (+=)
into the gradients of every tensor that requires one, which makes shared
subexpressions correct by construction.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


_tls = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_tls, "tape", None)


# Recycled scratch buffers (im2col columns, padded inputs). Convolution
# workspaces are large and short-lived; reusing them avoids refaulting the
# same pages every training iteration. Buffers are handed out dirty and
# must be fully overwritten by the acquirer.
_POOL_MAX_PER_SHAPE = 4


def _buffer_pool() -> dict:
    pool = getattr(_tls, "pool", None)
    if pool is None:
        pool = _tls.pool = {}
    return pool


def _acquire(shape: tuple[int, ...]) -> np.ndarray:
    stack = _buffer_pool().get(shape)
    if stack:
        return stack.pop()
    return np.empty(shape)


def _release(arr: np.ndarray) -> None:
    if arr.nbytes < (1 << 20) or not arr.flags.owndata:
        return
    stack = _buffer_pool().setdefault(arr.shape, [])
    if len(stack) < _POOL_MAX_PER_SHAPE:
        stack.append(arr)


class Tape:
    """Ordered record of executed operations for one backward pass."""

    __slots__ = ("entries",)

    def __init__(self) -> None:
        self.entries: list[_Entry] = []

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise RuntimeError("a tape is already active on this thread")
        _tls.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _tls.tape = None

    def __len__(self) -> int:
        return len(self.entries)


class _Entry:
    __slots__ = ("out", "fn")

    def __init__(self, out: "Tensor", fn: Callable[[np.ndarray], None]) -> None:
        self.out = out
        self.fn = fn


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accumulate(self, g: np.ndarray, own: bool = False) -> None:
        # `own=True` transfers the buffer: only for arrays the caller freshly
        # computed and will not touch again (shared upstream grads must copy).
        if self.grad is None:
            self.grad = g if own else np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data) -> Tensor:
    """Tensor marked as trainable."""
    return Tensor(data, requires_grad=True)


def _record(out: Tensor, inputs: Sequence[Tensor], fn: Callable[[np.ndarray], None]) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.entries.append(_Entry(out, fn))
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate gradients of everything the scalar `loss` depends on."""
    if loss.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    if not tape.entries:
        raise ValueError("backward on an empty tape")
    loss.grad = np.ones_like(loss.data)
    for entry in reversed(tape.entries):
        g = entry.out.grad
        if g is None:
            continue
        entry.fn(g)


# ---------------------------------------------------------------------------
# broadcasting helpers

def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible") from None


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary(a, b, op: str, fwd, da, db) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, op)
    out = Tensor(fwd(a.data, b.data))

    def fn(g: np.ndarray) -> None:
        if a.requires_grad:
            res = _unbroadcast(da(g, a.data, b.data), a.data.shape)
            a._accumulate(res, own=res is not g)
        if b.requires_grad:
            res = _unbroadcast(db(g, a.data, b.data), b.data.shape)
            b._accumulate(res, own=res is not g)

    return _record(out, (a, b), fn)


# ---------------------------------------------------------------------------
# pointwise operations

def add(a, b) -> Tensor:
    return _binary(a, b, "add", lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary(a, b, "sub", lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary(a, b, "mul", lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary(a, b, "div", lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def neg(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(-x.data)

    def fn(g):
        if x.requires_grad:
            x._accumulate(-g, own=True)

    return _record(out, (x,), fn)


def sub_from_one(x) -> Tensor:
    """Pointwise complement 1 - x."""
    x = as_tensor(x)
    out = Tensor(1.0 - x.data)

    def fn(g):
        if x.requires_grad:
            x._accumulate(-g, own=True)

    return _record(out, (x,), fn)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    t = np.exp(-np.abs(x.data))
    t /= 1.0 + t
    s = np.where(x.data >= 0, 1.0 - t, t)
    out = Tensor(s)

    def fn(g):
        if x.requires_grad:
            x._accumulate(g * s * (1.0 - s), own=True)

    return _record(out, (x,), fn)


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0

    def fn(g):
        if x.requires_grad:
            x._accumulate(g * mask, own=True)

    return _record(out, (x,), fn)


def exp(x) -> Tensor:
    x = as_tensor(x)
    e = np.exp(x.data)
    out = Tensor(e)

    def fn(g):
        if x.requires_grad:
            x._accumulate(g * e, own=True)

    return _record(out, (x,), fn)


def log(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.log(x.data))

    def fn(g):
        if x.requires_grad:
            x._accumulate(g / x.data, own=True)

    return _record(out, (x,), fn)


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    r = np.sqrt(x.data)
    out = Tensor(r)

    def fn(g):
        if x.requires_grad:
            x._accumulate(g * 0.5 / r, own=True)

    return _record(out, (x,), fn)


# ---------------------------------------------------------------------------
# reductions and shape manipulation

def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tensor_sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))
    shape = x.data.shape

    def fn(g):
        if x.requires_grad:
            x._accumulate(_expand_reduced(g, shape, axis, keepdims))

    return _record(out, (x,), fn)


def tensor_mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims))
    shape = x.data.shape
    count = x.data.size if axis is None else x.data.size // out.data.size

    def fn(g):
        if x.requires_grad:
            x._accumulate(_expand_reduced(g, shape, axis, keepdims) / count)

    return _record(out, (x,), fn)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape))
    orig = x.data.shape

    def fn(g):
        if x.requires_grad:
            x._accumulate(g.reshape(orig))

    return _record(out, (x,), fn)


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ValueError("concat needs at least one tensor")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def fn(g):
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(int(start), int(stop))
                p._accumulate(g[tuple(sl)])

    return _record(out, tuple(parts), fn)


def split_channels(x, groups: int) -> list[Tensor]:
    """Split the channel axis into `groups` equal contiguous slices."""
    x = as_tensor(x)
    if x.ndim not in (3, 4):
        raise ShapeError(f"split expects a (C,H,W) or (B,C,H,W) tensor, got shape {x.shape}")
    ax = x.ndim - 3
    channels = x.shape[ax]
    if groups < 1 or channels % groups != 0:
        raise ShapeError(f"split: {channels} channels not divisible into {groups} groups")
    step = channels // groups
    outs = []
    for gi in range(groups):
        sl = [slice(None)] * x.ndim
        sl[ax] = slice(gi * step, (gi + 1) * step)
        sl = tuple(sl)
        piece = Tensor(x.data[sl].copy())

        def fn(g, sl=sl):
            if x.requires_grad:
                buf = np.zeros_like(x.data)
                buf[sl] = g
                x._accumulate(buf, own=True)

        outs.append(_record(piece, (x,), fn))
    return outs


def take(x, indices) -> Tensor:
    """Gather entries of the flattened tensor; backward scatter-adds."""
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(x.data.reshape(-1)[idx])
    shape = x.data.shape

    def fn(g):
        if x.requires_grad:
            buf = np.zeros(x.data.size)
            np.add.at(buf, idx, g)
            x._accumulate(buf.reshape(shape), own=True)

    return _record(out, (x,), fn)


# ---------------------------------------------------------------------------
# linear algebra and network primitives

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data)

    def fn(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T, own=True)
        if b.requires_grad:
            b._accumulate(a.data.T @ g, own=True)

    return _record(out, (a, b), fn)


def linear(x, weight, bias=None) -> Tensor:
    """Affine map: out[n, o] = sum_f x[n, f] * weight[o, f] + bias[o]."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError(f"linear: expected 2-D input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input features {x.shape[1]} do not match weight fan-in {weight.shape[1]}")
    out_d = x.data @ weight.data.T
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"linear: bias shape {bias.shape} does not match output width {weight.shape[0]}")
        out_d = out_d + bias.data
    out = Tensor(out_d)

    def fn(g):
        if x.requires_grad:
            x._accumulate(g @ weight.data, own=True)
        if weight.requires_grad:
            weight._accumulate(g.T @ x.data, own=True)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=0), own=True)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _record(out, inputs, fn)


def conv2d(x, weight, bias=None, pad=(0, 0), stride=(1, 1)) -> Tensor:
    """2-D cross-correlation over (C,H,W) or (B,C,H,W) input."""
    x, weight = as_tensor(x), as_tensor(weight)
    batched = x.ndim == 4
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv2d: input must be (C,H,W) or (B,C,H,W), got shape {x.shape}")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d: weight must be (C_out,C_in,kH,kW), got shape {weight.shape}")
    xd = x.data if batched else x.data[None]
    nb, c, h, w = xd.shape
    co, ci, kh, kw = weight.shape
    for name, extent in (("batch", nb), ("channel", c), ("height", h), ("width", w)):
        if extent == 0:
            raise ShapeError(f"conv2d: zero-extent input ({name} dimension)")
    if ci != c:
        raise ShapeError(f"conv2d: input has {c} channels but weight expects {ci}")
    ph, pw = pad
    sh, sw = stride
    if kh > h + 2 * ph:
        raise ShapeError(f"conv2d: kernel height {kh} exceeds padded input height {h + 2 * ph}")
    if kw > w + 2 * pw:
        raise ShapeError(f"conv2d: kernel width {kw} exceeds padded input width {w + 2 * pw}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (co,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} does not match {co} output channels")

    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    pointwise = kh == 1 and kw == 1 and ph == 0 and pw == 0
    if pointwise:
        # 1x1 kernels need no window extraction: a strided view suffices
        # (reshape copies only when the stride subsamples).
        cols = xd[:, :, ::sh, ::sw].reshape(nb, c, ho * wo)
        pooled_cols = False
    else:
        if ph or pw:
            xp = _acquire((nb, c, h + 2 * ph, w + 2 * pw))
            xp[:, :, :ph, :] = 0.0
            xp[:, :, ph + h:, :] = 0.0
            xp[:, :, :, :pw] = 0.0
            xp[:, :, :, pw + w:] = 0.0
            xp[:, :, ph:ph + h, pw:pw + w] = xd
        else:
            xp = xd
        windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
        cols = _acquire((nb, c * kh * kw, ho * wo))
        np.copyto(cols.reshape(nb, c, kh, kw, ho, wo), windows.transpose(0, 1, 4, 5, 2, 3))
        pooled_cols = True
        if xp is not xd:
            _release(xp)  # backward only needs its shape
    wmat = weight.data.reshape(co, c * kh * kw)
    out_d = np.matmul(wmat, cols).reshape(nb, co, ho, wo)
    if bias is not None:
        out_d += bias.data.reshape(1, co, 1, 1)
    out = Tensor(out_d if batched else out_d[0])

    def fn(g):
        gd = g if batched else g[None]
        gflat = gd.reshape(nb, co, ho * wo)
        if weight.requires_grad:
            dw = np.matmul(gflat, cols.transpose(0, 2, 1)).sum(axis=0)
            weight._accumulate(dw.reshape(weight.data.shape), own=True)
        if bias is not None and bias.requires_grad:
            bias._accumulate(gd.sum(axis=(0, 2, 3)), own=True)
        if x.requires_grad:
            if pointwise:
                dflat = np.matmul(wmat.T, gflat)
                if sh == 1 and sw == 1:
                    dx = dflat.reshape(nb, c, h, w)
                else:
                    dx = np.zeros((nb, c, h, w))
                    dx[:, :, ::sh, ::sw] = dflat.reshape(nb, c, ho, wo)
            else:
                dcols = _acquire((nb, c * kh * kw, ho * wo))
                np.matmul(wmat.T, gflat, out=dcols)
                dc = dcols.reshape(nb, c, kh, kw, ho, wo)
                dxp = np.zeros((nb, c, h + 2 * ph, w + 2 * pw))
                for i in range(kh):
                    for j in range(kw):
                        dxp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += dc[:, :, i, j]
                _release(dcols)
                dx = dxp[:, :, ph:ph + h, pw:pw + w]  # view of a local buffer
            x._accumulate(dx if batched else dx[0], own=True)
        if pooled_cols:
            _release(cols)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    out = _record(out, inputs, fn)
    if pooled_cols and not out.requires_grad:
        _release(cols)  # nothing recorded; the buffer can be recycled now
    return out


def global_avg_pool(x) -> Tensor:
    """Spatial mean, keeping 1x1 spatial dims: (...,C,H,W) -> (...,C,1,1)."""
    x = as_tensor(x)
    if x.ndim not in (3, 4):
        raise ShapeError(f"global_avg_pool expects (C,H,W) or (B,C,H,W), got shape {x.shape}")
    h, w = x.shape[-2:]
    if h < 1 or w < 1:
        raise ShapeError("global_avg_pool: zero-extent spatial input")
    out = Tensor(x.data.mean(axis=(-2, -1), keepdims=True))
    scale = 1.0 / (h * w)

    def fn(g):
        if x.requires_grad:
            x._accumulate(np.broadcast_to(g * scale, x.data.shape))

    return _record(out, (x,), fn)


@dataclass
class RunningStats:
    """Exponential-moving-average batch statistics for one normalized axis."""

    mean: np.ndarray
    var: np.ndarray
    count: int = 0

    @staticmethod
    def create(channels: int) -> "RunningStats":
        return RunningStats(np.zeros(channels), np.ones(channels), 0)


def batchnorm(x, gamma, beta, mode: str, running: RunningStats | None,
              eps: float = 1e-5, momentum: float = 0.1,
              update_running: bool = True) -> Tensor:
    """Per-channel normalization over the batch (and spatial) axes.

    Train mode normalizes by biased batch statistics and updates `running`
    by EMA; eval mode normalizes by the stored running statistics.
    """
    x = as_tensor(x)
    if mode not in ("train", "eval"):
        raise ValueError(f"batchnorm: mode must be 'train' or 'eval', got {mode!r}")
    if eps <= 0:
        raise ValueError("batchnorm: eps must be positive")
    if x.ndim == 2:
        axes: tuple[int, ...] = (0,)
        c = x.shape[1]
        pshape = (1, c)
    elif x.ndim == 4:
        axes = (0, 2, 3)
        c = x.shape[1]
        pshape = (1, c, 1, 1)
    else:
        raise ShapeError(f"batchnorm expects 2-D or 4-D input, got shape {x.shape}")
    gamma, beta = as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm: gamma/beta shapes {gamma.shape}/{beta.shape} do not match {c} channels")

    n = int(np.prod([x.shape[a] for a in axes]))
    if mode == "train":
        if n == 1:
            raise ValueError("batchnorm: single-element batch has undefined variance in train mode")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if update_running and running is not None:
            running.mean = (1.0 - momentum) * running.mean + momentum * mu
            running.var = (1.0 - momentum) * running.var + momentum * var
            running.count += 1
    else:
        if running is None or running.count == 0:
            raise ValueError("batchnorm: running statistics are uninitialized (eval before any train step)")
        mu = running.mean
        var = running.var

    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(pshape)) * inv.reshape(pshape)
    out = Tensor(xhat * gamma.data.reshape(pshape) + beta.data.reshape(pshape))

    def fn(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=axes), own=True)
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=axes), own=True)
        if x.requires_grad:
            gi = g * (gamma.data * inv).reshape(pshape)
            if mode == "train":
                x._accumulate(gi - gi.mean(axis=axes).reshape(pshape)
                              - xhat * (gi * xhat).mean(axis=axes).reshape(pshape), own=True)
            else:
                x._accumulate(gi, own=True)

    return _record(out, (x, gamma, beta), fn)


def pairwise_distances(embeddings) -> Tensor:
    """All-pairs Euclidean distances of the rows of a (B,D) tensor.

    The diagonal is exactly zero; coincident rows get a zero subgradient,
    which keeps the backward pass finite when duplicates occur.
    """
    e = as_tensor(embeddings)
    if e.ndim != 2 or e.shape[0] < 2:
        raise ShapeError(f"pairwise_distances expects a (B>=2, D) tensor, got shape {e.shape}")
    diff = e.data[:, None, :] - e.data[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    out = Tensor(d)

    def fn(g):
        if e.requires_grad:
            w = g + g.T
            scale = np.zeros_like(d)
            nz = d > 0
            scale[nz] = w[nz] / d[nz]
            e._accumulate(scale.sum(axis=1)[:, None] * e.data - scale @ e.data, own=True)

    return _record(out, (e,), fn)


# ---------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    step: float
    tol: float
    per_point: dict[str, float] = field(default_factory=dict)
    nonfinite: list[str] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_point.values(), default=float("nan"))

    @property
    def passed(self) -> bool:
        m = self.max_rel_error
        return not self.nonfinite and np.isfinite(m) and m < self.tol


def grad_check(f, point, step: float = 1e-5, tol: float = 1e-4,
               names: Sequence[str] | None = None) -> GradCheckReport:
    """Compare analytic gradients of scalar-valued `f` against central differences.

    `point` is one tensor or a sequence of tensors; each is perturbed
    elementwise in place and restored. The error per element is
    |analytic - numeric| / max(1, |analytic|, |numeric|); the report keeps
    the max per tensor. Non-finite difference quotients are reported, not
    raised.
    """
    points = [point] if isinstance(point, Tensor) else list(point)
    if names is None:
        names = [f"p{i}" for i in range(len(points))]
    for p in points:
        p.requires_grad = True
        p.grad = None

    tape = Tape()
    with tape:
        loss = f(*points)
    backward(loss, tape)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in points]
    for p in points:
        p.grad = None

    report = GradCheckReport(step=step, tol=tol)
    for p, an, name in zip(points, analytic, names):
        flat = p.data.reshape(-1)
        an_flat = an.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(f(*points).data)
            flat[i] = orig - step
            f_minus = float(f(*points).data)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            if not np.isfinite(fd):
                report.nonfinite.append(f"{name}[{i}]")
                worst = float("inf")
                continue
            err = abs(fd - an_flat[i]) / max(1.0, abs(fd), abs(an_flat[i]))
            worst = max(worst, err)
        report.per_point[name] = worst
    return report
