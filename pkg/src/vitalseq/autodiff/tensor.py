"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records a backward closure on its output tensor; calling
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients additively into ``.grad`` (numpy arrays). There is no
global tape: each graph lives in the tensors that form it, so independent
graphs (e.g. one per cross-validation fold) are safe to run concurrently.

Conventions:
  - dtype is float64 throughout.
  - Elementwise ops require identical shapes; the only implicit broadcasting
    allowed is scalar-with-tensor. Any other shape mixing must go through an
    explicit op (``expand``, ``reshape``, ...).
  - Convolutions use explicit zero padding and the cross-correlation
    convention (no kernel flip).
  - Max pooling routes gradient to the first maximal element of each window
    (row-major window order) on ties.
  - Subgradients at kinks (relu at 0, abs at 0, clamp at bounds) are 0.
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import AutodiffError, NonFiniteError, ShapeError

DTYPE = np.float64

# per-thread so one thread's no_grad block cannot truncate a graph that a
# concurrently running thread is still building
_grad_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


class no_grad:
    """Context manager that skips graph construction inside its block."""

    def __enter__(self):
        self._prev = _grad_enabled()
        _grad_state.enabled = False

    def __exit__(self, *exc):
        _grad_state.enabled = self._prev
        return False


def _check_finite(op: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"{op}: non-finite input values")


class Tensor:
    """N-dimensional float64 array that participates in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn",
                 "_op", "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=DTYPE)
        _check_finite("tensor", arr)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._op: str | None = None
        self._backward_done = False

    # ------------------------------------------------------------------ basics

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
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has {self.data.size} elements")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Value-semantic snapshot with no graph attachment."""
        return Tensor(self.data.copy())

    def copy_(self, values: np.ndarray) -> None:
        """In-place overwrite of the data buffer (leaves only)."""
        if self._parents:
            raise AutodiffError("copy_: only leaf tensors may be overwritten")
        if values.shape != self.data.shape:
            raise ShapeError(f"copy_: shape {values.shape} != {self.data.shape}")
        self.data[...] = values

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------ graph plumbing

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy() if g.base is not None or g.flags.writeable is False else g
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Reverse-mode sweep from this scalar; gradients accumulate additively.

        Calling backward a second time on the same tensor without an
        intervening ``zero_grads`` raises, since that silently double-counts.
        """
        if self.data.size != 1:
            raise AutodiffError(f"backward: loss must be scalar, got shape {self.data.shape}")
        if self._backward_done:
            raise AutodiffError("backward: already called on this tensor; zero_grads() first")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None:
                node._backward_fn(node.grad)
        self._backward_done = True

    # ------------------------------------------------------------- operator sugar

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return pow_(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # convenience methods mirroring the free functions
    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def max(self, axis):
        return max_(self, axis)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=DTYPE))


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def zero_grads(root: Tensor) -> None:
    """Clear gradients and backward-done flags everywhere reachable from root."""
    for node in _topo_order(root):
        node.grad = None
        node._backward_done = False


def _make(op: str, data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    out._backward_done = False
    track = _grad_enabled() and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = parents
        out._backward_fn = backward_fn
    else:
        out._parents = ()
        out._backward_fn = None
    return out


def _binary_prep(op: str, a, b):
    """Validate a binary elementwise pair; returns tensors plus scalar flags."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    _check_finite(op, a.data, b.data)
    a_scalar = a.data.ndim == 0
    b_scalar = b.data.ndim == 0
    if not a_scalar and not b_scalar and a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ "
                         "(only scalar-with-tensor broadcasting is supported)")
    return a, b, a_scalar, b_scalar


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to a scalar operand's shape."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


# ---------------------------------------------------------------- elementwise ops

def add(a, b) -> Tensor:
    a, b, _, _ = _binary_prep("add", a, b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g, b.data.shape))

    return _make("add", data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b, _, _ = _binary_prep("sub", a, b)
    data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(-g, b.data.shape))

    return _make("sub", data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b, _, _ = _binary_prep("mul", a, b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(g * a.data, b.data.shape))

    return _make("mul", data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b, _, _ = _binary_prep("div", a, b)
    if np.any(b.data == 0.0):
        raise NonFiniteError("div: zero divisor")
    data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_reduce_to(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_reduce_to(-g * a.data / (b.data * b.data), b.data.shape))

    return _make("div", data, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _make("neg", -a.data, (a,), backward)


def pow_(a, exponent: float) -> Tensor:
    a = _as_tensor(a)
    _check_finite("pow", a.data)
    e = float(exponent)
    data = a.data ** e

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * e * a.data ** (e - 1.0))

    return _make("pow", data, (a,), backward)


def abs_(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("abs", a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.sign(a.data))  # sign(0) = 0: zero subgradient at the kink

    return _make("abs", np.abs(a.data), (a,), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("relu", a.data)
    mask = a.data > 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _make("relu", np.where(mask, a.data, 0.0), (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("sigmoid", a.data)
    # numerically stable two-branch form
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * s * (1.0 - s))

    return _make("sigmoid", s, (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("tanh", a.data)
    t = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - t * t))

    return _make("tanh", t, (a,), backward)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("exp", a.data)
    e = np.exp(a.data)
    _check_finite("exp", e)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * e)

    return _make("exp", e, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("log", a.data)
    if np.any(a.data <= 0.0):
        raise NonFiniteError("log: non-positive input")
    data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _make("log", data, (a,), backward)


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient passes through strictly inside only."""
    a = _as_tensor(a)
    _check_finite("clamp", a.data)
    data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * inside)

    return _make("clamp", data, (a,), backward)


# ------------------------------------------------------------------- shape ops

def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != a.data.size and -1 not in shape:
        raise ShapeError(f"reshape: cannot view {a.data.shape} as {shape}")
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _make("reshape", data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    if sorted(axes) != list(range(a.data.ndim)):
        raise ShapeError(f"permute: axes {axes} invalid for ndim {a.data.ndim}")
    inv = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.transpose(g, inv))

    return _make("permute", np.transpose(a.data, axes), (a,), backward)


def expand(a, shape) -> Tensor:
    """Explicit broadcast: size-1 axes of ``a`` are repeated to ``shape``."""
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if len(shape) != a.data.ndim:
        raise ShapeError(f"expand: rank mismatch {a.data.shape} -> {shape}")
    for da, ds in zip(a.data.shape, shape):
        if da != ds and da != 1:
            raise ShapeError(f"expand: cannot expand {a.data.shape} to {shape}")
    sum_axes = tuple(i for i, (da, ds) in enumerate(zip(a.data.shape, shape)) if da == 1 and ds != 1)
    data = np.ascontiguousarray(np.broadcast_to(a.data, shape))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.sum(g, axis=sum_axes, keepdims=True) if sum_axes else g)

    return _make("expand", data, (a,), backward)


def getitem(a, idx) -> Tensor:
    a = _as_tensor(a)
    data = a.data[idx]
    if np.isscalar(data) or data.ndim == 0:
        data = np.asarray(data, dtype=DTYPE)

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[idx] = g
            a._accumulate(buf)

    return _make("getitem", data, (a,), backward)


def index_select(a, indices, axis: int = 0) -> Tensor:
    """Gather rows along ``axis``; backward scatter-adds (indices may repeat)."""
    a = _as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    data = np.take(a.data, indices, axis=axis)

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, (slice(None),) * axis + (indices,), g)
            a._accumulate(buf)

    return _make("index_select", data, (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: empty input list")
    for t in ts[1:]:
        if t.data.ndim != ts[0].data.ndim:
            raise ShapeError(f"concat: rank mismatch {t.data.shape} vs {ts[0].data.shape}")
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = (slice(None),) * (axis % g.ndim) + (slice(lo, hi),)
                t._accumulate(g[sl])

    return _make("concat", data, tuple(ts), backward)


# -------------------------------------------------------------------- reductions

def sum_(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    _check_finite("sum", a.data)
    axis_t = (axis,) if isinstance(axis, int) else axis
    data = np.sum(a.data, axis=axis_t)

    def backward(g):
        if a.requires_grad:
            if axis_t is None:
                a._accumulate(np.broadcast_to(g, a.data.shape).copy())
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis_t), a.data.shape).copy())

    return _make("sum", np.asarray(data, dtype=DTYPE), (a,), backward)


def mean(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    _check_finite("mean", a.data)
    axis_t = (axis,) if isinstance(axis, int) else axis
    data = np.mean(a.data, axis=axis_t)
    count = a.data.size if axis_t is None else int(np.prod([a.data.shape[i] for i in axis_t]))

    def backward(g):
        if a.requires_grad:
            if axis_t is None:
                a._accumulate(np.broadcast_to(g / count, a.data.shape).copy())
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis_t) / count, a.data.shape).copy())

    return _make("mean", np.asarray(data, dtype=DTYPE), (a,), backward)


def max_(a, axis: int) -> Tensor:
    """Max over one axis; ties route gradient to the first maximal element."""
    a = _as_tensor(a)
    _check_finite("max", a.data)
    data = np.max(a.data, axis=axis)
    arg = np.argmax(a.data, axis=axis)  # first occurrence on ties

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.put_along_axis(buf, np.expand_dims(arg, axis),
                              np.expand_dims(g, axis), axis=axis)
            a._accumulate(buf)

    return _make("max", data, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    _check_finite("softmax", a.data)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            inner = np.sum(g * s, axis=axis, keepdims=True)
            a._accumulate(s * (g - inner))

    return _make("softmax", s, (a,), backward)


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    """2-D or batched N-D matrix product; batch dims must match exactly."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    _check_finite("matmul", a.data, b.data)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul: operands must be >= 2-D, got {a.data.shape} and {b.data.shape}")
    if a.data.ndim != b.data.ndim or a.data.shape[:-2] != b.data.shape[:-2]:
        raise ShapeError(f"matmul: batch dims differ: {a.data.shape} vs {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ: {a.data.shape} vs {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            b._accumulate(np.swapaxes(a.data, -1, -2) @ g)

    return _make("matmul", data, (a, b), backward)


def linear(x, w, b=None) -> Tensor:
    """Affine map over the last axis: x @ w + b, x: (..., in), w: (in, out)."""
    x = _as_tensor(x)
    w = _as_tensor(w)
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        parents.append(b)
        _check_finite("linear", x.data, w.data, b.data)
        if b.data.shape != (w.data.shape[1],):
            raise ShapeError(f"linear: bias shape {b.data.shape} != ({w.data.shape[1]},)")
    else:
        _check_finite("linear", x.data, w.data)
    if w.data.ndim != 2 or x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"linear: x {x.data.shape} incompatible with w {w.data.shape}")
    data = x.data @ w.data
    if b is not None:
        data = data + b.data

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            x2 = x.data.reshape(-1, x.data.shape[-1])
            g2 = g.reshape(-1, g.shape[-1])
            w._accumulate(x2.T @ g2)
        if b is not None and b.requires_grad:
            b._accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return _make("linear", data, tuple(parents), backward)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x = _as_tensor(x)
    gamma = _as_tensor(gamma)
    beta = _as_tensor(beta)
    _check_finite("layer_norm", x.data, gamma.data, beta.data)
    d = x.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise ShapeError(f"layer_norm: gamma/beta must be ({d},), got {gamma.data.shape}/{beta.data.shape}")
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.mean((x.data - mu) ** 2, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate(np.sum(g * xhat, axis=tuple(range(g.ndim - 1))))
        if beta.requires_grad:
            beta._accumulate(np.sum(g, axis=tuple(range(g.ndim - 1))))
        if x.requires_grad:
            gx_hat = g * gamma.data
            m1 = np.mean(gx_hat, axis=-1, keepdims=True)
            m2 = np.mean(gx_hat * xhat, axis=-1, keepdims=True)
            x._accumulate(inv * (gx_hat - m1 - xhat * m2))

    return _make("layer_norm", data, (x, gamma, beta), backward)


# ------------------------------------------------------------------ convolutions

def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


def conv2d(x, w, b=None, stride=1, padding=0) -> Tensor:
    """2-D cross-correlation. x: (B,C,H,W), w: (F,C,kh,kw), zero padding."""
    x = _as_tensor(x)
    w = _as_tensor(w)
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        parents.append(b)
        _check_finite("conv2d", x.data, w.data, b.data)
    else:
        _check_finite("conv2d", x.data, w.data)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D x and w, got {x.data.shape} and {w.data.shape}")
    B, C, H, W = x.data.shape
    F, C2, kh, kw = w.data.shape
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if C != C2:
        raise ShapeError(f"conv2d: input channels {C} != kernel channels {C2}")
    if sh < 1 or sw < 1 or ph < 0 or pw < 0:
        raise ShapeError("conv2d: stride must be >= 1 and padding >= 0")
    Ho = (H + 2 * ph - kh) // sh + 1
    Wo = (W + 2 * pw - kw) // sw + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"conv2d: kernel ({kh},{kw}) too large for padded input ({H + 2 * ph},{W + 2 * pw})")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((B, C, kh, kw, Ho, Wo), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw]
    out = np.tensordot(w.data, cols, axes=([1, 2, 3], [1, 2, 3]))  # (F,B,Ho,Wo)
    out = np.ascontiguousarray(out.transpose(1, 0, 2, 3))
    if b is not None:
        if b.data.shape != (F,):
            raise ShapeError(f"conv2d: bias shape {b.data.shape} != ({F},)")
        out = out + b.data[None, :, None, None]

    def backward(g):
        if w.requires_grad:
            w._accumulate(np.tensordot(g, cols, axes=([0, 2, 3], [0, 4, 5])))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcols = np.tensordot(g, w.data, axes=(1, 0))  # (B,Ho,Wo,C,kh,kw)
            gcols = gcols.transpose(0, 3, 4, 5, 1, 2)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += gcols[:, :, i, j]
            x._accumulate(gxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else gxp)

    return _make("conv2d", out, tuple(parents), backward)


def conv1d(x, w, b=None, stride=1, padding=(0, 0)) -> Tensor:
    """1-D cross-correlation. x: (B,C,T), w: (F,C,k); padding is (left, right)."""
    x = _as_tensor(x)
    w = _as_tensor(w)
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        parents.append(b)
        _check_finite("conv1d", x.data, w.data, b.data)
    else:
        _check_finite("conv1d", x.data, w.data)
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ShapeError(f"conv1d: need 3-D x and w, got {x.data.shape} and {w.data.shape}")
    B, C, T = x.data.shape
    F, C2, k = w.data.shape
    if C != C2:
        raise ShapeError(f"conv1d: input channels {C} != kernel channels {C2}")
    pl, pr = (padding, padding) if isinstance(padding, int) else tuple(padding)
    s = int(stride)
    To = (T + pl + pr - k) // s + 1
    if To < 1:
        raise ShapeError(f"conv1d: kernel {k} too large for padded length {T + pl + pr}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pl, pr)))
    cols = np.empty((B, C, k, To), dtype=DTYPE)
    for i in range(k):
        cols[:, :, i] = xp[:, :, i:i + s * To:s]
    out = np.tensordot(w.data, cols, axes=([1, 2], [1, 2]))  # (F,B,To)
    out = np.ascontiguousarray(out.transpose(1, 0, 2))
    if b is not None:
        if b.data.shape != (F,):
            raise ShapeError(f"conv1d: bias shape {b.data.shape} != ({F},)")
        out = out + b.data[None, :, None]

    def backward(g):
        if w.requires_grad:
            w._accumulate(np.tensordot(g, cols, axes=([0, 2], [0, 3])))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gcols = np.tensordot(g, w.data, axes=(1, 0))  # (B,To,C,k)
            gcols = gcols.transpose(0, 2, 3, 1)
            gxp = np.zeros_like(xp)
            for i in range(k):
                gxp[:, :, i:i + s * To:s] += gcols[:, :, i]
            x._accumulate(gxp[:, :, pl:pl + T] if (pl or pr) else gxp)

    return _make("conv1d", out, tuple(parents), backward)


def maxpool2d(x, kernel, stride=None, padding=0) -> Tensor:
    """2-D max pooling; padded cells hold -inf and never win a window."""
    x = _as_tensor(x)
    _check_finite("maxpool2d", x.data)
    if x.data.ndim != 4:
        raise ShapeError(f"maxpool2d: need 4-D input, got {x.data.shape}")
    kh, kw = _pair(kernel)
    sh, sw = _pair(stride if stride is not None else kernel)
    ph, pw = _pair(padding)
    B, C, H, W = x.data.shape
    if kh > H + 2 * ph or kw > W + 2 * pw:
        raise ShapeError(f"maxpool2d: window ({kh},{kw}) exceeds padded input ({H + 2 * ph},{W + 2 * pw})")
    Ho = (H + 2 * ph - kh) // sh + 1
    Wo = (W + 2 * pw - kw) // sw + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=-np.inf)
    win = np.empty((B, C, kh * kw, Ho, Wo), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            win[:, :, i * kw + j] = xp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw]
    arg = np.argmax(win, axis=2)  # first max in row-major window order
    out = np.max(win, axis=2)

    def backward(g):
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    sel = (arg == i * kw + j)
                    gxp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += g * sel
            x._accumulate(gxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else gxp)

    return _make("maxpool2d", out, (x,), backward)


# ------------------------------------------------------------------ op registry

OP_KINDS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "neg": neg,
    "pow": pow_,
    "abs": abs_,
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "clamp": clamp,
    "reshape": reshape,
    "permute": transpose,
    "expand": expand,
    "getitem": getitem,
    "index_select": index_select,
    "concat": concat,
    "sum": sum_,
    "mean": mean,
    "max": max_,
    "softmax": softmax,
    "matmul": matmul,
    "linear": linear,
    "layer_norm": layer_norm,
    "conv2d": conv2d,
    "conv1d": conv1d,
    "maxpool2d": maxpool2d,
}


def forward_op(kind: str, inputs, **attrs) -> Tensor:
    """Dispatch an op by kind name; used by the gradient-check harness."""
    if kind not in OP_KINDS:
        raise ShapeError(f"forward_op: unknown op kind {kind!r}")
    fn = OP_KINDS[kind]
    if kind == "concat":
        return fn(inputs, **attrs)
    return fn(*inputs, **attrs)
