"""Dense tensors with reverse-mode automatic differentiation.

Arrays are numpy-backed, row-major, batch-first (B, H, W, C for feature
maps). Gradients are accumulated into ``Tensor.grad`` by ``backward`` and
persist until explicitly zeroed. Tests run in float64; training typically
runs in float32. All ops are deterministic: reductions use numpy's fixed
evaluation order and max-pool ties break to the first (lowest linear
index) maximum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, UsageError

DEFAULT_DTYPE = np.float64

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (forward only)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """n-dimensional real array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "_prev", "_grad_fn", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None,
                 _prev: tuple = (), _grad_fn: Optional[Callable] = None,
                 _op: str = ""):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(dtype or DEFAULT_DTYPE)
        elif dtype is not None and arr.dtype != dtype:
            arr = arr.astype(dtype)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._prev = _prev
        self._grad_fn = _grad_fn
        self._op = _op

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        """New leaf sharing this tensor's data, outside the graph."""
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-mode sweep from a scalar; grads accumulate until zeroed."""
        if self.data.size != 1:
            raise UsageError(
                f"backward() requires a scalar loss, got shape {self.shape}")
        # Iterative topological sort: graphs from deep generators exceed
        # Python's recursion limit.
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._grad_fn is not None and node.grad is not None:
                node._grad_fn(node.grad)

    # Operator sugar; callers needing explicit control use the module fns.
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other, self.dtype))

    def __neg__(self):
        return mul(self, Tensor(np.asarray(-1.0, dtype=self.dtype)))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and
                       isinstance(shape[0], (tuple, list)) else shape)


def _as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype or DEFAULT_DTYPE))


def _make(data: np.ndarray, prev: Sequence[Tensor], grad_fn: Callable,
          op: str) -> Tensor:
    requires = _grad_enabled and any(p.requires_grad for p in prev)
    if requires:
        return Tensor(data, requires_grad=True, _prev=tuple(prev),
                      _grad_fn=grad_fn, _op=op)
    return Tensor(data, _op=op)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))
    return _make(out, (a, b), grad_fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))
    return _make(out, (a, b), grad_fn, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))
    return _make(out, (a, b), grad_fn, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
    return _make(out, (a, b), grad_fn, "div")


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data ** exponent

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * exponent * a.data ** (exponent - 1.0))
    return _make(out, (a,), grad_fn, "power")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * out)
    return _make(out, (a,), grad_fn, "exp")


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)
    return _make(out, (a,), grad_fn, "log")


def absolute(a: Tensor) -> Tensor:
    out = np.abs(a.data)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * np.sign(a.data))
    return _make(out, (a,), grad_fn, "abs")


# ---------------------------------------------------------------------------
# activations


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * (a.data > 0))
    return _make(out, (a,), grad_fn, "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    out = np.where(a.data > 0, a.data, slope * a.data)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * np.where(a.data > 0, 1.0, slope))
    return _make(out, (a,), grad_fn, "leaky_relu")


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * out * (1.0 - out))
    return _make(out, (a,), grad_fn, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - out * out))
    return _make(out, (a,), grad_fn, "tanh")


def softmax(a: Tensor, axis: int) -> Tensor:
    """Max-subtracted softmax along ``axis``; output rows sum to 1."""
    _check_axis(a, axis)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        if a.requires_grad:
            inner = (g * out).sum(axis=axis, keepdims=True)
            a.accumulate_grad(out * (g - inner))
    return _make(out, (a,), grad_fn, "softmax")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports batched leading dims via broadcasting."""
    if a.data.ndim < 1 or b.data.ndim < 2:
        raise DimensionError(
            f"matmul needs matrices, got {a.shape} and {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner dims disagree: {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def grad_fn(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            ad = a.data[None, :] if a.data.ndim == 1 else a.data
            gg = g[..., None, :] if a.data.ndim == 1 else g
            gb = np.swapaxes(ad, -1, -2) @ gg
            b.accumulate_grad(_unbroadcast(gb, b.data.shape))
    return _make(out, (a, b), grad_fn, "matmul")


# ---------------------------------------------------------------------------
# shape ops


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = a.data.reshape(shape)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.data.shape))
    return _make(out, (a,), grad_fn, "reshape")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(a.data.ndim)):
        raise DimensionError(f"invalid transpose axes {axes} for {a.shape}")
    out = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(np.transpose(g, inverse))
    return _make(out, (a,), grad_fn, "transpose")


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    for t in tensors:
        _check_axis(t, axis)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(idx)])
    return _make(out, tuple(tensors), grad_fn, "concat")


# ---------------------------------------------------------------------------
# reductions


def _check_axis(a: Tensor, axis: Optional[int]):
    if axis is None:
        return
    if not -a.data.ndim <= axis < a.data.ndim:
        raise DimensionError(f"axis {axis} invalid for shape {a.shape}")


def sum_(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    _check_axis(a, axis)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if a.requires_grad:
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            a.accumulate_grad(np.broadcast_to(gg, a.data.shape).copy())
    return _make(out, (a,), grad_fn, "sum")


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    _check_axis(a, axis)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else a.data.shape[axis]

    def grad_fn(g):
        if a.requires_grad:
            gg = g / n
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            a.accumulate_grad(np.broadcast_to(gg, a.data.shape).copy())
    return _make(out, (a,), grad_fn, "mean")


# ---------------------------------------------------------------------------
# feature-map ops (B, H, W, C)


def _require_feature_map(x: Tensor, op: str):
    if x.data.ndim != 4:
        raise DimensionError(f"{op} expects (B,H,W,C), got {x.shape}")


def conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1,
           padding: str = "same") -> Tensor:
    """Cross-correlation of (B,H,W,Cin) with kernel (kH,kW,Cin,Cout).

    ``padding`` is "same" ((k-1)//2 zeros per side) or "valid". A 1x1
    stride-1 convolution is dispatched to a per-pixel linear map.
    """
    _require_feature_map(x, "conv2d")
    if w.data.ndim != 4:
        raise DimensionError(f"conv2d kernel must be 4-D, got {w.shape}")
    kh, kw, cin, cout = w.data.shape
    if x.data.shape[3] != cin:
        raise DimensionError(
            f"conv2d channel mismatch: input {x.shape} vs kernel {w.shape}")
    if padding not in ("same", "valid"):
        raise ConfigError(f"unknown padding {padding!r}")

    if kh == 1 and kw == 1 and stride == 1:
        return _conv1x1(x, w, b)

    ph = (kh - 1) // 2 if padding == "same" else 0
    pw = (kw - 1) // 2 if padding == "same" else 0
    bsz, h, wdt, _ = x.data.shape
    oh = (h + 2 * ph - kh) // stride + 1
    ow = (wdt + 2 * pw - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise DimensionError(
            f"conv2d output would be empty for input {x.shape}, kernel {w.shape}")

    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    s = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp, (bsz, oh, ow, kh, kw, cin),
        (s[0], s[1] * stride, s[2] * stride, s[1], s[2], s[3]))
    cols = np.ascontiguousarray(cols).reshape(bsz * oh * ow, kh * kw * cin)
    wflat = w.data.reshape(kh * kw * cin, cout)
    out = cols @ wflat
    if b is not None:
        out = out + b.data
    out = out.reshape(bsz, oh, ow, cout)

    def grad_fn(g):
        gflat = g.reshape(bsz * oh * ow, cout)
        if w.requires_grad:
            w.accumulate_grad((cols.T @ gflat).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(gflat.sum(axis=0))
        if x.requires_grad:
            gcols = (gflat @ wflat.T).reshape(bsz, oh, ow, kh, kw, cin)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + stride * oh:stride,
                        j:j + stride * ow:stride, :] += gcols[:, :, :, i, j, :]
            x.accumulate_grad(gxp[:, ph:ph + h, pw:pw + wdt, :])
    prev = (x, w) if b is None else (x, w, b)
    return _make(out, prev, grad_fn, "conv2d")


def _conv1x1(x: Tensor, w: Tensor, b: Optional[Tensor]) -> Tensor:
    bsz, h, wdt, cin = x.data.shape
    cout = w.data.shape[3]
    wflat = w.data.reshape(cin, cout)
    flat = x.data.reshape(-1, cin)
    out = flat @ wflat
    if b is not None:
        out = out + b.data
    out = out.reshape(bsz, h, wdt, cout)

    def grad_fn(g):
        gflat = g.reshape(-1, cout)
        if w.requires_grad:
            w.accumulate_grad((flat.T @ gflat).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(gflat.sum(axis=0))
        if x.requires_grad:
            x.accumulate_grad((gflat @ wflat.T).reshape(x.data.shape))
    prev = (x, w) if b is None else (x, w, b)
    return _make(out, prev, grad_fn, "conv1x1")


def upsample_nearest2x(x: Tensor) -> Tensor:
    """Double H and W by replicating each pixel 2x2."""
    _require_feature_map(x, "upsample_nearest2x")
    out = x.data.repeat(2, axis=1).repeat(2, axis=2)

    def grad_fn(g):
        if x.requires_grad:
            bsz, h, w, c = x.data.shape
            gr = g.reshape(bsz, h, 2, w, 2, c)
            x.accumulate_grad(gr.sum(axis=(2, 4)))
    return _make(out, (x,), grad_fn, "upsample_nearest2x")


def global_avg_pool(x: Tensor) -> Tensor:
    """(B,H,W,C) -> (B,1,1,C), mean over H and W."""
    _require_feature_map(x, "global_avg_pool")
    out = x.data.mean(axis=(1, 2), keepdims=True)
    n = x.data.shape[1] * x.data.shape[2]

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g / n, x.data.shape).copy())
    return _make(out, (x,), grad_fn, "global_avg_pool")


def global_max_pool(x: Tensor) -> Tensor:
    """(B,H,W,C) -> (B,1,1,C); gradient routes to the first max."""
    _require_feature_map(x, "global_max_pool")
    bsz, h, w, c = x.data.shape
    flat = x.data.reshape(bsz, h * w, c)
    idx = flat.argmax(axis=1)
    out = np.take_along_axis(flat, idx[:, None, :], axis=1).reshape(
        bsz, 1, 1, c)

    def grad_fn(g):
        if x.requires_grad:
            gx = np.zeros_like(flat)
            np.put_along_axis(gx, idx[:, None, :], g.reshape(bsz, 1, c),
                              axis=1)
            x.accumulate_grad(gx.reshape(x.data.shape))
    return _make(out, (x,), grad_fn, "global_max_pool")


def spatial_mean(x: Tensor) -> Tensor:
    """(B,H,W,C) -> (B,H,W,1), mean over channels."""
    _require_feature_map(x, "spatial_mean")
    out = x.data.mean(axis=3, keepdims=True)
    c = x.data.shape[3]

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g / c, x.data.shape).copy())
    return _make(out, (x,), grad_fn, "spatial_mean")


def spatial_max(x: Tensor) -> Tensor:
    """(B,H,W,C) -> (B,H,W,1); gradient routes to the first max channel."""
    _require_feature_map(x, "spatial_max")
    idx = x.data.argmax(axis=3)
    out = np.take_along_axis(x.data, idx[..., None], axis=3)

    def grad_fn(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, idx[..., None], g, axis=3)
            x.accumulate_grad(gx)
    return _make(out, (x,), grad_fn, "spatial_max")


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of (V,M) by an integer id array; scatter-add on backward."""
    ids = np.asarray(ids)
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= table.data.shape[0]:
        raise DimensionError(
            f"ids out of range for table of {table.data.shape[0]} rows")
    out = table.data[ids]

    def grad_fn(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids.reshape(-1),
                      g.reshape(-1, table.data.shape[1]))
    return _make(out, (table,), grad_fn, "embedding_lookup")


# ---------------------------------------------------------------------------
# parameters and optimization


@dataclass
class Parameter:
    """Named trainable tensor plus its Adam moment estimates."""

    name: str
    tensor: Tensor
    moment1: np.ndarray = field(default=None, repr=False)
    moment2: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.tensor.requires_grad = True
        if self.moment1 is None:
            self.moment1 = np.zeros_like(self.tensor.data)
        if self.moment2 is None:
            self.moment2 = np.zeros_like(self.tensor.data)


class ParamStore:
    """Ordered name -> Parameter map; order defines serialization layout."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        self._params[name] = Parameter(name, tensor)
        return tensor

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return [p.tensor for p in self._params.values()]

    def zero_grad(self):
        for p in self._params.values():
            p.tensor.grad = None

    def set_trainable(self, flag: bool):
        for p in self._params.values():
            p.tensor.requires_grad = flag

    def num_values(self) -> int:
        return sum(p.tensor.size for p in self._params.values())


def adam_step(params, grads, lr: float, beta1: float, beta2: float,
              eps: float, t: int):
    """One bias-corrected Adam update, in place.

    ``params`` is an iterable of Parameter; ``grads`` the matching gradient
    arrays (None entries are skipped). With beta1=0 the first moment equals
    the current gradient.
    """
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if t < 1:
        raise ConfigError(f"step counter must be >= 1, got {t}")
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for p, g in zip(params, grads):
        if g is None:
            continue
        if g.shape != p.tensor.data.shape:
            raise DimensionError(
                f"gradient shape {g.shape} != parameter {p.name} "
                f"shape {p.tensor.data.shape}")
        p.moment1 *= beta1
        p.moment1 += (1.0 - beta1) * g
        p.moment2 *= beta2
        p.moment2 += (1.0 - beta2) * (g * g)
        m_hat = p.moment1 / bc1
        v_hat = p.moment2 / bc2
        p.tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(
            p.tensor.data.dtype, copy=False)


class Adam:
    """Adam over a ParamStore, with optional post-step hooks (e.g. clamps)."""

    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.0,
                 beta2: float = 0.9, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.post_step_hooks: list[Callable[[], None]] = []

    def step(self):
        self.t += 1
        params = [p for p in self.store if p.tensor.grad is not None]
        grads = [p.tensor.grad for p in params]
        adam_step(params, grads, self.lr, self.beta1, self.beta2, self.eps,
                  self.t)
        for hook in self.post_step_hooks:
            hook()

    def zero_grad(self):
        self.store.zero_grad()


# ---------------------------------------------------------------------------
# gradient verification


@dataclass
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    max_rel_error: float
    tol: float
    num_checked: int
    worst_index: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def finite_difference_check(f: Callable[[Tensor], Tensor], x: Tensor,
                            eps: float = 1e-5,
                            tol: float = 1e-4) -> GradCheckReport:
    """Compare autodiff d f/d x against central differences, elementwise.

    Relative error is |ad - fd| / max(1, |ad|, |fd|); the report passes iff
    the max over elements is <= tol. ``f`` must map a tensor to a scalar
    Tensor and be deterministic.
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    leaf = Tensor(x.data.copy(), requires_grad=True)
    out = f(leaf)
    out.backward()
    ad = (leaf.grad if leaf.grad is not None
          else np.zeros_like(leaf.data)).copy()

    base = leaf.data.copy()
    fd = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    with no_grad():
        while not it.finished:
            ix = it.multi_index
            pert = base.copy()
            pert[ix] = base[ix] + eps
            hi = f(Tensor(pert)).item()
            pert[ix] = base[ix] - eps
            lo = f(Tensor(pert)).item()
            fd[ix] = (hi - lo) / (2.0 * eps)
            it.iternext()

    denom = np.maximum(1.0, np.maximum(np.abs(ad), np.abs(fd)))
    rel = np.abs(ad - fd) / denom
    worst = np.unravel_index(np.argmax(rel), rel.shape) if rel.size else None
    return GradCheckReport(max_rel_error=float(rel.max(initial=0.0)),
                           tol=tol, num_checked=int(base.size),
                           worst_index=worst)
