"""Reverse-mode differentiation over dense rank-4 arrays.

A small engine sufficient for the generators, the discriminator and the
losses: every value is a (batch, channels, height, width) array wrapped in
a :class:`Tensor`; ops record backward closures; ``backward()`` runs plain
reverse accumulation.

Two backward systems coexist:

* ``Tensor.backward`` computes numeric gradients (fast path, used for all
  parameter updates);
* :func:`grad_graph` re-expresses the gradient of an output w.r.t. an
  input as a *new graph* built from the same primitives (conv backward is
  a conv with the flipped/swapped kernel, resampling backward is the
  transposed matrix pair, and so on).  Penalties on gradients — the
  discriminator's gradient penalty — become ordinary first-order
  backward passes through that replayed graph, so no higher-order
  machinery is needed.

Storage is float32 with float64 accumulation in reductions; building the
whole graph in float64 (as the gradient checker does) makes every op run
at double precision.
"""

from __future__ import annotations

import numpy as np

from . import grids
from .errors import ShapeError

_GRAD_ENABLED = [True]


class no_grad:
    """Context manager: ops built inside do not record graph structure."""

    def __enter__(self):
        self._prev = _GRAD_ENABLED[0]
        _GRAD_ENABLED[0] = False
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED[0] = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "parents", "_backward", "_graph_backward", "op", "_done")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, graph_backward=None, op="leaf"):
        data = np.asarray(data)
        if data.ndim != 4:
            raise ShapeError(f"tensors are rank-4 (B, C, H, W), got shape {data.shape}")
        if data.dtype != np.float64:
            data = data.astype(np.float32, copy=False)
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.parents = tuple(parents)
        self._backward = backward
        self._graph_backward = graph_backward
        self.op = op
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, op="detach")

    def backward(self, seed=None) -> None:
        """Reverse accumulation from this tensor into every requires_grad
        ancestor's ``.grad``. Scalar outputs seed with 1; other shapes need
        an explicit seed array. A root can only be walked once."""
        if not self.requires_grad:
            raise RuntimeError("backward on a tensor that does not require grad")
        if seed is None:
            if self.data.size != 1:
                raise ValueError(f"non-scalar backward (shape {self.shape}) needs an explicit seed")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=self.data.dtype)
            if seed.shape != self.data.shape:
                raise ShapeError(f"seed shape {seed.shape} != output shape {self.shape}")
        if self._done:
            raise RuntimeError("backward already ran from this root; rebuild the graph")
        self._done = True
        # this run's contributions travel in a local map so that a second
        # backward from a different root over a shared subgraph does not
        # re-propagate what accumulated in .grad earlier
        contrib: dict[int, np.ndarray] = {id(self): seed}
        for node in reversed(_topo(self)):
            up = contrib.pop(id(node), None)
            if up is None:
                continue
            node.grad = up if node.grad is None else node.grad + up
            if node._backward is None:
                continue
            for parent, g in zip(node.parents, node._backward(up)):
                if g is None or not parent.requires_grad:
                    continue
                if g.dtype != parent.data.dtype:
                    g = g.astype(parent.data.dtype)
                key = id(parent)
                contrib[key] = g if key not in contrib else contrib[key] + g

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return sub(self, other)

    def __repr__(self):
        return f"Tensor({self.op}, shape={self.shape}, grad={self.requires_grad})"


def _topo(root: Tensor) -> list[Tensor]:
    """Parents-before-consumers order over the requires_grad subgraph."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _t(x, like: Tensor) -> Tensor:
    """Wrap python scalars as constant (1,1,1,1) tensors of a matching dtype."""
    if isinstance(x, Tensor):
        return x
    return Tensor(np.full((1, 1, 1, 1), x, dtype=like.data.dtype))


def _make(data, parents, backward, graph_backward=None, op="op") -> Tensor:
    if _GRAD_ENABLED[0] and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, graph_backward, op)
    return Tensor(data, op=op)


def _sum_to(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    axes = tuple(i for i in range(4) if shape[i] == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True, dtype=np.float64).astype(g.dtype)
    return g


def _graph_sum_to(g: Tensor, shape) -> Tensor:
    axes = tuple(i for i in range(4) if shape[i] == 1 and g.data.shape[i] != 1)
    return reduce_sum(g, axes=axes) if axes else g


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a = _t(a, b) if not isinstance(a, Tensor) else a
    b = _t(b, a)
    out = a.data + b.data

    def backward(up):
        return _sum_to(up, a.data.shape), _sum_to(up, b.data.shape)

    def graph_backward(up):
        return _graph_sum_to(up, a.data.shape), _graph_sum_to(up, b.data.shape)

    return _make(out, (a, b), backward, graph_backward, "add")


def sub(a, b) -> Tensor:
    b = _t(b, a)
    return add(a, mul(b, -1.0))


def mul(a, b) -> Tensor:
    a = _t(a, b) if not isinstance(a, Tensor) else a
    b = _t(b, a)
    out = a.data * b.data

    def backward(up):
        ga = _sum_to(up * b.data, a.data.shape) if a.requires_grad else None
        gb = _sum_to(up * a.data, b.data.shape) if b.requires_grad else None
        return ga, gb

    def graph_backward(up):
        return _graph_sum_to(mul(up, b), a.data.shape), _graph_sum_to(mul(up, a), b.data.shape)

    return _make(out, (a, b), backward, graph_backward, "mul")


def leaky(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = np.where(x.data > 0, 1.0, slope).astype(x.data.dtype)
    out = x.data * mask

    def backward(up):
        return (up * mask,)

    def graph_backward(up):
        # the mask is piecewise constant in the input, so treating it as a
        # constant keeps the replayed gradient exact almost everywhere
        return (mul(up, Tensor(mask)),)

    return _make(out, (x,), backward, graph_backward, "leaky")


def abs_(x: Tensor) -> Tensor:
    s = np.sign(x.data)
    out = np.abs(x.data)

    def backward(up):
        return (up * s,)

    def graph_backward(up):
        return (mul(up, Tensor(s)),)

    return _make(out, (x,), backward, graph_backward, "abs")


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(x.data, lo, hi)
    mask = ((x.data >= lo) & (x.data <= hi)).astype(x.data.dtype)

    def backward(up):
        return (up * mask,)

    def graph_backward(up):
        return (mul(up, Tensor(mask)),)

    return _make(out, (x,), backward, graph_backward, "clamp")


def sin(x: Tensor) -> Tensor:
    out = np.sin(x.data)

    def backward(up):
        return (up * np.cos(x.data),)

    def graph_backward(up):
        return (mul(up, cos(x)),)

    return _make(out, (x,), backward, graph_backward, "sin")


def cos(x: Tensor) -> Tensor:
    out = np.cos(x.data)

    def backward(up):
        return (up * -np.sin(x.data),)

    def graph_backward(up):
        return (mul(up, mul(sin(x), -1.0)),)

    return _make(out, (x,), backward, graph_backward, "cos")


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0.0, x.data)
    sig = np.exp(-np.logaddexp(0.0, -x.data))

    def backward(up):
        return (up * sig,)

    return _make(out, (x,), backward, None, "softplus")


def rsqrt_eps(x: Tensor, eps: float = 1e-8) -> Tensor:
    out = 1.0 / np.sqrt(x.data + eps)

    def backward(up):
        return (up * (-0.5 * out**3),)

    return _make(out, (x,), backward, None, "rsqrt_eps")


def stop_grad(x: Tensor) -> Tensor:
    return x.detach()


# ---------------------------------------------------------------------------
# shape plumbing


def concat(xs) -> Tensor:
    xs = list(xs)
    if not xs:
        raise ShapeError("concat of zero tensors")
    out = np.concatenate([x.data for x in xs], axis=1)
    sizes = [x.data.shape[1] for x in xs]
    edges = np.cumsum([0] + sizes)

    def backward(up):
        return tuple(up[:, edges[i] : edges[i + 1]] for i in range(len(xs)))

    def graph_backward(up):
        return tuple(slice_channels(up, int(edges[i]), int(edges[i + 1])) for i in range(len(xs)))

    return _make(out, tuple(xs), backward, graph_backward, "concat")


def concat_batch(xs) -> Tensor:
    """Stack tensors along the batch axis (shared channel/spatial shape)."""
    xs = list(xs)
    if not xs:
        raise ShapeError("concat_batch of zero tensors")
    out = np.concatenate([x.data for x in xs], axis=0)
    sizes = [x.data.shape[0] for x in xs]
    edges = np.cumsum([0] + sizes)

    def backward(up):
        return tuple(up[edges[i] : edges[i + 1]] for i in range(len(xs)))

    return _make(out, tuple(xs), backward, None, "concat_batch")


def slice_channels(x: Tensor, c0: int, c1: int) -> Tensor:
    if not (0 <= c0 < c1 <= x.data.shape[1]):
        raise ShapeError(f"channel slice [{c0}:{c1}] out of range for {x.shape}")
    out = x.data[:, c0:c1]

    def backward(up):
        g = np.zeros_like(x.data)
        g[:, c0:c1] = up
        return (g,)

    def graph_backward(up):
        b, c, h, w = x.data.shape
        parts = []
        if c0 > 0:
            parts.append(Tensor(np.zeros((b, c0, h, w), dtype=x.data.dtype)))
        parts.append(up)
        if c1 < c:
            parts.append(Tensor(np.zeros((b, c - c1, h, w), dtype=x.data.dtype)))
        return (concat(parts) if len(parts) > 1 else up,)

    return _make(out, (x,), backward, graph_backward, "slice")


def expand_batch(x: Tensor, batch: int) -> Tensor:
    """Broadcast a batch-1 tensor to a larger batch (gradient sums back)."""
    if x.data.shape[0] != 1:
        raise ShapeError(f"expand_batch needs batch 1, got {x.shape}")
    return mul(x, Tensor(np.ones((batch, 1, 1, 1), dtype=x.data.dtype)))


def repeat_batch(x: Tensor, k: int) -> Tensor:
    """Repeat every batch row k times: (B, C, H, W) -> (B*k, C, H, W) with
    row b*k+i a copy of row b (gradients sum over the copies)."""
    if k < 1:
        raise ShapeError(f"repeat count {k} < 1")
    out = np.repeat(x.data, k, axis=0)
    b = x.data.shape[0]

    def backward(up):
        g = up.reshape((b, k) + x.data.shape[1:]).sum(axis=1, dtype=np.float64)
        return (g.astype(x.data.dtype),)

    return _make(out, (x,), backward, None, "repeat_batch")


def fold_frames(x: Tensor, k: int) -> Tensor:
    """Regroup k consecutive batch rows into channels:
    (B*k, C, H, W) -> (B, k*C, H, W).  A pure reshape."""
    b, c, h, w = x.data.shape
    if k < 1 or b % k:
        raise ShapeError(f"batch {b} not divisible by frame count {k}")
    out = x.data.reshape(b // k, k * c, h, w)

    def backward(up):
        return (up.reshape(b, c, h, w),)

    def graph_backward(up):
        return (unfold_frames(up, k),)

    return _make(out, (x,), backward, graph_backward, "fold_frames")


def unfold_frames(x: Tensor, k: int) -> Tensor:
    """Inverse of :func:`fold_frames`: (B, k*C, H, W) -> (B*k, C, H, W)."""
    b, kc, h, w = x.data.shape
    if k < 1 or kc % k:
        raise ShapeError(f"channels {kc} not divisible by frame count {k}")
    out = x.data.reshape(b * k, kc // k, h, w)

    def backward(up):
        return (up.reshape(b, kc, h, w),)

    def graph_backward(up):
        return (fold_frames(up, k),)

    return _make(out, (x,), backward, graph_backward, "unfold_frames")


def transpose01(w: Tensor) -> Tensor:
    out = np.ascontiguousarray(w.data.transpose(1, 0, 2, 3))

    def backward(up):
        return (np.ascontiguousarray(up.transpose(1, 0, 2, 3)),)

    def graph_backward(up):
        return (transpose01(up),)

    return _make(out, (w,), backward, graph_backward, "transpose01")


def flip_swap(w: Tensor) -> Tensor:
    """Spatially flipped, in/out-swapped kernel: the conv backward kernel."""
    out = np.ascontiguousarray(w.data.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])

    def backward(up):
        return (np.ascontiguousarray(up.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]),)

    def graph_backward(up):
        return (flip_swap(up),)

    return _make(out, (w,), backward, graph_backward, "flip_swap")


# ---------------------------------------------------------------------------
# reductions


def reduce_mean(x: Tensor, axes=(0, 1, 2, 3)) -> Tensor:
    axes = tuple(sorted(set(axes)))
    n = int(np.prod([x.data.shape[a] for a in axes])) if axes else 1
    out = x.data.mean(axis=axes, keepdims=True, dtype=np.float64).astype(x.data.dtype)

    def backward(up):
        return (np.broadcast_to(up, x.data.shape) / n,)

    def graph_backward(up):
        return (mul(up, Tensor(np.full(x.data.shape, 1.0 / n, dtype=x.data.dtype))),)

    return _make(out, (x,), backward, graph_backward, "reduce_mean")


def reduce_sum(x: Tensor, axes=(0, 1, 2, 3)) -> Tensor:
    axes = tuple(sorted(set(axes)))
    out = x.data.sum(axis=axes, keepdims=True, dtype=np.float64).astype(x.data.dtype)

    def backward(up):
        return (np.broadcast_to(up, x.data.shape).astype(up.dtype, copy=False),)

    def graph_backward(up):
        return (mul(up, Tensor(np.ones(x.data.shape, dtype=x.data.dtype))),)

    return _make(out, (x,), backward, graph_backward, "reduce_sum")


def normalize_rms(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Divide by the RMS over the channel axis (latent normalization)."""
    return mul(x, rsqrt_eps(reduce_mean(mul(x, x), axes=(1,)), eps))


# ---------------------------------------------------------------------------
# convolution


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    b, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    s = xp.strides
    win = np.lib.stride_tricks.as_strided(xp, (b, c, k, k, h, w), (s[0], s[1], s[2], s[3], s[2], s[3]))
    return win.reshape(b, c * k * k, h * w)


def _conv_forward(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    b, c, h, wd = x.shape
    k_out, c_in, kh, kw = w.shape
    if c != c_in:
        raise ShapeError(f"conv input has {c} channels, kernel expects {c_in}")
    if kh != kw or kh % 2 == 0:
        raise ShapeError(f"square odd kernels only, got {kh}x{kw}")
    if kh == 1:
        out = np.matmul(w.reshape(k_out, c_in), x.reshape(b, c, h * wd))
    else:
        out = np.matmul(w.reshape(k_out, -1), _im2col(x, kh))
    return out.reshape(b, k_out, h, wd)


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 same-padding convolution (square odd kernel; 3x3 or 1x1 in
    practice).  ``bias`` is a (1, K, 1, 1) tensor added to the output."""
    out = _conv_forward(x.data, w.data)
    k_out = w.data.shape[0]

    def backward(up):
        gx = None
        gw = None
        if x.requires_grad:
            back_kernel = np.ascontiguousarray(w.data.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
            gx = _conv_forward(up, back_kernel)
        if w.requires_grad:
            b, c, h, wd = x.data.shape
            kh = w.data.shape[2]
            cols = x.data.reshape(b, c, h * wd) if kh == 1 else _im2col(x.data, kh)
            per_sample = np.matmul(up.reshape(b, k_out, h * wd), cols.transpose(0, 2, 1))
            gw = per_sample.sum(axis=0, dtype=np.float64).astype(w.data.dtype).reshape(w.data.shape)
        return gx, gw

    def graph_backward(up):
        return conv2d(up, flip_swap(w)), None

    y = _make(out, (x, w), backward, graph_backward, "conv2d")
    if bias is not None:
        if bias.data.shape != (1, k_out, 1, 1):
            raise ShapeError(f"bias shape {bias.shape} != (1, {k_out}, 1, 1)")
        y = add(y, bias)
    return y


def dense(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Per-position linear map: weight (K, C, 1, 1) applied at every spatial
    location (a 1x1 convolution; vectors live as (B, C, 1, 1))."""
    if w.data.shape[2:] != (1, 1):
        raise ShapeError(f"dense weights are (K, C, 1, 1), got {w.shape}")
    return conv2d(x, w, bias)


def modulated_conv2d(x: Tensor, w: Tensor, styles: Tensor, demodulate: bool = True, eps: float = 1e-8) -> Tensor:
    """Per-sample style modulation with optional weight demodulation.

    Scaling the input by the style then convolving with the shared kernel
    equals convolving with the per-sample modulated kernel; the
    demodulation factor 1/sqrt(sum((w*s)^2) + eps) is assembled from
    primitives so its gradients come from the engine.
    """
    if styles.data.shape[0] != x.data.shape[0] or styles.data.shape[1] != x.data.shape[1]:
        raise ShapeError(f"styles {styles.shape} do not match input {x.shape}")
    if styles.data.shape[2:] != (1, 1):
        raise ShapeError(f"styles are (B, C, 1, 1), got {styles.shape}")
    y = conv2d(mul(x, styles), w)
    if demodulate:
        per_in = reduce_sum(mul(w, w), axes=(2, 3))        # (K, C, 1, 1)
        denom = conv2d(mul(styles, styles), per_in)        # (B, K, 1, 1)
        y = mul(y, rsqrt_eps(denom, eps))
    return y


# ---------------------------------------------------------------------------
# resampling (separable 1D matrices; backward = transposed matrices)


def _nearest_matrix(n_out: int, n_in: int, dtype) -> np.ndarray:
    m = np.zeros((n_out, n_in), dtype=dtype)
    for i in range(n_out):
        m[i, min(i * n_in // n_out, n_in - 1)] = 1.0
    return m


def _bilinear_matrix(n_out: int, n_in: int, dtype) -> np.ndarray:
    """Half-pixel-center bilinear resize matrix with border clamp."""
    m = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        s = min(max((i + 0.5) * scale - 0.5, 0.0), n_in - 1.0)
        j0 = min(int(np.floor(s)), n_in - 2) if n_in > 1 else 0
        j0 = max(j0, 0)
        f = s - j0
        if n_in == 1:
            m[i, 0] = 1.0
        else:
            m[i, j0] += 1.0 - f
            m[i, j0 + 1] += f
    return m.astype(dtype)


_MATRIX_CACHE: dict = {}


def _resample_matrix(kind: str, n_out: int, n_in: int, dtype) -> np.ndarray:
    key = (kind, n_out, n_in, np.dtype(dtype).str)
    if key not in _MATRIX_CACHE:
        if kind == "nearest":
            _MATRIX_CACHE[key] = _nearest_matrix(n_out, n_in, dtype)
        elif kind == "bilinear":
            _MATRIX_CACHE[key] = _bilinear_matrix(n_out, n_in, dtype)
        else:
            raise ValueError(kind)
    return _MATRIX_CACHE[key]


def _resample(x: Tensor, mh: np.ndarray, mw: np.ndarray, op: str) -> Tensor:
    out = np.matmul(np.matmul(mh, x.data), mw.T)

    def backward(up):
        return (np.matmul(np.matmul(mh.T, up), mw),)

    def graph_backward(up):
        return (_resample(up, np.ascontiguousarray(mh.T), np.ascontiguousarray(mw.T), op + "_T"),)

    return _make(out, (x,), backward, graph_backward, op)


def upsample_nearest2(x: Tensor) -> Tensor:
    b, c, h, w = x.data.shape
    return _resample(
        x,
        _resample_matrix("nearest", 2 * h, h, x.data.dtype),
        _resample_matrix("nearest", 2 * w, w, x.data.dtype),
        "up_nearest2",
    )


def upsample_bilinear2(x: Tensor) -> Tensor:
    b, c, h, w = x.data.shape
    return _resample(
        x,
        _resample_matrix("bilinear", 2 * h, h, x.data.dtype),
        _resample_matrix("bilinear", 2 * w, w, x.data.dtype),
        "up_bilinear2",
    )


def avgpool2(x: Tensor) -> Tensor:
    b, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avgpool2 needs even spatial dims, got {h}x{w}")
    # identical to a bilinear half-size resize under half-pixel centers
    return _resample(
        x,
        _resample_matrix("bilinear", h // 2, h, x.data.dtype),
        _resample_matrix("bilinear", w // 2, w, x.data.dtype),
        "avgpool2",
    )


def resize_bilinear(x: Tensor, height: int, width: int) -> Tensor:
    b, c, h, w = x.data.shape
    if height < 1 or width < 1:
        raise ShapeError(f"resize target {height}x{width} invalid")
    if (height, width) == (h, w):
        return x
    return _resample(
        x,
        _resample_matrix("bilinear", height, h, x.data.dtype),
        _resample_matrix("bilinear", width, w, x.data.dtype),
        "resize_bilinear",
    )


# ---------------------------------------------------------------------------
# warping as a graph node


def warp(canonical: Tensor, field: Tensor) -> Tensor:
    """Batched backward warp: frame b = bilinear gather of canonical[b] at
    the grid shifted by field[b]."""
    if canonical.data.shape[0] != field.data.shape[0] or field.data.shape[1] != 2:
        raise ShapeError(f"warp shapes: canonical {canonical.shape}, field {field.shape}")
    if canonical.data.shape[2:] != field.data.shape[2:]:
        raise ShapeError(f"warp spatial dims differ: {canonical.shape} vs {field.shape}")
    out = np.stack([grids.warp(c, f) for c, f in zip(canonical.data, field.data)])

    def backward(up):
        gc = np.empty_like(canonical.data) if canonical.requires_grad else None
        gf = np.empty_like(field.data) if field.requires_grad else None
        for i in range(canonical.data.shape[0]):
            gi, gfi = grids.warp_gradients(canonical.data[i], field.data[i], up[i])
            if gc is not None:
                gc[i] = gi
            if gf is not None:
                gf[i] = gfi
        return gc, gf

    return _make(out, (canonical, field), backward, None, "warp")


# ---------------------------------------------------------------------------
# gradient replay


def grad_graph(root: Tensor, wrt: Tensor) -> Tensor:
    """Express d(sum(root)) / d(wrt) as a fresh graph over the same
    parameters, so penalties on this gradient train with one more ordinary
    backward pass.  Each element of ``root`` must depend only on the
    matching batch element of ``wrt`` for the per-sample reading (true for
    the per-frame discriminator)."""
    if not root.requires_grad:
        raise RuntimeError("root does not require grad")
    order = _topo(root)
    present = {id(n) for n in order}
    if id(wrt) not in present:
        raise RuntimeError("wrt is not an ancestor of root")
    reach = {id(wrt)}
    for node in order:  # parents precede consumers
        if any(id(p) in reach for p in node.parents):
            reach.add(id(node))
    if id(root) not in reach:
        raise RuntimeError("no differentiable path from root to wrt")
    bar: dict[int, Tensor] = {id(root): Tensor(np.ones_like(root.data))}
    for node in reversed(order):
        if node is wrt or id(node) not in reach or id(node) not in bar:
            continue
        if node._graph_backward is None:
            raise RuntimeError(f"op {node.op!r} has no graph-mode backward")
        for parent, g in zip(node.parents, node._graph_backward(bar[id(node)])):
            if g is None or id(parent) not in reach:
                continue
            bar[id(parent)] = g if id(parent) not in bar else add(bar[id(parent)], g)
    return bar[id(wrt)]
