"""Finite-difference verification for every differentiable op.

Each registered check builds a small double-precision graph ending in a
scalar, compares ``backward`` gradients against central finite differences
(step 1e-4), and reports the worst relative error (normalized by the
larger of 1 and the finite-difference magnitude).  The whole suite is a
standing gate: the ``gradcheck`` CLI runs it and fails on any violation.

Inputs are sampled away from kinks (abs/leaky/clamp corners, bilinear
lattice points, border saturation) so the two-sided differences probe a
region where the function is smooth.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import grids
from .rng import keyed_rng

TOLERANCE = 1e-4
_STEP = 1e-4

_REGISTRY: list[tuple[str, object]] = []


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    passed: bool
    seconds: float


def register(name):
    def deco(fn):
        _REGISTRY.append((name, fn))
        return fn

    return deco


def check_names() -> list[str]:
    return [name for name, _ in _REGISTRY]


def _standard(builder):
    """Wrap an (arrays, forward) builder into a max-rel-err check."""

    def run(rng: np.random.Generator) -> float:
        arrays, forward = builder(rng)
        tensors = [ad.tensor(a, requires_grad=True) for a in arrays]
        out = forward(*tensors)
        out.backward()
        worst = 0.0
        for i, base in enumerate(arrays):
            analytic = tensors[i].grad
            if analytic is None:
                analytic = np.zeros_like(base)
            fd = np.zeros_like(base)
            for idx in np.ndindex(base.shape):
                plus = base.copy()
                plus[idx] += _STEP
                minus = base.copy()
                minus[idx] -= _STEP
                with ad.no_grad():
                    fp = forward(*[ad.tensor(plus if j == i else arrays[j]) for j in range(len(arrays))]).item()
                    fm = forward(*[ad.tensor(minus if j == i else arrays[j]) for j in range(len(arrays))]).item()
                fd[idx] = (fp - fm) / (2 * _STEP)
            denom = max(float(np.abs(fd).max()), 1.0)
            worst = max(worst, float(np.abs(analytic - fd).max()) / denom)
        return worst

    return run


def _weighted_sum(rng, shape):
    w = rng.standard_normal(shape)

    def reduce(t):
        return ad.reduce_sum(ad.mul(t, ad.tensor(w)))

    return reduce


def _safe_uniform(rng, shape, lo=0.25, hi=1.0):
    """Magnitudes in [lo, hi] with random signs: away from zero-kinks."""
    return rng.uniform(lo, hi, shape) * np.where(rng.random(shape) < 0.5, -1.0, 1.0)


# ---------------------------------------------------------------------------
# elementwise and reductions


@register("add_broadcast")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        b = rng.standard_normal((1, 3, 1, 1))
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x, b], lambda xt, bt: red(ad.add(xt, bt))

    return _standard(build)(rng)


@register("mul_broadcast")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        s = rng.standard_normal((2, 3, 1, 1))
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x, s], lambda xt, st: red(ad.mul(xt, st))

    return _standard(build)(rng)


@register("leaky_rectifier")
def _(rng):
    def build(rng):
        x = _safe_uniform(rng, (2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x], lambda xt: red(ad.leaky(xt, 0.2))

    return _standard(build)(rng)


@register("abs")
def _(rng):
    def build(rng):
        x = _safe_uniform(rng, (2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x], lambda xt: red(ad.abs_(xt))

    return _standard(build)(rng)


@register("clamp")
def _(rng):
    def build(rng):
        x = rng.uniform(-2, 2, (2, 3, 4, 4))
        # keep samples > fd step away from the clamp corners at +-1
        x = np.where(np.abs(np.abs(x) - 1.0) < 0.05, 0.5, x)
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x], lambda xt: red(ad.clamp(xt, -1.0, 1.0))

    return _standard(build)(rng)


@register("sin_cos")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x], lambda xt: red(ad.add(ad.sin(xt), ad.cos(xt)))

    return _standard(build)(rng)


@register("softplus")
def _(rng):
    def build(rng):
        x = rng.uniform(-3, 3, (2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 3, 4, 4))
        return [x], lambda xt: red(ad.softplus(xt))

    return _standard(build)(rng)


@register("rsqrt_eps")
def _(rng):
    def build(rng):
        x = rng.uniform(0.5, 2.0, (2, 3, 1, 1))
        red = _weighted_sum(rng, (2, 3, 1, 1))
        return [x], lambda xt: red(ad.rsqrt_eps(xt))

    return _standard(build)(rng)


@register("reduce_mean_full")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        return [x], lambda xt: ad.reduce_mean(xt)

    return _standard(build)(rng)


@register("reduce_mean_spatial")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 3, 1, 1))
        return [x], lambda xt: red(ad.reduce_mean(xt, axes=(2, 3)))

    return _standard(build)(rng)


@register("reduce_sum_channels")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 1, 4, 4))
        return [x], lambda xt: red(ad.reduce_sum(xt, axes=(1,)))

    return _standard(build)(rng)


@register("normalize_rms")
def _(rng):
    def build(rng):
        x = rng.uniform(0.3, 1.5, (2, 6, 1, 1)) * np.where(rng.random((2, 6, 1, 1)) < 0.5, -1, 1)
        red = _weighted_sum(rng, (2, 6, 1, 1))
        return [x], lambda xt: red(ad.normalize_rms(xt))

    return _standard(build)(rng)


# ---------------------------------------------------------------------------
# shape plumbing


@register("concat_slice")
def _(rng):
    def build(rng):
        a = rng.standard_normal((2, 2, 4, 4))
        b = rng.standard_normal((2, 3, 4, 4))
        red = _weighted_sum(rng, (2, 3, 4, 4))

        def fwd(at, bt):
            cat = ad.concat([at, bt])
            return red(ad.slice_channels(cat, 1, 4))

        return [a, b], fwd

    return _standard(build)(rng)


@register("concat_batch")
def _(rng):
    def build(rng):
        a = rng.standard_normal((2, 2, 3, 3))
        b = rng.standard_normal((1, 2, 3, 3))
        red = _weighted_sum(rng, (3, 2, 3, 3))
        return [a, b], lambda at, bt: red(ad.concat_batch([at, bt]))

    return _standard(build)(rng)


@register("expand_batch")
def _(rng):
    def build(rng):
        x = rng.standard_normal((1, 3, 2, 2))
        red = _weighted_sum(rng, (4, 3, 2, 2))
        return [x], lambda xt: red(ad.expand_batch(xt, 4))

    return _standard(build)(rng)


@register("repeat_batch")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 2, 2))
        red = _weighted_sum(rng, (6, 3, 2, 2))
        return [x], lambda xt: red(ad.repeat_batch(xt, 3))

    return _standard(build)(rng)


@register("fold_unfold_frames")
def _(rng):
    def build(rng):
        x = rng.standard_normal((6, 2, 2, 2))
        red = _weighted_sum(rng, (6, 2, 2, 2))

        def fwd(xt):
            folded = ad.fold_frames(xt, 3)  # (2, 6, 2, 2)
            return red(ad.unfold_frames(folded, 3))

        return [x], fwd

    return _standard(build)(rng)


@register("transpose_flip_kernels")
def _(rng):
    def build(rng):
        w = rng.standard_normal((3, 2, 3, 3))
        red1 = _weighted_sum(rng, (2, 3, 3, 3))
        red2 = _weighted_sum(rng, (2, 3, 3, 3))
        return [w], lambda wt: ad.add(red1(ad.transpose01(wt)), red2(ad.flip_swap(wt)))

    return _standard(build)(rng)


# ---------------------------------------------------------------------------
# convolution family


@register("conv2d_3x3")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        w = rng.standard_normal((4, 3, 3, 3)) / 3.0
        b = rng.standard_normal((1, 4, 1, 1))
        red = _weighted_sum(rng, (2, 4, 4, 4))
        return [x, w, b], lambda xt, wt, bt: red(ad.conv2d(xt, wt, bt))

    return _standard(build)(rng)


@register("conv2d_1x1")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        w = rng.standard_normal((2, 3, 1, 1))
        red = _weighted_sum(rng, (2, 2, 4, 4))
        return [x, w], lambda xt, wt: red(ad.conv2d(xt, wt))

    return _standard(build)(rng)


@register("dense")
def _(rng):
    def build(rng):
        x = rng.standard_normal((3, 5, 1, 1))
        w = rng.standard_normal((4, 5, 1, 1))
        b = rng.standard_normal((1, 4, 1, 1))
        red = _weighted_sum(rng, (3, 4, 1, 1))
        return [x, w, b], lambda xt, wt, bt: red(ad.dense(xt, wt, bt))

    return _standard(build)(rng)


@register("modulated_conv_demod")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        w = rng.standard_normal((4, 3, 3, 3)) / 3.0
        s = rng.uniform(0.5, 1.5, (2, 3, 1, 1))
        red = _weighted_sum(rng, (2, 4, 4, 4))
        return [x, w, s], lambda xt, wt, st: red(ad.modulated_conv2d(xt, wt, st, demodulate=True))

    return _standard(build)(rng)


@register("modulated_conv_plain")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 3, 4, 4))
        w = rng.standard_normal((2, 3, 1, 1))
        s = rng.uniform(0.5, 1.5, (2, 3, 1, 1))
        red = _weighted_sum(rng, (2, 2, 4, 4))
        return [x, w, s], lambda xt, wt, st: red(ad.modulated_conv2d(xt, wt, st, demodulate=False))

    return _standard(build)(rng)


# ---------------------------------------------------------------------------
# resampling


@register("upsample_nearest2")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 2, 3, 4))
        red = _weighted_sum(rng, (2, 2, 6, 8))
        return [x], lambda xt: red(ad.upsample_nearest2(xt))

    return _standard(build)(rng)


@register("upsample_bilinear2")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 2, 3, 4))
        red = _weighted_sum(rng, (2, 2, 6, 8))
        return [x], lambda xt: red(ad.upsample_bilinear2(xt))

    return _standard(build)(rng)


@register("avgpool2")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 2, 4, 6))
        red = _weighted_sum(rng, (2, 2, 2, 3))
        return [x], lambda xt: red(ad.avgpool2(xt))

    return _standard(build)(rng)


@register("resize_bilinear_arbitrary")
def _(rng):
    def build(rng):
        x = rng.standard_normal((2, 2, 4, 4))
        red = _weighted_sum(rng, (2, 2, 7, 3))
        return [x], lambda xt: red(ad.resize_bilinear(xt, 7, 3))

    return _standard(build)(rng)


# ---------------------------------------------------------------------------
# warping and the smoothness composite


def _lattice_safe_field(rng, h, w):
    base = rng.integers(-1, 2, size=(2, h, w)).astype(np.float64)
    frac = rng.uniform(0.3, 0.45, size=(2, h, w))
    field = base + frac
    ys, xs = np.mgrid[0:h, 0:w]
    field[0] = np.clip(xs + field[0], 0.3, w - 1.3) - xs
    field[1] = np.clip(ys + field[1], 0.3, h - 1.3) - ys
    return field


@register("warp_bilinear")
def _(rng):
    def build(rng):
        img = rng.uniform(-1, 1, (2, 3, 4, 5))
        field = np.stack([_lattice_safe_field(rng, 4, 5) for _ in range(2)])
        red = _weighted_sum(rng, (2, 3, 4, 5))
        return [img, field], lambda it, ft: red(ad.warp(it, ft))

    return _standard(build)(rng)


@register("smoothness_composite")
def _(rng):
    def build(rng):
        fields = rng.standard_normal((3, 2, 3, 3))
        weights = rng.uniform(0.2, 1.0, (1, 1, 3, 3))

        def fwd(ft):
            f0 = ad.slice_channels(ft, 0, 2)
            f1 = ad.slice_channels(ft, 2, 4)
            f2 = ad.slice_channels(ft, 4, 6)
            flow_a = ad.sub(f1, f0)
            flow_b = ad.sub(f2, f1)
            diff = ad.abs_(ad.sub(flow_b, flow_a))
            return ad.reduce_mean(ad.mul(diff, ad.tensor(weights)))

        # ensure |flow_b - flow_a| stays away from 0 so abs is smooth
        stacked = fields.reshape(1, 6, 3, 3)
        d = (stacked[0, 4:6] - stacked[0, 2:4]) - (stacked[0, 2:4] - stacked[0, 0:2])
        bump = np.where(np.abs(d) < 0.2, 0.5, 0.0)
        stacked = stacked.copy()
        stacked[0, 4:6] += bump
        return [stacked], fwd

    return _standard(build)(rng)


# ---------------------------------------------------------------------------
# gradient replay (the penalty-on-gradient path)


@register("gradient_replay_penalty")
def _(rng):
    """d/dtheta of mean ||d net/d x||^2 via graph replay vs. finite
    differences over the parameters — the mechanism behind the
    discriminator gradient penalty, checked to second order."""
    x0 = rng.standard_normal((2, 2, 4, 4))
    w1 = rng.standard_normal((3, 2, 3, 3)) / 3.0
    b1 = rng.standard_normal((1, 3, 1, 1))
    w2 = rng.standard_normal((1, 3, 1, 1))
    params = [w1, b1, w2]

    def forward_logit(xt, p):
        h = ad.leaky(ad.conv2d(xt, p[0], p[1]), 0.2)
        h = ad.avgpool2(h)
        h = ad.reduce_mean(h, axes=(2, 3))
        return ad.dense(h, p[2])  # (B, 1, 1, 1)

    def penalty_value(arrs) -> float:
        xt = ad.tensor(x0, requires_grad=True)
        pts = [ad.tensor(a, requires_grad=True) for a in arrs]
        logit = forward_logit(xt, pts)
        logit.backward(seed=np.ones_like(logit.data))
        g = xt.grad
        return float(np.mean(np.sum(g * g, axis=(1, 2, 3))))

    # analytic: replay graph, then one ordinary backward
    xt = ad.tensor(x0, requires_grad=True)
    pts = [ad.tensor(a, requires_grad=True) for a in params]
    logit = forward_logit(xt, pts)
    g = ad.grad_graph(logit, xt)
    per_sample = ad.reduce_sum(ad.mul(g, g), axes=(1, 2, 3))
    penalty = ad.reduce_mean(per_sample, axes=(0,))
    penalty.backward()
    worst = 0.0
    for i, base in enumerate(params):
        analytic = pts[i].grad
        if analytic is None:
            # no second-order path (e.g. biases act only through the
            # piecewise-constant rectifier masks) -> true gradient is 0 a.e.
            analytic = np.zeros_like(base)
        fd = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus = [a.copy() for a in params]
            plus[i][idx] += _STEP
            minus = [a.copy() for a in params]
            minus[i][idx] -= _STEP
            fd[idx] = (penalty_value(plus) - penalty_value(minus)) / (2 * _STEP)
        denom = max(float(np.abs(fd).max()), 1.0)
        worst = max(worst, float(np.abs(analytic - fd).max()) / denom)
    return worst


# ---------------------------------------------------------------------------
# driver


def run_check(name: str, seed: int = 0) -> CheckResult:
    fn = dict(_REGISTRY)[name]
    rng = keyed_rng(seed, f"gradcheck/{name}")
    start = time.perf_counter()
    err = float(fn(rng))
    return CheckResult(name, err, err < TOLERANCE, time.perf_counter() - start)


def run_all(seed: int = 0) -> list[CheckResult]:
    return [run_check(name, seed) for name, _ in _REGISTRY]
