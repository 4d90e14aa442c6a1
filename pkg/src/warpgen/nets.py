"""The four networks at desk scale: a style-modulated canonical image
generator, a deformation-field generator conditioned on canonical
features, a lightweight motion encoder, and a sparse-frame video
discriminator with separate single-frame and multi-frame heads.

Videos are produced by warping one generated canonical image with
per-frame generated deformation fields; the deformation generator's final
projection starts at exactly zero so an untrained bundle renders every
frame as a copy of the canonical image.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from . import autodiff as ad
from . import rng as keyed
from .containers import load_gdp, save_gdp
from .errors import ShapeError
from .grids import CanonicalImage, DeformationField, VideoClip
from .optim import (
    ParamStore,
    init_conv,
    init_dense,
    init_xavier_conv,
    merge_stores,
    split_arrays,
)

INIT_MODES = ("zero", "xavier", "no_multiplier")


@dataclass(frozen=True)
class NetConfig:
    resolution: int = 32
    latent_dim: int = 64
    widths: tuple = (128, 64, 32, 32)  # per block, starting at 4x4
    conditioning_layer: int | None = None  # block tap index; None = penultimate
    anchor_spacing: int = 8
    motion_freqs: int = 8
    time_freqs: int = 4
    disc_frames: int = 3
    width_mult: float = 1.0
    init_mode: str = "zero"

    def __post_init__(self):
        if self.resolution < 8 or self.resolution & (self.resolution - 1):
            raise ValueError(f"resolution must be a power of two >= 8, got {self.resolution}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode {self.init_mode!r} not in {INIT_MODES}")
        if self.anchor_spacing <= 0:
            raise ValueError(f"anchor spacing must be positive, got {self.anchor_spacing}")
        if not (0.0 < self.width_mult <= 1.0):
            raise ValueError(f"width_mult must be in (0, 1], got {self.width_mult}")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.tap_index > self.n_blocks:
            raise ValueError(
                f"conditioning layer {self.conditioning_layer} out of range "
                f"(0..{self.n_blocks} for {self.n_blocks} blocks + image)"
            )

    @property
    def block_resolutions(self) -> list[int]:
        out, r = [], 4
        while r <= self.resolution:
            out.append(r)
            r *= 2
        return out

    @property
    def n_blocks(self) -> int:
        return len(self.block_resolutions)

    @property
    def tap_index(self) -> int:
        return self.n_blocks - 1 if self.conditioning_layer is None else int(self.conditioning_layer)

    def width(self, block_index: int) -> int:
        base = self.widths[min(block_index, len(self.widths) - 1)]
        return max(int(round(base * self.width_mult)), 4)

    def width_at(self, resolution: int) -> int:
        return self.width(self.block_resolutions.index(resolution))

    @property
    def fc_channels(self) -> int:
        """Channel count of the conditioning feature map."""
        return 3 if self.tap_index == self.n_blocks else self.width(self.tap_index)

    @property
    def fc_resolution(self) -> int:
        return self.resolution if self.tap_index == self.n_blocks else self.block_resolutions[min(self.tap_index, self.n_blocks - 1)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        d["widths"] = tuple(d.get("widths", (128, 64, 32, 32)))
        known = {f.name for f in cls.__dataclass_fields__.values()}
        return cls(**{k: v for k, v in d.items() if k in known})


# ---------------------------------------------------------------------------
# building blocks


class _ModConv:
    """Style-modulated convolution + bias; optional weight demodulation."""

    def __init__(self, store, name, rng, in_ch, out_ch, style_dim, k=3, demodulate=True, weight_init="normal"):
        if weight_init == "zero":
            w0 = np.zeros((out_ch, in_ch, k, k), np.float32)
        elif weight_init == "xavier":
            w0 = init_xavier_conv(rng, out_ch, in_ch, k)
        else:
            w0 = init_conv(rng, out_ch, in_ch, k)
        self.weight = store.param(f"{name}.weight", w0)
        self.bias = store.param(f"{name}.bias", np.zeros((1, out_ch, 1, 1), np.float32))
        self.style_w = store.param(f"{name}.style.weight", init_dense(rng, in_ch, style_dim))
        # bias 1 so modulation starts as identity scaling
        self.style_b = store.param(f"{name}.style.bias", np.ones((1, in_ch, 1, 1), np.float32))
        self.demodulate = demodulate

    def __call__(self, x, style_latent):
        s = ad.dense(style_latent, self.style_w, self.style_b)
        y = ad.modulated_conv2d(x, self.weight, s, demodulate=self.demodulate)
        return ad.add(y, self.bias)


class _Dense:
    def __init__(self, store, name, rng, in_ch, out_ch):
        self.w = store.param(f"{name}.weight", init_dense(rng, out_ch, in_ch))
        self.b = store.param(f"{name}.bias", np.zeros((1, out_ch, 1, 1), np.float32))

    def __call__(self, x):
        return ad.dense(x, self.w, self.b)


class MappingNet:
    """z -> w: RMS-normalize the latent, then a 2-layer MLP."""

    def __init__(self, store: ParamStore, rng, latent_dim: int):
        self.fc0 = _Dense(store, "fc0", rng, latent_dim, latent_dim)
        self.fc1 = _Dense(store, "fc1", rng, latent_dim, latent_dim)

    def __call__(self, z: ad.Tensor) -> ad.Tensor:
        h = ad.leaky(self.fc0(ad.normalize_rms(z)))
        return ad.leaky(self.fc1(h))


class CanonicalGenerator:
    """Const 4x4 input, nearest-upsampled blocks of two modulated convs,
    then a 1x1 projection to RGB clamped to [-1, 1].  Every block output
    plus the image itself is exposed as a conditioning tap."""

    def __init__(self, store: ParamStore, config: NetConfig, rng):
        self.config = config
        w0 = config.width(0)
        self.const = store.param("const", rng.standard_normal((1, w0, 4, 4)).astype(np.float32))
        self.blocks = []
        prev = w0
        for i, res in enumerate(config.block_resolutions):
            w = config.width(i)
            conv0 = _ModConv(store, f"b{res}.conv0", rng, prev, w, config.latent_dim)
            conv1 = _ModConv(store, f"b{res}.conv1", rng, w, w, config.latent_dim)
            self.blocks.append((res, conv0, conv1))
            prev = w
        self.torgb = _ModConv(store, "torgb", rng, prev, 3, config.latent_dim, k=1, demodulate=False)

    def __call__(self, w_latent: ad.Tensor, batch: int):
        x = ad.expand_batch(self.const, batch)
        taps = []
        for res, conv0, conv1 in self.blocks:
            if res > 4:
                x = ad.upsample_nearest2(x)
            x = ad.leaky(conv0(x, w_latent))
            x = ad.leaky(conv1(x, w_latent))
            taps.append(x)
        img = ad.clamp(self.torgb(x, w_latent), -1.0, 1.0)
        taps.append(img)
        return img, taps


class MotionEncoder:
    """Noise anchors every ``anchor_spacing`` frames, linearly interpolated
    to the requested time, mapped by a 2-layer MLP, and concatenated with
    sine/cosine features of t at learned (small-initialized, non-repeating)
    frequencies."""

    def __init__(self, store: ParamStore, config: NetConfig, rng):
        self.config = config
        latent = config.latent_dim
        nf = config.motion_freqs
        if 2 * nf >= latent:
            raise ValueError(f"{nf} frequency pairs do not fit a {latent}-dim code")
        self.fc0 = _Dense(store, "fc0", rng, latent, latent)
        self.fc1 = _Dense(store, "fc1", rng, latent, latent - 2 * nf)
        ladder = 0.01 * (np.arange(1, nf + 1, dtype=np.float32) / nf)
        self.freqs = store.param("freqs", ladder.reshape(1, nf, 1, 1))

    def anchor_noise(self, motion_seed: int, times, stream_index: int = 0) -> np.ndarray:
        """Interpolated anchor noise for each time, (T, latent) float32."""
        delta = self.config.anchor_spacing
        times = [float(t) for t in times]
        if any(t < 0 for t in times):
            raise ValueError(f"times must be >= 0, got {times}")
        top = int(np.floor(max(times) / delta)) + 1
        anchors = np.stack(
            [
                keyed.normal(motion_seed, f"motion-anchor/{stream_index}", i, (self.config.latent_dim,))
                for i in range(top + 1)
            ]
        )
        out = np.empty((len(times), self.config.latent_dim), np.float32)
        for j, t in enumerate(times):
            k = min(int(np.floor(t / delta)), top - 1) if delta else 0
            frac = t / delta - k
            out[j] = (1.0 - frac) * anchors[k] + frac * anchors[k + 1]
        return out

    def __call__(self, motion_seed: int, times, stream_index: int = 0) -> ad.Tensor:
        """Motion codes for one clip, (len(times), latent, 1, 1)."""
        noise = self.anchor_noise(motion_seed, times, stream_index)
        z = ad.tensor(noise.reshape(len(times), -1, 1, 1))
        h = self.fc1(ad.leaky(self.fc0(z)))
        ts = ad.tensor(np.asarray(times, np.float32).reshape(-1, 1, 1, 1))
        ang = ad.mul(self.freqs, ts)
        return ad.concat([h, ad.sin(ang), ad.cos(ang)])


class DeformationGenerator:
    """Blocks mirror the canonical generator, with the canonical feature
    map resized and channel-concatenated at every block input.  Each block
    projects its features to a 2-channel field residual; the final block
    projects to multiplier-and-adder channels so the accumulated field is
    rescaled then shifted.  The final projection initializes to zero, so a
    fresh bundle emits exactly zero fields."""

    def __init__(self, store: ParamStore, config: NetConfig, rng):
        self.config = config
        style_dim = 2 * config.latent_dim  # motion style || per-frame code
        fc_ch = config.fc_channels
        w0 = config.width(0)
        self.const = store.param("const", rng.standard_normal((1, w0, 4, 4)).astype(np.float32))
        self.blocks = []
        prev = w0
        n = config.n_blocks
        for i, res in enumerate(config.block_resolutions):
            w = config.width(i)
            conv0 = _ModConv(store, f"b{res}.conv0", rng, prev + fc_ch, w, style_dim)
            conv1 = _ModConv(store, f"b{res}.conv1", rng, w, w, style_dim)
            last = i == n - 1
            if last:
                out_ch = 2 if config.init_mode == "no_multiplier" else 4
                weight_init = "xavier" if config.init_mode == "xavier" else "zero"
            else:
                out_ch = 2
                weight_init = "normal"
            toout = _ModConv(store, f"b{res}.toout", rng, w, out_ch, style_dim, k=1, demodulate=False, weight_init=weight_init)
            self.blocks.append((res, conv0, conv1, toout))
            prev = w

    def __call__(self, w_d: ad.Tensor, u_t: ad.Tensor, f_c: ad.Tensor, no_fc: bool = False) -> ad.Tensor:
        batch = u_t.data.shape[0]
        if w_d.data.shape[0] != batch:
            raise ShapeError(f"motion style batch {w_d.data.shape[0]} != code batch {batch}")
        if f_c.data.shape[0] != batch or f_c.data.shape[1] != self.config.fc_channels:
            raise ShapeError(
                f"conditioning features {f_c.shape} do not match bundle "
                f"(batch {batch}, {self.config.fc_channels} channels)"
            )
        style = ad.concat([w_d, u_t])
        x = ad.expand_batch(self.const, batch)
        field = None
        n = self.config.n_blocks
        for i, (res, conv0, conv1, toout) in enumerate(self.blocks):
            if res > 4:
                x = ad.upsample_nearest2(x)
                field = ad.upsample_bilinear2(field)
            if no_fc:
                cond = ad.tensor(np.zeros((batch, self.config.fc_channels, res, res), f_c.data.dtype))
            else:
                cond = ad.resize_bilinear(f_c, res, res)
            x = ad.concat([x, cond])
            x = ad.leaky(conv0(x, style))
            x = ad.leaky(conv1(x, style))
            out = toout(x, style)
            last = i == n - 1
            if field is None:
                field = ad.slice_channels(out, 2, 4) if (last and out.data.shape[1] == 4) else out
            elif last and out.data.shape[1] == 4:
                multiplier = ad.slice_channels(out, 0, 2)
                adder = ad.slice_channels(out, 2, 4)
                field = ad.add(ad.mul(field, multiplier), adder)
            else:
                field = ad.add(field, out)
        return field


class Discriminator:
    """Shared per-frame conv trunk (mirrored widths, average-pool
    downsampling) ending in a spatial mean, plus two dense heads over the
    concatenated per-frame features and time-delta encodings: a
    single-frame head for image pretraining and a fresh multi-frame head
    for video fine-tuning."""

    def __init__(self, config: NetConfig, seed: int = 0):
        self.config = config
        self.store = ParamStore()
        rng = keyed.keyed_rng(seed, "init/disc")
        res_list = list(reversed(config.block_resolutions))  # high -> low
        top_w = config.width_at(res_list[0])
        self.from_rgb_w = self.store.param("from_rgb.weight", init_conv(rng, top_w, 3, 1))
        self.from_rgb_b = self.store.param("from_rgb.bias", np.zeros((1, top_w, 1, 1), np.float32))
        self.convs = []
        prev = top_w
        for res in res_list:
            nxt = config.width_at(max(res // 2, 4))
            w = self.store.param(f"b{res}.conv.weight", init_conv(rng, nxt, prev, 3))
            b = self.store.param(f"b{res}.conv.bias", np.zeros((1, nxt, 1, 1), np.float32))
            self.convs.append((res, w, b))
            prev = nxt
        self.feature_dim = prev
        per_frame = self.feature_dim + 2 * config.time_freqs
        hidden = self.feature_dim
        rng_heads = keyed.keyed_rng(seed, "init/disc-heads")
        self.heads = {}
        for head, k in (("image", 1), ("video", config.disc_frames)):
            fc0_w = self.store.param(f"head_{head}.fc0.weight", init_dense(rng_heads, hidden, k * per_frame))
            fc0_b = self.store.param(f"head_{head}.fc0.bias", np.zeros((1, hidden, 1, 1), np.float32))
            fc1_w = self.store.param(f"head_{head}.fc1.weight", init_dense(rng_heads, 1, hidden))
            fc1_b = self.store.param(f"head_{head}.fc1.bias", np.zeros((1, 1, 1, 1), np.float32))
            self.heads[head] = (k, fc0_w, fc0_b, fc1_w, fc1_b)
        self._time_ladder = (np.pi / (2.0 ** (np.arange(config.time_freqs) + 2))).astype(np.float32)

    def reset_head(self, head: str, seed: int) -> None:
        """Freshly initialize one head (the video head at fine-tune start)."""
        k, fc0_w, fc0_b, fc1_w, fc1_b = self.heads[head]
        rng = keyed.keyed_rng(seed, f"init/disc-head-{head}")
        per_frame = self.feature_dim + 2 * self.config.time_freqs
        fc0_w.data = init_dense(rng, self.feature_dim, k * per_frame)
        fc0_b.data = np.zeros_like(fc0_b.data)
        fc1_w.data = init_dense(rng, 1, self.feature_dim)
        fc1_b.data = np.zeros_like(fc1_b.data)

    def trunk(self, x: ad.Tensor) -> ad.Tensor:
        h = ad.leaky(ad.add(ad.conv2d(x, self.from_rgb_w), self.from_rgb_b))
        for res, w, b in self.convs:
            h = ad.leaky(ad.add(ad.conv2d(h, w), b))
            if res > 4:
                h = ad.avgpool2(h)
        return ad.reduce_mean(h, axes=(2, 3))

    def time_encoding(self, times: np.ndarray) -> np.ndarray:
        """Sine/cosine features of per-clip time deltas, (B*k, 2F)."""
        times = np.asarray(times, np.float64)
        deltas = (times - times[:, :1]).reshape(-1)[:, None]  # (B*k, 1)
        ang = deltas * self._time_ladder[None, :]
        return np.concatenate([np.sin(ang), np.cos(ang)], axis=1).astype(np.float32)

    def logits(self, frames: ad.Tensor, times, head: str = "video") -> ad.Tensor:
        """Frames (B*k, 3, H, W) grouped clip-major; times (B, k) strictly
        increasing within each clip.  Returns (B, 1, 1, 1) logits."""
        k, fc0_w, fc0_b, fc1_w, fc1_b = self.heads[head]
        times = np.asarray(times, np.float64).reshape(-1, k)
        if frames.data.shape[0] != times.size:
            raise ShapeError(f"{frames.data.shape[0]} frames != {times.size} times")
        if k > 1 and not (np.diff(times, axis=1) > 0).all():
            raise ValueError("frame times must be strictly increasing within a clip")
        feats = self.trunk(frames)
        enc = ad.tensor(self.time_encoding(times).reshape(-1, 2 * self.config.time_freqs, 1, 1))
        per_frame = ad.concat([feats, enc])
        folded = ad.fold_frames(per_frame, k)
        h = ad.leaky(ad.dense(folded, fc0_w, fc0_b))
        return ad.dense(h, fc1_w, fc1_b)

    def save(self, path: str) -> None:
        self.store.save(path)

    def load(self, path: str) -> None:
        self.store.load(path)


# ---------------------------------------------------------------------------
# the bundle


class GeneratorBundle:
    """Mapping nets + canonical generator + motion encoder + deformation
    generator with their parameter stores; the sampling-time unit."""

    PARTS = ("map_c", "map_d", "g_c", "motion", "g_d")

    def __init__(self, config: NetConfig = NetConfig(), seed: int = 0):
        self.config = config
        self.seed = seed
        self.stores = {part: ParamStore() for part in self.PARTS}
        self.map_c = MappingNet(self.stores["map_c"], keyed.keyed_rng(seed, "init/map_c"), config.latent_dim)
        self.map_d = MappingNet(self.stores["map_d"], keyed.keyed_rng(seed, "init/map_d"), config.latent_dim)
        self.g_c = CanonicalGenerator(self.stores["g_c"], config, keyed.keyed_rng(seed, "init/g_c"))
        self.motion = MotionEncoder(self.stores["motion"], config, keyed.keyed_rng(seed, "init/motion"))
        self.g_d = DeformationGenerator(self.stores["g_d"], config, keyed.keyed_rng(seed, "init/g_d"))

    def canonical(self, z_c: ad.Tensor):
        """(image, conditioning feature) tensors for a batch of latents."""
        w_c = self.map_c(z_c)
        img, taps = self.g_c(w_c, z_c.data.shape[0])
        return img, taps[self.config.tap_index]

    def param_count(self) -> int:
        return sum(int(np.prod(p.data.shape)) for s in self.stores.values() for _, p in s.items())

    def image_stores(self) -> list[ParamStore]:
        """Stores trained during image pretraining."""
        return [self.stores["map_c"], self.stores["g_c"]]

    def motion_stores(self) -> list[ParamStore]:
        return [self.stores["map_d"], self.stores["motion"], self.stores["g_d"]]

    def all_stores(self) -> list[ParamStore]:
        return [self.stores[p] for p in self.PARTS]

    def save(self, path: str) -> None:
        save_gdp(path, merge_stores(self.stores))
        sidecar = {"config": self.config.to_dict(), "seed": self.seed}
        tmp = path + ".json.tmp"
        with open(tmp, "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)
        os.replace(tmp, path + ".json")

    @classmethod
    def load(cls, path: str) -> "GeneratorBundle":
        if os.path.isdir(path):  # accept a checkpoint dir holding bundle.gdp
            path = os.path.join(path, "bundle.gdp")
        with open(path + ".json") as fh:
            sidecar = json.load(fh)
        bundle = cls(NetConfig.from_dict(sidecar["config"]), seed=int(sidecar.get("seed", 0)))
        arrays = load_gdp(path)
        for part, store in bundle.stores.items():
            store.load_arrays(split_arrays(arrays, part))
        return bundle


# ---------------------------------------------------------------------------
# differentiable sampling paths (used by training) and convenience wrappers


def clip_latents(bundle: GeneratorBundle, seed: int, batch: int):
    """Per-clip canonical and motion latents, (B, latent, 1, 1) each."""
    z_c = keyed.normal(seed, "z_c", 0, (batch, bundle.config.latent_dim, 1, 1))
    z_d = keyed.normal(seed, "z_d", 0, (batch, bundle.config.latent_dim, 1, 1))
    return ad.tensor(z_c), ad.tensor(z_d)


def render_frames(
    bundle: GeneratorBundle,
    z_c: ad.Tensor,
    z_d: ad.Tensor,
    motion_seed: int,
    times: np.ndarray,
    no_fc: bool = False,
    detach_image: bool = False,
):
    """Differentiable pipeline: latents -> canonical -> per-time fields ->
    warped frames.

    ``times`` is (B, k): k sampled frame times per clip; clip b's motion
    noise comes from stream (motion_seed, b).  Returns (frames (B*k,3,H,W),
    canonical (B,3,H,W), fields (B*k,2,H,W)) tensors.  ``detach_image``
    cuts the gradient path through the warped pixels while keeping the
    conditioning-feature path alive (a diagnostic mode)."""
    times = np.asarray(times)
    if times.ndim != 2:
        raise ShapeError(f"times must be (batch, k), got {times.shape}")
    batch, k = times.shape
    if z_c.data.shape[0] != batch:
        raise ShapeError(f"latent batch {z_c.data.shape[0]} != times batch {batch}")
    img, f_c = bundle.canonical(z_c)
    w_d = bundle.map_d(z_d)
    codes = ad.concat_batch([bundle.motion(motion_seed, times[b], stream_index=b) for b in range(batch)])
    fields = bundle.g_d(ad.repeat_batch(w_d, k), codes, ad.repeat_batch(f_c, k), no_fc=no_fc)
    source = ad.stop_grad(img) if detach_image else img
    frames = ad.warp(ad.repeat_batch(source, k), fields)
    return frames, img, fields


@dataclass
class SampleResult:
    canonical: np.ndarray  # (3, H, W)
    fields: np.ndarray  # (n, 2, H, W)
    frames: np.ndarray  # (n, 3, H, W)

    def clip(self) -> VideoClip:
        return VideoClip(self.frames)


def sample_video(
    bundle: GeneratorBundle,
    seed: int,
    n_frames: int,
    motion_seed: int | None = None,
    no_fc: bool = False,
) -> SampleResult:
    """Deterministic sampling: latents keyed by ``seed``, motion noise keyed
    by ``motion_seed`` (defaults to ``seed``), frames at t = 1..n.

    ``no_fc`` zeroes the canonical-feature conditioning, matching how a
    model trained with that ablation flag computed its fields — sampling
    such a model with the conditioning active would route real features
    through weights that never trained."""
    if n_frames < 1:
        raise ValueError(f"need at least one frame, got {n_frames}")
    motion_seed = seed if motion_seed is None else motion_seed
    with ad.no_grad():
        z_c, z_d = clip_latents(bundle, seed, 1)
        times = np.arange(1, n_frames + 1, dtype=np.float64).reshape(1, -1)
        frames, img, fields = render_frames(bundle, z_c, z_d, motion_seed, times, no_fc=no_fc)
    return SampleResult(canonical=img.data[0].copy(), fields=fields.data.copy(), frames=frames.data.copy())


def warp_canonical(canonical: np.ndarray, fields: np.ndarray) -> np.ndarray:
    """Render frames by warping one (3, H, W) image with (n, 2, H, W) fields."""
    from . import grids as g

    return np.stack([g.warp(canonical, f) for f in fields])


# spec-surface wrappers over single samples -------------------------------


def generate_canonical(bundle: GeneratorBundle, z_c: np.ndarray):
    """One canonical image + conditioning features from a latent vector."""
    z = np.asarray(z_c, np.float32).reshape(1, -1, 1, 1)
    if z.shape[1] != bundle.config.latent_dim:
        raise ShapeError(f"latent has {z.shape[1]} dims, expected {bundle.config.latent_dim}")
    if not np.isfinite(z).all():
        raise ValueError("non-finite latent")
    with ad.no_grad():
        img, f_c = bundle.canonical(ad.tensor(z))
    return CanonicalImage(img.data[0]), f_c.data[0].copy()


def motion_codes(bundle: GeneratorBundle, seed: int, times, delta: int | None = None) -> np.ndarray:
    """Motion codes (T, latent) for the requested times."""
    if delta is not None and delta != bundle.config.anchor_spacing:
        raise ValueError(
            f"anchor spacing {delta} disagrees with bundle config {bundle.config.anchor_spacing}"
        )
    with ad.no_grad():
        u = bundle.motion(seed, list(times))
    return u.data.reshape(len(list(times)), -1).copy()


def generate_deformation(bundle: GeneratorBundle, z_d: np.ndarray, u_t: np.ndarray, f_c: np.ndarray, frame_index: int = 1) -> DeformationField:
    """One deformation field from a motion latent, one motion code and the
    canonical features."""
    z = np.asarray(z_d, np.float32).reshape(1, -1, 1, 1)
    u = np.asarray(u_t, np.float32).reshape(1, -1, 1, 1)
    f = np.asarray(f_c, np.float32)[None]
    with ad.no_grad():
        w_d = bundle.map_d(ad.tensor(z))
        field = bundle.g_d(w_d, ad.tensor(u), ad.tensor(f))
    return DeformationField(field.data[0], frame_index=frame_index)


def discriminate(disc: Discriminator, frames: np.ndarray, times, head: str | None = None) -> float:
    """Scalar logit for one clip's sampled frames (k, 3, H, W)."""
    frames = np.asarray(frames, np.float32)
    times = list(times)
    if head is None:
        head = "image" if len(times) == 1 else "video"
    with ad.no_grad():
        logit = disc.logits(ad.tensor(frames), np.asarray(times, np.float64).reshape(1, -1), head=head)
    return float(logit.data.reshape(()))
