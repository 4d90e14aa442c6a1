"""Procedural toy video datasets with ground-truth motion.

Each clip is a single anti-aliased sprite (square or disc) translating
over a static background; the manifest records the exact per-frame sprite
centers, which later serve as the oracle for point tracking.  Everything
renders deterministically from (seed, clip index).
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as keyed
from .containers import load_gdf, save_gdf
from .grids import VideoClip

BACKGROUNDS = ("flat", "gradient", "noise")
SHAPES = ("square", "disc")


@dataclass
class SceneSpec:
    resolution: int = 32
    frame_count: int = 16
    sprite_shape: str = "square"
    sprite_size: float = 8.0  # full side / diameter, px
    sprite_color: tuple = (0.8, 0.2, -0.5)
    position: tuple = (16.0, 16.0)  # initial center, px
    velocity: tuple = (1.0, 0.0)  # px / frame
    bounce: bool = True
    background: str = "flat"
    background_color: tuple = (-0.6, -0.6, -0.6)
    background_seed: int = 0

    def __post_init__(self):
        if self.sprite_size < 2.0:
            raise ValueError(f"sprite size must be >= 2 px, got {self.sprite_size}")
        if self.sprite_shape not in SHAPES:
            raise ValueError(f"unknown sprite shape {self.sprite_shape!r}")
        if self.background not in BACKGROUNDS:
            raise ValueError(f"unknown background {self.background!r}")
        if not np.isfinite(self.velocity).all() or not np.isfinite(self.position).all():
            raise ValueError("position/velocity must be finite")
        if self.frame_count < 1 or self.resolution < 8:
            raise ValueError("need frame_count >= 1 and resolution >= 8")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("sprite_color", "position", "velocity", "background_color"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        for k in ("sprite_color", "position", "velocity", "background_color"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def render_background(spec: SceneSpec) -> np.ndarray:
    """Static (3, H, W) background in [-1, 1]."""
    n = spec.resolution
    color = np.asarray(spec.background_color, np.float32).reshape(3, 1, 1)
    if spec.background == "flat":
        return np.broadcast_to(color, (3, n, n)).copy()
    rng = keyed.keyed_rng(spec.background_seed, "background")
    if spec.background == "gradient":
        theta = rng.uniform(0, 2 * np.pi)
        ys, xs = np.mgrid[0:n, 0:n] / max(n - 1, 1)
        ramp = (np.cos(theta) * xs + np.sin(theta) * ys).astype(np.float32)
        ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-6) - 0.5
        amp = rng.uniform(0.2, 0.5)
        return np.clip(color + amp * ramp[None], -1.0, 1.0).astype(np.float32)
    # smooth noise: low-res field bilinearly enlarged, fixed over time
    coarse = rng.uniform(-0.4, 0.4, (3, 4, 4)).astype(np.float32)
    idx = np.linspace(0, 3, n)
    j0 = np.clip(np.floor(idx).astype(int), 0, 2)
    f = (idx - j0).astype(np.float32)
    rows = coarse[:, j0] * (1 - f[None, :, None]) + coarse[:, j0 + 1] * f[None, :, None]
    fine = rows[:, :, j0] * (1 - f[None, None, :]) + rows[:, :, j0 + 1] * f[None, None, :]
    return np.clip(color + fine, -1.0, 1.0).astype(np.float32)


def sprite_coverage(spec: SceneSpec, center) -> np.ndarray:
    """Per-pixel sprite coverage in [0, 1] (area overlap for squares,
    distance-smoothed edge for discs) — anti-aliased so subpixel motion is
    representable."""
    n = spec.resolution
    cx, cy = float(center[0]), float(center[1])
    ys, xs = np.mgrid[0:n, 0:n].astype(np.float64)
    if spec.sprite_shape == "square":
        h = spec.sprite_size / 2.0
        ox = np.clip(np.minimum(xs + 0.5, cx + h) - np.maximum(xs - 0.5, cx - h), 0.0, 1.0)
        oy = np.clip(np.minimum(ys + 0.5, cy + h) - np.maximum(ys - 0.5, cy - h), 0.0, 1.0)
        return (ox * oy).astype(np.float32)
    r = spec.sprite_size / 2.0
    dist = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2)
    return np.clip(r + 0.5 - dist, 0.0, 1.0).astype(np.float32)


def render_frame(spec: SceneSpec, center, background: np.ndarray | None = None) -> np.ndarray:
    bg = render_background(spec) if background is None else background
    cov = sprite_coverage(spec, center)[None]
    color = np.asarray(spec.sprite_color, np.float32).reshape(3, 1, 1)
    return np.clip(bg * (1.0 - cov) + color * cov, -1.0, 1.0).astype(np.float32)


def simulate_centers(spec: SceneSpec) -> np.ndarray:
    """Exact (frame_count, 2) center trajectory with wall reflection.

    The center stays within half a sprite size of the frame edge; when a
    step would cross a wall the position reflects and the velocity
    component flips sign on that frame.
    """
    margin = spec.sprite_size / 2.0
    lo = np.array([margin, margin])
    hi = np.array([spec.resolution - 1 - margin] * 2)
    pos = np.array(spec.position, np.float64)
    vel = np.array(spec.velocity, np.float64)
    if spec.bounce:
        pos = np.clip(pos, lo, hi)
    centers = np.empty((spec.frame_count, 2))
    centers[0] = pos
    for t in range(1, spec.frame_count):
        pos = pos + vel
        if spec.bounce:
            for axis in range(2):
                if pos[axis] < lo[axis]:
                    pos[axis] = 2 * lo[axis] - pos[axis]
                    vel[axis] = -vel[axis]
                elif pos[axis] > hi[axis]:
                    pos[axis] = 2 * hi[axis] - pos[axis]
                    vel[axis] = -vel[axis]
        centers[t] = pos
    return centers


def render_clip(spec: SceneSpec):
    """(frames (T, 3, H, W) float32, centers (T, 2) float64)."""
    centers = simulate_centers(spec)
    bg = render_background(spec)
    frames = np.stack([render_frame(spec, c, bg) for c in centers])
    return frames, centers


def random_spec(seed: int, index: int, resolution: int = 32, frame_count: int = 16) -> SceneSpec:
    """A clip spec drawn deterministically from (seed, index)."""
    rng = keyed.keyed_rng(seed, "scene-spec", index)
    size = float(rng.uniform(6.0, 11.0)) * resolution / 32.0
    margin = size / 2.0 + 1.0
    position = tuple(rng.uniform(margin, resolution - 1 - margin, 2).tolist())
    speed = rng.uniform(0.4, 1.6)
    angle = rng.uniform(0, 2 * np.pi)
    velocity = (speed * np.cos(angle), speed * np.sin(angle))
    sprite_color = tuple(rng.uniform(0.2, 0.95, 3) * rng.choice([-1.0, 1.0], 3))
    background = BACKGROUNDS[int(rng.integers(0, len(BACKGROUNDS)))]
    bg_color = tuple(rng.uniform(-0.7, 0.0, 3).tolist())
    return SceneSpec(
        resolution=resolution,
        frame_count=frame_count,
        sprite_shape=SHAPES[int(rng.integers(0, len(SHAPES)))],
        sprite_size=size,
        sprite_color=tuple(float(c) for c in sprite_color),
        position=position,
        velocity=(float(velocity[0]), float(velocity[1])),
        bounce=True,
        background=background,
        background_color=bg_color,
        background_seed=int(rng.integers(0, 2**31 - 1)),
    )


def tracking_spec(seed: int, resolution: int = 32, frame_count: int = 16) -> SceneSpec:
    """A single-sprite scene tailored to the tracking oracle: constant
    subpixel velocity, no wall contact, strong sprite/background contrast."""
    rng = keyed.keyed_rng(seed, "tracking-spec")
    size = 9.0 * resolution / 32.0
    total = max(frame_count - 1, 1)
    x0 = size / 2.0 + 1.5
    span = (resolution - 1 - x0) - x0  # centered travel corridor
    vx = min(float(rng.uniform(0.6, 1.2)), 0.9 * span / total)
    vy = float(rng.uniform(-0.2, 0.2))
    y0 = resolution / 2.0 + float(rng.uniform(-2, 2))
    return SceneSpec(
        resolution=resolution,
        frame_count=frame_count,
        sprite_shape="square",
        sprite_size=size,
        sprite_color=(0.9, 0.6, -0.3),
        position=(x0, y0),
        velocity=(vx, vy),
        bounce=False,
        background="flat",
        background_color=(-0.7, -0.7, -0.5),
        background_seed=seed,
    )


# ---------------------------------------------------------------------------
# dataset on disk


def save_clip(clip: VideoClip, path: str) -> None:
    save_gdf(path, clip.frames)


def load_clip(path: str) -> VideoClip:
    return VideoClip(load_gdf(path))


def synth_dataset(
    out_dir: str,
    count: int,
    seed: int,
    resolution: int = 32,
    frame_count: int = 16,
    specs: list[SceneSpec] | None = None,
) -> dict:
    """Write ``count`` clips + manifest.json; returns the manifest dict.

    Clip i renders from ``random_spec(seed, i)`` unless explicit specs are
    given.  The manifest records each clip's spec and exact center
    trajectory.
    """
    if count < 1:
        raise ValueError(f"need count >= 1, got {count}")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(count):
        spec = specs[i] if specs is not None else random_spec(seed, i, resolution, frame_count)
        frames, centers = render_clip(spec)
        name = f"clip_{i:04d}.gdf"
        save_gdf(os.path.join(out_dir, name), frames)
        entries.append({"file": name, "spec": spec.to_dict(), "centers": centers.tolist()})
    manifest = {
        "seed": seed,
        "count": count,
        "resolution": resolution,
        "frame_count": frame_count,
        "clips": entries,
    }
    tmp = os.path.join(out_dir, "manifest.json.tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh)
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))
    return manifest


def load_manifest(dataset_dir: str) -> dict:
    with open(os.path.join(dataset_dir, "manifest.json")) as fh:
        return json.load(fh)


def load_dataset(dataset_dir: str) -> np.ndarray:
    """All clips stacked as (count, T, 3, H, W)."""
    manifest = load_manifest(dataset_dir)
    return np.stack(
        [load_gdf(os.path.join(dataset_dir, entry["file"])) for entry in manifest["clips"]]
    )
