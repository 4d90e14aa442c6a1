"""Applications driven by a canonical image plus per-frame deformation
fields: edit propagation, point tracking, mask propagation, and motion
resampling.

Every output frame samples the canonical image through its field
(backward warp), so an edit painted once on the canonical image lands in
all frames, a canonical point can be located per frame by inverting the
warp, and a canonical mask segments the whole clip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .containers import save_gdf
from .errors import ShapeError
from .grids import CanonicalImage, DeformationField, VideoClip, warp
from .nets import GeneratorBundle, SampleResult, sample_video

_GN_DAMPING = 1e-4
_VALID_RESIDUAL = 1.0  # px


@dataclass
class Trajectory:
    point: np.ndarray  # (2,) canonical-space source point
    positions: np.ndarray  # (T, 2) per-frame subpixel positions
    valid: np.ndarray  # (T,) bool
    residuals: np.ndarray  # (T,) px

    def __post_init__(self):
        self.point = np.asarray(self.point, np.float64)
        self.positions = np.asarray(self.positions, np.float64)
        self.valid = np.asarray(self.valid, bool)
        self.residuals = np.asarray(self.residuals, np.float64)
        if self.positions.shape != (len(self.valid), 2):
            raise ShapeError(f"positions {self.positions.shape} vs valid {self.valid.shape}")

    def __len__(self) -> int:
        return len(self.valid)

    def to_json(self) -> str:
        return json.dumps(
            {
                "point": self.point.tolist(),
                "positions": self.positions.tolist(),
                "valid": self.valid.tolist(),
                "residuals": self.residuals.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        d = json.loads(text)
        return cls(d["point"], d["positions"], d["valid"], d["residuals"])


@dataclass
class MaskSequence:
    source: np.ndarray  # (H, W) binary canonical mask
    masks: np.ndarray  # (T, H, W) binary per-frame masks

    def __post_init__(self):
        self.source = np.asarray(self.source)
        self.masks = np.asarray(self.masks)
        for arr in (self.source, self.masks):
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("masks must be binary")
        if self.masks.shape[1:] != self.source.shape:
            raise ShapeError(f"masks {self.masks.shape} vs source {self.source.shape}")

    def save(self, path: str) -> None:
        save_gdf(path, self.masks[:, None].astype(np.float32))


def _field_array(fields) -> np.ndarray:
    """Normalize a field list / stacked array to (T, 2, H, W) float32."""
    if isinstance(fields, (list, tuple)):
        fields = np.stack(
            [f.offsets if isinstance(f, DeformationField) else np.asarray(f) for f in fields]
        )
    fields = np.asarray(fields, np.float32)
    if fields.ndim != 4 or fields.shape[1] != 2:
        raise ShapeError(f"expected fields (T, 2, H, W), got {fields.shape}")
    return fields


def _image_array(canonical) -> np.ndarray:
    img = canonical.values if isinstance(canonical, CanonicalImage) else np.asarray(canonical)
    if img.ndim != 3:
        raise ShapeError(f"expected canonical (C, H, W), got {img.shape}")
    return img.astype(np.float32, copy=False)


def propagate_edit(edited_canonical, fields) -> VideoClip:
    """Warp an edited canonical image through every frame's field.

    Identical inputs reproduce the originally sampled video bit-for-bit,
    so diffing against it isolates exactly the edited region's footprint.
    """
    img = _image_array(edited_canonical)
    fields = _field_array(fields)
    if fields.shape[2:] != img.shape[1:]:
        raise ShapeError(f"fields {fields.shape[2:]} vs canonical {img.shape[1:]}")
    frames = np.stack([warp(img, f) for f in fields])
    return VideoClip(frames)


def propagate_mask(mask, fields) -> MaskSequence:
    """Binary canonical mask -> per-frame masks: bilinear warp of the mask
    treated as a real-valued image, thresholded at 0.5."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"expected (H, W) mask, got {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask must be binary")
    fields = _field_array(fields)
    if fields.shape[2:] != mask.shape:
        raise ShapeError(f"fields {fields.shape[2:]} vs mask {mask.shape}")
    soft = np.stack([warp(mask[None].astype(np.float32), f)[0] for f in fields])
    return MaskSequence(mask.astype(np.uint8), (soft >= 0.5).astype(np.uint8))


def _sample_offsets(offsets: np.ndarray, x: float, y: float):
    """Bilinear sample of a (2, H, W) offset field at (x, y) with border
    clamp; returns (value (2,), spatial Jacobian (2, 2) d value / d (x, y))."""
    h, w = offsets.shape[1:]
    sx = min(max(x, 0.0), w - 1.0)
    sy = min(max(y, 0.0), h - 1.0)
    x0 = min(max(int(np.floor(sx)), 0), w - 2) if w > 1 else 0
    y0 = min(max(int(np.floor(sy)), 0), h - 2) if h > 1 else 0
    fx, fy = sx - x0, sy - y0
    v00 = offsets[:, y0, x0].astype(np.float64)
    v01 = offsets[:, y0, x0 + 1].astype(np.float64)
    v10 = offsets[:, y0 + 1, x0].astype(np.float64)
    v11 = offsets[:, y0 + 1, x0 + 1].astype(np.float64)
    value = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)
    ddx = (1 - fy) * (v01 - v00) + fy * (v11 - v10)
    ddy = (1 - fx) * (v10 - v00) + fx * (v11 - v01)
    if x != sx:  # clamped: constant continuation
        ddx[:] = 0.0
    if y != sy:
        ddy[:] = 0.0
    return value, np.stack([ddx, ddy], axis=1)


def _locate(offsets: np.ndarray, point: np.ndarray, grid_x: np.ndarray, grid_y: np.ndarray):
    """Find the output position whose warp source hits ``point``: integer
    argmin of the source distance (row-major tie-break) plus one damped
    Gauss-Newton refinement of s(o) = o + offsets(o)."""
    src_x = grid_x + offsets[0].astype(np.float64)
    src_y = grid_y + offsets[1].astype(np.float64)
    cost = (src_x - point[0]) ** 2 + (src_y - point[1]) ** 2
    flat = int(np.argmin(cost))
    y0, x0 = divmod(flat, offsets.shape[2])
    pos = np.array([float(x0), float(y0)])

    value, jac_off = _sample_offsets(offsets, pos[0], pos[1])
    residual = pos + value - point
    jac = np.eye(2) + jac_off
    lhs = jac.T @ jac + _GN_DAMPING * np.eye(2)
    step = np.linalg.solve(lhs, jac.T @ residual)
    # keep the refinement inside the field's domain; outside it the clamped
    # sampler extrapolates constantly and residuals stop meaning anything
    pos = np.clip(pos - step, 0.0, [offsets.shape[2] - 1, offsets.shape[1] - 1])

    value, _ = _sample_offsets(offsets, pos[0], pos[1])
    resid = float(np.linalg.norm(pos + value - point))
    return pos, resid


def track_point(point, fields) -> Trajectory:
    """Trajectory of a canonical-space point through every frame."""
    fields = _field_array(fields)
    h, w = fields.shape[2:]
    point = np.asarray(point, np.float64)
    if point.shape != (2,):
        raise ShapeError(f"expected an (x, y) point, got shape {point.shape}")
    if not (0.0 <= point[0] <= w - 1 and 0.0 <= point[1] <= h - 1):
        raise ValueError(f"point {point.tolist()} outside canonical rectangle {w}x{h}")
    grid_y, grid_x = np.mgrid[0:h, 0:w].astype(np.float64)
    positions, residuals = [], []
    for offsets in fields:
        pos, resid = _locate(offsets, point, grid_x, grid_y)
        positions.append(pos)
        residuals.append(resid)
    positions = np.stack(positions)
    residuals = np.asarray(residuals)
    return Trajectory(point, positions, residuals < _VALID_RESIDUAL, residuals)


def resample_motion(
    bundle: GeneratorBundle, seed: int, n_frames: int, motion_seeds
) -> list[SampleResult]:
    """Sample one canonical image and several motion realizations of it.

    All results share the canonical image bit-for-bit (same content
    latent); each motion seed yields its own deformation fields."""
    results = [sample_video(bundle, seed, n_frames, motion_seed=m) for m in motion_seeds]
    for r in results[1:]:
        if not np.array_equal(r.canonical, results[0].canonical):
            raise AssertionError("canonical image changed across motion resamples")
    return results
