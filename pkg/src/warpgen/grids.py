"""Coordinate grids, backward warping, deformation-to-flow conversion and
the edge-aware temporal smoothness loss.

Conventions used throughout the project:

* arrays are channel-first: images (C, H, W), fields/flows (2, H, W) with
  channel 0 = x-offset and channel 1 = y-offset;
* coordinates are raw pixel units with the origin at pixel centers,
  x rightward, y downward;
* warping is backward (gather): output pixel at grid location (x, y)
  bilinearly samples the source at (x + dx, y + dy), with sample
  coordinates clamped to the valid image rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


# ---------------------------------------------------------------------------
# domain types


@dataclass
class CoordinateGrid:
    """Pixel-center coordinates of an H x W raster, shape (2, H, W)."""

    height: int
    width: int
    coords: np.ndarray

    def __post_init__(self):
        if self.coords.shape != (2, self.height, self.width):
            raise ShapeError(f"coords shape {self.coords.shape} != (2, H, W)")
        if not np.isfinite(self.coords).all():
            raise ValueError("coordinate grid contains non-finite entries")


@dataclass
class DeformationField:
    """Per-pixel 2D offsets added to the output grid, shape (2, H, W)."""

    offsets: np.ndarray
    frame_index: int = 1

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.float32)
        if self.offsets.ndim != 3 or self.offsets.shape[0] != 2:
            raise ShapeError(f"offsets shape {self.offsets.shape} != (2, H, W)")
        if not np.isfinite(self.offsets).all():
            raise ValueError("deformation field contains non-finite entries")

    @property
    def height(self) -> int:
        return self.offsets.shape[1]

    @property
    def width(self) -> int:
        return self.offsets.shape[2]


@dataclass
class CanonicalImage:
    """The time-independent content image, shape (3, H, W), values in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3 or self.values.shape[0] != 3:
            raise ShapeError(f"canonical image shape {self.values.shape} != (3, H, W)")
        if not np.isfinite(self.values).all():
            raise ValueError("canonical image contains non-finite entries")

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass
class FlowField:
    """Inter-frame motion vectors, shape (2, H, W), covering from_frame -> to_frame."""

    vectors: np.ndarray
    from_frame: int
    to_frame: int

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors)
        if self.vectors.ndim != 3 or self.vectors.shape[0] != 2:
            raise ShapeError(f"flow shape {self.vectors.shape} != (2, H, W)")
        if self.to_frame != self.from_frame + 1:
            raise ShapeError(
                f"flow must cover adjacent frames, got {self.from_frame}->{self.to_frame}"
            )
        if not np.isfinite(self.vectors).all():
            raise ValueError("flow field contains non-finite entries")


@dataclass
class VideoClip:
    """An ordered stack of frames, shape (T, 3, H, W), values in [-1, 1]."""

    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4 or self.frames.shape[0] < 1:
            raise ShapeError(f"clip shape {self.frames.shape} != (T, C, H, W), T >= 1")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]


# ---------------------------------------------------------------------------
# grids and warping


def identity_grid(height: int, width: int) -> CoordinateGrid:
    """Grid with coords[0][y][x] = x and coords[1][y][x] = y."""
    if height < 1 or width < 1:
        raise ShapeError(f"grid dimensions must be >= 1, got {height}x{width}")
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float32)
    return CoordinateGrid(height, width, np.stack([xs, ys]))


def _as_image(image) -> np.ndarray:
    arr = image.values if isinstance(image, CanonicalImage) else np.asarray(image)
    if arr.ndim != 3:
        raise ShapeError(f"expected (C, H, W) image, got shape {arr.shape}")
    return arr


def _as_field(fld) -> np.ndarray:
    arr = fld.offsets if isinstance(fld, DeformationField) else np.asarray(fld)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ShapeError(f"expected (2, H, W) field, got shape {arr.shape}")
    return arr


def _bilinear_setup(offsets: np.ndarray, height: int, width: int):
    """Clamped sample coordinates and gather indices/weights.

    Returns (x0, y0, fx, fy, sat_x, sat_y) where x0/y0 index the top-left
    texel of each 2x2 footprint, fx/fy are the fractional weights and
    sat_* mark coordinates that hit the border clamp (zero spatial
    gradient in that axis).
    """
    ys, xs = np.mgrid[0:height, 0:width]
    sx = xs + offsets[0]
    sy = ys + offsets[1]
    sat_x = (sx < 0.0) | (sx > width - 1.0)
    sat_y = (sy < 0.0) | (sy > height - 1.0)
    sx = np.clip(sx, 0.0, width - 1.0)
    sy = np.clip(sy, 0.0, height - 1.0)
    # top-left texel; at the far border the footprint shifts inward so the
    # fractional weight becomes exactly 1 and the sample stays exact
    x0 = np.minimum(np.floor(sx), width - 2).astype(np.intp) if width > 1 else np.zeros_like(sx, dtype=np.intp)
    y0 = np.minimum(np.floor(sy), height - 2).astype(np.intp) if height > 1 else np.zeros_like(sy, dtype=np.intp)
    x0 = np.maximum(x0, 0)
    y0 = np.maximum(y0, 0)
    fx = sx - x0
    fy = sy - y0
    return x0, y0, fx, fy, sat_x, sat_y


def warp(canonical, deformation) -> np.ndarray:
    """Backward-warp an image by a deformation field.

    Output pixel (x, y) is the bilinear sample of ``canonical`` at
    (x + dx, y + dy); coordinates are border-clamped. A zero field is the
    identity warp, bit-exact.
    """
    img = _as_image(canonical)
    offs = _as_field(deformation)
    c, h, w = img.shape
    if offs.shape[1:] != (h, w):
        raise ShapeError(f"field {offs.shape[1:]} does not match image {(h, w)}")
    if not np.isfinite(offs).all():
        raise ValueError("deformation field contains non-finite entries")
    x0, y0, fx, fy, _, _ = _bilinear_setup(offs, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    p00 = img[:, y0, x0]
    p01 = img[:, y0, x1]
    p10 = img[:, y1, x0]
    p11 = img[:, y1, x1]
    top = p00 * (1.0 - fx) + p01 * fx
    bot = p10 * (1.0 - fx) + p11 * fx
    out = top * (1.0 - fy) + bot * fy
    return out.astype(img.dtype, copy=False)


def warp_gradients(canonical, deformation, upstream: np.ndarray):
    """Analytic gradients of :func:`warp` w.r.t. the image and the field.

    ``upstream`` has the output's shape (C, H, W). The field gradient is
    zero in an axis wherever the sample coordinate saturated the border
    clamp.
    """
    img = _as_image(canonical)
    offs = _as_field(deformation)
    c, h, w = img.shape
    upstream = np.asarray(upstream)
    if upstream.shape != img.shape or offs.shape[1:] != (h, w):
        raise ShapeError(
            f"shapes disagree: image {img.shape}, field {offs.shape}, upstream {upstream.shape}"
        )
    x0, y0, fx, fy, sat_x, sat_y = _bilinear_setup(offs, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy

    grad_img = np.zeros_like(img, dtype=upstream.dtype)
    hw = h * w
    flat_up = upstream.reshape(c, hw)
    for weight, yy, xx in ((w00, y0, x0), (w01, y0, x1), (w10, y1, x0), (w11, y1, x1)):
        idx = (yy * w + xx).ravel()
        contrib = flat_up * weight.ravel()
        for ch in range(c):
            grad_img[ch] += np.bincount(idx, weights=contrib[ch], minlength=hw).reshape(h, w).astype(grad_img.dtype, copy=False)

    p00 = img[:, y0, x0]
    p01 = img[:, y0, x1]
    p10 = img[:, y1, x0]
    p11 = img[:, y1, x1]
    ddx = (p01 - p00) * (1.0 - fy) + (p11 - p10) * fy
    ddy = (p10 - p00) * (1.0 - fx) + (p11 - p01) * fx
    grad_field = np.stack(
        [
            np.where(sat_x, 0.0, (upstream * ddx).sum(axis=0)),
            np.where(sat_y, 0.0, (upstream * ddy).sum(axis=0)),
        ]
    ).astype(offs.dtype, copy=False)
    return grad_img, grad_field


def flow_between(field_t: DeformationField, field_next: DeformationField) -> FlowField:
    """Flow from frame t to t+1; the shared output grid cancels, so this is
    just the offset difference."""
    if field_t.offsets.shape != field_next.offsets.shape:
        raise ShapeError(
            f"field shapes disagree: {field_t.offsets.shape} vs {field_next.offsets.shape}"
        )
    if field_next.frame_index != field_t.frame_index + 1:
        raise ShapeError(
            f"fields must be adjacent, got t={field_t.frame_index}, next={field_next.frame_index}"
        )
    return FlowField(
        vectors=field_next.offsets.astype(np.float64) - field_t.offsets.astype(np.float64),
        from_frame=field_t.frame_index,
        to_frame=field_next.frame_index,
    )


def edge_weights(image, beta: float = 1.0) -> np.ndarray:
    """Per-pixel weights exp(-beta * |grad I|_1), shape (H, W), in (0, 1].

    The gradient is the forward finite difference of the channel-mean
    image in each axis (zero at the far row/column).
    """
    img = _as_image(image)
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite entries")
    mean = img.mean(axis=0, dtype=np.float64)
    gx = np.zeros_like(mean)
    gy = np.zeros_like(mean)
    gx[:, :-1] = mean[:, 1:] - mean[:, :-1]
    gy[:-1, :] = mean[1:, :] - mean[:-1, :]
    return np.exp(-beta * (np.abs(gx) + np.abs(gy)))


def smoothness_loss(flow_a, flow_b, weights: np.ndarray):
    """Edge-weighted L1 difference of consecutive flows.

    ``flow_a`` covers t->t+1 and ``flow_b`` covers t+1->t+2. Returns
    (loss, grad_a, grad_b) where loss is the mean over pixels and both
    vector components of ``weights * |flow_b - flow_a|`` and the gradients
    use the subgradient 0 at exact ties.
    """
    fa = flow_a.vectors if isinstance(flow_a, FlowField) else np.asarray(flow_a)
    fb = flow_b.vectors if isinstance(flow_b, FlowField) else np.asarray(flow_b)
    weights = np.asarray(weights)
    if fa.shape != fb.shape or fa.shape[0] != 2:
        raise ShapeError(f"flow shapes disagree: {fa.shape} vs {fb.shape}")
    if weights.shape != fa.shape[1:]:
        raise ShapeError(f"weights {weights.shape} do not match flows {fa.shape[1:]}")
    if isinstance(flow_a, FlowField) and isinstance(flow_b, FlowField):
        if flow_b.from_frame != flow_a.from_frame + 1:
            raise ShapeError(
                f"flows must be consecutive, got {flow_a.from_frame}->{flow_a.to_frame} "
                f"and {flow_b.from_frame}->{flow_b.to_frame}"
            )
    diff = fb.astype(np.float64) - fa.astype(np.float64)
    n = diff.size
    loss = float((weights[None] * np.abs(diff)).sum() / n)
    grad_b = (weights[None] * np.sign(diff) / n).astype(np.float64)
    return loss, -grad_b, grad_b
