"""Hand-crafted distribution metrics for toy videos.

Learned-feature metrics need pretrained backbones, so frames are summarized
by a fixed descriptor (per-cell pixel means + channel histograms) and
compared with a Frechet distance between Gaussian fits.  ``toy_fid``
operates on single frames, ``toy_fvd`` on whole clips (stacked per-frame
descriptors), and ``temporal_jerk`` measures second-order temporal
roughness of deformation fields or pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DESCRIPTOR_CELLS = 4
HIST_BINS = 8
_JITTER = 1e-6


def frame_descriptor(frame: np.ndarray) -> np.ndarray:
    """(3, H, W) frame -> fixed descriptor (cells*cells*3 + bins*3,).

    Cell means capture layout, channel histograms capture palette; both are
    cheap and deterministic.  H and W must divide by the cell count.
    """
    frame = np.asarray(frame, np.float64)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ShapeError(f"expected (3, H, W) frame, got {frame.shape}")
    c, h, w = frame.shape
    k = DESCRIPTOR_CELLS
    if h % k or w % k:
        raise ShapeError(f"frame size {h}x{w} not divisible into {k}x{k} cells")
    cells = frame.reshape(c, k, h // k, k, w // k).mean(axis=(2, 4))  # (3, k, k)
    hists = [
        np.histogram(frame[i], bins=HIST_BINS, range=(-1.0, 1.0))[0] / (h * w)
        for i in range(c)
    ]
    return np.concatenate([cells.ravel(), np.concatenate(hists)])


def video_descriptor(frames: np.ndarray) -> np.ndarray:
    """(T, 3, H, W) clip -> concatenated per-frame descriptors."""
    frames = np.asarray(frames, np.float64)
    if frames.ndim != 4:
        raise ShapeError(f"expected (T, 3, H, W) clip, got {frames.shape}")
    return np.concatenate([frame_descriptor(f) for f in frames])


@dataclass
class FeatureStats:
    mean: np.ndarray  # (D,)
    cov: np.ndarray  # (D, D)
    count: int

    @classmethod
    def from_features(cls, features: np.ndarray) -> "FeatureStats":
        features = np.asarray(features, np.float64)
        if features.ndim != 2 or features.shape[0] < 2:
            raise ShapeError(f"need (N>=2, D) features, got {features.shape}")
        return cls(
            mean=features.mean(0),
            cov=np.cov(features, rowvar=False, ddof=1),
            count=features.shape[0],
        )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _psd_sqrt_trace(m: np.ndarray) -> float:
    """tr(m^{1/2}) for symmetric PSD m, via eigendecomposition."""
    vals = np.linalg.eigvalsh((m + m.T) / 2.0)
    if vals.min() < -1e-5 * max(vals.max(), 1.0):
        raise ValueError(f"matrix not PSD after jitter (min eig {vals.min():.3e})")
    return float(np.sqrt(np.clip(vals, 0.0, None)).sum())


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """||mu_a - mu_b||^2 + tr(Ca + Cb - 2 (Ca Cb)^{1/2}).

    The cross sqrt is evaluated as sqrt(sqrt(Ca) Cb sqrt(Ca)) which is
    symmetric PSD whenever both covariances are; a small diagonal jitter
    absorbs rank deficiency from finite samples.
    """
    if a.dim != b.dim:
        raise ShapeError(f"stats dims differ: {a.dim} vs {b.dim}")
    eye = np.eye(a.dim)
    ca = np.asarray(a.cov, np.float64) + _JITTER * eye
    cb = np.asarray(b.cov, np.float64) + _JITTER * eye
    dmu = np.asarray(a.mean, np.float64) - np.asarray(b.mean, np.float64)

    vals, vecs = np.linalg.eigh((ca + ca.T) / 2.0)
    if vals.min() < -1e-5 * max(vals.max(), 1.0):
        raise ValueError(f"covariance not PSD after jitter (min eig {vals.min():.3e})")
    root_a = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    cross = _psd_sqrt_trace(root_a @ cb @ root_a)
    dist = float(dmu @ dmu + np.trace(ca) + np.trace(cb) - 2.0 * cross)
    return max(dist, 0.0)


def temporal_jerk(arr: np.ndarray, mode: str = "field") -> float:
    """Mean absolute second temporal difference.

    ``field`` mode takes per-frame deformation offsets (T, 2, H, W), where
    the second difference of offsets equals the difference of consecutive
    flows; ``video`` mode takes pixels (T, C, H, W).  Sequences affine in t
    score exactly 0.
    """
    arr = np.asarray(arr, np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"expected (T, C, H, W), got {arr.shape}")
    if arr.shape[0] < 3:
        raise ShapeError(f"need >= 3 frames, got {arr.shape[0]}")
    if mode == "field" and arr.shape[1] != 2:
        raise ShapeError(f"field mode expects 2 offset channels, got {arr.shape[1]}")
    if mode not in ("field", "video"):
        raise ValueError(f"unknown mode {mode!r}")
    second = arr[2:] - 2.0 * arr[1:-1] + arr[:-2]
    return float(np.abs(second).mean())


def toy_fid(real_frames: np.ndarray, fake_frames: np.ndarray) -> float:
    """Frechet distance between frame-descriptor Gaussians, (N, 3, H, W) each."""
    stats = [
        FeatureStats.from_features(np.stack([frame_descriptor(f) for f in batch]))
        for batch in (real_frames, fake_frames)
    ]
    return frechet_distance(*stats)


def toy_fvd(real_clips: np.ndarray, fake_clips: np.ndarray) -> float:
    """Frechet distance between clip-descriptor Gaussians, (N, T, 3, H, W) each."""
    stats = [
        FeatureStats.from_features(np.stack([video_descriptor(c) for c in batch]))
        for batch in (real_clips, fake_clips)
    ]
    return frechet_distance(*stats)
