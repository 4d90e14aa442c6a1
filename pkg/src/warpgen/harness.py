"""Evaluation and ablation orchestration.

``evaluate_bundle`` scores a generator against a real clip set with the
toy distribution distances plus temporal-roughness diagnostics;
``run_ablation`` trains flag variants from a shared pretrain checkpoint
and tabulates their scores.  Both are deterministic in (inputs, seed).
"""

from __future__ import annotations

import numpy as np

from . import metrics
from .nets import GeneratorBundle, NetConfig, sample_video
from .train import TrainConfig, train

AXES = ("default", "no_fc", "no_reg", "fix_gc", "no_pretrain", "no_multiplier")


def sample_clips(bundle: GeneratorBundle, n_clips: int, n_frames: int, seed: int, no_fc: bool = False):
    """(clips (N, T, 3, H, W), fields (N, T, 2, H, W)) from per-clip seeds."""
    frames, fields = [], []
    for i in range(n_clips):
        r = sample_video(bundle, seed=seed * 100_003 + i, n_frames=n_frames, no_fc=no_fc)
        frames.append(r.frames)
        fields.append(r.fields)
    return np.stack(frames), np.stack(fields)


def evaluate_bundle(
    bundle: GeneratorBundle,
    real_clips: np.ndarray,
    n_samples: int,
    seed: int = 0,
    no_fc: bool = False,
) -> dict:
    """Score generated clips against real ones.  ``no_fc`` must mirror the
    flag the bundle was trained with so the sampled system is the trained
    system."""
    real_clips = np.asarray(real_clips, np.float32)
    n_frames = real_clips.shape[1]
    fake_clips, fake_fields = sample_clips(bundle, n_samples, n_frames, seed, no_fc=no_fc)
    real_frames = real_clips.reshape(-1, *real_clips.shape[2:])
    fake_frames = fake_clips.reshape(-1, *fake_clips.shape[2:])
    return {
        "toy_fid": metrics.toy_fid(real_frames, fake_frames),
        "toy_fvd": metrics.toy_fvd(real_clips, fake_clips),
        "jerk_field": float(
            np.mean([metrics.temporal_jerk(f, "field") for f in fake_fields])
        ),
        "jerk_video": float(
            np.mean([metrics.temporal_jerk(c, "video") for c in fake_clips])
        ),
        "n_real": int(real_clips.shape[0]),
        "n_fake": int(n_samples),
    }


def variant_config(axis: str, seed: int, steps: int, pretrained: str | None, **overrides) -> TrainConfig:
    """Fine-tune config for one ablation axis."""
    if axis not in AXES:
        raise ValueError(f"unknown ablation axis {axis!r}; choose from {AXES}")
    kw = dict(
        stage="finetune",
        total_steps=steps,
        seed=seed,
        pretrained=pretrained,
        **overrides,
    )
    if axis == "no_fc":
        kw["no_fc"] = True
    elif axis == "no_reg":
        kw["no_reg"] = True
    elif axis == "fix_gc":
        kw["fix_gc"] = True
    elif axis == "no_pretrain":
        kw["no_pretrain"] = True
        kw["pretrained"] = None
    elif axis == "no_multiplier":
        kw["init_mode"] = "no_multiplier"
    return TrainConfig(**kw)


def run_ablation(
    data: np.ndarray,
    pretrained: str,
    axes,
    seeds,
    steps: int,
    net_config: NetConfig | None = None,
    eval_samples: int = 32,
    train_overrides: dict | None = None,
) -> list[dict]:
    """One finetune + evaluation per (axis, seed); returns metric rows."""
    rows = []
    for axis in axes:
        for seed in seeds:
            cfg = variant_config(axis, seed, steps, pretrained, **(train_overrides or {}))
            state, history = train(cfg, data, net_config)
            scores = evaluate_bundle(
                state.bundle, data, eval_samples, seed=seed, no_fc=cfg.no_fc
            )
            rows.append(
                {
                    "axis": axis,
                    "seed": seed,
                    "steps": steps,
                    "final_loss_g": history[-1]["loss_g"],
                    "final_loss_d": history[-1]["loss_d"],
                    **scores,
                }
            )
    return rows
