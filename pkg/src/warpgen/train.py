"""Two-stage adversarial training.

Stage one fits the canonical-image generator and the discriminator's
single-frame head on individual frames.  Stage two warm-starts from that
checkpoint and trains the full pipeline on sparsely sampled frame triplets,
adding an edge-aware temporal smoothness penalty computed on an
independently sampled adjacent-frame triplet.  All randomness flows
through keyed streams, so a (config, seed) pair fixes the entire run.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import rng as keyed
from .errors import ShapeError
from .grids import edge_weights
from .nets import Discriminator, GeneratorBundle, NetConfig, render_frames
from .optim import Adam, ParamStore

STAGES = ("pretrain", "finetune")
FINETUNE_FLAGS = ("no_fc", "no_reg", "fix_gc", "no_pretrain")


@dataclass
class TrainConfig:
    stage: str = "pretrain"
    total_steps: int = 100
    batch_size: int = 8
    seed: int = 0
    lambda_reg: float = 1.0
    frames_per_clip: int = 3
    lr: float = 2e-3
    beta1: float = 0.0
    beta2: float = 0.99
    adam_eps: float = 1e-8
    r1_gamma: float = 0.5
    r1_interval: int = 16
    ema_decay: float = 0.0  # 0: off; else EMA of generator weights for checkpoints
    no_fc: bool = False
    no_reg: bool = False
    fix_gc: bool = False
    no_pretrain: bool = False
    init_mode: str = "zero"
    pretrained: str | None = None  # checkpoint dir for the finetune warm start
    log_every: int = 25
    checkpoint_every: int = 0  # 0: only the final checkpoint

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"stage {self.stage!r} not in {STAGES}")
        if self.total_steps < 1 or self.batch_size < 1:
            raise ValueError("need total_steps >= 1 and batch_size >= 1")
        if self.lambda_reg < 0 or self.r1_gamma < 0 or self.r1_interval < 1:
            raise ValueError("lambda_reg/r1_gamma must be >= 0, r1_interval >= 1")
        if self.frames_per_clip != 3:
            raise ValueError("sparse training samples exactly 3 frames per clip")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must be in [0, 1), got {self.ema_decay}")
        if self.stage == "pretrain":
            bad = [f for f in FINETUNE_FLAGS if getattr(self, f)]
            if bad:
                raise ValueError(f"flags {bad} only apply to the finetune stage")
        else:
            if self.fix_gc and not self.pretrained:
                raise ValueError("fix_gc requires a pretrained checkpoint")
            if self.no_pretrain and self.pretrained:
                raise ValueError("no_pretrain and a pretrained checkpoint conflict")
            if not self.no_pretrain and not self.pretrained:
                raise ValueError("finetune needs a pretrained checkpoint (or no_pretrain)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _const(value: float) -> ad.Tensor:
    return ad.tensor(np.full((1, 1, 1, 1), value, np.float32))


def adv_losses(real_logits: ad.Tensor, fake_logits: ad.Tensor):
    """Non-saturating GAN losses: (loss_D, loss_G) scalar tensors."""
    if not (np.isfinite(real_logits.data).all() and np.isfinite(fake_logits.data).all()):
        raise ValueError("non-finite discriminator logits")
    loss_d = ad.add(
        ad.reduce_mean(ad.softplus(-real_logits)),
        ad.reduce_mean(ad.softplus(fake_logits)),
    )
    loss_g = ad.reduce_mean(ad.softplus(-fake_logits))
    return loss_d, loss_g


def r1_penalty(disc: Discriminator, frames: np.ndarray, times: np.ndarray, head: str) -> ad.Tensor:
    """mean over clips of ||d logits / d input||^2, differentiable in D's
    parameters (the input-gradient is replayed as a graph, so one ordinary
    backward yields the exact second-order update)."""
    x = ad.tensor(frames, requires_grad=True)
    logits = disc.logits(x, times, head)
    g = ad.grad_graph(logits, x)
    rows = ad.reduce_sum(ad.mul(g, g), axes=(1, 2, 3))  # (B*k,1,1,1)
    k = frames.shape[0] // logits.data.shape[0]
    return ad.mul(ad.reduce_mean(rows, axes=(0,)), _const(float(k)))


def grad_norm(stores: list[ParamStore]) -> float:
    total = 0.0
    for store in stores:
        for _, p in store.items():
            if p.grad is not None:
                total += float((p.grad.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


class TrainState:
    """Models + optimizers + step counter for one stage."""

    def __init__(self, config: TrainConfig, net_config: NetConfig | None = None):
        self.config = config
        base = net_config or NetConfig()
        if base.init_mode != config.init_mode:
            base = NetConfig.from_dict({**base.to_dict(), "init_mode": config.init_mode})
        self.net_config = base
        self.bundle = GeneratorBundle(base, seed=config.seed)
        self.disc = Discriminator(base, seed=config.seed)
        if config.stage == "finetune" and config.pretrained:
            src = GeneratorBundle.load(os.path.join(config.pretrained, "bundle.gdp"))
            for dst_store, src_store in zip(self.bundle.image_stores(), src.image_stores()):
                dst_store.load_arrays(src_store.arrays())
            self.disc.load(os.path.join(config.pretrained, "disc.gdp"))
            self.disc.reset_head("video", config.seed)
        if config.fix_gc:
            for store in self.bundle.image_stores():
                store.set_trainable(False)
        # each stage trains exactly one discriminator head; freeze the other
        unused_head = "video" if config.stage == "pretrain" else "image"
        for name, p in self.disc.store.items():
            if name.startswith(f"head_{unused_head}."):
                p.requires_grad = False
        g_stores = (
            self.bundle.image_stores() if config.stage == "pretrain" else self.bundle.all_stores()
        )
        adam_kw = dict(
            lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps
        )
        self.adam_g = Adam(g_stores, **adam_kw)
        self.adam_d = Adam([self.disc.store], **adam_kw)
        self.g_stores = g_stores
        self.step = 0
        self.ema: list[dict[str, np.ndarray]] | None = None

    def ema_update(self) -> None:
        """Blend current generator weights into the running average (no-op
        unless ema_decay > 0; the shadow is seeded on the first call)."""
        decay = self.config.ema_decay
        if decay <= 0:
            return
        if self.ema is None:
            self.ema = [
                {name: p.data.copy() for name, p in store.items()}
                for store in self.g_stores
            ]
            return
        for store, shadow in zip(self.g_stores, self.ema):
            for name, p in store.items():
                s = shadow[name]
                s *= decay
                s += (1.0 - decay) * p.data

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        raw = None
        if self.ema is not None:
            # checkpoints carry the averaged generator; training continues
            # on the raw weights, restored below
            raw = [{name: p.data.copy() for name, p in store.items()} for store in self.g_stores]
            for store, shadow in zip(self.g_stores, self.ema):
                for name, p in store.items():
                    p.data[...] = shadow[name]
        try:
            self.bundle.save(os.path.join(out_dir, "bundle.gdp"))
        finally:
            if raw is not None:
                for store, arrays in zip(self.g_stores, raw):
                    for name, p in store.items():
                        p.data[...] = arrays[name]
        self.disc.save(os.path.join(out_dir, "disc.gdp"))


def _discriminator_update(state: TrainState, real: np.ndarray, fake: np.ndarray, times, head: str):
    cfg = state.config
    state.adam_d.zero_grads()
    real_logits = state.disc.logits(ad.tensor(real), times, head)
    fake_logits = state.disc.logits(ad.tensor(fake), times, head)
    loss_d, _ = adv_losses(real_logits, fake_logits)
    r1_value = 0.0
    total = loss_d
    if cfg.r1_gamma > 0 and state.step % cfg.r1_interval == 0:
        pen = r1_penalty(state.disc, real, times, head)
        r1_value = pen.item()
        # lazy regularization: scale by the interval to keep the effective
        # strength of gamma/2 per step
        total = ad.add(loss_d, ad.mul(pen, _const(0.5 * cfg.r1_gamma * cfg.r1_interval)))
    total.backward()
    norm_d = grad_norm([state.disc.store])
    state.adam_d.step()
    return float(loss_d.item()), float(real_logits.data.mean()), r1_value, norm_d


def pretrain_step(state: TrainState, frames: np.ndarray) -> dict:
    """One D update + one G update on a batch of single frames (B, 3, H, W)."""
    cfg = state.config
    if frames.ndim != 4 or frames.shape[0] == 0:
        raise ShapeError(f"need a nonempty (B, 3, H, W) frame batch, got {frames.shape}")
    step = state.step
    batch = frames.shape[0]
    times = np.ones((batch, 1))
    z_c = ad.tensor(keyed.normal(cfg.seed, "z_c", step, (batch, state.net_config.latent_dim, 1, 1)))

    with ad.no_grad():
        fake_img, _ = state.bundle.canonical(z_c)
    loss_d, real_mean, r1_value, norm_d = _discriminator_update(
        state, frames, fake_img.data, times, "image"
    )

    state.adam_g.zero_grads()
    state.adam_d.zero_grads()
    img, _ = state.bundle.canonical(z_c)
    fake_logits = state.disc.logits(img, times, "image")
    _, loss_g = adv_losses(ad.tensor(np.zeros((batch, 1, 1, 1), np.float32)), fake_logits)
    loss_g.backward()
    norm_g = grad_norm(state.g_stores)
    state.adam_g.step()
    state.ema_update()
    state.adam_d.zero_grads()

    state.step += 1
    return {
        "step": step,
        "loss_d": float(loss_d),
        "loss_g": float(loss_g.item()),
        "loss_reg": 0.0,
        "r1": r1_value,
        "real_logit": real_mean,
        "grad_norm_g": norm_g,
        "grad_norm_d": norm_d,
    }


def _sample_times(cfg: TrainConfig, step: int, batch: int, n_frames: int):
    """Adversarial times: 3 distinct uniform draws per clip (sorted for the
    discriminator); regularizer: an independent center t in [2, n-1] giving
    the triplet {t-1, t, t+1}.  Separate purpose keys keep the two streams
    independent; both are 1-based frame times."""
    rng_adv = keyed.keyed_rng(cfg.seed, "times-adv", step)
    times_adv = np.stack(
        [np.sort(rng_adv.choice(n_frames, size=3, replace=False) + 1) for _ in range(batch)]
    )
    rng_reg = keyed.keyed_rng(cfg.seed, "times-reg", step)
    mid = rng_reg.integers(2, n_frames, size=batch)
    times_reg = np.stack([mid - 1, mid, mid + 1], axis=1)
    return times_adv, times_reg


def smoothness_penalty(fields: ad.Tensor, frames: ad.Tensor) -> ad.Tensor:
    """Edge-aware temporal smoothness over consecutive-frame triplets.

    ``fields``/``frames`` hold per-clip triplets (B*3, ., H, W) clip-major.
    The difference of the two flows is L1-penalized with weights from the
    warped middle frame (detached so weights act as constants)."""
    folded = ad.fold_frames(fields, 3)  # (B, 6, H, W)
    f_prev = ad.slice_channels(folded, 0, 2)
    f_mid = ad.slice_channels(folded, 2, 4)
    f_next = ad.slice_channels(folded, 4, 6)
    diff = ad.sub(ad.sub(f_next, f_mid), ad.sub(f_mid, f_prev))
    mid_frames = frames.data[1::3]  # (B, 3, H, W)
    weights = np.stack([edge_weights(f) for f in mid_frames])[:, None].astype(np.float32)
    return ad.reduce_mean(ad.mul(ad.abs_(diff), ad.tensor(weights)))


def finetune_step(state: TrainState, clips: np.ndarray) -> dict:
    """One D + one G update on a batch of clips (B, T, 3, H, W).

    Adversarial and regularization paths share latents and motion noise but
    sample their frame times independently."""
    cfg = state.config
    if clips.ndim != 5 or clips.shape[0] == 0:
        raise ShapeError(f"need a nonempty (B, T, 3, H, W) clip batch, got {clips.shape}")
    if clips.shape[1] < 3:
        raise ShapeError(f"clips too short for triplets: {clips.shape[1]} frames")
    step = state.step
    batch, n_frames = clips.shape[:2]
    latent = state.net_config.latent_dim
    times_adv, times_reg = _sample_times(cfg, step, batch, n_frames)
    z_c = ad.tensor(keyed.normal(cfg.seed, "z_c", step, (batch, latent, 1, 1)))
    z_d = ad.tensor(keyed.normal(cfg.seed, "z_d", step, (batch, latent, 1, 1)))
    motion_seed = int(keyed.randint(cfg.seed, "motion-seed", step, 0, 2**31 - 1))

    real = clips[np.arange(batch)[:, None], times_adv - 1]  # (B, 3, 3, H, W)
    real = np.ascontiguousarray(real.reshape(-1, *clips.shape[2:]))
    with ad.no_grad():
        fake_frames, _, _ = render_frames(
            state.bundle, z_c, z_d, motion_seed, times_adv, no_fc=cfg.no_fc
        )
    loss_d, real_mean, r1_value, norm_d = _discriminator_update(
        state, real, fake_frames.data, times_adv, "video"
    )

    state.adam_g.zero_grads()
    state.adam_d.zero_grads()
    frames_g, _, _ = render_frames(state.bundle, z_c, z_d, motion_seed, times_adv, no_fc=cfg.no_fc)
    fake_logits = state.disc.logits(frames_g, times_adv, "video")
    _, loss_g = adv_losses(ad.tensor(np.zeros((batch, 1, 1, 1), np.float32)), fake_logits)

    loss_reg_value = 0.0
    total = loss_g
    if not cfg.no_reg:
        frames_r, _, fields_r = render_frames(
            state.bundle, z_c, z_d, motion_seed, times_reg, no_fc=cfg.no_fc
        )
        loss_reg = smoothness_penalty(fields_r, frames_r)
        loss_reg_value = float(loss_reg.item())
        total = ad.add(loss_g, ad.mul(loss_reg, _const(cfg.lambda_reg)))
    total.backward()
    norm_g = grad_norm(state.g_stores)
    state.adam_g.step()
    state.ema_update()
    state.adam_d.zero_grads()

    state.step += 1
    return {
        "step": step,
        "loss_d": float(loss_d),
        "loss_g": float(loss_g.item()),
        "loss_reg": loss_reg_value,
        "r1": r1_value,
        "real_logit": real_mean,
        "grad_norm_g": norm_g,
        "grad_norm_d": norm_d,
    }


def train(
    config: TrainConfig,
    data: np.ndarray,
    net_config: NetConfig | None = None,
    out_dir: str | None = None,
    state: TrainState | None = None,
) -> tuple[TrainState, list[dict]]:
    """Run one stage over in-memory clips (N, T, 3, H, W); returns the final
    state and per-step loss records.  With ``out_dir`` set, writes a JSONL
    log, periodic checkpoints, and a final checkpoint under ``final/``."""
    data = np.asarray(data, np.float32)
    if data.ndim != 5:
        raise ShapeError(f"expected clips (N, T, 3, H, W), got {data.shape}")
    state = state or TrainState(config, net_config)
    cfg = state.config
    pool = data.reshape(-1, *data.shape[2:]) if cfg.stage == "pretrain" else data
    history: list[dict] = []
    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_fh = open(os.path.join(out_dir, "log.jsonl"), "a")
    t0 = time.monotonic()
    try:
        for _ in range(cfg.total_steps):
            idx = keyed.keyed_rng(cfg.seed, "batch", state.step).integers(
                0, pool.shape[0], size=cfg.batch_size
            )
            batch = pool[idx]
            record = (
                pretrain_step(state, batch)
                if cfg.stage == "pretrain"
                else finetune_step(state, batch)
            )
            record["wallclock"] = round(time.monotonic() - t0, 3)
            history.append(record)
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
                if record["step"] % cfg.log_every == 0:
                    log_fh.flush()
            if (
                out_dir is not None
                and cfg.checkpoint_every > 0
                and state.step % cfg.checkpoint_every == 0
                and state.step < cfg.total_steps
            ):
                state.save(os.path.join(out_dir, f"step_{state.step:06d}"))
        if out_dir is not None:
            state.save(os.path.join(out_dir, "final"))
    finally:
        if log_fh is not None:
            log_fh.close()
    return state, history
