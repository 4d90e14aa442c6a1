import json
import math
import os

import numpy as np
import pytest

from warpgen import autodiff as ad
from warpgen import train as tr
from warpgen.containers import load_gdp
from warpgen.errors import ShapeError
from warpgen.nets import GeneratorBundle, NetConfig, sample_video
from warpgen.train import TrainConfig, TrainState, adv_losses

CFG_NET = NetConfig(latent_dim=16, widths=(16, 12, 8, 8), motion_freqs=4)


def tiny_data(n_clips=4, n_frames=5, res=32, seed=0):
    rng = np.random.default_rng(seed)
    return np.clip(rng.normal(0, 0.4, (n_clips, n_frames, 3, res, res)), -1, 1).astype(
        np.float32
    )


def logits(values):
    return ad.tensor(np.asarray(values, np.float32).reshape(-1, 1, 1, 1))


def snapshot(stores):
    return [{k: v.data.copy() for k, v in s.items()} for s in stores]


def stores_equal(a, b):
    return all(
        set(sa) == set(sb) and all(np.array_equal(sa[k], sb[k]) for k in sa)
        for sa, sb in zip(a, b)
    )


class TestTrainConfig:
    def test_rejects_unknown_stage(self):
        with pytest.raises(ValueError):
            TrainConfig(stage="warmup")

    def test_pretrain_rejects_finetune_flags(self):
        with pytest.raises(ValueError):
            TrainConfig(stage="pretrain", no_fc=True)

    def test_fix_gc_needs_checkpoint(self):
        with pytest.raises(ValueError):
            TrainConfig(stage="finetune", fix_gc=True, no_pretrain=True)

    def test_no_pretrain_conflicts_with_checkpoint(self):
        with pytest.raises(ValueError):
            TrainConfig(stage="finetune", no_pretrain=True, pretrained="x")

    def test_finetune_needs_warm_start_or_flag(self):
        with pytest.raises(ValueError):
            TrainConfig(stage="finetune")

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(lambda_reg=-0.1)

    def test_round_trip(self):
        cfg = TrainConfig(stage="finetune", no_pretrain=True, seed=3)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestAdvLosses:
    def test_zero_logits_closed_form(self):
        loss_d, loss_g = adv_losses(logits([0.0, 0.0]), logits([0.0, 0.0]))
        assert loss_d.item() == pytest.approx(2 * math.log(2), rel=1e-6)
        assert loss_g.item() == pytest.approx(math.log(2), rel=1e-6)

    def test_confident_discriminator_low_loss(self):
        loss_d, _ = adv_losses(logits([30.0]), logits([-30.0]))
        assert loss_d.item() < 1e-9

    def test_generator_loss_decreasing_in_fake_logit(self):
        lo = adv_losses(logits([0.0]), logits([-1.0]))[1].item()
        hi = adv_losses(logits([0.0]), logits([1.0]))[1].item()
        assert hi < lo

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            adv_losses(logits([np.inf]), logits([0.0]))


class TestPretrain:
    def test_zero_lr_leaves_parameters_unchanged(self):
        cfg = TrainConfig(stage="pretrain", total_steps=1, batch_size=2, lr=0.0)
        state = TrainState(cfg, CFG_NET)
        before = snapshot(state.bundle.all_stores() + [state.disc.store])
        tr.pretrain_step(state, tiny_data()[0, :2, :, :, :])
        after = snapshot(state.bundle.all_stores() + [state.disc.store])
        assert stores_equal(before, after)

    def test_zeroed_head_gives_two_log_two(self):
        cfg = TrainConfig(stage="pretrain", total_steps=1, batch_size=2, lr=0.0, r1_gamma=0.0)
        state = TrainState(cfg, CFG_NET)
        for name, p in state.disc.store.items():
            if name.startswith("head_image.fc1"):
                p.data = np.zeros_like(p.data)
        rec = tr.pretrain_step(state, tiny_data()[0, :2, :, :, :])
        assert rec["loss_d"] == pytest.approx(2 * math.log(2), rel=1e-6)
        assert rec["loss_g"] == pytest.approx(math.log(2), rel=1e-6)

    def test_empty_batch_rejected(self):
        state = TrainState(TrainConfig(stage="pretrain"), CFG_NET)
        with pytest.raises(ShapeError):
            tr.pretrain_step(state, np.zeros((0, 3, 32, 32), np.float32))

    def test_losses_finite_and_parameters_move(self):
        cfg = TrainConfig(stage="pretrain", total_steps=3, batch_size=2, seed=5)
        state, history = tr.train(cfg, tiny_data(), CFG_NET)
        assert len(history) == 3
        for rec in history:
            assert np.isfinite([rec["loss_d"], rec["loss_g"], rec["grad_norm_g"]]).all()
        moved = snapshot(state.bundle.image_stores())
        fresh = snapshot(TrainState(cfg, CFG_NET).bundle.image_stores())
        assert not stores_equal(moved, fresh)

    def test_deterministic_loss_trajectory(self):
        cfg = TrainConfig(stage="pretrain", total_steps=8, batch_size=2, seed=9)
        data = tiny_data()
        _, h1 = tr.train(cfg, data, CFG_NET)
        _, h2 = tr.train(cfg, data, CFG_NET)
        for a, b in zip(h1, h2):
            assert a["loss_d"] == b["loss_d"]
            assert a["loss_g"] == b["loss_g"]


@pytest.fixture(scope="module")
def pretrain_ckpt(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("pre"))
    cfg = TrainConfig(stage="pretrain", total_steps=2, batch_size=2, seed=1)
    tr.train(cfg, tiny_data(), CFG_NET, out_dir=out)
    return os.path.join(out, "final")


class TestFinetune:
    def ft_config(self, ckpt, **kw):
        base = dict(stage="finetune", total_steps=1, batch_size=2, seed=2, pretrained=ckpt)
        base.update(kw)
        return TrainConfig(**base)

    def test_warm_start_copies_image_params(self, pretrain_ckpt):
        state = TrainState(self.ft_config(pretrain_ckpt), CFG_NET)
        src = GeneratorBundle.load(os.path.join(pretrain_ckpt, "bundle.gdp"))
        assert stores_equal(snapshot(state.bundle.image_stores()), snapshot(src.image_stores()))

    def test_video_head_reset_but_trunk_kept(self, pretrain_ckpt):
        state = TrainState(self.ft_config(pretrain_ckpt), CFG_NET)
        src = load_gdp(os.path.join(pretrain_ckpt, "disc.gdp"))
        now = state.disc.store.arrays()
        assert np.array_equal(now["from_rgb.weight"], src["from_rgb.weight"])
        assert not np.array_equal(now["head_video.fc0.weight"], src["head_video.fc0.weight"])

    def test_first_step_zero_reg_loss(self, pretrain_ckpt):
        state = TrainState(self.ft_config(pretrain_ckpt), CFG_NET)
        rec = tr.finetune_step(state, tiny_data(2, 5))
        assert rec["loss_reg"] == 0.0  # zero-init fields -> zero flows

    def test_short_clips_rejected(self, pretrain_ckpt):
        state = TrainState(self.ft_config(pretrain_ckpt), CFG_NET)
        with pytest.raises(ShapeError):
            tr.finetune_step(state, tiny_data(2, 2))

    def test_lambda_zero_matches_no_reg_updates(self, pretrain_ckpt):
        data = tiny_data(3, 6)
        sa = TrainState(self.ft_config(pretrain_ckpt, lambda_reg=0.0), CFG_NET)
        sb = TrainState(self.ft_config(pretrain_ckpt, no_reg=True), CFG_NET)
        for _ in range(2):
            tr.finetune_step(sa, data)
            tr.finetune_step(sb, data)
        assert stores_equal(
            snapshot(sa.bundle.all_stores() + [sa.disc.store]),
            snapshot(sb.bundle.all_stores() + [sb.disc.store]),
        )

    def test_fix_gc_freezes_canonical_generator(self, pretrain_ckpt):
        state = TrainState(self.ft_config(pretrain_ckpt, fix_gc=True, total_steps=3), CFG_NET)
        before = snapshot(state.bundle.image_stores())
        data = tiny_data(3, 6)
        for _ in range(3):
            tr.finetune_step(state, data)
        assert stores_equal(before, snapshot(state.bundle.image_stores()))
        # motion side still trains
        fresh = TrainState(self.ft_config(pretrain_ckpt, fix_gc=True), CFG_NET)
        assert not stores_equal(
            snapshot(state.bundle.motion_stores()), snapshot(fresh.bundle.motion_stores())
        )

    def test_no_fc_step_runs(self, pretrain_ckpt):
        state = TrainState(self.ft_config(pretrain_ckpt, no_fc=True), CFG_NET)
        rec = tr.finetune_step(state, tiny_data(2, 5))
        assert np.isfinite(rec["loss_g"])

    def test_no_multiplier_fields_nonzero_at_start(self):
        cfg = TrainConfig(
            stage="finetune", no_pretrain=True, init_mode="no_multiplier", total_steps=1
        )
        state = TrainState(cfg, CFG_NET)
        result = sample_video(state.bundle, seed=0, n_frames=3)
        assert np.abs(result.fields).max() > 1e-4

    def test_deterministic_trajectory(self, pretrain_ckpt):
        cfg = self.ft_config(pretrain_ckpt, total_steps=5)
        data = tiny_data(3, 6)
        _, h1 = tr.train(cfg, data, CFG_NET)
        _, h2 = tr.train(cfg, data, CFG_NET)
        for a, b in zip(h1, h2):
            assert (a["loss_d"], a["loss_g"], a["loss_reg"]) == (
                b["loss_d"],
                b["loss_g"],
                b["loss_reg"],
            )


class TestSampling:
    def test_adversarial_times_distinct_sorted(self):
        cfg = TrainConfig(stage="pretrain", seed=4)
        adv, reg = tr._sample_times(cfg, step=7, batch=16, n_frames=9)
        assert adv.shape == reg.shape == (16, 3)
        assert (np.diff(adv, axis=1) > 0).all()
        assert adv.min() >= 1 and adv.max() <= 9

    def test_reg_triplets_adjacent_interior(self):
        cfg = TrainConfig(stage="pretrain", seed=4)
        _, reg = tr._sample_times(cfg, step=3, batch=32, n_frames=7)
        assert (np.diff(reg, axis=1) == 1).all()
        assert reg[:, 1].min() >= 2 and reg[:, 1].max() <= 6

    def test_streams_independent(self):
        cfg = TrainConfig(stage="pretrain", seed=4)
        adv1, reg1 = tr._sample_times(cfg, step=0, batch=64, n_frames=16)
        # middle times should not follow the adversarial draw
        assert not np.array_equal(adv1[:, 1], reg1[:, 1])


class TestLoop:
    def test_writes_log_and_checkpoint(self, tmp_path):
        out = str(tmp_path / "run")
        cfg = TrainConfig(stage="pretrain", total_steps=4, batch_size=2, checkpoint_every=2)
        _, history = tr.train(cfg, tiny_data(), CFG_NET, out_dir=out)
        lines = [json.loads(x) for x in open(os.path.join(out, "log.jsonl"))]
        assert [r["step"] for r in lines] == [0, 1, 2, 3]
        for key in ("loss_d", "loss_g", "loss_reg", "r1", "grad_norm_g", "grad_norm_d", "wallclock"):
            assert key in lines[0]
        assert os.path.exists(os.path.join(out, "step_000002", "bundle.gdp"))
        assert os.path.exists(os.path.join(out, "final", "disc.gdp"))
        assert os.path.exists(os.path.join(out, "final", "bundle.gdp.json"))

    def test_r1_logged_on_interval(self):
        cfg = TrainConfig(stage="pretrain", total_steps=3, batch_size=2, r1_interval=2)
        _, history = tr.train(cfg, tiny_data(), CFG_NET)
        assert history[0]["r1"] >= 0.0
        assert history[1]["r1"] == 0.0  # off-interval steps skip the penalty
        assert history[2]["r1"] > 0.0


class TestEma:
    def test_decay_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(ema_decay=1.0)
        with pytest.raises(ValueError):
            TrainConfig(ema_decay=-0.1)

    def test_off_by_default(self):
        cfg = TrainConfig(stage="pretrain", total_steps=2, batch_size=2, seed=3)
        state, _ = tr.train(cfg, tiny_data(), CFG_NET)
        assert state.ema is None

    def test_save_writes_average_and_restores_raw(self, tmp_path):
        cfg = TrainConfig(stage="pretrain", total_steps=4, batch_size=2, seed=3, ema_decay=0.5)
        state, _ = tr.train(cfg, tiny_data(), CFG_NET)
        raw = snapshot(state.bundle.image_stores())
        state.save(str(tmp_path))
        assert stores_equal(raw, snapshot(state.bundle.image_stores()))
        saved = GeneratorBundle.load(os.path.join(str(tmp_path), "bundle.gdp"))
        assert not stores_equal(snapshot(saved.image_stores()), raw)

    def test_average_matches_recurrence(self):
        data = tiny_data()
        decay = 0.5
        per_step = []
        for n in (1, 2, 3):
            cfg = TrainConfig(stage="pretrain", total_steps=n, batch_size=2, seed=7)
            plain, _ = tr.train(cfg, data, CFG_NET)
            per_step.append(snapshot(plain.bundle.image_stores()))
        cfg = TrainConfig(stage="pretrain", total_steps=3, batch_size=2, seed=7, ema_decay=decay)
        state, _ = tr.train(cfg, data, CFG_NET)
        expect = per_step[0]  # shadow is seeded from the first update
        for nxt in per_step[1:]:
            expect = [
                {k: decay * e[k] + (1 - decay) * n[k] for k in e}
                for e, n in zip(expect, nxt)
            ]
        for shadow, want in zip(state.ema, expect):
            assert set(shadow) == set(want)
            for k in want:
                np.testing.assert_allclose(shadow[k], want[k], rtol=1e-6, atol=1e-7)
