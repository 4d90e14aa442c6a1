"""Top-level acceptance gates.

Fast gates run the real computation inline.  The two training-based gates
validate JSON artifacts that the scripts under scripts/ cache in
results/ (overfit_track.py, run_trends.py) — re-running those costs hours
of single-core CPU, so the suite checks the committed artifacts and their
recorded budgets instead of retraining on every pytest invocation.
"""

import json
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from warpgen import gradcheck
from warpgen.apps import propagate_edit, propagate_mask
from warpgen.cli import main as cli_main
from warpgen.containers import load_gdf, load_gdp, save_gdf, save_gdp
from warpgen.grids import DeformationField, flow_between, smoothness_loss, warp
from warpgen.metrics import temporal_jerk
from warpgen.nets import GeneratorBundle, NetConfig, sample_video

ROOT = Path(__file__).resolve().parent.parent
RESULTS = ROOT / "results"
GOLDEN = Path(__file__).resolve().parent / "golden"


def load_artifact(name: str) -> dict:
    path = RESULTS / name
    if not path.exists():
        pytest.fail(
            f"missing results/{name}; regenerate with the matching script under scripts/"
        )
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# differentiation gate


def test_gradient_suite_all_ops_within_tolerance():
    t0 = time.monotonic()
    results = gradcheck.run_all(seed=0)
    elapsed = time.monotonic() - t0
    failed = [r.name for r in results if not r.passed]
    assert not failed, f"gradient checks failed: {failed}"
    assert len(results) >= 20  # every differentiable op is registered
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# zero-init sampling contract


def test_untrained_bundle_samples_copies_of_canonical():
    net = NetConfig()  # default init zeroes the field projection
    bundle = GeneratorBundle(net, seed=3)
    res = sample_video(bundle, seed=3, n_frames=16)
    assert res.frames.shape == (16, 3, 32, 32)
    assert np.abs(res.fields).max() == 0.0
    assert np.abs(res.frames - res.canonical[None]).max() <= 1e-6


def test_sample_cli_demonstrates_zero_init(tmp_path):
    out = tmp_path / "sample"
    rc = cli_main(["sample", "--out", str(out), "--seed", "5", "--frames", "4"])
    assert rc == 0
    canonical = load_gdf(str(out / "canonical.gdf"))[0]
    frames = load_gdf(str(out / "frames.gdf"))
    fields = load_gdf(str(out / "fields.gdf"))
    assert np.abs(fields).max() == 0.0
    assert np.abs(frames - canonical[None]).max() <= 1e-6


# ---------------------------------------------------------------------------
# warp identities


def test_warp_identities_match_hand_values():
    rng = np.random.default_rng(0)
    img = rng.uniform(-1, 1, size=(3, 5, 6)).astype(np.float32)
    assert np.array_equal(warp(img, np.zeros((2, 5, 6), np.float32)), img)

    row = np.array([[[1.0, 2.0, 3.0, 4.0]]])
    shift = np.zeros((2, 1, 4))
    shift[0] = 1.0
    assert np.array_equal(warp(row, shift)[0, 0], [2.0, 3.0, 4.0, 4.0])

    quad = np.arange(4, dtype=np.float64).reshape(1, 2, 2)
    half = np.zeros((2, 2, 2))
    half[:, 0, 0] = 0.5
    out = warp(quad, half)
    assert out[0, 0, 0] == quad.mean()
    assert np.array_equal(out[0].ravel()[1:], quad[0].ravel()[1:])


# ---------------------------------------------------------------------------
# temporal-smoothness identities


def _affine_fields(t_count=5, h=4, w=5):
    # eighth-integer coefficients keep fp32 arithmetic exact
    rng = np.random.default_rng(11)
    base = rng.integers(-8, 9, size=(2, h, w)).astype(np.float32) / 8.0
    slope = rng.integers(-8, 9, size=(2, h, w)).astype(np.float32) / 8.0
    return [DeformationField(base + t * slope, t) for t in range(1, t_count + 1)]


def test_smoothness_exactly_zero_for_time_affine_fields():
    fields = _affine_fields()
    flows = [flow_between(a, b) for a, b in zip(fields, fields[1:])]
    weights = np.ones((4, 5))
    for f1, f2 in zip(flows, flows[1:]):
        loss, _, _ = smoothness_loss(f1, f2, weights)
        assert loss == 0.0


def test_flow_telescoping_identity_elementwise():
    rng = np.random.default_rng(12)
    fields = [
        DeformationField(rng.integers(-64, 65, size=(2, 4, 5)).astype(np.float32) / 8.0, t)
        for t in range(1, 7)
    ]
    total = sum(flow_between(a, b).vectors for a, b in zip(fields, fields[1:]))
    assert np.array_equal(total, fields[-1].offsets - fields[0].offsets)


def test_jerk_equals_mean_triplet_smoothness():
    rng = np.random.default_rng(13)
    fields = rng.uniform(-2, 2, size=(7, 2, 6, 5)).astype(np.float32)
    ones = np.ones(fields.shape[2:])
    triplet = [
        smoothness_loss(
            flow_between(DeformationField(fields[t], t + 1), DeformationField(fields[t + 1], t + 2)),
            flow_between(DeformationField(fields[t + 1], t + 2), DeformationField(fields[t + 2], t + 3)),
            ones,
        )[0]
        for t in range(fields.shape[0] - 2)
    ]
    assert temporal_jerk(fields, "field") == pytest.approx(np.mean(triplet), abs=1e-6)


# ---------------------------------------------------------------------------
# propagation consistency


@pytest.fixture(scope="module")
def warped_sample():
    net = NetConfig(latent_dim=16, widths=(16, 12, 8, 8), motion_freqs=4, init_mode="xavier")
    bundle = GeneratorBundle(net, seed=2)
    return sample_video(bundle, seed=2, n_frames=6)


def test_unmodified_edit_reproduces_video_bitwise(warped_sample):
    clip = propagate_edit(warped_sample.canonical, warped_sample.fields)
    assert np.array_equal(clip.frames, warped_sample.frames)


def test_mask_equals_thresholded_edit(warped_sample):
    h, w = warped_sample.canonical.shape[1:]
    mask = np.zeros((h, w), np.uint8)
    mask[10:20, 8:18] = 1
    seq = propagate_mask(mask, warped_sample.fields)
    soft = propagate_edit(
        np.broadcast_to(mask, (3, h, w)).astype(np.float32), warped_sample.fields
    )
    assert np.array_equal(seq.masks, (soft.frames[:, 0] >= 0.5).astype(np.uint8))


# ---------------------------------------------------------------------------
# container formats


def test_container_golden_files_stable(tmp_path):
    arr = load_gdf(str(GOLDEN / "example.gdf"))
    save_gdf(str(tmp_path / "copy.gdf"), arr)
    assert (tmp_path / "copy.gdf").read_bytes() == (GOLDEN / "example.gdf").read_bytes()

    entries = load_gdp(str(GOLDEN / "example.gdp"))
    save_gdp(str(tmp_path / "copy.gdp"), entries)
    assert (tmp_path / "copy.gdp").read_bytes() == (GOLDEN / "example.gdp").read_bytes()


# ---------------------------------------------------------------------------
# overfit tracking oracle (validates the cached training artifact)


def test_overfit_tracking_matches_manifest():
    art = load_artifact("overfit_track.json")
    assert art["pretrain_steps"] + art["finetune_steps"] == 2000
    errors = np.asarray(art["errors"])
    assert len(errors) == 16
    assert float(np.median(errors)) == pytest.approx(art["median_err"])
    assert art["median_err"] < 0.5, f"median tracking error {art['median_err']:.3f}px"
    assert art["max_err"] < 1.0, f"max tracking error {art['max_err']:.3f}px"
    assert art["train_wall_s"] < 1200.0  # < 20 min CPU (single-core box)
    assert all(art["valid"])


# ---------------------------------------------------------------------------
# training trend checks (validates the cached suite artifact)


def _rows_by(rows, stage):
    return {r["seed"]: r for r in rows if r["stage"] == stage}


def _trend(rows, seeds, lo_stage, hi_stage, key, factor=1.0):
    """median(lo) <= factor * median(hi), with per-seed inversions counted."""
    lo = _rows_by(rows, lo_stage)
    hi = _rows_by(rows, hi_stage)
    lo_med = statistics.median(lo[s][key] for s in seeds)
    hi_med = statistics.median(hi[s][key] for s in seeds)
    inversions = [s for s in seeds if not lo[s][key] <= factor * hi[s][key]]
    return lo_med, hi_med, inversions


def test_training_trend_orderings():
    art = load_artifact("trends.json")
    cfg = art["config"]
    assert cfg["pretrain_steps"] == 2000 and cfg["finetune_steps"] == 3000
    seeds = cfg["seeds"]
    assert len(seeds) == 3
    assert art["total_cpu_s"] < 3 * 3600.0
    rows = art["rows"]

    checks = {
        "pretrain improves toy-FID >= 50% over init": ("pre", "init", "toy_fid", 0.5),
        "finetune keeps toy-FID at or below pretrain": ("default", "pre", "toy_fid", 1.0),
        "dropping conditioning worsens toy-FVD": ("default", "no_fc", "toy_fvd", 1.0),
        "dropping smoothness raises field jerk": ("default", "no_reg", "jerk_field", 1.0),
        "skipping pretrain worsens toy-FVD": ("default", "no_pretrain", "toy_fvd", 1.0),
        "dropping zero init worsens toy-FVD": ("default", "no_multiplier", "toy_fvd", 1.0),
    }
    failures = []
    for label, (lo_stage, hi_stage, key, factor) in checks.items():
        lo_med, hi_med, inversions = _trend(rows, seeds, lo_stage, hi_stage, key, factor)
        if inversions:
            print(f"note: {label}: inversion at seeds {inversions}")
        if not (lo_med <= factor * hi_med):
            failures.append(f"{label}: median {lo_med:.4f} !<= {factor}*{hi_med:.4f}")
        elif len(inversions) >= 2:
            failures.append(f"{label}: {len(inversions)} seed inversions {inversions}")
    assert not failures, "; ".join(failures)


# ---------------------------------------------------------------------------
# workbench flow against the trained demo checkpoint (API leg of the
# browser end-to-end; the browser-side logic is covered in frontend/)


@pytest.mark.slow
def test_workbench_flow_latency_and_empty_edit():
    from fastapi.testclient import TestClient

    from warpgen.server import build_app

    ckpt = RESULTS / "demo64" / "final" / "bundle.gdp"
    if not ckpt.exists():
        pytest.fail("missing results/demo64; regenerate with scripts/train_demo_checkpoint.py")

    app = build_app(default_checkpoint=str(ckpt), frames=16)
    timings = {}
    with TestClient(app) as client:

        def call(label, method, url, **kw):
            t0 = time.monotonic()
            resp = getattr(client, method)(url, **kw)
            timings[label] = time.monotonic() - t0
            assert resp.status_code == 200, resp.text
            return resp.json()

        sess = call("session", "post", "/session", json={"seed": 1})
        sid = sess["session_id"]

        base = call("resample", "post", f"/session/{sid}/resample", json={"motion_seed": 1})
        assert len(base["frames_png_b64"]) == 16

        edit = call(
            "edit",
            "post",
            f"/session/{sid}/edit",
            json={"edited_canonical_png_b64": sess["canonical_png_b64"]},
        )
        assert edit["frames_png_b64"] == base["frames_png_b64"]  # empty edit: zero diff

        track = call("track", "post", f"/session/{sid}/track", json={"x": 32, "y": 32})
        assert len(track["trajectory"]) == 16

        import base64
        import io

        from PIL import Image

        mask = np.zeros((64, 64), np.uint8)
        mask[20:40, 20:40] = 255
        buf = io.BytesIO()
        Image.fromarray(mask, "L").save(buf, "PNG")
        payload = base64.b64encode(buf.getvalue()).decode()
        seq = call("mask", "post", f"/session/{sid}/mask", json={"mask_png_b64": payload})
        assert len(seq["masks_png_b64"]) == 16

        new_motion = call(
            "resample2", "post", f"/session/{sid}/resample", json={"motion_seed": 9}
        )
        assert len(new_motion["frames_png_b64"]) == 16
        assert new_motion["frames_png_b64"] != base["frames_png_b64"]

    slow = {k: round(v, 2) for k, v in timings.items() if v >= 2.0}
    assert not slow, f"requests over the 2 s budget: {slow}"
