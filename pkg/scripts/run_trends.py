"""Trend-check training suite: 3 seeds x (pretrain + 5 finetune variants).

For each seed, scores the untrained generator, pretrains the image stage,
then fine-tunes the variants (default, no_fc, no_reg, no_pretrain,
no_multiplier) from the shared pretrain checkpoint and scores each.
Writes results/trends.json with per-run metrics, timing, and a summary of
the expected metric orderings.

Resumable: finished training runs (final checkpoint on disk) and finished
evaluations (eval json on disk) are skipped on re-invocation.
"""

import argparse
import json
import statistics
import time
from pathlib import Path

from warpgen.harness import evaluate_bundle, variant_config
from warpgen.nets import GeneratorBundle, NetConfig
from warpgen.toydata import load_dataset, synth_dataset
from warpgen.train import TrainConfig, train

TREND_AXES = ("default", "no_fc", "no_reg", "no_pretrain", "no_multiplier")
DATA_SEED = 7


def ensure_dataset(workdir: Path, count: int):
    data_dir = workdir / "data"
    if not (data_dir / "manifest.json").exists():
        synth_dataset(str(data_dir), count=count, seed=DATA_SEED)
        print(f"dataset: {count} clips -> {data_dir}")
    return load_dataset(str(data_dir))


def run_training(cfg: TrainConfig, net: NetConfig, data, run_dir: Path) -> dict:
    timing_path = run_dir / "timing.json"
    if (run_dir / "final" / "bundle.gdp").exists():
        return json.loads(timing_path.read_text())
    t_wall, t_cpu = time.monotonic(), time.process_time()
    train(cfg, data, net, out_dir=str(run_dir))
    timing = {
        "wall_s": round(time.monotonic() - t_wall, 1),
        "cpu_s": round(time.process_time() - t_cpu, 1),
    }
    timing_path.write_text(json.dumps(timing))
    return timing


def eval_bundle_cached(bundle, data, n_samples, seed, out_path: Path, no_fc=False) -> dict:
    if out_path.exists():
        return json.loads(out_path.read_text())
    t0 = time.monotonic()
    scores = evaluate_bundle(bundle, data, n_samples, seed=seed, no_fc=no_fc)
    scores["eval_s"] = round(time.monotonic() - t0, 1)
    out_path.write_text(json.dumps(scores))
    return scores


def final_losses(run_dir: Path) -> dict:
    last = {}
    with open(run_dir / "log.jsonl") as fh:
        for line in fh:
            last = json.loads(line)
    return {"final_loss_g": last.get("loss_g"), "final_loss_d": last.get("loss_d")}


def median_of(rows, stage, key):
    return statistics.median(r[key] for r in rows if r["stage"] == stage)


def seed_value(rows, stage, seed, key):
    (row,) = [r for r in rows if r["stage"] == stage and r["seed"] == seed]
    return row[key]


def summarize(rows, seeds) -> dict:
    """Expected orderings, each checked on the seed-median; per-seed
    violations are counted as inversions."""
    checks = {
        "pretrain_improves_fid": ("pre", "toy_fid", "init", "toy_fid", 0.5),
        "finetune_keeps_fid": ("default", "toy_fid", "pre", "toy_fid", 1.0),
        "no_fc_worse_fvd": ("default", "toy_fvd", "no_fc", "toy_fvd", 1.0),
        "no_reg_higher_jerk": ("default", "jerk_field", "no_reg", "jerk_field", 1.0),
        "no_pretrain_worse_fvd": ("default", "toy_fvd", "no_pretrain", "toy_fvd", 1.0),
        "no_multiplier_worse_fvd": ("default", "toy_fvd", "no_multiplier", "toy_fvd", 1.0),
    }
    summary = {}
    for name, (lo_stage, lo_key, hi_stage, hi_key, factor) in checks.items():
        lo_med = median_of(rows, lo_stage, lo_key)
        hi_med = median_of(rows, hi_stage, hi_key)
        inversions = [
            s
            for s in seeds
            if not seed_value(rows, lo_stage, s, lo_key)
            <= factor * seed_value(rows, hi_stage, s, hi_key)
        ]
        summary[name] = {
            "low": {"stage": lo_stage, "metric": lo_key, "median": lo_med},
            "high": {"stage": hi_stage, "metric": hi_key, "median": hi_med},
            "factor": factor,
            "median_holds": lo_med <= factor * hi_med,
            "inversion_seeds": inversions,
            "pass": lo_med <= factor * hi_med and len(inversions) <= 1,
        }
    return summary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/trends.json"))
    ap.add_argument("--workdir", type=Path, default=Path("/tmp/warpgen_trends"))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--axes", nargs="+", default=list(TREND_AXES))
    ap.add_argument("--width-mult", type=float, default=0.25)
    ap.add_argument("--pretrain-steps", type=int, default=2000)
    ap.add_argument("--finetune-steps", type=int, default=3000)
    ap.add_argument("--batch-size", type=int, default=8)
    ap.add_argument("--data-count", type=int, default=256)
    ap.add_argument("--eval-samples", type=int, default=64)
    args = ap.parse_args()

    args.workdir.mkdir(parents=True, exist_ok=True)
    data = ensure_dataset(args.workdir, args.data_count)
    net = NetConfig(width_mult=args.width_mult)

    rows = []
    for seed in args.seeds:
        seed_dir = args.workdir / f"s{seed}"
        seed_dir.mkdir(exist_ok=True)

        init_scores = eval_bundle_cached(
            GeneratorBundle(net, seed=seed),
            data,
            args.eval_samples,
            seed,
            seed_dir / "init_eval.json",
        )
        rows.append({"stage": "init", "seed": seed, **init_scores})
        print(f"s{seed} init: fid={init_scores['toy_fid']:.3f}")

        pre_dir = seed_dir / "pre"
        pre_cfg = TrainConfig(
            stage="pretrain",
            total_steps=args.pretrain_steps,
            batch_size=args.batch_size,
            seed=seed,
            log_every=50,
        )
        timing = run_training(pre_cfg, net, data, pre_dir)
        pre_scores = eval_bundle_cached(
            GeneratorBundle.load(str(pre_dir / "final" / "bundle.gdp")),
            data,
            args.eval_samples,
            seed,
            seed_dir / "pre_eval.json",
        )
        rows.append(
            {"stage": "pre", "seed": seed, **pre_scores, **timing, **final_losses(pre_dir)}
        )
        print(f"s{seed} pre: fid={pre_scores['toy_fid']:.3f} ({timing['wall_s']}s)")

        for axis in args.axes:
            run_dir = seed_dir / axis
            cfg = variant_config(
                axis,
                seed,
                args.finetune_steps,
                str(pre_dir / "final"),
                batch_size=args.batch_size,
                log_every=50,
            )
            timing = run_training(cfg, net, data, run_dir)
            scores = eval_bundle_cached(
                GeneratorBundle.load(str(run_dir / "final" / "bundle.gdp")),
                data,
                args.eval_samples,
                seed,
                seed_dir / f"{axis}_eval.json",
                no_fc=cfg.no_fc,
            )
            rows.append(
                {"stage": axis, "seed": seed, **scores, **timing, **final_losses(run_dir)}
            )
            print(
                f"s{seed} {axis}: fid={scores['toy_fid']:.3f} fvd={scores['toy_fvd']:.3f} "
                f"jerk={scores['jerk_field']:.5f} ({timing['wall_s']}s)"
            )

    summary = summarize(rows, args.seeds)
    payload = {
        "config": {
            "seeds": args.seeds,
            "axes": args.axes,
            "width_mult": args.width_mult,
            "pretrain_steps": args.pretrain_steps,
            "finetune_steps": args.finetune_steps,
            "batch_size": args.batch_size,
            "data_count": args.data_count,
            "eval_samples": args.eval_samples,
        },
        "rows": rows,
        "summary": summary,
        "total_wall_s": round(sum(r.get("wall_s", 0) for r in rows), 1),
        "total_cpu_s": round(sum(r.get("cpu_s", 0) for r in rows), 1),
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(payload, indent=2) + "\n")
    for name, c in summary.items():
        print(
            f"{name}: median {'holds' if c['median_holds'] else 'FAILS'} "
            f"({c['low']['median']:.4f} vs {c['factor']}*{c['high']['median']:.4f}), "
            f"inversions={c['inversion_seeds']} -> {'pass' if c['pass'] else 'FAIL'}"
        )
    print(f"total wall {payload['total_wall_s']}s cpu {payload['total_cpu_s']}s")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
