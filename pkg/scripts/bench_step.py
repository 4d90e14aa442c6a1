"""Benchmark training-step cost at candidate width multipliers.

Writes results/bench.json recording measured per-step seconds for the
pretrain step and the finetune step (with and without the lazy gradient
penalty) at several width multipliers.  The run-suite scripts use these
numbers to size the heavy training runs for the single-core CPU budget.
"""

import argparse
import json
import os
import time
from pathlib import Path

import numpy as np

from warpgen.nets import NetConfig
from warpgen.train import TrainConfig, TrainState, finetune_step, pretrain_step


def time_step(fn, warmup=2, reps=5):
    for _ in range(warmup):
        fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_width(width_mult, batch_size, resolution=32, frame_count=16):
    net = NetConfig(resolution=resolution, width_mult=width_mult)
    rng = np.random.default_rng(0)
    clips = np.clip(
        rng.standard_normal((8, frame_count, 3, resolution, resolution)), -1, 1
    ).astype(np.float32)
    frames = clips.reshape(-1, *clips.shape[2:])

    pre = TrainState(TrainConfig(stage="pretrain", total_steps=1, batch_size=batch_size), net)
    t_pre = time_step(lambda: pretrain_step(pre, frames[:batch_size]))

    fin_cfg = TrainConfig(
        stage="finetune", total_steps=1, batch_size=batch_size, no_pretrain=True
    )
    fin = TrainState(fin_cfg, net)
    fin.step = 1  # odd steps never hit the lazy-penalty interval
    t_fin = time_step(lambda: (setattr(fin, "step", 1), finetune_step(fin, clips[:batch_size]))[1])
    t_fin_r1 = time_step(lambda: (setattr(fin, "step", 0), finetune_step(fin, clips[:batch_size]))[1])
    return {
        "width_mult": width_mult,
        "batch_size": batch_size,
        "pretrain_s": round(t_pre, 4),
        "finetune_s": round(t_fin, 4),
        "finetune_r1_s": round(t_fin_r1, 4),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/bench.json"))
    ap.add_argument("--batch-size", type=int, default=8)
    ap.add_argument("--widths", type=float, nargs="+", default=[1.0, 0.5, 0.25])
    args = ap.parse_args()

    rows = [bench_width(w, args.batch_size) for w in args.widths]
    for row in rows:
        print(json.dumps(row))

    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(
        json.dumps({"cpu_count": os.cpu_count(), "rows": rows}, indent=2) + "\n"
    )
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
