"""Train the 64x64 demo checkpoint used by the browser workbench e2e.

Runs a short pretrain + finetune on a small 64x64 toy dataset and leaves
the final checkpoint under results/demo64/final/ (bundle.gdp + sidecar),
which `warpgen serve --checkpoint` and the workbench tests load.
"""

import argparse
import time
from pathlib import Path

from warpgen.nets import NetConfig
from warpgen.toydata import load_dataset, synth_dataset
from warpgen.train import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/demo64"))
    ap.add_argument("--workdir", type=Path, default=Path("/tmp/warpgen_demo"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--width-mult", type=float, default=0.5)
    ap.add_argument("--pretrain-steps", type=int, default=400)
    ap.add_argument("--finetune-steps", type=int, default=600)
    ap.add_argument("--data-count", type=int, default=32)
    args = ap.parse_args()

    t0 = time.monotonic()
    data_dir = args.workdir / "data"
    if not (data_dir / "manifest.json").exists():
        synth_dataset(str(data_dir), count=args.data_count, seed=args.seed, resolution=64)
    data = load_dataset(str(data_dir))

    net = NetConfig(resolution=64, width_mult=args.width_mult)
    pre_dir = args.workdir / "pre"
    if not (pre_dir / "final" / "bundle.gdp").exists():
        pre_cfg = TrainConfig(
            stage="pretrain",
            total_steps=args.pretrain_steps,
            batch_size=8,
            seed=args.seed,
            log_every=50,
        )
        train(pre_cfg, data, net, out_dir=str(pre_dir))
        print(f"pretrain done ({time.monotonic() - t0:.0f}s)")

    fin_cfg = TrainConfig(
        stage="finetune",
        total_steps=args.finetune_steps,
        batch_size=4,
        seed=args.seed,
        pretrained=str(pre_dir / "final"),
        log_every=50,
    )
    train(fin_cfg, data, net, out_dir=str(args.out))
    print(f"finetune done ({time.monotonic() - t0:.0f}s); checkpoint at {args.out}/final")


if __name__ == "__main__":
    main()
