"""Command-line entry points for every workflow.

Subcommands: gen-data, pretrain, finetune, sample, propagate-edit, track,
segment, resample-motion, eval, ablate, gradcheck, serve.  Exit codes:
0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import apps, config as cfgmod, gradcheck, harness, toydata
from .containers import load_gdf, save_gdf
from .errors import FormatError, ShapeError
from .nets import GeneratorBundle, sample_video
from .train import train


def _load_doc(args) -> dict:
    return cfgmod.load_toml(args.config) if args.config else {}


def _bundle_from(args, doc) -> GeneratorBundle:
    if getattr(args, "checkpoint", None):
        return GeneratorBundle.load(args.checkpoint)
    return GeneratorBundle(cfgmod.net_config(doc), seed=args.seed or 0)


def _write_json(args, payload) -> None:
    text = json.dumps(payload, indent=1)
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_gen_data(args) -> int:
    doc = _load_doc(args)
    data_cfg = cfgmod.data_config(
        doc,
        count=args.count,
        resolution=args.resolution,
        frame_count=args.frames,
        seed=args.seed,
    )
    manifest = toydata.synth_dataset(
        args.out,
        count=data_cfg["count"],
        seed=data_cfg["seed"],
        resolution=data_cfg["resolution"],
        frame_count=data_cfg["frame_count"],
    )
    print(f"wrote {manifest['count']} clips to {args.out}")
    return 0


def _run_training(args, stage: str, **flag_overrides) -> int:
    doc = _load_doc(args)
    train_cfg = cfgmod.train_config(
        doc,
        stage=stage,
        total_steps=args.steps,
        batch_size=args.batch_size,
        seed=args.seed,
        **flag_overrides,
    )
    data = toydata.load_dataset(args.data)
    _, history = train(train_cfg, data, cfgmod.net_config(doc), out_dir=args.out)
    last = history[-1]
    print(
        f"{stage} done: {len(history)} steps, "
        f"loss_d={last['loss_d']:.4f} loss_g={last['loss_g']:.4f}"
    )
    return 0


def cmd_pretrain(args) -> int:
    return _run_training(args, "pretrain")


def cmd_finetune(args) -> int:
    return _run_training(
        args,
        "finetune",
        pretrained=args.pretrained,
        no_fc=args.no_fc or None,
        no_reg=args.no_reg or None,
        fix_gc=args.fix_gc or None,
        no_pretrain=args.no_pretrain or None,
        init_mode=args.init_mode,
        lambda_reg=args.lambda_reg,
    )


def cmd_sample(args) -> int:
    bundle = _bundle_from(args, _load_doc(args))
    result = sample_video(
        bundle, seed=args.seed or 0, n_frames=args.frames, motion_seed=args.motion_seed
    )
    os.makedirs(args.out, exist_ok=True)
    save_gdf(os.path.join(args.out, "canonical.gdf"), result.canonical[None])
    save_gdf(os.path.join(args.out, "fields.gdf"), result.fields)
    save_gdf(os.path.join(args.out, "frames.gdf"), result.frames)
    print(f"wrote {args.frames} frames to {args.out}")
    return 0


def cmd_propagate_edit(args) -> int:
    edited = load_gdf(args.edited)
    if edited.shape[0] != 1:
        raise ShapeError(f"edited canonical must be a single frame, got {edited.shape}")
    clip = apps.propagate_edit(edited[0], load_gdf(args.fields))
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    save_gdf(args.out, clip.frames)
    print(f"wrote {clip.frames.shape[0]} frames to {args.out}")
    return 0


def cmd_track(args) -> int:
    traj = apps.track_point((args.x, args.y), load_gdf(args.fields))
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(traj.to_json() + "\n")
    print(traj.to_json())
    return 0


def cmd_segment(args) -> int:
    mask = load_gdf(args.mask)
    if mask.shape[:2] != (1, 1):
        raise ShapeError(f"mask must be (1, 1, H, W), got {mask.shape}")
    seq = apps.propagate_mask(mask[0, 0], load_gdf(args.fields))
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    seq.save(args.out)
    print(f"wrote {seq.masks.shape[0]} masks to {args.out}")
    return 0


def cmd_resample_motion(args) -> int:
    bundle = _bundle_from(args, _load_doc(args))
    seeds = [int(s) for s in args.motion_seeds.split(",") if s]
    if not seeds:
        raise ValueError("need at least one motion seed")
    results = apps.resample_motion(bundle, args.seed or 0, args.frames, seeds)
    os.makedirs(args.out, exist_ok=True)
    save_gdf(os.path.join(args.out, "canonical.gdf"), results[0].canonical[None])
    for seed, result in zip(seeds, results):
        save_gdf(os.path.join(args.out, f"frames_{seed}.gdf"), result.frames)
        save_gdf(os.path.join(args.out, f"fields_{seed}.gdf"), result.fields)
    print(f"wrote {len(seeds)} motion variants to {args.out}")
    return 0


def cmd_eval(args) -> int:
    bundle = _bundle_from(args, _load_doc(args))
    real = toydata.load_dataset(args.data)
    scores = harness.evaluate_bundle(
        bundle, real, args.clips, seed=args.seed or 0, no_fc=args.no_fc
    )
    _write_json(args, scores)
    return 0


def cmd_ablate(args) -> int:
    doc = _load_doc(args)
    axes = [a for a in args.axes.split(",") if a]
    seeds = list(range(args.seeds))
    rows = harness.run_ablation(
        toydata.load_dataset(args.data),
        args.pretrained,
        axes,
        seeds,
        steps=args.steps,
        net_config=cfgmod.net_config(doc),
        eval_samples=args.clips,
    )
    _write_json(args, rows)
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(seed=args.seed or 0)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{status:4s} {r.name:32s} max_rel_err={r.max_rel_err:.3e} ({r.seconds:.2f}s)")
    print(f"{len(results) - len(failed)}/{len(results)} gradient checks passed")
    return 1 if failed else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import build_app

    app = build_app(default_checkpoint=args.checkpoint, frames=args.frames)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", type=str, default=None, help="TOML config file")
        p.add_argument("--out", type=str, default=None)
        return p

    p = add("gen-data", cmd_gen_data, help="synthesize a toy clip dataset")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)

    for name, func in (("pretrain", cmd_pretrain), ("finetune", cmd_finetune)):
        p = add(name, func, help=f"run the {name} stage")
        p.add_argument("--data", required=True)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        if name == "finetune":
            p.add_argument("--pretrained", type=str, default=None)
            p.add_argument("--no-fc", action="store_true")
            p.add_argument("--no-reg", action="store_true")
            p.add_argument("--fix-gc", action="store_true")
            p.add_argument("--no-pretrain", action="store_true")
            p.add_argument("--init-mode", type=str, default=None)
            p.add_argument("--lambda-reg", type=float, default=None)

    p = add("sample", cmd_sample, help="sample a video from a bundle")
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--motion-seed", type=int, default=None)

    p = add("propagate-edit", cmd_propagate_edit, help="warp an edited canonical through fields")
    p.add_argument("--edited", required=True)
    p.add_argument("--fields", required=True)

    p = add("track", cmd_track, help="track a canonical point through fields")
    p.add_argument("--fields", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)

    p = add("segment", cmd_segment, help="propagate a canonical mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--fields", required=True)

    p = add("resample-motion", cmd_resample_motion, help="same content, new motions")
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--motion-seeds", type=str, default="1,2,3")

    p = add("eval", cmd_eval, help="score a bundle against a real dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--clips", type=int, default=32)
    p.add_argument(
        "--no-fc", action="store_true",
        help="sample with conditioning zeroed (for bundles trained that way)",
    )

    p = add("ablate", cmd_ablate, help="train and score flag variants")
    p.add_argument("--data", required=True)
    p.add_argument("--pretrained", type=str, default=None)
    p.add_argument("--axes", type=str, default="default")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--clips", type=int, default=32)

    add("gradcheck", cmd_gradcheck, help="finite-difference gradient suite")

    p = add("serve", cmd_serve, help="HTTP service for the workbench")
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--frames", type=int, default=16)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, FormatError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
