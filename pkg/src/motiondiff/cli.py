"""Command-line operator surface: preprocess, train, sample, eval, ablate.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure. Every
command is deterministic under ``--seed``; outputs carry no timestamps.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .errors import DataError, NumericsError
from .motiondata import (
    DEFAULT_HEIGHT_THRESH,
    DEFAULT_SPEED_THRESH,
    TRAIN_STRIDE,
    MotionDataset,
    content_names,
    default_skeleton,
    generate_synthetic,
    normalize_clips,
    parse_bvh,
    serialize_bvh,
    style_names,
    window_clips,
)
from .postprocess import DEFAULT_FILTER_SIGMA, gaussian_filter, ik_foot_cleanup
from .sampler import sample
from .trainer import (
    TrainerConfig,
    desk_preset,
    load_checkpoint,
    paper_preset,
    run_training,
)

USAGE_ERROR = 2
DATA_ERROR = 3
NUMERIC_ERROR = 4


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_dataset(path: str) -> MotionDataset:
    return MotionDataset.load(path)


def cmd_preprocess(args) -> int:
    skeleton = default_skeleton()
    if args.synthetic:
        clips = generate_synthetic(
            args.num_clips, args.contents, args.styles, seed=args.seed, skeleton=skeleton
        )
        normed, stats = normalize_clips(clips)
        dataset = MotionDataset(
            clips=normed,
            stats=stats,
            skeleton=skeleton,
            content_names=content_names(args.contents),
            style_names=style_names(args.styles),
        )
    else:
        if args.input_dir is None:
            return _fail(USAGE_ERROR, "either --synthetic or --input-dir is required")
        in_dir = Path(args.input_dir)
        if not in_dir.is_dir():
            return _fail(DATA_ERROR, f"input directory not found: {in_dir}")
        files = sorted(in_dir.glob("*.bvh"))
        if not files:
            return _fail(DATA_ERROR, f"no .bvh files in {in_dir}")
        all_windows = []
        c_names: list[str] = []
        s_names: list[str] = []
        skeleton = None
        for path in files:
            skel, raw = parse_bvh(path.read_text())
            skeleton = skeleton or skel
            # labels from "<content>_<style>_anything.bvh"; single-class fallback
            parts = path.stem.split("_")
            cname = parts[0] if len(parts) >= 2 else "all"
            sname = parts[1] if len(parts) >= 2 else "all"
            if cname not in c_names:
                c_names.append(cname)
            if sname not in s_names:
                s_names.append(sname)
            windows = window_clips(
                raw,
                skel,
                stride=args.stride,
                height_thresh=args.height_thresh,
                speed_thresh=args.speed_thresh,
            )
            for w in windows:
                w.content = c_names.index(cname)
                w.style = s_names.index(sname)
            all_windows.extend(windows)
        normed, stats = normalize_clips(all_windows)
        dataset = MotionDataset(
            clips=normed,
            stats=stats,
            skeleton=skeleton,
            content_names=c_names,
            style_names=s_names,
        )
    dataset.save(args.out)
    print(f"clips: {len(dataset)}")
    print(f"wrote: {args.out}")
    return 0


def _build_config(args) -> TrainerConfig:
    preset = desk_preset if args.preset == "desk" else paper_preset
    overrides = {}
    if args.config is not None:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise DataError(f"config file not found: {cfg_path}")
        overrides.update(json.loads(cfg_path.read_text()))
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    base = preset().to_dict()
    base.update(overrides)
    return TrainerConfig.from_dict(base)


def cmd_train(args) -> int:
    config = _build_config(args)
    dataset = _load_dataset(args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config.to_dict(), sort_keys=True, indent=1) + "\n"
    )
    state, reports = run_training(config, dataset, out_dir=out_dir, resume_from=args.resume)
    print(f"steps: {state.step}")
    if reports:
        print(f"final_total: {reports[-1].total:.6f}")
    print(f"wrote: {out_dir / 'checkpoint.mck'}")
    return 0


def cmd_sample(args) -> int:
    state = load_checkpoint(args.checkpoint)
    c_names = state.data_meta.get("content_names", [])
    s_names = state.data_meta.get("style_names", [])
    if not (0 <= args.content < state.model_cfg.content_classes):
        return _fail(
            USAGE_ERROR,
            f"--content must lie in [0, {state.model_cfg.content_classes}), got {args.content}",
        )
    if not (0 <= args.style < state.model_cfg.style_classes):
        return _fail(
            USAGE_ERROR,
            f"--style must lie in [0, {state.model_cfg.style_classes}), got {args.style}",
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    clips = sample(
        state, args.content, args.style, args.n, seed=args.seed, use_ema=not args.no_ema
    )
    from .motiondata import SkeletonDef

    skeleton = SkeletonDef.from_dict(state.data_meta["skeleton"])
    files = []
    for i, clip in enumerate(clips):
        if not args.no_postprocess:
            clip = gaussian_filter(clip, args.filter_sigma)
            clip, _ = ik_foot_cleanup(clip, skeleton)
        name = f"clip_{args.content}_{args.style}_{i:03d}.bvh"
        (out_dir / name).write_text(
            serialize_bvh(skeleton, clip, state.data_meta.get("frame_time", 1 / 30))
        )
        files.append(name)
    manifest = {
        "checkpoint": str(args.checkpoint),
        "content_id": args.content,
        "content_name": c_names[args.content] if args.content < len(c_names) else None,
        "style_id": args.style,
        "style_name": s_names[args.style] if args.style < len(s_names) else None,
        "seed": args.seed,
        "use_ema": not args.no_ema,
        "postprocessed": not args.no_postprocess,
        "files": files,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    print(f"wrote: {len(files)} clips to {out_dir}")
    return 0


def _classifier_for(args, dataset: MotionDataset):
    from .evaluation import ClassifierTrainConfig, load_classifier, save_classifier, train_classifier

    if args.classifier is not None and Path(args.classifier).exists():
        clf, _ = load_classifier(args.classifier)
        return clf
    clf, meta = train_classifier(
        dataset, config=ClassifierTrainConfig(seed=args.seed)
    )
    if args.classifier is not None:
        save_classifier(args.classifier, clf, meta)
    return clf


def cmd_eval(args) -> int:
    from .evaluation import evaluate_run

    state = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(args.dataset)
    clf = _classifier_for(args, dataset)
    report = evaluate_run(
        state, dataset, clf, n_gen=args.n, seed=args.seed, use_ema=not args.no_ema
    )
    text = json.dumps(report, sort_keys=True, indent=1)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


ABLATION_ROWS = ("foot", "root", "physical", "discriminator", "full")


def cmd_ablate(args) -> int:
    from .evaluation import evaluate_run

    dataset = _load_dataset(args.dataset)
    rows = args.rows.split(",") if args.rows else list(ABLATION_ROWS)
    for row in rows:
        if row not in ABLATION_ROWS:
            return _fail(USAGE_ERROR, f"unknown ablation row {row!r}; choose from {ABLATION_ROWS}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clf = _classifier_for(args, dataset)

    flag_map = {
        "foot": {"use_foot": False},
        "root": {"use_root": False},
        "physical": {"use_physical": False},
        "discriminator": {"use_discriminator": False},
        "full": {},
    }
    table = {}
    for row in rows:
        config = _build_config(args)
        config = TrainerConfig.from_dict({**config.to_dict(), **flag_map[row]})
        row_dir = out_dir / ("full" if row == "full" else f"no_{row}")
        state, _ = run_training(config, dataset, out_dir=row_dir)
        report = evaluate_run(state, dataset, clf, n_gen=args.n, seed=args.seed)
        table[row] = {"fid": report["fid"], "content_accuracy": report["content_accuracy"]}
        print(f"{row}: fid {report['fid']:.2f} accuracy {report['content_accuracy']:.3f}")
    (out_dir / "ablation.json").write_text(json.dumps(table, sort_keys=True, indent=1) + "\n")
    width = max(len(r) for r in table)
    lines = ["row".ljust(width) + "  fid"]
    for row in rows:
        lines.append(row.ljust(width) + f"  {table[row]['fid']:.2f}")
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motiondiff", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("preprocess", help="build a dataset container")
    pp.add_argument("--synthetic", action="store_true", help="use the procedural generator")
    pp.add_argument("--input-dir", help="directory of .bvh files")
    pp.add_argument("--out", required=True, help="output container path")
    pp.add_argument("--num-clips", type=int, default=600)
    pp.add_argument("--contents", type=int, default=3)
    pp.add_argument("--styles", type=int, default=3)
    pp.add_argument("--stride", type=int, default=TRAIN_STRIDE)
    pp.add_argument("--height-thresh", type=float, default=DEFAULT_HEIGHT_THRESH)
    pp.add_argument("--speed-thresh", type=float, default=DEFAULT_SPEED_THRESH)
    pp.add_argument("--seed", type=int, default=0)
    pp.set_defaults(func=cmd_preprocess)

    tr = sub.add_parser("train", help="train a model")
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--out-dir", required=True)
    tr.add_argument("--config", help="JSON file of TrainerConfig overrides")
    tr.add_argument("--preset", choices=("desk", "paper"), default="desk")
    tr.add_argument("--steps", type=int)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--resume", help="checkpoint to resume from")
    tr.set_defaults(func=cmd_train)

    sp = sub.add_parser("sample", help="generate motion clips as BVH")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--content", type=int, required=True)
    sp.add_argument("--style", type=int, required=True)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-ema", action="store_true")
    sp.add_argument("--no-postprocess", action="store_true")
    sp.add_argument("--filter-sigma", type=float, default=DEFAULT_FILTER_SIGMA)
    sp.set_defaults(func=cmd_sample)

    ev = sub.add_parser("eval", help="FID and conditioning accuracy report")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--classifier", help="classifier checkpoint (trained here if missing)")
    ev.add_argument("--n", type=int, help="generated clip count (default: held-out size)")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", help="write the JSON report here")
    ev.add_argument("--no-ema", action="store_true")
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="train and evaluate ablation rows")
    ab.add_argument("--dataset", required=True)
    ab.add_argument("--out-dir", required=True)
    ab.add_argument("--rows", help=f"comma list from {ABLATION_ROWS}")
    ab.add_argument("--config", help="JSON file of TrainerConfig overrides")
    ab.add_argument("--preset", choices=("desk", "paper"), default="desk")
    ab.add_argument("--steps", type=int)
    ab.add_argument("--seed", type=int, default=0)
    ab.add_argument("--classifier")
    ab.add_argument("--n", type=int)
    ab.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    torch.set_num_threads(1)  # determinism across machines and fastest at this scale
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as e:
        return _fail(DATA_ERROR, str(e))
    except NumericsError as e:
        return _fail(NUMERIC_ERROR, str(e))
    except ValueError as e:
        return _fail(USAGE_ERROR, str(e))


if __name__ == "__main__":
    sys.exit(main())
