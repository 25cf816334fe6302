"""Operator surface: synth | train | infer | eval.

Every command exits 0 on success and nonzero with a one-line diagnostic
otherwise. Config comes from a key=value file plus command-line
overrides; ablation switches mirror the config fields.
"""

import argparse
import sys
from pathlib import Path

from .config import Config, apply_overrides, config_hash, load_config, save_config
from .inference import infer_corpus
from .metrics import evaluate, format_report
from .streams import read_records, write_records, write_stream
from .synthetic import CorpusSpec, synth_generate
from .training import restore_model, save_checkpoint, train_stream


def _build_config(args):
    cfg = load_config(args.config) if args.config else Config()
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    for name in ("spatial_layers", "temporal_layers", "k_group", "k_action", "k_mode"):
        value = getattr(args, name, None)
        if value is not None:
            overrides.append(f"{name}={value}")
    if getattr(args, "action_node", None) is not None:
        overrides.append(f"action_node={'true' if args.action_node else 'false'}")
    return apply_overrides(cfg, overrides).validate()


def _parse_templates(text):
    templates = []
    for part in text.split(","):
        patterns = tuple(p.strip() for p in part.split("+") if p.strip())
        if not patterns:
            raise ValueError(f"empty template in {text!r}")
        templates.append(patterns)
    return templates


def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = CorpusSpec(
        templates=_parse_templates(args.templates),
        videos_per_template=args.videos_per_template,
        actors_per_group=args.actors_per_group,
        noise=args.noise,
        n_frames=args.frames,
        seed=args.seed if args.seed is not None else 0,
    )
    count = 0
    for i, spec in enumerate(corpus.scene_specs()):
        frames, records = synth_generate(spec)
        write_stream(frames, out / f"v{i:03d}.mapf")
        write_records(records, out / f"v{i:03d}.gt.txt")
        count += 1
    print(f"wrote {count} videos to {out}")
    return 0


def _collect(paths, suffix):
    files = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(sorted(path.glob(f"*{suffix}")))
        else:
            files.append(path)
    if not files:
        raise FileNotFoundError(f"no {suffix} files found under {paths}")
    return files


def cmd_train(args):
    cfg = _build_config(args)
    streams = _collect(args.streams, ".mapf")
    model, stats = train_stream(streams, cfg)
    save_checkpoint(model, stats.frames_read, config_hash(cfg), args.out)
    if args.save_config:
        save_config(cfg, args.save_config)
    print(
        f"trained on {stats.videos} videos / {stats.frames_read} frames, "
        f"{stats.optimizer_steps} steps ({stats.skipped_steps} skipped) -> {args.out}"
    )
    return 0


def cmd_infer(args):
    cfg = _build_config(args)
    model, _ = restore_model(args.checkpoint, cfg)
    streams = _collect(args.streams, ".mapf")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_video, info = infer_corpus(streams, model, cfg)
    for path, records in zip(streams, per_video):
        write_records(records, out / (Path(path).stem + ".pred.txt"))
    flagged = f", {info['flagged_empty']} videos had no actors" if info.get("flagged_empty") else ""
    print(f"wrote predictions for {len(streams)} videos to {out}{flagged}")
    return 0


def cmd_eval(args):
    pred_files = _collect(args.pred, ".pred.txt")
    gt_files = _collect(args.gt, ".gt.txt")
    if len(pred_files) != len(gt_files):
        raise ValueError(f"{len(pred_files)} prediction files vs {len(gt_files)} gt files")
    preds = [read_records(p) for p in pred_files]
    gts = [read_records(p) for p in gt_files]
    report = evaluate(preds, gts)
    text = format_report(report)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mapl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
        p.add_argument("--seed", type=int)
        p.add_argument("--spatial-layers", dest="spatial_layers", type=int, choices=(0, 1, 2))
        p.add_argument("--temporal-layers", dest="temporal_layers", type=int, choices=(0, 1, 2))
        p.add_argument("--action-node", dest="action_node", action="store_true", default=None)
        p.add_argument("--no-action-node", dest="action_node", action="store_false")
        p.add_argument("--k-group", dest="k_group", type=int)
        p.add_argument("--k-action", dest="k_action", type=int)
        p.add_argument("--k-mode", dest="k_mode", choices=("gt", "opt"))

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--templates", default="linear_walk+stationary,queueing+crossing",
                   help="comma-separated templates, each pattern1+pattern2+...")
    p.add_argument("--videos-per-template", type=int, default=5)
    p.add_argument("--actors-per-group", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="single-pass streaming training")
    p.add_argument("--streams", nargs="+", required=True, help="stream files or directories")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--save-config", help="write the effective config here")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="cluster labels with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--streams", nargs="+", required=True)
    p.add_argument("--out", required=True, help="prediction directory")
    add_config_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
