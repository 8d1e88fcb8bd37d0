"""Command line entry points: flist, train, tune, test, serve."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from inclg.config import TrainingConfig


def _parse_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _load_config(args) -> TrainingConfig:
    cfg = TrainingConfig.from_file(args.config)
    overrides = _parse_overrides(getattr(args, "set", None))
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    return cfg


def cmd_flist(args):
    from inclg.data import build_flist, write_flist

    paths = build_flist(args.root, args.pattern)
    write_flist(paths, args.out)
    print(f"wrote {len(paths)} paths to {args.out}")


def cmd_train(args):
    from inclg.trainer import train_from_config

    cfg = _load_config(args)
    train_from_config(cfg, resume=args.resume)


def cmd_tune(args):
    from inclg.tuning import describe_best, hyperparameter_search

    cfg = _load_config(args)
    space = None
    if args.space:
        with open(args.space, encoding="utf-8") as fh:
            space = json.load(fh)
    best_config, trials = hyperparameter_search(
        cfg, search_space=space, n_trials=args.trials, trial_iterations=args.iterations)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "trials.json", "w", encoding="utf-8") as fh:
        json.dump(trials, fh, indent=2)
    best_config.save(out_dir / "best_config.yml")
    print(describe_best(trials))
    print(f"trial log: {out_dir / 'trials.json'}")
    print(f"best config: {out_dir / 'best_config.yml'}")


def cmd_test(args):
    from inclg.inference import InpaintingModel, batch_test

    cfg = TrainingConfig.from_file(args.config)
    model = InpaintingModel.from_checkpoint(args.checkpoint)
    image_flist = args.images or cfg.val_image_flist
    mask_flist = args.masks or cfg.val_mask_flist
    landmark_flist = args.landmarks or cfg.val_landmark_flist or None
    batch_test(model, image_flist, mask_flist, args.out, landmark_flist=landmark_flist)


def cmd_serve(args):
    from inclg.service import run_server

    checkpoint = os.environ.get("INCLG_CHECKPOINT", args.checkpoint)
    port = int(os.environ.get("INCLG_PORT", args.port))
    if not checkpoint:
        raise SystemExit("no checkpoint given (use --checkpoint or INCLG_CHECKPOINT)")
    run_server(checkpoint, host=args.host, port=port, max_pending=args.max_pending)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inclg", description="Multi-task face inpainting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flist", help="generate a sorted file list")
    p.add_argument("root", help="directory to scan recursively")
    p.add_argument("--pattern", default="*.png", help="glob pattern (default *.png)")
    p.add_argument("--out", required=True, help="output flist path")
    p.set_defaults(func=cmd_flist)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="random hyperparameter search")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--iterations", type=int, default=100,
                   help="training iterations per trial")
    p.add_argument("--space", default=None,
                   help="JSON file mapping config keys to [low, high] or choices")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("test", help="batch inference over test flists")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--images", default=None, help="image flist (defaults to config)")
    p.add_argument("--masks", default=None, help="mask flist (defaults to config)")
    p.add_argument("--landmarks", default=None, help="ground-truth landmark flist")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-pending", type=int, default=8)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    sys.exit(main())
