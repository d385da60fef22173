"""Command-line interface: train, eval, infer, gradcheck.

Exit codes: 0 success, 2 invalid config or arguments, 3 training abort on a
non-finite loss, 4 artifact mismatch (checkpoints, tensor files), 5
gradient verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .config import (Config, ConfigError, apply_override, config_from_dict, config_to_dict,
                     load_config_file, validate_config)
from .datapipe import generate_dataset
from .network import forward_infer
from .serialize import CheckpointError, read_tensor
from .trainer import TrainingAbort, load_checkpoint, run_evaluation, train
from . import verify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAIN_ABORT = 3
EXIT_ARTIFACT = 4
EXIT_VERIFY = 5


def _build_config(args) -> Config:
    d = load_config_file(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        apply_override(d, key, value)
    cfg = config_from_dict(d)
    if args.seed is not None:
        cfg.seed = args.seed
    return validate_config(cfg)


def cmd_train(args) -> int:
    try:
        cfg = _build_config(args)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    try:
        result = train(cfg, out_dir)
    except TrainingAbort as e:
        print(f"training aborted: {e}", file=sys.stderr)
        return EXIT_TRAIN_ABORT
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        cfg, state, _ = load_checkpoint(args.checkpoint)
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for item in args.set or []:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            d = config_to_dict(cfg)
            key, value = item.split("=", 1)
            apply_override(d, key, value)
            cfg = validate_config(config_from_dict(d))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    dataset = generate_dataset(cfg.dataset)
    report = run_evaluation(cfg, state, dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "eval_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
        fh.write("\n")
    print(f"mAP={report.map:.4f} Rank-1={report.rank_k(1):.4f} Rank-5={report.rank_k(5):.4f}")
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_infer(args) -> int:
    try:
        cfg, state, _ = load_checkpoint(args.checkpoint)
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    try:
        image = read_tensor(args.image)
    except (CheckpointError, OSError) as e:
        print(f"error: cannot read image tensor: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    expected = (3, cfg.dataset.image_height, cfg.dataset.image_width)
    if image.shape != expected:
        print(f"error: image shape {image.shape} does not match checkpoint config {expected}",
              file=sys.stderr)
        return EXIT_ARTIFACT
    embedding = forward_infer(Tensor(image[None]), state).data[0]
    print(" ".join(repr(float(v)) for v in embedding))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    valid = ("all", *verify.BLOCKS)
    if args.scope not in valid:
        print(f"error: unknown block {args.scope!r}; valid: {', '.join(valid)}", file=sys.stderr)
        return EXIT_CONFIG
    reports = verify.run(args.scope, seed=args.seed if args.seed is not None else 0)
    failed = []
    for name, report in reports.items():
        status = "PASS" if report.passed else "FAIL"
        print(f"{name:<12} max_rel_error={report.max_rel_error:.3e}  {status}")
        if report.nonfinite:
            print(f"{'':<12} non-finite finite differences at: {', '.join(report.nonfinite[:5])}")
        if not report.passed:
            failed.append(name)
    if failed:
        print(f"error: gradient check failed for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reidnet",
                                     description="Train, evaluate, and verify the desk-scale "
                                                 "attention re-identification network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train from a JSON config (empty file = defaults)")
    p_train.add_argument("--config", type=str, default=None, help="path to JSON config")
    p_train.add_argument("--out", type=str, default="reidnet_out", help="output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override config seed")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="dotted-path config override, e.g. trainer.iterations=50")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint with the inference network")
    p_eval.add_argument("--checkpoint", type=str, required=True)
    p_eval.add_argument("--out", type=str, default="reidnet_out", help="output directory")
    p_eval.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="config override applied on top of the checkpoint config")
    p_eval.set_defaults(fn=cmd_eval)

    p_infer = sub.add_parser("infer", help="print the embedding of one image tensor file")
    p_infer.add_argument("--checkpoint", type=str, required=True)
    p_infer.add_argument("--image", type=str, required=True, help="TNSR file of shape 3xHxW")
    p_infer.set_defaults(fn=cmd_infer)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p_grad.add_argument("scope", nargs="?", default="all",
                        help="attention | multiscale | losses | network | all")
    p_grad.add_argument("--seed", type=int, default=None)
    p_grad.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
