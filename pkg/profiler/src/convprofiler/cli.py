"""Driver: train the toy self-evolving stack and export its accuracy profile."""

from __future__ import annotations

import argparse
import sys

from .pipeline import run_profiler, write_run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convshrink-profile",
        description="Train a toy backbone plus operator variants and export "
                    "the accuracy profile the compression engine consumes.",
    )
    parser.add_argument("--dataset-dir", default=None,
                        help="local CIFAR-10 root; default: built-in synthetic shapes")
    parser.add_argument("--epochs", type=int, default=3, help="backbone epochs")
    parser.add_argument("--tune-epochs", type=int, default=1,
                        help="fine-tune/distillation epochs per variant")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--catalog", default=None,
                        help="operator catalog JSON (default: stock mirror)")
    parser.add_argument("--out", required=True, help="accuracy profile output path")
    parser.add_argument("--backbone-out", default=None,
                        help="also write the backbone descriptor JSON here")
    parser.add_argument("--log-out", default=None,
                        help="also write the per-variant training log here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = run_profiler(args.dataset_dir, epochs=args.epochs, seed=args.seed,
                           tune_epochs=args.tune_epochs, catalog_path=args.catalog)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_run(run, args.out, backbone_out=args.backbone_out, log_out=args.log_out)
    measured = len(run.records)
    print(f"backbone accuracy {run.base_accuracy:.4f}; {measured} variants measured; "
          f"profile written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
