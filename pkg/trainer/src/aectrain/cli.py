"""Command-line front end for the trainer.

Subcommands::

    aectrain train --dataset d.aecd --export m.resw [options]
    aectrain export-fixtures --model m.resw --dataset d.aecd --out dir

Exit codes: 0 success, 1 training error, 2 invalid input or format.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import export, fixtures
from .errors import (ConfigError, DatasetFormatError, ModelImportError,
                     TrainerError)
from .train import TrainConfig, train

EXIT_OK = 0
EXIT_TRAINING = 1
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aectrain",
        description="Fit the band-gain suppression network and export weights")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a feature dataset")
    p_train.add_argument("--dataset", required=True, help="input dataset (.aecd)")
    p_train.add_argument("--export", required=True, help="output weights (.resw)")
    p_train.add_argument("--epochs", type=int, default=20)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--seq-len", type=int, default=100,
                         help="frames per training window (>= 16)")
    p_train.add_argument("--lr", type=float, default=3e-3)
    p_train.add_argument("--val-split", type=float, default=0.2)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--loss-csv", help="per-epoch losses (default: loss.csv "
                         "next to the weight file)")
    p_train.add_argument("--loss-plot", help="loss curve PNG (default: loss.png)")

    p_fix = sub.add_parser("export-fixtures",
                           help="write zero/random/trained test vectors")
    p_fix.add_argument("--model", required=True, help="trained weights (.resw)")
    p_fix.add_argument("--dataset", required=True, help="feature source (.aecd)")
    p_fix.add_argument("--out", required=True, help="output directory")
    p_fix.add_argument("--start", type=int, default=0, help="first frame index")
    p_fix.add_argument("--count", type=int, default=100, help="frames per fixture")
    p_fix.add_argument("--random-seed", type=int,
                       default=fixtures.RANDOM_FIXTURE_SEED)

    return parser


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")


def _cmd_train(args) -> int:
    _require_file(args.dataset, "dataset")
    config = TrainConfig(dataset=args.dataset, export_path=args.export,
                         epochs=args.epochs, batch_size=args.batch_size,
                         seq_len=args.seq_len, learning_rate=args.lr,
                         val_split=args.val_split, seed=args.seed,
                         loss_csv=args.loss_csv, loss_plot=args.loss_plot)
    report, _ = train(config)
    for line in report.lines():
        print(line)
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    _require_file(args.model, "model file")
    _require_file(args.dataset, "dataset")
    model = export.import_model(args.model)
    far, near = fixtures.dataset_slice(args.dataset, args.start, args.count)
    written = fixtures.export_fixtures(model, far, near, args.out,
                                       random_seed=args.random_seed)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": _cmd_train, "export-fixtures": _cmd_fixtures}
    try:
        return handlers[args.command](args)
    except (ConfigError, DatasetFormatError, ModelImportError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
