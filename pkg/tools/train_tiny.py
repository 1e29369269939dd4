#!/usr/bin/env python3
"""Train the tiny model shipped with the runtime package.

Rebuilds the dataset from the committed recipe, trains longer than the
acceptance run (same seed), and writes src/aecnet/models/tiny.resw plus
loss artifacts under build/tiny_model/.  Rerunning reproduces the same
weights byte for byte.

Usage: python3 tools/train_tiny.py [--epochs N]
"""

import argparse
import hashlib
import sys
from pathlib import Path

from aecnet import datagen
from aectrain.train import TrainConfig, train

ROOT = Path(__file__).resolve().parents[1]
MANIFEST = ROOT / "data" / "train_10min.cfg"
MODEL_PATH = ROOT / "src" / "aecnet" / "models" / "tiny.resw"
WORK_DIR = ROOT / "build" / "tiny_model"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=60)
    args = parser.parse_args(argv)

    WORK_DIR.mkdir(parents=True, exist_ok=True)
    data_path = WORK_DIR / "train_10min.aecd"
    if not data_path.exists():
        print(f"building dataset from {MANIFEST.name} ...")
        info = datagen.build_dataset(datagen.Manifest.parse(MANIFEST), data_path)
        print(f"  {info.frames} records ({info.duration_s:.0f} s)")
    else:
        print(f"reusing {data_path}")

    config = TrainConfig(dataset=data_path, export_path=MODEL_PATH,
                         epochs=args.epochs, seed=3,
                         loss_csv=WORK_DIR / "loss.csv",
                         loss_plot=WORK_DIR / "loss.png")
    report, _ = train(config)
    for line in report.lines():
        print(line)
    digest = hashlib.sha256(MODEL_PATH.read_bytes()).hexdigest()
    print(f"sha256            : {digest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
