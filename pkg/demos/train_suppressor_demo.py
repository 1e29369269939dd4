#!/usr/bin/env python3
"""Desk-scale training loop: synthesize data, fit, export, verify.

Builds a two-minute feature dataset, trains the suppression network for
a few epochs, exports the weights, and replays exported fixtures
through the runtime engine to show the two implementations agree.
Artifacts land in build/demo_train/.  Takes about a minute.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from aecnet import datagen, rnn
from aectrain.fixtures import dataset_slice, export_fixtures
from aectrain.train import TrainConfig, train

ROOT = Path(__file__).resolve().parents[1]
WORK = ROOT / "build" / "demo_train"


def main() -> int:
    WORK.mkdir(parents=True, exist_ok=True)
    data_path = WORK / "train_2min.aecd"
    if not data_path.exists():
        print("synthesizing 2 min of training data ...")
        manifest = replace(datagen.Manifest(), seed=11, duration_s=120.0)
        info = datagen.build_dataset(manifest, data_path)
        print(f"  {info.frames} records -> {data_path.name}")

    config = TrainConfig(dataset=data_path, export_path=WORK / "model.resw",
                         epochs=8, seq_len=50, seed=11)
    print(f"training {config.epochs} epochs ...")
    report, model = train(config)
    for line in report.lines():
        print(f"  {line}")

    print("exporting fixtures and replaying them through the engine ...")
    far, near = dataset_slice(data_path, 0, 50)
    export_fixtures(model, far, near, WORK / "fixtures")
    worst = 0.0
    for tag in ("zero", "random", "trained"):
        expect = np.load(WORK / "fixtures" / f"expect_{tag}.npz")
        weights = rnn.load_model(WORK / "fixtures" / f"model_{tag}.resw")
        state = rnn.NetState()
        for i in range(expect["far"].shape[0]):
            got = rnn.forward(weights, expect["far"][i], expect["near"][i], state)
            worst = max(worst, float(np.max(np.abs(
                got.band_gains - expect["gains"][i]))))
    print(f"  worst trainer-vs-engine gain deviation: {worst:.2e}")
    print(f"artifacts in {WORK}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
