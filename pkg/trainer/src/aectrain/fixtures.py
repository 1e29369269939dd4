"""Committed test-vector generation.

Writes matched (weights, expected-output) fixture pairs: the weight
file in RESW format plus an ``.npz`` holding the input feature frames
and the per-frame head outputs computed by this package's torch
implementation.  The runtime engine replays the same frames through its
own inference and the two must agree — that cross-check is the whole
point of the fixtures.

The ``.npz`` files are written with fixed zip timestamps so a rerun
with the same seed reproduces identical bytes.
"""

from __future__ import annotations

import io
import zipfile
from pathlib import Path

import numpy as np
import torch

from . import dataset
from .errors import ConfigError
from .export import export_model
from .model import SuppressionNet, random_model, zero_model

RANDOM_FIXTURE_SEED = 7
TAG_ORDER = ("zero", "random", "trained")


def _write_npz(path: Path, arrays: dict[str, np.ndarray]) -> None:
    """np.load-compatible archive with deterministic bytes."""
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def dataset_slice(path, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Pull (far, near) feature frames [start, start+count) from a dataset."""
    records = dataset.load_records(path)
    if start < 0 or count < 1 or start + count > records.shape[0]:
        raise ConfigError(
            f"slice [{start}, {start + count}) out of range for "
            f"{records.shape[0]} records")
    block = records[start : start + count]
    return (np.ascontiguousarray(block[:, dataset.FAR]),
            np.ascontiguousarray(block[:, dataset.NEAR]))


def run_inference(model: SuppressionNet, far: np.ndarray,
                  near: np.ndarray) -> dict[str, np.ndarray]:
    """Head outputs for a (frames, 42) feature pair, numpy in and out."""
    model.eval()
    with torch.no_grad():
        vn, vf, g = model(torch.from_numpy(far.astype(np.float32))[None],
                          torch.from_numpy(near.astype(np.float32))[None])
    return {"vad_near": vn[0].numpy().astype(np.float32),
            "vad_far": vf[0].numpy().astype(np.float32),
            "gains": g[0].numpy().astype(np.float32)}


def export_fixtures(trained: SuppressionNet, far: np.ndarray, near: np.ndarray,
                    out_dir, random_seed: int = RANDOM_FIXTURE_SEED) -> list[Path]:
    """Write the three fixture sets (zero, random, trained weights).

    Returns the paths written: model_<tag>.resw and expect_<tag>.npz per
    set, with the npz holding far/near inputs plus head outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    far32 = far.astype(np.float32)
    near32 = near.astype(np.float32)
    written: list[Path] = []
    variants = tuple(zip(TAG_ORDER, (zero_model(), random_model(random_seed),
                                     trained)))
    for tag, model in variants:
        heads = run_inference(model, far32, near32)
        for name, arr in heads.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{tag} fixture produced non-finite {name}")
        model_path = out_dir / f"model_{tag}.resw"
        expect_path = out_dir / f"expect_{tag}.npz"
        export_model(model, model_path)
        _write_npz(expect_path, {"far": far32, "near": near32, **heads})
        written += [model_path, expect_path]
    return written
