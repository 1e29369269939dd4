"""Reader and batching for the AECD feature dataset format.

An AECD file is a 16-byte header (magic ``AECD``, u32 version, u32
record width, u32 record count, all little-endian) followed by
``count`` rows of ``width`` float32 values.  Each row holds the far-end
feature vector, the filtered-microphone feature vector, the two VAD
targets and the per-band gain targets for one 10 ms frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError

MAGIC = b"AECD"
VERSION = 1
NUM_FEATURES = 42
NUM_BANDS = 22
RECORD_WIDTH = 2 * NUM_FEATURES + 2 + NUM_BANDS   # 108
HEADER = struct.Struct("<4sIII")

# column spans within a record
FAR = slice(0, NUM_FEATURES)
NEAR = slice(NUM_FEATURES, 2 * NUM_FEATURES)
VAD_NEAR = 2 * NUM_FEATURES
VAD_FAR = 2 * NUM_FEATURES + 1
GAINS = slice(2 * NUM_FEATURES + 2, RECORD_WIDTH)


def load_records(path) -> np.ndarray:
    """Read an AECD file into a (count, 108) float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size:
        raise DatasetFormatError(f"{path}: file shorter than the header")
    magic, version, width, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: not a feature dataset (bad magic)")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    if width != RECORD_WIDTH:
        raise DatasetFormatError(
            f"{path}: record width {width}, expected {RECORD_WIDTH}")
    payload = blob[HEADER.size:]
    if len(payload) != 4 * width * count:
        raise DatasetFormatError(
            f"{path}: payload holds {len(payload)} bytes, header promises "
            f"{4 * width * count}")
    records = np.frombuffer(payload, dtype="<f4").reshape(count, width)
    if not np.all(np.isfinite(records)):
        raise DatasetFormatError(f"{path}: non-finite values in records")
    return records.copy()


def make_sequences(records: np.ndarray, seq_len: int) -> np.ndarray:
    """Chop the frame stream into (num, seq_len, width) windows.

    Windows are consecutive and non-overlapping; the trailing partial
    window is dropped.
    """
    num = len(records) // seq_len
    if num == 0:
        raise DatasetFormatError(
            f"dataset has {len(records)} frames, need at least {seq_len}")
    return records[: num * seq_len].reshape(num, seq_len, records.shape[1])


@dataclass
class SplitData:
    """Training and validation sequence tensors plus input statistics."""

    train: np.ndarray           # (n_train, seq_len, width)
    val: np.ndarray             # (n_val, seq_len, width)
    feat_mean: np.ndarray       # (84,) over training inputs
    feat_std: np.ndarray        # (84,) floored to avoid division blowups


def split_sequences(sequences: np.ndarray, val_split: float,
                    seed: int) -> SplitData:
    """Shuffle sequences and split off a validation share.

    Input normalization statistics come from the training share only.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sequences))
    n_val = max(1, int(round(len(sequences) * val_split)))
    if n_val >= len(sequences):
        raise DatasetFormatError(
            f"validation split {val_split} leaves no training sequences")
    val = sequences[order[:n_val]]
    train = sequences[order[n_val:]]
    inputs = train[:, :, : 2 * NUM_FEATURES].reshape(-1, 2 * NUM_FEATURES)
    mean = inputs.mean(axis=0)
    std = np.maximum(inputs.std(axis=0), 1e-3)
    return SplitData(train=train, val=val,
                     feat_mean=mean.astype(np.float32),
                     feat_std=std.astype(np.float32))
