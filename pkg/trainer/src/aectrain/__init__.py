"""Offline trainer for the band-gain echo suppression network.

Reads "AECD" feature datasets, fits the recurrent suppressor (two VAD
heads plus 22 band gains), and exports weights in the "RESW" container
the runtime engine loads.  See :mod:`aectrain.train` for the loop and
:mod:`aectrain.export` for the byte format.
"""

from .errors import (ConfigError, DatasetFormatError, ModelImportError,
                     TrainerError, TrainingDiverged)
from .train import TrainConfig, TrainReport, train

__all__ = [
    "ConfigError",
    "DatasetFormatError",
    "ModelImportError",
    "TrainerError",
    "TrainingDiverged",
    "TrainConfig",
    "TrainReport",
    "train",
]

__version__ = "0.1.0"
