"""Real-time acoustic echo cancellation.

A partitioned frequency-domain adaptive filter with a double-talk-robust
variable learning rate removes the linear echo; a small recurrent network
then estimates per-band gains that suppress the nonlinear residue.  See
``aecnet.pipeline.AecSession`` for the streaming entry point.
"""

from .dsp import (
    FFT_SIZE,
    HOP,
    NUM_BANDS,
    SAMPLE_RATE,
    WINDOW,
    AudioClock,
    BandLayout,
    default_band_layout,
    read_wav,
    write_wav,
)
from .errors import (
    AecError,
    ConfigurationError,
    ModelFormatError,
    StreamError,
    WavFormatError,
)
from .features import NUM_FEATURES, FeatureExtractor, extract_features_offline
from .mdf import FilterConfig, FilterOutput, LeakageEstimator, MdfFilter
from .metrics import erle, lsd, rt_profile
from .pipeline import AecSession, FrameResult, RunReport, process_files
from .rnn import (
    NetOutput,
    NetState,
    NetworkWeights,
    load_model,
    load_weights,
    random_weights,
    save_model,
    save_weights,
    zero_weights,
)
from .suppress import GainSmoother, apply_gains, interpolate_gains

__version__ = "0.1.0"

__all__ = [
    "AecError",
    "AecSession",
    "AudioClock",
    "BandLayout",
    "ConfigurationError",
    "FFT_SIZE",
    "FeatureExtractor",
    "FilterConfig",
    "FilterOutput",
    "FrameResult",
    "GainSmoother",
    "HOP",
    "LeakageEstimator",
    "MdfFilter",
    "ModelFormatError",
    "NUM_BANDS",
    "NUM_FEATURES",
    "NetOutput",
    "NetState",
    "NetworkWeights",
    "RunReport",
    "SAMPLE_RATE",
    "StreamError",
    "WINDOW",
    "WavFormatError",
    "apply_gains",
    "default_band_layout",
    "erle",
    "extract_features_offline",
    "interpolate_gains",
    "load_model",
    "load_weights",
    "lsd",
    "process_files",
    "random_weights",
    "read_wav",
    "rt_profile",
    "save_model",
    "save_weights",
    "write_wav",
    "zero_weights",
]
