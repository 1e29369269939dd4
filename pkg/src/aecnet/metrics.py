"""Evaluation metrics: ERLE, log-spectral distance, response time.

ERLE is the dB ratio of microphone to residual energy per frame, averaged
over frames where the reference echo is active.  LSD is the RMS per-bin
difference of log power spectra, averaged over speech-active frames.
All log/ratio floors use eps = 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .errors import ConfigurationError

EPS = 1e-12


@dataclass
class ErleSeries:
    per_frame_db: np.ndarray
    mean_db: float


@dataclass
class LsdValue:
    mean_db: float
    per_frame_db: np.ndarray


def frame_energies(x: np.ndarray, frame: int = dsp.HOP) -> np.ndarray:
    """Sum of squares over consecutive non-overlapping frames."""
    n_frames = int(np.ceil(len(x) / frame))
    padded = np.zeros(n_frames * frame)
    padded[: len(x)] = x
    return np.sum(padded.reshape(n_frames, frame) ** 2, axis=1)


def activity_mask(x: np.ndarray, frame: int = dsp.HOP,
                  threshold_dbfs: float = -60.0) -> np.ndarray:
    """Boolean per-frame mask: mean power above an absolute dBFS threshold."""
    energies = frame_energies(x, frame)
    dbfs = 10.0 * np.log10(energies / frame + EPS)
    return dbfs > threshold_dbfs


def erle(mic: np.ndarray, out: np.ndarray, frame: int = dsp.HOP,
         mask: np.ndarray | None = None) -> ErleSeries:
    """Echo return loss enhancement, 10*log10(sum d^2 / sum e^2) per frame.

    ``mask`` marks echo-active frames; without one, frames where the
    microphone signal is above -60 dBFS are used.
    """
    if len(mic) != len(out):
        raise ConfigurationError("erle inputs must have equal length")
    e_mic = frame_energies(mic, frame)
    e_out = frame_energies(out, frame)
    series = 10.0 * np.log10((e_mic + EPS) / (e_out + EPS))
    if mask is None:
        mask = activity_mask(mic, frame)
    mask = np.asarray(mask, dtype=bool)
    if len(mask) != len(series):
        raise ConfigurationError(
            f"mask has {len(mask)} frames, expected {len(series)}")
    mean = float(np.mean(series[mask])) if np.any(mask) else float("nan")
    return ErleSeries(per_frame_db=series, mean_db=mean)


def lsd(reference: np.ndarray, processed: np.ndarray,
        clock: dsp.AudioClock | None = None,
        mask: np.ndarray | None = None) -> LsdValue:
    """Log-spectral distance in dB between a clean reference and a result."""
    clock = clock or dsp.AudioClock()
    if len(reference) != len(processed):
        raise ConfigurationError("lsd inputs must have equal length")
    ref_frames = dsp.frame_stream(reference, clock)
    out_frames = dsp.frame_stream(processed, clock)
    per_frame = np.zeros(len(ref_frames))
    for i, (rf, pf) in enumerate(zip(ref_frames, out_frames)):
        s = np.abs(np.fft.rfft(rf.samples, n=clock.fft_size)) ** 2
        y = np.abs(np.fft.rfft(pf.samples, n=clock.fft_size)) ** 2
        diff = 10.0 * np.log10(s + EPS) - 10.0 * np.log10(y + EPS)
        per_frame[i] = np.sqrt(np.mean(diff ** 2))
    if mask is None:
        mask = activity_mask(reference, clock.hop)[: len(per_frame)]
    mask = np.asarray(mask, dtype=bool)
    if len(mask) != len(per_frame):
        raise ConfigurationError(
            f"mask has {len(mask)} frames, expected {len(per_frame)}")
    mean = float(np.mean(per_frame[mask])) if np.any(mask) else float("nan")
    return LsdValue(mean_db=mean, per_frame_db=per_frame)


@dataclass
class RtProfile:
    mean_micros: float
    max_micros: float
    count: int


def rt_profile(frame_micros: np.ndarray) -> RtProfile:
    """Aggregate per-frame wall times collected by the pipeline."""
    times = np.asarray(frame_micros, dtype=np.float64)
    if len(times) == 0:
        return RtProfile(mean_micros=0.0, max_micros=0.0, count=0)
    return RtProfile(mean_micros=float(np.mean(times)),
                     max_micros=float(np.max(times)), count=len(times))
