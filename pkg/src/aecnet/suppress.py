"""Band gains -> per-bin gains -> attenuated spectrum.

Within band k of length M, bin offset m gets

    gain(m) = (1 - m/M) * g_k + (m/M) * g_{k+1}

so knots sit exactly on the band edges and the curve is continuous.  The
last band has no right neighbour and extends its own value; DC and
Nyquist take the nearest band's gain.  Gains are real and nonnegative,
phase is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp


@dataclass
class BandGains:
    g: np.ndarray           # 22 values in [0, 1]
    frame_index: int = 0


@dataclass
class BinGains:
    gains: np.ndarray       # fft_size/2 + 1 values in [0, 1]
    derived_from: int = 0


def interpolate_gains(bands: BandGains | np.ndarray, layout: dsp.BandLayout,
                      num_bins: int | None = None) -> BinGains:
    """Linear interpolation of the band gains onto every FFT bin.

    ``bands`` may be a :class:`BandGains` or a bare array of per-band
    values.
    """
    clock_bins = num_bins or dsp.AudioClock().num_bins
    idx, frac = layout.bin_to_band(clock_bins)
    if isinstance(bands, BandGains):
        g = np.asarray(bands.g, dtype=np.float64)
        frame = bands.frame_index
    else:
        g = np.asarray(bands, dtype=np.float64)
        frame = 0
    nxt = np.minimum(idx + 1, layout.num_bands - 1)
    gains = (1.0 - frac) * g[idx] + frac * g[nxt]
    return BinGains(gains=gains, derived_from=frame)


def apply_gains(spec: dsp.SpectrumBlock, gains: BinGains) -> dsp.SpectrumBlock:
    """Scale each complex bin by its real gain; phase unchanged."""
    return dsp.SpectrumBlock(bins=spec.bins * gains.gains,
                             frame_index=spec.frame_index)


class GainSmoother:
    """Asymmetric one-pole smoothing of band gains across frames.

    Rising gains track fast (let speech through), falling gains a little
    slower, which stops frame-rate gain flutter.
    """

    def __init__(self, num_bands: int = dsp.NUM_BANDS,
                 rise: float = 0.6, fall: float = 0.4):
        self.rise = rise
        self.fall = fall
        self.state = np.ones(num_bands)

    def reset(self) -> None:
        self.state[:] = 1.0

    def smooth(self, target: np.ndarray) -> np.ndarray:
        coeff = np.where(target > self.state, self.rise, self.fall)
        self.state = self.state + coeff * (target - self.state)
        return self.state.copy()
