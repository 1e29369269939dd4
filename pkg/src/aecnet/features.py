"""Per-frame 42-dimensional feature vector for the suppression network.

Layout of one vector (order is part of the dataset/model contract):

    [ 0:22]  BFCC: orthonormal DCT-II of log10 Bark band energies
    [22:28]  first-order differences of BFCC[0:6]
    [28:34]  second-order differences of BFCC[0:6]
    [34:40]  orthonormal DCT-II of the first 6 per-band pitch correlations
    [40]     pitch period in samples (50-400 Hz search range)
    [41]     spectral non-stationarity (mean |delta log band energy|)

Each channel (far-end reference; adaptive-filter output) gets its own
extractor instance; the two 42-vectors are concatenated by the caller.
"""

from __future__ import annotations

import struct

import numpy as np
from scipy.fft import dct

from . import dsp
from .errors import ConfigurationError, ModelFormatError

NUM_FEATURES = 42
DUMP_MAGIC = b"AECF"
DUMP_VERSION = 1
LOG_FLOOR = 1e-10          # energy floor before log10; -10 on digital silence
PITCH_MIN_LAG = 40         # 400 Hz
PITCH_MAX_LAG = 320        # 50 Hz
PITCH_CORR_LEN = 400       # 25 ms correlation segment


class FeatureExtractor:
    """Stateful single-channel extractor; feed one hop of samples per call.

    The window applied to frame l covers samples [(l-1)*hop, (l+1)*hop),
    i.e. the newest complete analysis window once hop l has arrived, so a
    streaming caller stays causal.  ``extract`` returns the 42-vector for
    that window.
    """

    def __init__(self, clock: dsp.AudioClock | None = None,
                 layout: dsp.BandLayout | None = None):
        self.clock = clock or dsp.AudioClock()
        self.layout = layout or dsp.default_band_layout(self.clock)
        self.window = dsp.sine_window(self.clock.window)
        buf_len = self.clock.window + PITCH_MAX_LAG + PITCH_CORR_LEN
        self.buffer = np.zeros(buf_len)
        self.prev_bfcc = np.zeros(dsp.NUM_BANDS)
        self.prev_prev_bfcc = np.zeros(dsp.NUM_BANDS)
        self.prev_log_band = np.zeros(dsp.NUM_BANDS)
        self.frames_seen = 0

    def reset(self) -> None:
        self.buffer[:] = 0.0
        self.prev_bfcc[:] = 0.0
        self.prev_prev_bfcc[:] = 0.0
        self.prev_log_band[:] = 0.0
        self.frames_seen = 0

    def extract(self, hop_samples: np.ndarray,
                spectrum: np.ndarray | None = None) -> np.ndarray:
        """Push one hop, return the 42 features of the newest full window.

        ``spectrum`` may carry a precomputed windowed half spectrum of that
        window (the pipeline shares its suppression FFT); when omitted it
        is computed here.
        """
        hop_samples = np.asarray(hop_samples, dtype=np.float64)
        if len(hop_samples) != self.clock.hop:
            raise ConfigurationError(
                f"expected {self.clock.hop} samples per hop, got {len(hop_samples)}")
        self.buffer = np.roll(self.buffer, -self.clock.hop)
        self.buffer[-self.clock.hop:] = hop_samples

        frame = self.buffer[-self.clock.window:]
        if spectrum is None:
            spectrum = np.fft.rfft(frame * self.window, n=self.clock.fft_size)

        band_e = dsp.band_accumulate(np.abs(spectrum) ** 2, self.layout)
        log_band = np.log10(band_e + LOG_FLOOR)
        bfcc = dct(log_band, type=2, norm="ortho")

        d_bfcc = bfcc[:6] - self.prev_bfcc[:6]
        dd_bfcc = bfcc[:6] - 2.0 * self.prev_bfcc[:6] + self.prev_prev_bfcc[:6]
        nonstat = float(np.mean(np.abs(log_band - self.prev_log_band)))
        if self.frames_seen == 0:
            # no history yet: deltas against implicit silence are noise
            d_bfcc = np.zeros(6)
            dd_bfcc = np.zeros(6)
            nonstat = 0.0
        elif self.frames_seen == 1:
            dd_bfcc = np.zeros(6)

        period, corr_bands = self._pitch(spectrum, band_e)
        pitch_dct = dct(corr_bands[:6], type=2, norm="ortho")

        self.prev_prev_bfcc = self.prev_bfcc
        self.prev_bfcc = bfcc
        self.prev_log_band = log_band
        self.frames_seen += 1

        vec = np.concatenate([bfcc, d_bfcc, dd_bfcc, pitch_dct, [period], [nonstat]])
        return vec

    def _pitch(self, spectrum: np.ndarray,
               band_e: np.ndarray) -> tuple[float, np.ndarray]:
        """Pitch period and per-band correlation against the lagged frame."""
        buf = self.buffer
        cur = buf[-PITCH_CORR_LEN:]
        # dot of cur against every lagged segment in one pass
        sweep = buf[-(PITCH_CORR_LEN + PITCH_MAX_LAG):]
        dots = np.correlate(sweep, cur, mode="valid")          # lag = max..0
        dots = dots[::-1]                                      # index by lag
        sq = np.concatenate([[0.0], np.cumsum(sweep ** 2)])
        seg_e = sq[PITCH_CORR_LEN:] - sq[:-PITCH_CORR_LEN]     # energy per start
        seg_e = seg_e[::-1]
        cur_e = seg_e[0]
        norm = np.sqrt(cur_e * seg_e + 1e-20)
        corr = dots / norm

        lags = corr[PITCH_MIN_LAG : PITCH_MAX_LAG + 1]
        best = int(np.argmax(lags)) + PITCH_MIN_LAG
        period = float(best)
        if PITCH_MIN_LAG < best < PITCH_MAX_LAG:
            ym, y0, yp = corr[best - 1], corr[best], corr[best + 1]
            denom = ym - 2.0 * y0 + yp
            if abs(denom) > 1e-12:
                period = best + 0.5 * (ym - yp) / denom

        lag = int(round(period))
        past = buf[-(self.clock.window + lag):len(buf) - lag]
        past_spec = np.fft.rfft(past * self.window, n=self.clock.fft_size)
        cross = dsp.band_accumulate(np.real(spectrum * np.conj(past_spec)),
                                    self.layout)
        e_past = dsp.band_accumulate(np.abs(past_spec) ** 2, self.layout)
        corr_bands = cross / np.sqrt(band_e * e_past + 1e-20)
        return period, np.clip(corr_bands, -1.0, 1.0)


def extract_features_offline(signal: np.ndarray,
                             clock: dsp.AudioClock | None = None,
                             layout: dsp.BandLayout | None = None) -> np.ndarray:
    """Feature matrix for a whole signal, aligned with ``dsp.frame_stream``.

    Streaming extraction is causal: the analysis window for a pushed hop
    ends at that hop's last sample.  To line feature row ``l`` up with
    frame ``l`` of :func:`dsp.frame_stream` (which looks one hop ahead),
    the first streamed output is dropped and one trailing zero hop is fed.

    Returns an array of shape ``(n_frames, NUM_FEATURES)`` float32.
    """
    clock = clock or dsp.AudioClock()
    layout = layout or dsp.default_band_layout(clock)
    signal = np.asarray(signal, dtype=np.float64).ravel()
    n_frames = -(-len(signal) // clock.hop) if len(signal) else 0
    if n_frames == 0:
        return np.zeros((0, NUM_FEATURES), dtype=np.float32)
    padded = np.zeros((n_frames + 1) * clock.hop)
    padded[:len(signal)] = signal

    ext = FeatureExtractor(clock, layout)
    rows = []
    for l in range(n_frames + 1):
        hop = padded[l * clock.hop:(l + 1) * clock.hop]
        rows.append(ext.extract(hop))
    return np.asarray(rows[1:], dtype=np.float32)


def save_feature_dump(path, features: np.ndarray) -> None:
    """Write a feature matrix as little-endian float32 with a 16-byte header."""
    feats = np.ascontiguousarray(features, dtype="<f4")
    if feats.ndim != 2:
        raise ConfigurationError("feature dump expects a 2-D array")
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<III", DUMP_VERSION, feats.shape[1], feats.shape[0]))
        fh.write(feats.tobytes())


def load_feature_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:4] != DUMP_MAGIC:
            raise ModelFormatError(f"{path}: not a feature dump (bad magic)")
        version, dim, count = struct.unpack("<III", head[4:])
        if version != DUMP_VERSION:
            raise ModelFormatError(f"{path}: unsupported feature dump version {version}")
        payload = fh.read()
    if len(payload) != 4 * dim * count:
        raise ModelFormatError(
            f"{path}: expected {4 * dim * count} payload bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4")
    return data.reshape(count, dim).astype(np.float32)
