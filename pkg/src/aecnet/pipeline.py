"""Streaming echo-control engine.

``AecSession`` chains the adaptive filter and the recurrent gain network:
each 160-sample push runs the filter, extracts features from the far-end
and from the filter output, evaluates the network, and applies smoothed
per-band gains to the filter output in the frequency domain.  Synthesis
uses 50%-overlap sine windows, so the stream output is the processed
signal delayed by exactly one hop (160 samples).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import dsp, metrics
from .errors import ConfigurationError, StreamError
from .features import FeatureExtractor
from .mdf import FilterConfig, MdfFilter
from .rnn import NetState, NetworkWeights, forward
from .suppress import GainSmoother, interpolate_gains

ALGORITHMIC_DELAY = dsp.HOP  # samples of stream latency introduced by synthesis

# Far-end activity gating (band gains forced to unity when the far end
# has been quiet, so the suppressor cannot chew on near-end-only speech).
GATE_VAD_THRESHOLD = 0.1
GATE_ENGAGE_FRAMES = 10
GATE_RELEASE_FRAMES = 5
HARD_GATE_THRESHOLD = 0.5


@dataclass
class FrameResult:
    """Per-push output of :meth:`AecSession.push`."""

    out_frame: np.ndarray
    vad_near: float
    vad_far: float
    band_gains: np.ndarray
    erle_instant: float
    proc_micros: float


@dataclass
class RunReport:
    """Summary of a file-to-file run."""

    frames: int
    samples: int
    erle_mean_db: float
    rt: metrics.RtProfile
    nn_enabled: bool
    padded: bool = False

    def lines(self) -> list[str]:
        secs = self.samples / dsp.SAMPLE_RATE
        return [
            f"frames processed   : {self.frames}",
            f"audio duration     : {secs:.2f} s",
            f"suppressor         : {'on' if self.nn_enabled else 'off'}",
            f"mean ERLE          : {self.erle_mean_db:.2f} dB",
            f"mean frame time    : {self.rt.mean_micros:.1f} us",
            f"max frame time     : {self.rt.max_micros:.1f} us",
            f"realtime factor    : "
            f"{(self.rt.mean_micros * 1e-6) / (dsp.HOP / dsp.SAMPLE_RATE):.4f}",
        ]


class _FarGate:
    """Hold gains at unity while the far end is inactive.

    Engages after ``GATE_ENGAGE_FRAMES`` consecutive frames with far-end
    voice probability below ``GATE_VAD_THRESHOLD``; releases again after
    ``GATE_RELEASE_FRAMES`` consecutive active frames.
    """

    def __init__(self) -> None:
        self.engaged = True  # nothing heard yet, start passive
        self.quiet = 0
        self.active = 0

    def update(self, vad_far: float) -> bool:
        if self.engaged:
            if vad_far >= GATE_VAD_THRESHOLD:
                self.active += 1
                if self.active >= GATE_RELEASE_FRAMES:
                    self.engaged = False
                    self.quiet = 0
            else:
                self.active = 0
        else:
            if vad_far < GATE_VAD_THRESHOLD:
                self.quiet += 1
                if self.quiet >= GATE_ENGAGE_FRAMES:
                    self.engaged = True
                    self.active = 0
            else:
                self.quiet = 0
        return self.engaged


class AecSession:
    """Stateful one-hop-at-a-time echo canceller.

    Parameters
    ----------
    weights:
        Suppressor network weights, or ``None`` to run the adaptive
        filter alone (band gains stay at unity; the stream output is
        then the filter output delayed one hop).
    hard_gate:
        Replace the hysteresis far-end gate with a per-frame rule:
        any frame with far-end voice probability below 0.5 passes the
        filter output through untouched.
    """

    def __init__(self,
                 weights: NetworkWeights | None = None,
                 clock: dsp.AudioClock | None = None,
                 filter_config: FilterConfig | None = None,
                 *,
                 hard_gate: bool = False) -> None:
        self.clock = clock or dsp.AudioClock()
        if self.clock.hop != dsp.HOP:
            raise ConfigurationError(
                f"session requires a {dsp.HOP}-sample hop, got {self.clock.hop}")
        self.layout = dsp.default_band_layout(self.clock)
        self.filter = MdfFilter(filter_config or FilterConfig())
        self.weights = weights
        if weights is not None:
            weights.validate()
        self.hard_gate = hard_gate

        self.far_features = FeatureExtractor(self.clock, self.layout)
        self.near_features = FeatureExtractor(self.clock, self.layout)
        self.net_state = NetState()
        self.smoother = GainSmoother(self.layout.num_bands)
        self.gate = _FarGate()

        self._window = dsp.sine_window(self.clock.window)
        self._err_tail = np.zeros(self.clock.hop)
        self._ola = np.zeros(self.clock.window)
        self._last_bin_gains = np.ones(self.clock.num_bins)
        self._poisoned = False
        self.frames_processed = 0

    # ------------------------------------------------------------------
    def push(self, far_hop: np.ndarray, mic_hop: np.ndarray) -> FrameResult:
        """Process one 160-sample hop of the far-end and microphone signals.

        A session that has raised a :class:`StreamError` is poisoned and
        refuses further pushes: its sub-states may have advanced out of
        lockstep and the stream cannot be trusted afterwards.
        """
        if self._poisoned:
            raise StreamError("session poisoned by an earlier stream error")
        t0 = time.perf_counter()
        far = np.asarray(far_hop, dtype=np.float64).ravel()
        mic = np.asarray(mic_hop, dtype=np.float64).ravel()
        hop = self.clock.hop
        if far.size != hop or mic.size != hop:
            self._poisoned = True
            raise StreamError(
                f"push expects {hop}-sample hops, got far={far.size} mic={mic.size}")

        try:
            filt = self.filter.process(far, mic)
        except StreamError:
            self._poisoned = True
            raise
        err = filt.error_frame

        # analysis window ending at this hop: [e(l-1), e(l)]
        windowed = np.concatenate([self._err_tail, err]) * self._window
        spec = np.fft.rfft(windowed, n=self.clock.fft_size)
        self._err_tail = err

        far_vec = self.far_features.extract(far)
        near_vec = self.near_features.extract(err, spectrum=spec)

        if self.weights is not None:
            out = forward(self.weights, far_vec, near_vec, self.net_state)
            vad_near = float(out.vad_near)
            vad_far = float(out.vad_far)
            gains = out.band_gains
            if self.hard_gate:
                if vad_far < HARD_GATE_THRESHOLD:
                    gains = np.ones(self.layout.num_bands)
            elif self.gate.update(vad_far):
                gains = np.ones(self.layout.num_bands)
            gains = self.smoother.smooth(gains)
        else:
            vad_near = 0.0
            vad_far = 0.0
            gains = np.ones(self.layout.num_bands)

        bin_gains = interpolate_gains(gains, self.layout, self.clock.num_bins)
        self._last_bin_gains = bin_gains.gains
        synth = np.fft.irfft(spec * bin_gains.gains,
                             n=self.clock.fft_size)[:self.clock.window]
        synth *= self._window

        self._ola += synth
        out_frame = self._ola[:hop].copy()
        self._ola[:hop] = self._ola[hop:]
        self._ola[hop:] = 0.0

        e_mic = float(np.sum(mic ** 2))
        e_out = float(np.sum(out_frame ** 2))
        erle_instant = 10.0 * np.log10((e_mic + metrics.EPS) / (e_out + metrics.EPS))

        self.frames_processed += 1
        micros = (time.perf_counter() - t0) * 1e6
        return FrameResult(out_frame=out_frame, vad_near=vad_near,
                           vad_far=vad_far, band_gains=np.asarray(gains, float),
                           erle_instant=erle_instant, proc_micros=micros)

    def flush(self) -> np.ndarray:
        """Complete the final output hop.

        The last pushed hop still needs its leading half-window synthesis
        pass; this closes the overlap-add with a zero-padded window (the
        most recent bin gains are reused) and returns the finished hop.
        """
        hop = self.clock.hop
        windowed = np.zeros(self.clock.window)
        windowed[:hop] = self._err_tail
        windowed *= self._window
        spec = np.fft.rfft(windowed, n=self.clock.fft_size)
        synth = np.fft.irfft(spec * self._last_bin_gains,
                             n=self.clock.fft_size)[:self.clock.window]
        synth *= self._window
        self._ola += synth
        out = self._ola[:hop].copy()
        self._ola[:] = 0.0
        self._err_tail[:] = 0.0
        return out


@dataclass
class _GainRow:
    frame: int
    gains: np.ndarray
    vad_near: float
    vad_far: float


def process_files(far_path, mic_path, out_path,
                  weights: NetworkWeights | None = None,
                  *,
                  hard_gate: bool = False,
                  filter_config: FilterConfig | None = None,
                  dump_gains_path=None) -> RunReport:
    """Run the session over WAV files, compensating the one-hop latency.

    If the inputs differ in length the shorter is zero-padded to match
    (flagged in the report).  The written file is sample-aligned with
    the microphone input.
    """
    far = dsp.read_wav(far_path)
    mic = dsp.read_wav(mic_path)
    padded = far.size != mic.size
    n = max(far.size, mic.size)
    if n == 0:
        raise ConfigurationError("input files contain no audio")
    hop = dsp.HOP
    n_frames = -(-n // hop)
    total = n_frames * hop
    far_buf = np.zeros(total)
    far_buf[:far.size] = far
    mic_buf = np.zeros(total)
    mic_buf[:mic.size] = mic

    session = AecSession(weights, filter_config=filter_config,
                         hard_gate=hard_gate)
    out = np.zeros(total)
    timings = np.zeros(n_frames)
    rows: list[_GainRow] = []
    for l in range(n_frames):
        res = session.push(far_buf[l * hop:(l + 1) * hop],
                           mic_buf[l * hop:(l + 1) * hop])
        timings[l] = res.proc_micros
        if l > 0:
            # push l emits samples [(l-1)*hop, l*hop)
            out[(l - 1) * hop:l * hop] = res.out_frame
        if dump_gains_path is not None:
            rows.append(_GainRow(l, res.band_gains, res.vad_near, res.vad_far))
    out[(n_frames - 1) * hop:] = session.flush()
    out = out[:n]

    if dump_gains_path is not None:
        _write_gain_csv(dump_gains_path, rows)

    dsp.write_wav(out_path, out)
    series = metrics.erle(mic_buf[:n], out)
    return RunReport(frames=n_frames, samples=n,
                     erle_mean_db=series.mean_db,
                     rt=metrics.rt_profile(timings),
                     nn_enabled=weights is not None,
                     padded=padded)


def _write_gain_csv(path, rows: list[_GainRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["frame"] + [f"g_{k}" for k in range(dsp.NUM_BANDS)]
        header += ["vad_near", "vad_far"]
        writer.writerow(header)
        for row in rows:
            writer.writerow([row.frame]
                            + [f"{g:.6f}" for g in row.gains]
                            + [f"{row.vad_near:.6f}", f"{row.vad_far:.6f}"])
