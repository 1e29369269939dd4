"""Deterministic framing, windowing, FFT, overlap-add and Bark band energies.

Engine-wide conventions (all other modules build on these):

* 16 kHz mono audio, float samples in [-1, 1].
* 10 ms hop (160 samples), 20 ms analysis window (320 samples), 512-point FFT.
* Sine analysis and synthesis windows.  Their product is a squared sine,
  which sums to exactly 1 at 50% overlap, so analysis -> synthesis of an
  unmodified stream reconstructs the input without gain normalization.
* 22 Bark-scale bands over 0-8 kHz with triangular inter-band weighting.
"""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, WavFormatError

SAMPLE_RATE = 16000
HOP = 160
WINDOW = 320
FFT_SIZE = 512
NUM_BANDS = 22

# Zwicker critical-band edges in Hz, truncated to the 0-8 kHz half-band and
# closed at Nyquist.  23 edges -> 22 bands.
BARK_EDGES_HZ = (
    0, 100, 200, 300, 400, 510, 630, 770, 920, 1080, 1270, 1480,
    1720, 2000, 2320, 2700, 3150, 3700, 4400, 5300, 6400, 7700, 8000,
)


@dataclass(frozen=True)
class AudioClock:
    """Fixed frame geometry of one engine instance."""

    sample_rate: int = SAMPLE_RATE
    hop: int = HOP
    window: int = WINDOW
    fft_size: int = FFT_SIZE

    def __post_init__(self):
        if self.window != 2 * self.hop:
            raise ConfigurationError(
                f"window ({self.window}) must equal 2*hop ({2 * self.hop})")
        if self.fft_size < self.window:
            raise ConfigurationError(
                f"fft_size ({self.fft_size}) must be >= window ({self.window})")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass
class FrameBuffer:
    """One windowed analysis frame; ``index`` is the frame counter l."""

    samples: np.ndarray
    index: int = 0


@dataclass
class SpectrumBlock:
    """Half spectrum (Hermitian convention) of one analysis frame."""

    bins: np.ndarray
    frame_index: int = 0


def sine_window(length: int) -> np.ndarray:
    """Sine window; squared it sums to 1 at 50% overlap."""
    n = np.arange(length)
    return np.sin(np.pi * (n + 0.5) / length)


@dataclass(frozen=True)
class BandLayout:
    """22 Bark bands as 23 strictly increasing FFT bin edges over 0-8 kHz."""

    edges: np.ndarray = field(default_factory=lambda: _default_edges())

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64)
        object.__setattr__(self, "edges", edges)
        if len(edges) != NUM_BANDS + 1:
            raise ConfigurationError(f"expected {NUM_BANDS + 1} band edges, got {len(edges)}")
        if edges[0] != 0 or np.any(np.diff(edges) <= 0):
            raise ConfigurationError("band edges must start at 0 and be strictly increasing")

    @property
    def num_bands(self) -> int:
        return len(self.edges) - 1

    def bin_to_band(self, num_bins: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-bin (band index, fractional position in band) lookup tables.

        Bin b inside band k contributes ``1 - frac`` to band k and ``frac``
        to band k+1; bins in the last band (and Nyquist and above) belong
        entirely to the last band.
        """
        bins = np.arange(num_bins)
        idx = np.searchsorted(self.edges, bins, side="right") - 1
        idx = np.clip(idx, 0, self.num_bands - 1)
        lo = self.edges[idx]
        width = self.edges[np.minimum(idx + 1, self.num_bands)] - lo
        frac = (bins - lo) / width
        # last band extends by its own value: no spill into a 23rd band
        frac = np.where(idx >= self.num_bands - 1, 0.0, frac)
        frac = np.where(bins >= self.edges[-1], 0.0, frac)
        return idx, frac


def _default_edges(clock: AudioClock | None = None) -> np.ndarray:
    clock = clock or AudioClock()
    hz = np.asarray(BARK_EDGES_HZ, dtype=np.float64)
    edges = np.rint(hz * clock.fft_size / clock.sample_rate).astype(np.int64)
    edges[-1] = clock.fft_size // 2
    return edges


def default_band_layout(clock: AudioClock | None = None) -> BandLayout:
    return BandLayout(edges=_default_edges(clock))


def frame_stream(pcm: np.ndarray, clock: AudioClock | None = None) -> list[FrameBuffer]:
    """Split a mono signal into windowed, 50%-overlapping frames.

    Frame l starts at sample ``l*hop``; the final partial frame is
    zero-padded.  Empty input yields an empty list.
    """
    clock = clock or AudioClock()
    pcm = np.asarray(pcm, dtype=np.float64)
    if pcm.ndim != 1:
        raise ConfigurationError("frame_stream expects a mono 1-D signal")
    if len(pcm) == 0:
        return []
    n_frames = int(np.ceil(len(pcm) / clock.hop))
    padded = np.zeros((n_frames - 1) * clock.hop + clock.window)
    padded[: len(pcm)] = pcm
    window = sine_window(clock.window)
    frames = []
    for l in range(n_frames):
        chunk = padded[l * clock.hop : l * clock.hop + clock.window]
        frames.append(FrameBuffer(samples=chunk * window, index=l))
    return frames


def fft(frame: FrameBuffer, clock: AudioClock | None = None) -> SpectrumBlock:
    """Unnormalized forward FFT (zero-padded to ``fft_size``)."""
    clock = clock or AudioClock()
    if len(frame.samples) != clock.window:
        raise ConfigurationError(
            f"frame length {len(frame.samples)} != window {clock.window}")
    return SpectrumBlock(bins=np.fft.rfft(frame.samples, n=clock.fft_size),
                         frame_index=frame.index)


def ifft(spec: SpectrumBlock, clock: AudioClock | None = None) -> FrameBuffer:
    """Inverse FFT (carries the 1/fft_size normalization)."""
    clock = clock or AudioClock()
    if len(spec.bins) != clock.num_bins:
        raise ConfigurationError(
            f"spectrum has {len(spec.bins)} bins, expected {clock.num_bins}")
    samples = np.fft.irfft(spec.bins, n=clock.fft_size)[: clock.window]
    return FrameBuffer(samples=samples, index=spec.frame_index)


def overlap_add(frames: list[FrameBuffer], clock: AudioClock | None = None) -> np.ndarray:
    """Resynthesize frames with the synthesis window.

    With the sine window pair this reconstructs an unmodified analysis
    stream exactly (after the first full window).
    """
    clock = clock or AudioClock()
    if not frames:
        return np.zeros(0)
    n_frames = max(f.index for f in frames) + 1
    out = np.zeros(n_frames * clock.hop + clock.hop)
    window = sine_window(clock.window)
    for f in frames:
        start = f.index * clock.hop
        out[start : start + clock.window] += f.samples * window
    return out[: n_frames * clock.hop]


def band_accumulate(values: np.ndarray, layout: BandLayout) -> np.ndarray:
    """Sum per-bin values into 22 bands with triangular inter-band weights."""
    idx, frac = layout.bin_to_band(len(values))
    out = np.zeros(layout.num_bands, dtype=values.dtype)
    np.add.at(out, idx, (1.0 - frac) * values)
    np.add.at(out, np.minimum(idx + 1, layout.num_bands - 1), frac * values)
    return out


def band_energies(spec: SpectrumBlock, layout: BandLayout) -> np.ndarray:
    """22 nonnegative band energies; they sum to the plain half-spectrum energy."""
    power = np.abs(spec.bins) ** 2
    return band_accumulate(power, layout)


def spectrum_energy(spec: SpectrumBlock, clock: AudioClock | None = None) -> float:
    """Total energy of the full (Hermitian-expanded) spectrum."""
    clock = clock or AudioClock()
    power = np.abs(spec.bins) ** 2
    total = power[0] + power[-1] + 2.0 * np.sum(power[1:-1])
    if clock.fft_size % 2 != 0:
        total = power[0] + 2.0 * np.sum(power[1:])
    return float(total)


def read_wav(path, clock: AudioClock | None = None) -> np.ndarray:
    """Read a PCM 16-bit mono WAV at the engine rate into float [-1, 1]."""
    clock = clock or AudioClock()
    path = os.fspath(path)
    try:
        with wave.open(path, "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            if channels != 1:
                raise WavFormatError(f"{path}: expected mono, got {channels} channels")
            if width != 2:
                raise WavFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
            if rate != clock.sample_rate:
                raise WavFormatError(
                    f"{path}: expected {clock.sample_rate} Hz, got {rate} Hz")
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: not a valid WAV file ({exc})") from exc
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def write_wav(path, samples: np.ndarray, clock: AudioClock | None = None) -> None:
    """Write float samples in [-1, 1] as PCM 16-bit mono WAV."""
    clock = clock or AudioClock()
    pcm = np.asarray(samples, dtype=np.float64)
    data = np.clip(np.round(pcm * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clock.sample_rate)
        wf.writeframes(data.tobytes())
