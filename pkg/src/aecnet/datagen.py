"""Synthetic training-data factory.

Scenes are built as ``mic = convolve(nl(far), rir) * g + near`` where the
echo gain ``g`` realizes a requested near-to-echo ratio.  Each scene is
streamed through a fresh adaptive filter; features of the far end and of
the filter output, voice-activity labels for both ends, and per-band
gain targets are packed into fixed-width records:

    record (108 float32): far features (42) | filter-output features (42)
                          | vad_near | vad_far | band gains (22)

Dataset files carry a 16-byte header — magic ``AECD``, version, record
width, frame count — followed by the records row-major, little-endian.
Everything is deterministic for a given manifest (seeded per scene), and
scene rendering parallelizes across processes when ``AEC_THREADS`` > 1.
"""

from __future__ import annotations

import concurrent.futures
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve, lfilter

from . import dsp
from .errors import ConfigurationError, ModelFormatError
from .features import NUM_FEATURES, extract_features_offline
from .mdf import FilterConfig, MdfFilter

DATASET_MAGIC = b"AECD"
DATASET_VERSION = 1
RECORD_WIDTH = 2 * NUM_FEATURES + 2 + dsp.NUM_BANDS  # 108

VAD_HIGH_DBFS = -50.0
VAD_LOW_DBFS = -60.0
ENERGY_FLOOR = 1e-10

NONLINEARITY_KINDS = ("none", "hard-clip", "memoryless-tanh")


# ----------------------------------------------------------------------
# scene building blocks
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RirSpec:
    """A room impulse response, normalized to unit direct-path gain."""

    taps: np.ndarray
    source: str = "synthetic"

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=np.float64).ravel()
        if taps.size == 0 or not np.all(np.isfinite(taps)):
            raise ConfigurationError("RIR taps must be finite and non-empty")
        peak = np.max(np.abs(taps))
        if peak <= 0.0:
            raise ConfigurationError("degenerate RIR: all taps are zero")
        object.__setattr__(self, "taps", taps / peak)


def synthetic_rir(num_taps: int, rt60_s: float,
                  rng: np.random.Generator) -> RirSpec:
    """Exponential-decay noise tail behind a unit direct path."""
    if not 16 <= num_taps <= 2400:
        raise ConfigurationError(f"RIR length {num_taps} outside [16, 2400]")
    if rt60_s <= 0:
        raise ConfigurationError("rt60_s must be positive")
    t = np.arange(num_taps) / dsp.SAMPLE_RATE
    decay = np.exp(-t * (6.908 / rt60_s))  # ln(1000)/rt60: -60 dB at rt60
    taps = rng.standard_normal(num_taps) * decay * 0.35
    taps[0] = 1.0
    return RirSpec(taps=taps, source="synthetic")


def load_rir(path) -> RirSpec:
    return RirSpec(taps=dsp.read_wav(path), source=str(path))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Memoryless loudspeaker distortion model."""

    kind: str = "none"
    drive: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in NONLINEARITY_KINDS:
            raise ConfigurationError(
                f"unknown nonlinearity {self.kind!r}; "
                f"choose from {NONLINEARITY_KINDS}")
        if self.drive <= 0:
            raise ConfigurationError("nonlinearity drive must be positive")

    @classmethod
    def parse(cls, text: str) -> "NonlinearitySpec":
        """Parse ``kind`` or ``kind:drive``."""
        kind, _, drive = text.strip().partition(":")
        return cls(kind=kind, drive=float(drive) if drive else 1.0)


def apply_nonlinearity(x: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "none":
        return x.copy()
    if spec.kind == "hard-clip":
        limit = 1.0 / spec.drive
        return np.clip(x, -limit, limit)
    return np.tanh(spec.drive * x) / spec.drive


@dataclass
class Scene:
    """A synthesized microphone scene with its ground-truth components."""

    mic: np.ndarray
    echo: np.ndarray
    near: np.ndarray


def synth_scene(far: np.ndarray, near: np.ndarray, rir: RirSpec,
                nl: NonlinearitySpec, snr_db: float) -> Scene:
    """Mix an echoed far-end signal with near-end speech.

    ``snr_db`` is the near-to-echo energy ratio realized at the mic;
    when the near end is silent the echo is left at unit gain.
    """
    far = np.asarray(far, dtype=np.float64).ravel()
    near = np.asarray(near, dtype=np.float64).ravel()
    if far.size != near.size:
        raise ConfigurationError(
            f"far ({far.size}) and near ({near.size}) must be equal length")
    echo = fftconvolve(apply_nonlinearity(far, nl), rir.taps)[:far.size]
    e_echo = float(np.sum(echo ** 2))
    e_near = float(np.sum(near ** 2))
    if e_echo > 0.0 and e_near > 0.0:
        echo = echo * np.sqrt(e_near / (e_echo * 10.0 ** (snr_db / 10.0)))
    return Scene(mic=echo + near, echo=echo, near=near)


# ----------------------------------------------------------------------
# labels
# ----------------------------------------------------------------------

def frame_matrix(signal: np.ndarray,
                 clock: dsp.AudioClock | None = None) -> np.ndarray:
    """Windowed analysis frames as a 2-D array (n_frames, window)."""
    clock = clock or dsp.AudioClock()
    frames = dsp.frame_stream(signal, clock)
    if not frames:
        return np.zeros((0, clock.window))
    return np.stack([f.samples for f in frames])


def label_vad(frames: np.ndarray, high_dbfs: float = VAD_HIGH_DBFS,
              low_dbfs: float = VAD_LOW_DBFS) -> np.ndarray:
    """Three-level activity labels from per-frame level in dBFS.

    Above ``high_dbfs`` → 1, below ``low_dbfs`` → 0, between → 0.5.
    """
    if high_dbfs <= low_dbfs:
        raise ConfigurationError("high_dbfs must exceed low_dbfs")
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    level = 10.0 * np.log10(np.mean(frames ** 2, axis=1) + 1e-20)
    labels = np.full(frames.shape[0], 0.5)
    labels[level > high_dbfs] = 1.0
    labels[level < low_dbfs] = 0.0
    return labels


def gain_label(clean_band_e: np.ndarray, resid_band_e: np.ndarray,
               floor: float = ENERGY_FLOOR) -> np.ndarray:
    """Per-band target gain sqrt(E_clean/E_resid), clamped to [0, 1].

    Bands where both energies sit below ``floor`` are labeled 1 —
    suppressing silence would be a pointless training target.
    """
    clean = np.asarray(clean_band_e, dtype=np.float64)
    resid = np.asarray(resid_band_e, dtype=np.float64)
    g = np.sqrt(clean / np.maximum(resid, floor))
    g = np.clip(g, 0.0, 1.0)
    both_silent = (clean < floor) & (resid < floor)
    return np.where(both_silent, 1.0, g)


def label_gains(clean: np.ndarray, filtered: np.ndarray,
                clock: dsp.AudioClock | None = None,
                layout: dsp.BandLayout | None = None) -> np.ndarray:
    """Gain targets per frame from clean near speech vs. filter output."""
    clock = clock or dsp.AudioClock()
    layout = layout or dsp.default_band_layout(clock)
    if len(clean) != len(filtered):
        raise ConfigurationError("clean and filtered must be equal length")
    c_frames = dsp.frame_stream(clean, clock)
    f_frames = dsp.frame_stream(filtered, clock)
    out = np.ones((len(c_frames), layout.num_bands))
    for l, (cf, ff) in enumerate(zip(c_frames, f_frames)):
        e_c = dsp.band_energies(dsp.fft(cf, clock), layout)
        e_f = dsp.band_energies(dsp.fft(ff, clock), layout)
        out[l] = gain_label(e_c, e_f)
    return out


# ----------------------------------------------------------------------
# pseudo-speech
# ----------------------------------------------------------------------

def _resonator(freq_hz: float, r: float) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * freq_hz / dsp.SAMPLE_RATE
    return np.array([1.0 - r]), np.array([1.0, -2.0 * r * np.cos(theta), r * r])


def _voiced_segment(n: int, rng: np.random.Generator) -> np.ndarray:
    f0 = rng.uniform(85.0, 255.0)
    f1 = f0 * rng.uniform(0.8, 1.25)
    phase = np.cumsum(np.linspace(f0, f1, n)) / dsp.SAMPLE_RATE
    pulses = np.zeros(n)
    wraps = np.where(np.diff(phase % 1.0) < 0.0)[0] + 1
    pulses[0] = 1.0
    pulses[wraps] = 1.0
    x = pulses + 0.02 * rng.standard_normal(n)
    for _ in range(2):
        b, a = _resonator(rng.uniform(300.0, 3200.0), rng.uniform(0.90, 0.97))
        x = lfilter(b, a, x)
    return x


def _unvoiced_segment(n: int, rng: np.random.Generator) -> np.ndarray:
    b, a = _resonator(rng.uniform(2000.0, 6500.0), rng.uniform(0.85, 0.95))
    return lfilter(b, a, rng.standard_normal(n))


def pseudo_speech(duration_s: float, rng: np.random.Generator,
                  activity: float = 0.65) -> np.ndarray:
    """Speech-like test signal: pitched/noisy bursts separated by pauses.

    Produces pitch glides through random two-formant filters plus
    fricative-like noise bursts; segment amplitudes vary so activity
    labels exercise all three levels.
    """
    n = int(round(duration_s * dsp.SAMPLE_RATE))
    out = np.zeros(n)
    pos = 0
    while pos < n:
        if rng.uniform() > activity:
            pos += int(rng.uniform(0.08, 0.4) * dsp.SAMPLE_RATE)
            continue
        if rng.uniform() < 0.75:
            seg_n = int(rng.uniform(0.15, 0.6) * dsp.SAMPLE_RATE)
            seg = _voiced_segment(seg_n, rng)
        else:
            seg_n = int(rng.uniform(0.05, 0.18) * dsp.SAMPLE_RATE)
            seg = _unvoiced_segment(seg_n, rng)
        ramp = min(seg_n // 4, 320)
        if ramp > 0:
            seg[:ramp] *= np.linspace(0.0, 1.0, ramp)
            seg[-ramp:] *= np.linspace(1.0, 0.0, ramp)
        rms = np.sqrt(np.mean(seg ** 2)) + 1e-12
        seg *= rng.uniform(0.02, 0.25) / rms
        end = min(pos + seg_n, n)
        out[pos:end] += seg[:end - pos]
        pos = end
    peak = np.max(np.abs(out))
    if peak > 0.6:
        out *= 0.6 / peak
    return out


# ----------------------------------------------------------------------
# manifest + dataset
# ----------------------------------------------------------------------

_MANIFEST_KEYS = {
    "seed", "duration_s", "scene_s", "far_source", "near_source",
    "rir_count", "rir_taps", "rt60_min_s", "rt60_max_s",
    "nonlinearity", "snr_db", "near_silence_prob", "far_silence_prob",
    "vad_high_dbfs", "vad_low_dbfs",
}


@dataclass
class Manifest:
    """Plain-text key/value recipe for a dataset build."""

    seed: int = 1
    duration_s: float = 60.0
    scene_s: float = 10.0
    far_source: str = "synthetic"
    near_source: str = "synthetic"
    rir_count: int = 8
    rir_taps: int = 1600
    rt60_min_s: float = 0.05
    rt60_max_s: float = 0.3
    nonlinearity: tuple = (NonlinearitySpec("none"),
                           NonlinearitySpec("memoryless-tanh", 1.5),
                           NonlinearitySpec("hard-clip", 2.0))
    snr_db: tuple = (-5.0, 0.0, 5.0, 10.0)
    near_silence_prob: float = 0.3
    far_silence_prob: float = 0.15
    vad_high_dbfs: float = VAD_HIGH_DBFS
    vad_low_dbfs: float = VAD_LOW_DBFS

    def __post_init__(self) -> None:
        if self.duration_s <= 0 or self.scene_s <= 0:
            raise ConfigurationError("durations must be positive")
        if self.near_silence_prob + self.far_silence_prob > 1.0:
            raise ConfigurationError("silence probabilities sum above 1")

    @property
    def num_scenes(self) -> int:
        return max(1, int(round(self.duration_s / self.scene_s)))

    @classmethod
    def parse(cls, path) -> "Manifest":
        values: dict = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(
                        f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in _MANIFEST_KEYS:
                    raise ConfigurationError(
                        f"{path}:{lineno}: unknown manifest key {key!r}")
                values[key] = value
        kwargs: dict = {}
        for key, value in values.items():
            if key in ("seed", "rir_count", "rir_taps"):
                kwargs[key] = int(value)
            elif key in ("far_source", "near_source"):
                kwargs[key] = value
            elif key == "nonlinearity":
                kwargs[key] = tuple(NonlinearitySpec.parse(tok)
                                    for tok in value.split(","))
            elif key == "snr_db":
                kwargs[key] = tuple(float(tok) for tok in value.split(","))
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    def to_text(self) -> str:
        nl = ",".join(f"{s.kind}:{s.drive:g}" if s.kind != "none" else s.kind
                      for s in self.nonlinearity)
        snr = ",".join(f"{v:g}" for v in self.snr_db)
        lines = [
            f"seed = {self.seed}",
            f"duration_s = {self.duration_s:g}",
            f"scene_s = {self.scene_s:g}",
            f"far_source = {self.far_source}",
            f"near_source = {self.near_source}",
            f"rir_count = {self.rir_count}",
            f"rir_taps = {self.rir_taps}",
            f"rt60_min_s = {self.rt60_min_s:g}",
            f"rt60_max_s = {self.rt60_max_s:g}",
            f"nonlinearity = {nl}",
            f"snr_db = {snr}",
            f"near_silence_prob = {self.near_silence_prob:g}",
            f"far_silence_prob = {self.far_silence_prob:g}",
            f"vad_high_dbfs = {self.vad_high_dbfs:g}",
            f"vad_low_dbfs = {self.vad_low_dbfs:g}",
        ]
        return "\n".join(lines) + "\n"


@dataclass
class SceneRecord:
    kind: str
    start_frame: int
    num_frames: int


@dataclass
class DatasetInfo:
    path: str
    frames: int
    scenes: list[SceneRecord] = field(default_factory=list)

    @property
    def duration_s(self) -> float:
        return self.frames * dsp.HOP / dsp.SAMPLE_RATE


def _rir_pool(manifest: Manifest) -> list[RirSpec]:
    rng = np.random.default_rng([manifest.seed, 0x5EED])
    pool = []
    for _ in range(manifest.rir_count):
        rt60 = rng.uniform(manifest.rt60_min_s, manifest.rt60_max_s)
        pool.append(synthetic_rir(manifest.rir_taps, rt60, rng))
    return pool


def _source_signal(source: str, duration_s: float, scene_index: int,
                   rng: np.random.Generator) -> np.ndarray:
    n = int(round(duration_s * dsp.SAMPLE_RATE))
    if source == "synthetic":
        return pseudo_speech(duration_s, rng)
    files = sorted(p for p in os.listdir(source) if p.endswith(".wav"))
    if not files:
        raise ConfigurationError(f"no .wav files found in {source!r}")
    # wrap around the corpus, re-randomizing gain on every visit
    pcm = dsp.read_wav(os.path.join(source, files[scene_index % len(files)]))
    out = np.zeros(n)
    if pcm.size >= n:
        start = int(rng.integers(0, pcm.size - n + 1))
        out[:] = pcm[start:start + n]
    else:
        out[:pcm.size] = pcm
    return out * rng.uniform(0.3, 1.0)


def render_scene(manifest: Manifest, index: int) -> tuple[np.ndarray, str]:
    """Synthesize scene ``index`` and return (records, scene kind)."""
    rng = np.random.default_rng([manifest.seed, index])
    clock = dsp.AudioClock()
    layout = dsp.default_band_layout(clock)

    draw = rng.uniform()
    if draw < manifest.near_silence_prob:
        kind = "echo_only"
    elif draw < manifest.near_silence_prob + manifest.far_silence_prob:
        kind = "near_only"
    else:
        kind = "double_talk"

    n = int(round(manifest.scene_s * dsp.SAMPLE_RATE))
    far = (np.zeros(n) if kind == "near_only"
           else _source_signal(manifest.far_source, manifest.scene_s, index, rng))
    near = (np.zeros(n) if kind == "echo_only"
            else _source_signal(manifest.near_source, manifest.scene_s, index, rng))
    pool = _rir_pool(manifest)
    rir = pool[int(rng.integers(len(pool)))]
    nl = manifest.nonlinearity[int(rng.integers(len(manifest.nonlinearity)))]
    snr = float(manifest.snr_db[int(rng.integers(len(manifest.snr_db)))])
    scene = synth_scene(far, near, rir, nl, snr)

    # stream the scene through a fresh adaptive filter
    n_frames = -(-n // clock.hop)
    total = n_frames * clock.hop
    far_buf = np.zeros(total)
    far_buf[:n] = far
    mic_buf = np.zeros(total)
    mic_buf[:n] = scene.mic
    near_buf = np.zeros(total)
    near_buf[:n] = scene.near
    filt = MdfFilter(FilterConfig())
    err = np.zeros(total)
    for l in range(n_frames):
        sl = slice(l * clock.hop, (l + 1) * clock.hop)
        err[sl] = filt.process(far_buf[sl], mic_buf[sl]).error_frame

    far_feat = extract_features_offline(far_buf, clock, layout)
    near_feat = extract_features_offline(err, clock, layout)
    vad_far = label_vad(frame_matrix(far_buf, clock),
                        manifest.vad_high_dbfs, manifest.vad_low_dbfs)
    vad_near = label_vad(frame_matrix(near_buf, clock),
                         manifest.vad_high_dbfs, manifest.vad_low_dbfs)
    gains = label_gains(near_buf, err, clock, layout)

    records = np.concatenate([
        far_feat,
        near_feat,
        vad_near[:, None].astype(np.float32),
        vad_far[:, None].astype(np.float32),
        gains.astype(np.float32),
    ], axis=1).astype(np.float32)
    if not np.all(np.isfinite(records)):
        raise ConfigurationError(f"scene {index}: non-finite record values")
    return records, kind


def _render_scene_star(args) -> tuple[np.ndarray, str]:
    return render_scene(*args)


def build_dataset(manifest: Manifest, out_path) -> DatasetInfo:
    """Render every scene in the manifest and write one dataset file."""
    workers = max(1, int(os.environ.get("AEC_THREADS", "1")))
    jobs = [(manifest, i) for i in range(manifest.num_scenes)]
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_render_scene_star, jobs))
    else:
        results = [render_scene(*job) for job in jobs]

    info = DatasetInfo(path=str(out_path), frames=0)
    with open(out_path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<III", DATASET_VERSION, RECORD_WIDTH, 0))
        for records, kind in results:
            info.scenes.append(SceneRecord(kind, info.frames, len(records)))
            info.frames += len(records)
            fh.write(np.ascontiguousarray(records, dtype="<f4").tobytes())
        fh.seek(12)  # header: magic(4) version(4) width(4) count(4)
        fh.write(struct.pack("<I", info.frames))
    return info


def read_dataset(path) -> np.ndarray:
    """Load a dataset file as an (n_frames, 108) float32 array."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:4] != DATASET_MAGIC:
            raise ModelFormatError(f"{path}: not a dataset file (bad magic)")
        version, width, count = struct.unpack("<III", head[4:])
        if version != DATASET_VERSION:
            raise ModelFormatError(f"{path}: unsupported dataset version {version}")
        if width != RECORD_WIDTH:
            raise ModelFormatError(
                f"{path}: record width {width}, expected {RECORD_WIDTH}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != width * count:
        raise ModelFormatError(
            f"{path}: expected {width * count} values, found {data.size}")
    return data.reshape(count, width).astype(np.float32)
