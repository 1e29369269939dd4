#!/usr/bin/env python3
"""End-to-end walkthrough: synthesize a scene, cancel its echo twice.

Builds a 20 s conversation (far-end speech echoed through a synthetic
room with a tanh loudspeaker, near-end speech overlapping), then runs
the engine in two configurations:

    1. adaptive filter only
    2. adaptive filter + recurrent band suppressor (shipped tiny model)

Prints both run reports plus an ERLE/LSD comparison and leaves the WAV
files under build/demo/ for listening.
"""

from pathlib import Path

import numpy as np

import aecnet
from aecnet import datagen, dsp, metrics, pipeline, rnn

ROOT = Path(__file__).resolve().parents[1]
OUT_DIR = ROOT / "build" / "demo"
MODEL = Path(aecnet.__file__).parent / "models" / "tiny.resw"

RATE = 16000
DURATION_S = 20.0


def in_spans(n, spans):
    t = np.arange(n) / RATE
    mask = np.zeros(n, dtype=bool)
    for lo, hi in spans:
        mask |= (t >= lo) & (t < hi)
    return mask


def build_scene():
    n = int(DURATION_S * RATE)
    far = datagen.pseudo_speech(DURATION_S, np.random.default_rng(101))
    near = datagen.pseudo_speech(DURATION_S, np.random.default_rng(102))
    far *= in_spans(n, [(0.0, 8.0), (12.0, 16.0)])
    near *= in_spans(n, [(6.0, 12.0), (16.0, 20.0)])
    rir = datagen.synthetic_rir(1600, 0.1, np.random.default_rng(103))
    nl = datagen.NonlinearitySpec("memoryless-tanh", 1.5)
    scene = datagen.synth_scene(far, near, rir, nl, snr_db=0.0)
    scale = 0.9 / max(np.max(np.abs(scene.mic)), np.max(np.abs(far)), 1e-9)
    return far * scale, scene.mic * scale, scene.near * scale


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    far, mic, near = build_scene()
    dsp.write_wav(OUT_DIR / "far.wav", far)
    dsp.write_wav(OUT_DIR / "mic.wav", mic)
    dsp.write_wav(OUT_DIR / "near.wav", near)

    print("== adaptive filter only ==")
    report_lin = pipeline.process_files(
        OUT_DIR / "far.wav", OUT_DIR / "mic.wav", OUT_DIR / "out_filter.wav")
    for line in report_lin.lines():
        print(f"  {line}")

    print("== filter + band suppressor ==")
    weights = rnn.load_model(MODEL)
    report_nn = pipeline.process_files(
        OUT_DIR / "far.wav", OUT_DIR / "mic.wav", OUT_DIR / "out_nn.wav",
        weights, dump_gains_path=OUT_DIR / "gains.csv")
    for line in report_nn.lines():
        print(f"  {line}")

    # score echo suppression where only the far end talks, and speech
    # preservation where only the near end talks
    out_lin = dsp.read_wav(OUT_DIR / "out_filter.wav")
    out_nn = dsp.read_wav(OUT_DIR / "out_nn.wav")
    n = far.size
    frames = n // 160
    echo_mask = in_spans(frames * 160, [(1.0, 6.0), (13.0, 16.0)])[::160][:frames]
    near_mask = in_spans(frames * 160, [(8.5, 12.0), (16.5, 20.0)])[::160][:frames]

    erle_lin = metrics.erle(mic, out_lin, mask=echo_mask).mean_db
    erle_nn = metrics.erle(mic, out_nn, mask=echo_mask).mean_db
    lsd_lin = metrics.lsd(near, out_lin, mask=near_mask).mean_db
    lsd_nn = metrics.lsd(near, out_nn, mask=near_mask).mean_db

    print("== comparison (echo-only / near-only segments) ==")
    print(f"  {'configuration':<24} {'ERLE dB':>8} {'LSD dB':>8}")
    print(f"  {'filter only':<24} {erle_lin:>8.1f} {lsd_lin:>8.2f}")
    print(f"  {'filter + suppressor':<24} {erle_nn:>8.1f} {lsd_nn:>8.2f}")
    print(f"outputs in {OUT_DIR}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
