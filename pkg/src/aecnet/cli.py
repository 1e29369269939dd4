"""Command-line front end.

Subcommands::

    aecnet run far.wav mic.wav --out out.wav [--model m.resw | --no-nn]
    aecnet eval --clean s.wav --mic d.wav --out y.wav [--mask act.csv]
    aecnet synth-data --out data.aecd [--manifest m.cfg] [--seed N]
    aecnet inspect-model m.resw

Exit codes: 0 success, 1 processing error, 2 invalid input or format.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import datagen, dsp, metrics, pipeline, rnn
from .errors import AecError, ConfigurationError, ModelFormatError, WavFormatError

EXIT_OK = 0
EXIT_PROCESSING = 1
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aecnet",
        description="Echo cancellation: adaptive filter + recurrent band suppressor")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="cancel echo in a far/mic WAV pair")
    p_run.add_argument("far", help="far-end reference WAV")
    p_run.add_argument("mic", help="microphone WAV")
    p_run.add_argument("--out", required=True, help="output WAV path")
    p_run.add_argument("--model", help="suppressor weights (.resw)")
    p_run.add_argument("--no-nn", action="store_true",
                       help="adaptive filter only, no suppressor")
    p_run.add_argument("--hard-gate", action="store_true",
                       help="per-frame far-end VAD gate instead of hysteresis")
    p_run.add_argument("--dump-gains", metavar="CSV",
                       help="write per-frame band gains and VADs")
    p_run.add_argument("--report-csv", metavar="CSV",
                       help="write the run report as key,value rows")

    p_eval = sub.add_parser("eval", help="score a processed file")
    p_eval.add_argument("--clean", required=True, help="clean near-end WAV")
    p_eval.add_argument("--mic", required=True, help="microphone WAV")
    p_eval.add_argument("--out", required=True, help="processed output WAV")
    p_eval.add_argument("--mask", metavar="CSV",
                        help="per-frame 0/1 activity mask (one row per frame)")
    p_eval.add_argument("--model", help="model file, reported as size column")
    p_eval.add_argument("--report-csv", metavar="CSV")

    p_synth = sub.add_parser("synth-data", help="build a training dataset")
    p_synth.add_argument("--out", required=True, help="output dataset path")
    p_synth.add_argument("--manifest", help="key=value recipe file")
    p_synth.add_argument("--seed", type=int, help="override manifest seed")
    p_synth.add_argument("--duration-s", type=float,
                         help="override manifest duration")

    p_inspect = sub.add_parser("inspect-model", help="describe a weight file")
    p_inspect.add_argument("model", help="weight file (.resw)")

    return parser


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise ConfigurationError(f"{what} not found: {path}")


def _cmd_run(args) -> int:
    if args.no_nn and args.model:
        raise ConfigurationError("--no-nn and --model are mutually exclusive")
    if not args.no_nn and not args.model:
        raise ConfigurationError("run needs --model (or pass --no-nn)")
    _require_file(args.far, "far-end file")
    _require_file(args.mic, "mic file")
    weights = None
    if args.model:
        _require_file(args.model, "model file")
        weights = rnn.load_model(args.model)
    report = pipeline.process_files(
        args.far, args.mic, args.out, weights,
        hard_gate=args.hard_gate, dump_gains_path=args.dump_gains)
    if report.padded:
        print("warning: input lengths differ; shorter file zero-padded",
              file=sys.stderr)
    for line in report.lines():
        print(line)
    if args.report_csv:
        _write_report_csv(args.report_csv, {
            "frames": report.frames,
            "samples": report.samples,
            "erle_mean_db": f"{report.erle_mean_db:.6f}",
            "rt_mean_micros": f"{report.rt.mean_micros:.3f}",
            "rt_max_micros": f"{report.rt.max_micros:.3f}",
            "nn_enabled": int(report.nn_enabled),
            "padded": int(report.padded),
        })
    return EXIT_OK


def _read_mask_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for raw in csv.reader(fh):
            if not raw:
                continue
            token = raw[-1].strip()
            try:
                rows.append(float(token))
            except ValueError:
                continue  # header row
    return np.asarray(rows) > 0.5


def _cmd_eval(args) -> int:
    for path, what in ((args.clean, "clean file"), (args.mic, "mic file"),
                       (args.out, "processed file")):
        _require_file(path, what)
    clean = dsp.read_wav(args.clean)
    mic = dsp.read_wav(args.mic)
    out = dsp.read_wav(args.out)
    if not clean.size == mic.size == out.size:
        raise ConfigurationError(
            f"eval needs aligned files: clean={clean.size} "
            f"mic={mic.size} out={out.size} samples")
    mask = _read_mask_csv(args.mask) if args.mask else None
    series = metrics.erle(mic, out, mask=mask)
    value = metrics.lsd(clean, out, mask=mask)
    size_kb = os.path.getsize(args.model) / 1000.0 if args.model else None
    size = f"{size_kb:.0f}" if size_kb is not None else "-"
    print(f"{'ERLE (dB)':>12} {'LSD (dB)':>12} {'RT (ms)':>12} {'Size (kb)':>12}")
    print(f"{series.mean_db:>12.2f} {value.mean_db:>12.2f} {'-':>12} {size:>12}")
    if args.report_csv:
        _write_report_csv(args.report_csv, {
            "erle_db": f"{series.mean_db:.6f}",
            "lsd_db": f"{value.mean_db:.6f}",
            "size_kb": "" if size_kb is None else f"{size_kb:.3f}",
        })
    return EXIT_OK


def _cmd_synth(args) -> int:
    manifest = (datagen.Manifest.parse(args.manifest) if args.manifest
                else datagen.Manifest())
    if args.seed is not None:
        manifest = replace(manifest, seed=args.seed)
    if args.duration_s is not None:
        manifest = replace(manifest, duration_s=args.duration_s)
    info = datagen.build_dataset(manifest, args.out)
    kinds = {}
    for scene in info.scenes:
        kinds[scene.kind] = kinds.get(scene.kind, 0) + 1
    print(f"wrote {info.frames} records "
          f"({info.duration_s:.1f} s) to {info.path}")
    for kind in sorted(kinds):
        print(f"  {kind}: {kinds[kind]} scene(s)")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    _require_file(args.model, "model file")
    weights = rnn.load_model(args.model)
    size_kb = os.path.getsize(args.model) / 1000.0
    print(f"{'layer':<16} {'kind':<7} {'activation':<11} "
          f"{'in':>5} {'out':>5} {'params':>8}")
    for role, _, _, _, _ in rnn.LAYER_ROLES:
        layer = weights.layers[role]
        if isinstance(layer, rnn.GruLayer):
            kind, act = "gru", "gru"
            n_in, n_out = layer.input_size, layer.hidden_size
            count = sum(p.size for p in layer.params())
        else:
            kind, act = "dense", layer.activation
            n_out, n_in = layer.weights.shape
            count = layer.weights.size + layer.bias.size
        print(f"{role:<16} {kind:<7} {act:<11} "
              f"{n_in:>5} {n_out:>5} {count:>8}")
    print(f"total parameters : {weights.parameter_count()}")
    print(f"file size        : {size_kb:.0f} kb")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "eval": _cmd_eval,
        "synth-data": _cmd_synth,
        "inspect-model": _cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except (ConfigurationError, ModelFormatError, WavFormatError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


def _write_report_csv(path, fields: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for key, value in fields.items():
            writer.writerow([key, value])


if __name__ == "__main__":
    sys.exit(main())
