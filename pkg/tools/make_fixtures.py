#!/usr/bin/env python3
"""Generate the committed inference fixtures in tests/fixtures/.

Three models (all-zero, seeded random, and the shipped tiny model) are
serialized next to a 100-frame feature sequence and the network outputs
for every frame.  The outputs here are computed by a self-contained
reference: the weight file is re-parsed with a local reader and the
layers are evaluated with plain per-row dot products, so the committed
vectors share no inference code with the package.  A 10-step GRU state
trajectory fixture is produced the same way.

Run from the repository root:

    python3 tools/make_fixtures.py

Regenerate whenever the tiny model shipped in src/aecnet/models/ is
retrained.  Output files are deterministic for a given model set.
"""

from __future__ import annotations

import os
import struct
import sys
import zlib

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURE_DIR = os.path.join(ROOT, "tests", "fixtures")
TINY_MODEL = os.path.join(ROOT, "src", "aecnet", "models", "tiny.resw")

sys.path.insert(0, os.path.join(ROOT, "src"))

GRU_PART_NAMES = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")


# ----------------------------------------------------------------------
# independent RESW reader (kept free of aecnet.rnn on purpose)
# ----------------------------------------------------------------------

def parse_resw(blob: bytes) -> dict:
    """Minimal reader for the weight container; returns {role: params}."""
    if blob[:4] != b"RESW":
        raise ValueError("bad magic")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise ValueError("CRC mismatch")
    body = blob[:-4]
    _, version, n_layers = struct.unpack("<4sII", body[:12])
    if version != 1:
        raise ValueError(f"unsupported version {version}")
    off = 12
    layers: dict = {}
    for _ in range(n_layers):
        (role_len,) = struct.unpack_from("<H", body, off)
        off += 2
        role = body[off:off + role_len].decode("ascii")
        off += role_len
        kind, act_id, rows, cols = struct.unpack_from("<BBII", body, off)
        off += 10

        def floats(count):
            nonlocal off
            arr = np.frombuffer(body, dtype="<f4", count=count, offset=off)
            off += 4 * count
            return arr.astype(np.float64)

        if kind == 0:
            layers[role] = {
                "kind": "dense",
                "act": {0: "linear", 1: "tanh", 2: "sigmoid", 3: "relu"}[act_id],
                "w": floats(rows * cols).reshape(rows, cols),
                "b": floats(rows),
            }
        else:
            params = {"kind": "gru"}
            for name in GRU_PART_NAMES:
                if name.startswith("b"):
                    params[name] = floats(rows)
                elif name.startswith("w"):
                    params[name] = floats(rows * cols).reshape(rows, cols)
                else:
                    params[name] = floats(rows * rows).reshape(rows, rows)
            layers[role] = params
    if off != len(body):
        raise ValueError("trailing bytes")
    return layers


# ----------------------------------------------------------------------
# reference inference: per-row dots, no shared code with the engine
# ----------------------------------------------------------------------

def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-np.clip(v, -60.0, 60.0)))


def dense_apply(layer, x):
    out = np.array([np.dot(row, x) for row in layer["w"]]) + layer["b"]
    if layer["act"] == "tanh":
        return np.tanh(out)
    if layer["act"] == "sigmoid":
        return sigmoid(out)
    if layer["act"] == "relu":
        return np.maximum(out, 0.0)
    return out


def gru_apply(layer, x, h):
    size = len(h)
    z = np.array([sigmoid(np.dot(layer["wz"][i], x)
                          + np.dot(layer["uz"][i], h) + layer["bz"][i])
                  for i in range(size)])
    r = np.array([sigmoid(np.dot(layer["wr"][i], x)
                          + np.dot(layer["ur"][i], h) + layer["br"][i])
                  for i in range(size)])
    gated = r * h
    cand = np.array([np.tanh(np.dot(layer["wh"][i], x)
                             + np.dot(layer["uh"][i], gated) + layer["bh"][i])
                     for i in range(size)])
    return (1.0 - z) * h + z * cand


def reference_forward(layers, far_seq, near_seq):
    h_far = np.zeros(24)
    h_near = np.zeros(24)
    h_echo = np.zeros(48)
    h_sup = np.zeros(96)
    vads_near, vads_far, gains = [], [], []
    for far, near in zip(far_seq, near_seq):
        x = np.concatenate([far, near]).astype(np.float32).astype(np.float64)
        front = dense_apply(layers["input_dense"], x)
        h_far = gru_apply(layers["vad_far_gru"], front, h_far)
        h_near = gru_apply(layers["vad_near_gru"], front, h_near)
        vads_far.append(dense_apply(layers["vad_far_dense"], h_far)[0])
        vads_near.append(dense_apply(layers["vad_near_dense"], h_near)[0])
        h_echo = gru_apply(layers["echo_est_gru"],
                           np.concatenate([front, h_far]), h_echo)
        h_sup = gru_apply(layers["suppress_gru"],
                          np.concatenate([h_echo, h_near, front]), h_sup)
        gains.append(dense_apply(layers["gain_dense"], h_sup))
    return (np.asarray(vads_near), np.asarray(vads_far), np.asarray(gains))


# ----------------------------------------------------------------------
# fixture inputs: one realistic 100-frame scene
# ----------------------------------------------------------------------

def build_feature_sequence():
    from aecnet import datagen, dsp
    from aecnet.features import extract_features_offline
    from aecnet.mdf import FilterConfig, MdfFilter

    rng = np.random.default_rng([33, 1])
    clock = dsp.AudioClock()
    far = datagen.pseudo_speech(1.0, rng)
    near = datagen.pseudo_speech(1.0, np.random.default_rng([33, 2]))
    rir = datagen.synthetic_rir(800, 0.12, rng)
    nl = datagen.NonlinearitySpec("memoryless-tanh", 1.5)
    scene = datagen.synth_scene(far, near, rir, nl, 5.0)

    filt = MdfFilter(FilterConfig())
    hop = clock.hop
    err = np.concatenate([
        filt.process(far[l * hop:(l + 1) * hop],
                     scene.mic[l * hop:(l + 1) * hop]).error_frame
        for l in range(len(far) // hop)
    ])
    far_feat = extract_features_offline(far, clock)
    near_feat = extract_features_offline(err, clock)
    return far_feat[:100], near_feat[:100]


def make_models():
    from aecnet import rnn

    models = {
        "zero": rnn.save_weights(rnn.zero_weights()),
        "random": rnn.save_weights(rnn.random_weights(seed=1033)),
    }
    if os.path.isfile(TINY_MODEL):
        with open(TINY_MODEL, "rb") as fh:
            models["trained"] = fh.read()
    else:
        print("note: no shipped tiny model yet; using a stand-in "
              "(rerun after training)")
        models["trained"] = rnn.save_weights(rnn.random_weights(seed=2077))
    return models


def make_gru_trajectory():
    """Random gate parameters + 10 inputs + the resulting state path."""
    rng = np.random.default_rng(8844)
    size, inputs = 16, 12
    layer = {}
    for name in GRU_PART_NAMES:
        if name.startswith("b"):
            shape = (size,)
        elif name.startswith("w"):
            shape = (size, inputs)
        else:
            shape = (size, size)
        layer[name] = rng.normal(0.0, 0.6, size=shape).astype(
            np.float32).astype(np.float64)
    x_seq = rng.normal(0.0, 1.5, size=(10, inputs)).astype(
        np.float32).astype(np.float64)
    h = np.zeros(size)
    path = []
    for x in x_seq:
        h = gru_apply(layer, x, h)
        path.append(h.copy())
    out = {f"param_{k}": v for k, v in layer.items()}
    out["inputs"] = x_seq
    out["states"] = np.asarray(path)
    np.savez(os.path.join(FIXTURE_DIR, "gru_trajectory.npz"), **out)
    print("wrote gru_trajectory.npz")


def main():
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    far_feat, near_feat = build_feature_sequence()
    assert far_feat.shape == (100, 42), far_feat.shape

    for name, blob in make_models().items():
        model_path = os.path.join(FIXTURE_DIR, f"model_{name}.resw")
        with open(model_path, "wb") as fh:
            fh.write(blob)
        layers = parse_resw(blob)
        vad_near, vad_far, gains = reference_forward(layers, far_feat,
                                                     near_feat)
        np.savez(os.path.join(FIXTURE_DIR, f"expect_{name}.npz"),
                 far=far_feat, near=near_feat,
                 vad_near=vad_near, vad_far=vad_far, gains=gains)
        print(f"wrote model_{name}.resw + expect_{name}.npz "
              f"(gain range {gains.min():.4f}..{gains.max():.4f})")

    make_gru_trajectory()


if __name__ == "__main__":
    main()
