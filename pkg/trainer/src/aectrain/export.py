"""Serialize a trained :class:`SuppressionNet` to the RESW container.

The writer is self-contained: the byte layout below *is* the contract
between trainer and runtime, so it is spelled out here rather than
imported.  Layout (all little-endian):

    magic "RESW", u32 version, u32 layer count
    per layer: u16 role length, ascii role,
               u8 kind (0 dense, 1 gru), u8 activation id,
               u32 rows, u32 cols,
               float32 arrays (dense: weights row-major, bias;
                               gru: wz uz bz wr ur br wh uh bh)
    u32 CRC32 over everything before it

The trainer normalizes inputs with per-column mean/std; the runtime
applies raw features.  Export folds the normalization into the front
dense layer (W' = W/std column-wise, b' = b - W @ (mean/std)) so both
compute the same function.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
import torch

from .errors import ModelImportError
from .model import GRU_PARTS, SuppressionNet

MAGIC = b"RESW"
FORMAT_VERSION = 1
KIND_DENSE = 0
KIND_GRU = 1
ACT_LINEAR, ACT_TANH, ACT_SIGMOID = 0, 1, 2

# role, kind, activation id, rows, cols — wire order
LAYER_SPECS = (
    ("input_dense", KIND_DENSE, ACT_TANH, 24, 84),
    ("vad_far_gru", KIND_GRU, 0, 24, 24),
    ("vad_near_gru", KIND_GRU, 0, 24, 24),
    ("vad_far_dense", KIND_DENSE, ACT_SIGMOID, 1, 24),
    ("vad_near_dense", KIND_DENSE, ACT_SIGMOID, 1, 24),
    ("echo_est_gru", KIND_GRU, 0, 48, 48),
    ("suppress_gru", KIND_GRU, 0, 96, 96),
    ("gain_dense", KIND_DENSE, ACT_SIGMOID, 22, 96),
)


def _fold_front(model: SuppressionNet) -> tuple[np.ndarray, np.ndarray]:
    """Absorb the input normalization into the front dense layer."""
    w = model.input_dense.weight.detach().numpy().astype(np.float64)
    b = model.input_dense.bias.detach().numpy().astype(np.float64)
    mean = model.feat_mean.numpy().astype(np.float64)
    std = model.feat_std.numpy().astype(np.float64)
    folded_w = w / std[np.newaxis, :]
    folded_b = b - w @ (mean / std)
    return folded_w.astype(np.float32), folded_b.astype(np.float32)


def _layer_arrays(model: SuppressionNet, role: str, kind: int):
    if role == "input_dense":
        return _fold_front(model)
    module = getattr(model, role)
    if kind == KIND_DENSE:
        return (module.weight.detach().numpy().astype(np.float32),
                module.bias.detach().numpy().astype(np.float32))
    return tuple(getattr(module, name).detach().numpy().astype(np.float32)
                 for name in GRU_PARTS)


def serialize_model(model: SuppressionNet) -> bytes:
    """Render the network (normalization folded in) as RESW bytes."""
    was_training = model.training
    model.eval()
    out = bytearray()
    out += struct.pack("<4sII", MAGIC, FORMAT_VERSION, len(LAYER_SPECS))
    with torch.no_grad():
        for role, kind, act_id, rows, cols in LAYER_SPECS:
            arrays = _layer_arrays(model, role, kind)
            lead = arrays[0]
            if lead.shape != (rows, cols):
                raise ValueError(
                    f"{role}: expected shape {(rows, cols)}, got {lead.shape}")
            role_bytes = role.encode("ascii")
            out += struct.pack("<H", len(role_bytes)) + role_bytes
            out += struct.pack("<BBII", kind, act_id, rows, cols)
            for arr in arrays:
                out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    if was_training:
        model.train()
    return bytes(out)


def export_model(model: SuppressionNet, path) -> None:
    """Write the model to ``path`` in RESW format."""
    blob = serialize_model(model)
    with open(path, "wb") as fh:
        fh.write(blob)


def _parse_arrays(blob: bytes, offset: int, shapes) -> tuple[list[np.ndarray], int]:
    arrays = []
    for shape in shapes:
        n = 4 * int(np.prod(shape))
        if offset + n > len(blob):
            raise ModelImportError("truncated weight data")
        arrays.append(np.frombuffer(blob, dtype="<f4", count=int(np.prod(shape)),
                                    offset=offset).reshape(shape).copy())
        offset += n
    return arrays, offset


def import_model(path) -> SuppressionNet:
    """Load an RESW file into a torch model.

    The file stores the normalization already folded into the front
    layer, so the returned model carries identity mean/std buffers and
    re-exporting it reproduces the input bytes.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise ModelImportError(f"{path}: not an RESW weight file")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise ModelImportError(f"{path}: CRC mismatch")
    _, version, n_layers = struct.unpack("<4sII", blob[:12])
    if version != FORMAT_VERSION or n_layers != len(LAYER_SPECS):
        raise ModelImportError(f"{path}: unsupported header "
                               f"(version {version}, {n_layers} layers)")
    model = SuppressionNet()
    offset = 12
    body = blob[:-4]
    with torch.no_grad():
        for role, kind, act_id, rows, cols in LAYER_SPECS:
            (role_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            got_role = body[offset : offset + role_len].decode("ascii", "replace")
            offset += role_len
            got = struct.unpack_from("<BBII", body, offset)
            offset += 10
            if got_role != role or got != (kind, act_id, rows, cols):
                raise ModelImportError(
                    f"{path}: layer {got_role!r} {got} does not match the "
                    f"expected {role!r} {(kind, act_id, rows, cols)}")
            module = getattr(model, role)
            if kind == KIND_DENSE:
                shapes = [(rows, cols), (rows,)]
                arrays, offset = _parse_arrays(body, offset, shapes)
                module.weight.copy_(torch.from_numpy(arrays[0]))
                module.bias.copy_(torch.from_numpy(arrays[1]))
            else:
                shapes = []
                for name in GRU_PARTS:
                    if name.startswith("b"):
                        shapes.append((rows,))
                    elif name.startswith("w"):
                        shapes.append((rows, cols))
                    else:
                        shapes.append((rows, rows))
                arrays, offset = _parse_arrays(body, offset, shapes)
                for name, arr in zip(GRU_PARTS, arrays):
                    getattr(module, name).copy_(torch.from_numpy(arr))
        if offset != len(body):
            raise ModelImportError(f"{path}: {len(body) - offset} stray bytes")
        model.feat_mean.zero_()
        model.feat_std.fill_(1.0)
    return model
