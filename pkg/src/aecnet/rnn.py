"""From-scratch inference for the band-gain suppression network.

Topology (8 layers; GRU sizes are hidden widths):

    input_dense   84 -> 24, tanh      shared front end over both channels
    vad_far_gru   24 -> 24            far-end voice activity memory
    vad_near_gru  24 -> 24            near-end voice activity memory
    vad_far_dense 24 -> 1, sigmoid
    vad_near_dense 24 -> 1, sigmoid
    echo_est_gru  48 -> 48            in: input_dense out + far VAD state
    suppress_gru  96 -> 96            in: echo GRU out + near VAD state + front end
    gain_dense    96 -> 22, sigmoid   per-band suppression gains

GRU recursion (z gates the candidate; zero update gate keeps the state):

    z = sigmoid(Wz x + Uz h + bz)
    r = sigmoid(Wr x + Ur h + br)
    hc = tanh(Wh x + Uh (r * h) + bh)
    h' = (1 - z) * h + z * hc

Weights travel in the "RESW" container: magic, u32 version, per-layer
records (role string, layer kind, activation id, dims, row-major float32
data), trailing CRC32.  The trainer writes the same bytes.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ModelFormatError

MAGIC = b"RESW"
FORMAT_VERSION = 1

ACTIVATIONS = {"linear": 0, "tanh": 1, "sigmoid": 2, "relu": 3}
ACTIVATION_NAMES = {v: k for k, v in ACTIVATIONS.items()}
KIND_DENSE = 0
KIND_GRU = 1

# role -> (kind, output/hidden size, input size, activation)
LAYER_ROLES = (
    ("input_dense", KIND_DENSE, 24, 84, "tanh"),
    ("vad_far_gru", KIND_GRU, 24, 24, "gru"),
    ("vad_near_gru", KIND_GRU, 24, 24, "gru"),
    ("vad_far_dense", KIND_DENSE, 1, 24, "sigmoid"),
    ("vad_near_dense", KIND_DENSE, 1, 24, "sigmoid"),
    ("echo_est_gru", KIND_GRU, 48, 48, "gru"),
    ("suppress_gru", KIND_GRU, 96, 96, "gru"),
    ("gain_dense", KIND_DENSE, 22, 96, "sigmoid"),
)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument only, so float32 never overflows
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def _apply_activation(x: np.ndarray, name: str) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "sigmoid":
        return _sigmoid(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    return x


@dataclass
class DenseLayer:
    weights: np.ndarray     # (out, in)
    bias: np.ndarray        # (out,)
    activation: str

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _apply_activation(self.weights @ x + self.bias, self.activation)


@dataclass
class GruLayer:
    """Gate parameters only; hidden state lives with the session."""

    wz: np.ndarray
    uz: np.ndarray
    bz: np.ndarray
    wr: np.ndarray
    ur: np.ndarray
    br: np.ndarray
    wh: np.ndarray
    uh: np.ndarray
    bh: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.wz.shape[0]

    @property
    def input_size(self) -> int:
        return self.wz.shape[1]

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.wz, self.uz, self.bz, self.wr, self.ur, self.br,
                self.wh, self.uh, self.bh)


def gru_step(layer: GruLayer, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One GRU update; returns the new hidden state."""
    z = _sigmoid(layer.wz @ x + layer.uz @ h + layer.bz)
    r = _sigmoid(layer.wr @ x + layer.ur @ h + layer.br)
    hc = np.tanh(layer.wh @ x + layer.uh @ (r * h) + layer.bh)
    return (1.0 - z) * h + z * hc


@dataclass
class NetOutput:
    vad_near: float
    vad_far: float
    band_gains: np.ndarray


class NetState:
    """Per-session hidden states, float32, zero-initialized."""

    def __init__(self):
        self.h_far = np.zeros(24, dtype=np.float32)
        self.h_near = np.zeros(24, dtype=np.float32)
        self.h_echo = np.zeros(48, dtype=np.float32)
        self.h_sup = np.zeros(96, dtype=np.float32)

    def reset(self) -> None:
        for h in (self.h_far, self.h_near, self.h_echo, self.h_sup):
            h[:] = 0.0


class NetworkWeights:
    """Validated, immutable-by-convention layer collection."""

    def __init__(self, layers: dict[str, DenseLayer | GruLayer],
                 format_version: int = FORMAT_VERSION):
        self.layers = layers
        self.format_version = format_version
        self.validate()

    def __getitem__(self, role: str) -> DenseLayer | GruLayer:
        return self.layers[role]

    def validate(self) -> None:
        for role, kind, out_size, in_size, activation in LAYER_ROLES:
            layer = self.layers.get(role)
            if layer is None:
                raise ModelFormatError(f"missing layer {role!r}")
            if kind == KIND_DENSE:
                if not isinstance(layer, DenseLayer):
                    raise ModelFormatError(f"{role} must be a dense layer")
                if layer.weights.shape != (out_size, in_size):
                    raise ModelFormatError(
                        f"{role} expects {in_size}→{out_size}, got "
                        f"{layer.weights.shape[1]}→{layer.weights.shape[0]}")
                if layer.activation != activation:
                    raise ModelFormatError(
                        f"{role} expects {activation} activation, got {layer.activation}")
                if layer.bias.shape != (out_size,):
                    raise ModelFormatError(f"{role} bias shape {layer.bias.shape}")
            else:
                if not isinstance(layer, GruLayer):
                    raise ModelFormatError(f"{role} must be a GRU layer")
                if layer.wz.shape != (out_size, in_size):
                    raise ModelFormatError(
                        f"{role} expects {in_size}→{out_size}, got "
                        f"{layer.wz.shape[1]}→{layer.wz.shape[0]}")
            for arr in _layer_arrays(layer):
                if not np.all(np.isfinite(arr)):
                    raise ModelFormatError(f"{role} contains non-finite parameters")
        extra = set(self.layers) - {r[0] for r in LAYER_ROLES}
        if extra:
            raise ModelFormatError(f"unknown layer roles {sorted(extra)}")

    def parameter_count(self) -> int:
        return sum(int(a.size) for l in self.layers.values() for a in _layer_arrays(l))


def _layer_arrays(layer: DenseLayer | GruLayer) -> tuple[np.ndarray, ...]:
    if isinstance(layer, DenseLayer):
        return (layer.weights, layer.bias)
    return layer.params()


def forward(weights: NetworkWeights, far_features: np.ndarray,
            near_features: np.ndarray, state: NetState) -> NetOutput:
    """One frame through the network; advances ``state`` in place."""
    x = np.concatenate([far_features, near_features]).astype(np.float32)
    front = weights["input_dense"].apply(x)

    state.h_far = gru_step(weights["vad_far_gru"], front, state.h_far)
    state.h_near = gru_step(weights["vad_near_gru"], front, state.h_near)
    vad_far = float(weights["vad_far_dense"].apply(state.h_far)[0])
    vad_near = float(weights["vad_near_dense"].apply(state.h_near)[0])

    echo_in = np.concatenate([front, state.h_far])
    state.h_echo = gru_step(weights["echo_est_gru"], echo_in, state.h_echo)

    sup_in = np.concatenate([state.h_echo, state.h_near, front])
    state.h_sup = gru_step(weights["suppress_gru"], sup_in, state.h_sup)

    gains = weights["gain_dense"].apply(state.h_sup).astype(np.float64)
    return NetOutput(vad_near=vad_near, vad_far=vad_far, band_gains=gains)


# -- serialization ------------------------------------------------------


def save_weights(weights: NetworkWeights) -> bytes:
    """Serialize to the RESW container (little-endian, CRC32-terminated)."""
    out = bytearray()
    out += struct.pack("<4sII", MAGIC, weights.format_version, len(LAYER_ROLES))
    for role, kind, _, _, activation in LAYER_ROLES:
        layer = weights[role]
        role_bytes = role.encode("ascii")
        act_id = ACTIVATIONS[activation] if kind == KIND_DENSE else 0
        if kind == KIND_DENSE:
            rows, cols = layer.weights.shape
        else:
            rows, cols = layer.wz.shape
        out += struct.pack("<H", len(role_bytes)) + role_bytes
        out += struct.pack("<BBII", kind, act_id, rows, cols)
        for arr in _layer_arrays(layer):
            out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, count: int, what: str) -> bytes:
        if self.off + count > len(self.blob):
            raise ModelFormatError(f"truncated file while reading {what}")
        chunk = self.blob[self.off : self.off + count]
        self.off += count
        return chunk

    def floats(self, shape: tuple[int, ...], what: str) -> np.ndarray:
        n = int(np.prod(shape))
        raw = self.take(4 * n, what)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def load_weights(blob: bytes) -> NetworkWeights:
    """Parse and validate an RESW blob; names the offending field on error."""
    if len(blob) < 12:
        raise ModelFormatError("truncated file while reading header")
    if blob[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    stored_crc = struct.unpack("<I", blob[-4:])[0] if len(blob) >= 16 else None
    if stored_crc is None or zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ModelFormatError("CRC mismatch: file corrupt or truncated")

    rd = _Reader(blob[:-4])
    _, version, n_layers = struct.unpack("<4sII", rd.take(12, "header"))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if n_layers != len(LAYER_ROLES):
        raise ModelFormatError(f"expected {len(LAYER_ROLES)} layers, got {n_layers}")

    expected = {r[0]: r for r in LAYER_ROLES}
    layers: dict[str, DenseLayer | GruLayer] = {}
    for _ in range(n_layers):
        (role_len,) = struct.unpack("<H", rd.take(2, "layer role"))
        role = rd.take(role_len, "layer role").decode("ascii", errors="replace")
        kind, act_id, rows, cols = struct.unpack("<BBII", rd.take(10, f"{role} header"))
        if role not in expected:
            raise ModelFormatError(f"unknown layer role {role!r}")
        exp_role, exp_kind, exp_rows, exp_cols, exp_act = expected[role]
        if kind != exp_kind:
            raise ModelFormatError(f"{role} has wrong layer kind")
        if (rows, cols) != (exp_rows, exp_cols):
            raise ModelFormatError(
                f"{exp_role} expects {exp_cols}→{exp_rows}, got {cols}→{rows}")
        if kind == KIND_DENSE:
            if ACTIVATION_NAMES.get(act_id) != exp_act:
                raise ModelFormatError(f"{role} has wrong activation id {act_id}")
            w = rd.floats((rows, cols), f"{role} weights")
            b = rd.floats((rows,), f"{role} bias")
            layers[role] = DenseLayer(weights=w, bias=b, activation=exp_act)
        else:
            mats = []
            for name in ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"):
                if name.startswith("b"):
                    mats.append(rd.floats((rows,), f"{role} {name}"))
                elif name.startswith("w"):
                    mats.append(rd.floats((rows, cols), f"{role} {name}"))
                else:
                    mats.append(rd.floats((rows, rows), f"{role} {name}"))
            layers[role] = GruLayer(*mats)
    if rd.off != len(rd.blob):
        raise ModelFormatError(f"{len(rd.blob) - rd.off} trailing bytes after last layer")
    return NetworkWeights(layers, format_version=version)


def save_model(path, weights: NetworkWeights) -> None:
    """Write a weight file."""
    with open(path, "wb") as fh:
        fh.write(save_weights(weights))


def load_model(path) -> NetworkWeights:
    """Read and validate a weight file; errors name the offending field."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        return load_weights(blob)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def zero_weights() -> NetworkWeights:
    """All-zero model (outputs 0.5 everywhere); handy for tests."""
    layers: dict[str, DenseLayer | GruLayer] = {}
    for role, kind, out_size, in_size, activation in LAYER_ROLES:
        if kind == KIND_DENSE:
            layers[role] = DenseLayer(
                weights=np.zeros((out_size, in_size), dtype=np.float32),
                bias=np.zeros(out_size, dtype=np.float32),
                activation=activation)
        else:
            z = lambda *shape: np.zeros(shape, dtype=np.float32)
            layers[role] = GruLayer(
                z(out_size, in_size), z(out_size, out_size), z(out_size),
                z(out_size, in_size), z(out_size, out_size), z(out_size),
                z(out_size, in_size), z(out_size, out_size), z(out_size))
    return NetworkWeights(layers)


def random_weights(seed: int, scale: float = 0.3) -> NetworkWeights:
    """Seeded random model for fixtures and property tests."""
    rng = np.random.default_rng(seed)
    base = zero_weights()
    for layer in base.layers.values():
        for arr in _layer_arrays(layer):
            arr[...] = rng.normal(0.0, scale, size=arr.shape).astype(np.float32)
    base.validate()
    return base
