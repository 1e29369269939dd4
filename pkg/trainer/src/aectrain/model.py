"""Torch definition of the suppression network.

The topology mirrors the runtime engine: a dense front end over the two
42-feature channels, two small VAD GRUs with sigmoid heads, an
echo-estimation GRU and a wide suppression GRU feeding the 22-band gain
head.  The GRU cell is written out explicitly because the update-gate
convention (``h' = (1-z)*h + z*candidate`` with the reset gate applied
to the state before its matrix) must match the runtime inference
exactly, not torch's built-in GRU.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

NUM_FEATURES = 42
NUM_BANDS = 22
INPUT_SIZE = 2 * NUM_FEATURES
FRONT_SIZE = 24
VAD_HIDDEN = 24
ECHO_HIDDEN = 48
SUPPRESS_HIDDEN = 96

GRU_PARTS = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")


class GruCell(nn.Module):
    """Update/reset-gate cell: h' = (1 - z) * h + z * tanh(...)."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        k = 1.0 / np.sqrt(hidden_size)
        for name in GRU_PARTS:
            if name.startswith("b"):
                shape = (hidden_size,)
            elif name.startswith("w"):
                shape = (hidden_size, input_size)
            else:
                shape = (hidden_size, hidden_size)
            self.register_parameter(
                name, nn.Parameter(torch.empty(shape).uniform_(-k, k)))

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        z = torch.sigmoid(x @ self.wz.T + h @ self.uz.T + self.bz)
        r = torch.sigmoid(x @ self.wr.T + h @ self.ur.T + self.br)
        cand = torch.tanh(x @ self.wh.T + (r * h) @ self.uh.T + self.bh)
        return (1.0 - z) * h + z * cand


class SuppressionNet(nn.Module):
    """Full network; forward runs a whole (batch, time, features) block."""

    def __init__(self):
        super().__init__()
        self.input_dense = nn.Linear(INPUT_SIZE, FRONT_SIZE)
        self.vad_far_gru = GruCell(FRONT_SIZE, VAD_HIDDEN)
        self.vad_near_gru = GruCell(FRONT_SIZE, VAD_HIDDEN)
        self.vad_far_dense = nn.Linear(VAD_HIDDEN, 1)
        self.vad_near_dense = nn.Linear(VAD_HIDDEN, 1)
        self.echo_est_gru = GruCell(FRONT_SIZE + VAD_HIDDEN, ECHO_HIDDEN)
        self.suppress_gru = GruCell(ECHO_HIDDEN + VAD_HIDDEN + FRONT_SIZE,
                                    SUPPRESS_HIDDEN)
        self.gain_dense = nn.Linear(SUPPRESS_HIDDEN, NUM_BANDS)
        # input statistics; folded into input_dense when exporting
        self.register_buffer("feat_mean", torch.zeros(INPUT_SIZE))
        self.register_buffer("feat_std", torch.ones(INPUT_SIZE))

    def set_normalization(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.feat_mean.copy_(torch.as_tensor(mean, dtype=torch.float32))
        self.feat_std.copy_(torch.as_tensor(std, dtype=torch.float32))

    def forward(self, far: torch.Tensor, near: torch.Tensor):
        """far, near: (batch, time, 42) -> (vad_near, vad_far, gains)."""
        batch, steps, _ = far.shape
        x = (torch.cat([far, near], dim=2) - self.feat_mean) / self.feat_std
        h_far = far.new_zeros(batch, VAD_HIDDEN)
        h_near = far.new_zeros(batch, VAD_HIDDEN)
        h_echo = far.new_zeros(batch, ECHO_HIDDEN)
        h_sup = far.new_zeros(batch, SUPPRESS_HIDDEN)
        vads_near, vads_far, gains = [], [], []
        for t in range(steps):
            front = torch.tanh(self.input_dense(x[:, t]))
            h_far = self.vad_far_gru(front, h_far)
            h_near = self.vad_near_gru(front, h_near)
            vads_far.append(torch.sigmoid(self.vad_far_dense(h_far))[:, 0])
            vads_near.append(torch.sigmoid(self.vad_near_dense(h_near))[:, 0])
            h_echo = self.echo_est_gru(torch.cat([front, h_far], dim=1), h_echo)
            h_sup = self.suppress_gru(
                torch.cat([h_echo, h_near, front], dim=1), h_sup)
            gains.append(torch.sigmoid(self.gain_dense(h_sup)))
        return (torch.stack(vads_near, dim=1),
                torch.stack(vads_far, dim=1),
                torch.stack(gains, dim=1))

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def zero_model() -> SuppressionNet:
    """All parameters zero (every head outputs 0.5)."""
    model = SuppressionNet()
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    return model


def random_model(seed: int, scale: float = 0.3) -> SuppressionNet:
    """Seeded random parameters; used for fixture generation."""
    gen = torch.Generator().manual_seed(seed)
    model = SuppressionNet()
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.randn(p.shape, generator=gen) * scale)
    return model
