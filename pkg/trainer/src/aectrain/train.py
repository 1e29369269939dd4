"""Training loop for the suppression network.

Loss per frame: BCE on the two VAD heads plus 10x the mean squared
error between the square roots of predicted and target band gains (the
square root stretches the low-gain region so heavily suppressed bands
are weighted fairly).  Frames whose VAD label is exactly 0.5 are
ambiguous and contribute nothing to that head's BCE.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import dataset
from .errors import ConfigError, TrainingDiverged
from .export import export_model
from .model import SuppressionNet

GAIN_LOSS_WEIGHT = 10.0


@dataclass
class TrainConfig:
    dataset: Path
    export_path: Path
    epochs: int = 20
    batch_size: int = 64
    seq_len: int = 100          # frames per truncated-BPTT window
    learning_rate: float = 3e-3
    val_split: float = 0.2
    seed: int = 0
    loss_csv: Path | None = None   # default: next to export_path
    loss_plot: Path | None = None

    def __post_init__(self):
        self.dataset = Path(self.dataset)
        self.export_path = Path(self.export_path)
        if self.loss_csv is None:
            self.loss_csv = self.export_path.with_name("loss.csv")
        if self.loss_plot is None:
            self.loss_plot = self.export_path.with_name("loss.png")
        self.loss_csv = Path(self.loss_csv)
        self.loss_plot = Path(self.loss_plot)

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.seq_len < 16:
            raise ConfigError(f"sequence length must be >= 16, got {self.seq_len}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.val_split < 1.0:
            raise ConfigError(f"validation split must lie in (0, 1), got {self.val_split}")


@dataclass
class TrainReport:
    epochs: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    export_path: Path | None = None
    csv_path: Path | None = None
    plot_path: Path | None = None
    seconds: float = 0.0
    parameter_count: int = 0

    @property
    def first_train_loss(self) -> float:
        return self.train_losses[0]

    @property
    def final_train_loss(self) -> float:
        return self.train_losses[-1]

    def lines(self) -> list[str]:
        out = [f"epochs            : {self.epochs}",
               f"parameters        : {self.parameter_count}",
               f"first epoch loss  : {self.first_train_loss:.4f}",
               f"final epoch loss  : {self.final_train_loss:.4f}",
               f"final val loss    : {self.val_losses[-1]:.4f}",
               f"wall time         : {self.seconds:.1f} s"]
        if self.export_path is not None:
            out.append(f"weights           : {self.export_path}")
        if self.csv_path is not None:
            out.append(f"loss curve        : {self.csv_path}, {self.plot_path}")
        return out


def sequence_loss(model: SuppressionNet, batch: torch.Tensor) -> torch.Tensor:
    """Mean per-frame loss over a (batch, time, 108) record block."""
    far = batch[:, :, dataset.FAR]
    near = batch[:, :, dataset.NEAR]
    tgt_vn = batch[:, :, dataset.VAD_NEAR]
    tgt_vf = batch[:, :, dataset.VAD_FAR]
    tgt_g = batch[:, :, dataset.GAINS]

    pred_vn, pred_vf, pred_g = model(far, near)

    frames = float(tgt_vn.numel())
    loss = batch.new_zeros(())
    for pred, tgt in ((pred_vn, tgt_vn), (pred_vf, tgt_vf)):
        mask = (tgt != 0.5).float()
        bce = F.binary_cross_entropy(pred, tgt, reduction="none")
        loss = loss + (bce * mask).sum() / frames
    # clamp keeps the sqrt gradient finite if a sigmoid underflows to 0
    diff = torch.sqrt(torch.clamp(pred_g, min=1e-12)) - torch.sqrt(tgt_g)
    loss = loss + GAIN_LOSS_WEIGHT * diff.pow(2).mean(dim=2).sum() / frames
    return loss


def _diverged(epoch: int, batch_index: int, loss: torch.Tensor,
              last_finite: float | None, model: SuppressionNet) -> TrainingDiverged:
    bad = [name for name, p in model.named_parameters()
           if not torch.isfinite(p).all()]
    finite_params = [p.abs().max().item() for p in model.parameters()
                     if torch.isfinite(p).all() and p.numel()]
    detail = (f"loss became non-finite ({loss.item()}) at epoch {epoch}, "
              f"batch {batch_index}; last finite loss "
              f"{'none' if last_finite is None else f'{last_finite:.4f}'}; "
              f"non-finite parameters: {bad or 'none'}; "
              f"max |finite param| {max(finite_params, default=0.0):.3e}")
    return TrainingDiverged(detail)


def _run_batches(model: SuppressionNet, data: torch.Tensor, batch_size: int,
                 order: torch.Tensor | None, optimizer=None,
                 epoch: int = 0) -> float:
    """One pass over ``data``; trains when an optimizer is given."""
    if order is None:
        order = torch.arange(data.shape[0])
    total = 0.0
    seen = 0
    last_finite: float | None = None
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        batch = data[idx]
        loss = sequence_loss(model, batch)
        if not torch.isfinite(loss):
            raise _diverged(epoch, start // batch_size, loss, last_finite, model)
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        last_finite = loss.item()
        total += last_finite * len(idx)
        seen += len(idx)
    return total / seen


def _write_loss_csv(path: Path, report: TrainReport) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tr, va) in enumerate(zip(report.train_losses, report.val_losses), 1):
            writer.writerow([i, f"{tr:.6f}", f"{va:.6f}"])


def _write_loss_plot(path: Path, report: TrainReport) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = np.arange(1, len(report.train_losses) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, report.train_losses, label="training")
    ax.plot(epochs, report.val_losses, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("suppression network loss")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def train(config: TrainConfig,
          model: SuppressionNet | None = None) -> tuple[TrainReport, SuppressionNet]:
    """Fit the network on an on-disk dataset and export the weights.

    An existing ``model`` may be passed for fine-tuning; otherwise a
    fresh seeded one is built.  Returns the report and the model.
    """
    config.validate()
    t0 = time.perf_counter()
    torch.manual_seed(config.seed)

    records = dataset.load_records(config.dataset)
    sequences = dataset.make_sequences(records, config.seq_len)
    if sequences.shape[0] < 2:
        raise ConfigError(
            f"dataset yields {sequences.shape[0]} sequences of {config.seq_len} "
            "frames; need at least 2 to split")
    split = dataset.split_sequences(sequences, config.val_split, config.seed)

    if model is None:
        model = SuppressionNet()
    model.set_normalization(split.feat_mean, split.feat_std)

    train_data = torch.from_numpy(split.train)
    val_data = torch.from_numpy(split.val)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    report = TrainReport(epochs=config.epochs,
                         parameter_count=model.parameter_count())
    for epoch in range(1, config.epochs + 1):
        gen = torch.Generator().manual_seed(config.seed + epoch)
        order = torch.randperm(train_data.shape[0], generator=gen)
        model.train()
        train_loss = _run_batches(model, train_data, config.batch_size,
                                  order, optimizer, epoch)
        model.eval()
        with torch.no_grad():
            val_loss = _run_batches(model, val_data, config.batch_size, None,
                                    epoch=epoch)
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)

    config.export_path.parent.mkdir(parents=True, exist_ok=True)
    export_model(model, config.export_path)
    _write_loss_csv(config.loss_csv, report)
    _write_loss_plot(config.loss_plot, report)
    report.export_path = config.export_path
    report.csv_path = config.loss_csv
    report.plot_path = config.loss_plot
    report.seconds = time.perf_counter() - t0
    return report, model
