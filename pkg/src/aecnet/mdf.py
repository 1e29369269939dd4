"""Multidelay block frequency-domain (MDF) NLMS echo canceller.

The filter is a partitioned overlap-save block NLMS: the N-tap echo path
estimate is split into ``num_blocks`` partitions of ``block_size`` taps,
each held as a half spectrum of a 2*block_size FFT.  With the gradient
constraint (acausal half of every partition's time response zeroed after
each update) the filtering step is an exact linear convolution, so the
output matches a direct time-domain FIR sample for sample.

The learning rate is varied per frequency bin to stay robust against
double-talk: mu_opt(k,l) = min(eta(l) * |Y(k,l)|^2 / |E(k,l)|^2, mu_max),
where the leakage coefficient eta is the recursive linear-regression
coefficient between estimated-echo power and output power.  When near-end
speech enters e(n), |E|^2 grows, mu collapses, and the weights hold still
instead of diverging.

Because mu_opt is zero while the weights are zero (Y is identically zero),
a warm-up phase bootstraps adaptation with a scalar rate derived from the
far/error power ratio; the controller takes over once the leakage estimate
shows real echo reduction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StreamError

STATE_MAGIC = b"MDFS"
STATE_VERSION = 2


@dataclass(frozen=True)
class FilterConfig:
    """Tunables of the adaptive filter and its learning-rate controller."""

    taps: int = 1600                # 100 ms at 16 kHz
    block_size: int = 160
    mu_max: float = 0.5
    beta0: float = 0.008
    eps_scale: float = 1e-2         # regularizer, relative to mean bin power
    # "per_bin" divides each bin's step by the far power summed over all
    # partitions (the exact NLMS projection denominator, stable for any
    # mu_max < 2).  "block_sum" uses the literal scalar far-energy
    # denominator; used by the time-domain equivalence tests.
    normalization: str = "per_bin"
    fixed_mu: float | None = None   # bypass the controller (tests, ablations)

    def __post_init__(self):
        if self.taps % self.block_size != 0:
            raise ConfigurationError(
                f"taps ({self.taps}) must be divisible by block_size ({self.block_size})")
        if not 0.0 < self.mu_max <= 1.0:
            raise ConfigurationError("mu_max must be in (0, 1]")
        if not 0.0 < self.beta0 < 1.0:
            raise ConfigurationError("beta0 must be in (0, 1)")
        if self.normalization not in ("per_bin", "block_sum"):
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")

    @property
    def num_blocks(self) -> int:
        return self.taps // self.block_size

    @property
    def fft_size(self) -> int:
        return 2 * self.block_size

    @property
    def num_bins(self) -> int:
        return self.block_size + 1


@dataclass
class FilterOutput:
    """Per-frame result: error e(n), echo estimate y(n), per-bin rates."""

    error_frame: np.ndarray
    echo_frame: np.ndarray
    mu_per_bin: np.ndarray


class LeakageEstimator:
    """Recursive leakage coefficient eta = sum R_EY / sum R_YY.

    eta is the regression slope of the output power onto the
    estimated-echo power, so R_EY and R_YY correlate the per-bin power
    *fluctuations* around slowly tracked means.  Near-end energy is
    uncorrelated with the echo estimate and averages out of R_EY instead
    of inflating it, which is what keeps the learning rate down during
    double-talk.  The recursions use the variable parameter
    beta(l) = beta0 * min(sigma2_Y / sigma2_e, 1), which freezes the
    estimate when no echo is present.
    """

    def __init__(self, num_bins: int, beta0: float, mean_rate: float = 0.01,
                 eta_floor: float = 0.005):
        self.beta0 = beta0
        self.mean_rate = mean_rate
        # Floor > 0: transient anticorrelation while powers are falling
        # fast would otherwise pin eta (and the learning rate) at zero.
        self.eta_floor = eta_floor
        self.r_ey = np.zeros(num_bins)
        self.r_yy = np.zeros(num_bins)
        self.mean_y = np.zeros(num_bins)
        self.mean_e = np.zeros(num_bins)
        self.eta = 1.0
        self.sigma2_y = 0.0
        self.sigma2_e = 0.0
        self.beta = 0.0

    def update(self, p_y: np.ndarray, p_e: np.ndarray) -> float:
        """Advance the recursions with this frame's power spectra."""
        self.sigma2_y = float(np.sum(p_y))
        self.sigma2_e = float(np.sum(p_e))
        if self.sigma2_y <= 0.0:
            self.beta = 0.0          # no echo estimate: hold everything
            return self.eta
        self.beta = self.beta0 * min(self.sigma2_y / max(self.sigma2_e, 1e-30), 1.0)
        b = self.beta
        y_fluct = p_y - self.mean_y
        e_fluct = p_e - self.mean_e
        self.mean_y = self.mean_y + self.mean_rate * y_fluct
        self.mean_e = self.mean_e + self.mean_rate * e_fluct
        self.r_ey = (1.0 - b) * self.r_ey + b * y_fluct * e_fluct
        self.r_yy = (1.0 - b) * self.r_yy + b * y_fluct * y_fluct
        # leakage cannot exceed unity: cap the state, not just the ratio,
        # so a loud near-end burst cannot park r_ey far above r_yy
        self.r_ey = np.minimum(self.r_ey, self.r_yy)
        denom = float(np.sum(self.r_yy))
        if denom > 0.0:
            self.eta = float(np.clip(np.sum(self.r_ey) / denom,
                                     self.eta_floor, 1.0))
        return self.eta


def optimal_learning_rate(eta: float, p_y: np.ndarray, p_e: np.ndarray,
                          mu_max: float, floor: float) -> np.ndarray:
    """Per-bin mu_opt = min(eta * |Y|^2 / |E|^2, mu_max), |E|^2 floored."""
    return np.minimum(eta * p_y / np.maximum(p_e, floor), mu_max)


class MdfFilter:
    """Streaming MDF echo canceller; one instance per audio session."""

    def __init__(self, config: FilterConfig | None = None):
        self.config = config or FilterConfig()
        c = self.config
        self.weights = np.zeros((c.num_blocks, c.num_bins), dtype=np.complex128)
        # long enough for the newest FFT window even when taps < fft_size
        self.far_history = np.zeros(max(c.taps, c.fft_size))
        self.spectra = np.zeros((c.num_blocks, c.num_bins), dtype=np.complex128)
        self.power = np.zeros(c.num_bins)
        self.leak = LeakageEstimator(c.num_bins, c.beta0)
        self.adapted = False
        self.sum_adapt = 0.0
        self.frame_index = 0
        self._zero_pad = np.zeros(c.block_size)

    # -- state access -------------------------------------------------

    def fir_weights(self) -> np.ndarray:
        """Equivalent time-domain impulse response (taps samples)."""
        c = self.config
        fir = np.zeros(c.taps)
        for j in range(c.num_blocks):
            block = np.fft.irfft(self.weights[j], n=c.fft_size)
            fir[j * c.block_size : (j + 1) * c.block_size] = block[: c.block_size]
        return fir

    def set_weights_from_fir(self, fir: np.ndarray) -> None:
        """Load a time-domain impulse response into the partitions."""
        c = self.config
        fir = np.asarray(fir, dtype=np.float64)
        if len(fir) > c.taps:
            raise ConfigurationError(f"FIR of {len(fir)} taps exceeds filter span {c.taps}")
        padded = np.zeros(c.taps)
        padded[: len(fir)] = fir
        for j in range(c.num_blocks):
            block = np.concatenate(
                [padded[j * c.block_size : (j + 1) * c.block_size], self._zero_pad])
            self.weights[j] = np.fft.rfft(block)

    @property
    def eps(self) -> float:
        """Regularizer: a fraction of the mean per-bin far power.

        Quiet bins get their effective rate scaled by P/(P + eps), which
        stops noise amplification where the far end has no energy.
        """
        return self.config.eps_scale * float(np.mean(self.power)) + 1e-12

    # -- per-frame processing ------------------------------------------

    def filter_frame(self, far_frame: np.ndarray, mic_frame: np.ndarray) -> FilterOutput:
        """Advance the far-end history and filter one block (no adaptation).

        Returns e = d - y with mu_per_bin zeroed; callers normally use
        :meth:`process` which also runs the controller and weight update.
        """
        c = self.config
        far_frame = np.asarray(far_frame, dtype=np.float64)
        mic_frame = np.asarray(mic_frame, dtype=np.float64)
        if len(far_frame) != c.block_size or len(mic_frame) != c.block_size:
            raise ConfigurationError(
                f"frames must be {c.block_size} samples, got "
                f"{len(far_frame)}/{len(mic_frame)}")
        if not (np.all(np.isfinite(far_frame)) and np.all(np.isfinite(mic_frame))):
            raise StreamError(f"non-finite input samples at frame {self.frame_index}")

        self.far_history = np.roll(self.far_history, -c.block_size)
        self.far_history[-c.block_size:] = far_frame

        self.spectra = np.roll(self.spectra, 1, axis=0)
        self.spectra[0] = np.fft.rfft(self.far_history[-c.fft_size:])
        # per-bin far power across every partition: the NLMS denominator
        self.power = np.sum(np.abs(self.spectra) ** 2, axis=0)

        y_spec = np.sum(self.spectra * self.weights, axis=0)
        y_frame = np.fft.irfft(y_spec, n=c.fft_size)[c.block_size:]
        e_frame = mic_frame - y_frame
        return FilterOutput(error_frame=e_frame, echo_frame=y_frame,
                            mu_per_bin=np.zeros(c.num_bins))

    def process(self, far_frame: np.ndarray, mic_frame: np.ndarray) -> FilterOutput:
        """Filter one block, update the learning rate, adapt the weights."""
        c = self.config
        out = self.filter_frame(far_frame, mic_frame)

        e_spec = np.fft.rfft(np.concatenate([self._zero_pad, out.error_frame]))
        y_spec = np.fft.rfft(np.concatenate([self._zero_pad, out.echo_frame]))
        p_e = np.abs(e_spec) ** 2
        p_y = np.abs(y_spec) ** 2

        eta = self.leak.update(p_y, p_e)

        if c.fixed_mu is not None:
            mu = np.full(c.num_bins, c.fixed_mu)
        elif not self.adapted:
            # Warm-up: eta * |Y|^2 is a fixed point at zero while the
            # weights are zero, so bootstrap with a scalar rate from the
            # far/error power ratio.
            s_xx = float(np.sum(np.asarray(far_frame, dtype=np.float64) ** 2))
            s_ee = float(np.sum(out.error_frame ** 2))
            rate = 0.25 * min(s_xx / max(s_ee, 1e-12), 1.0) if s_xx > 0.0 else 0.0
            mu = np.full(c.num_bins, min(rate, c.mu_max))
            self.sum_adapt += rate
            if self.sum_adapt > c.num_blocks and eta > 0.03 and self.leak.sigma2_y > 0.0:
                self.adapted = True
        else:
            # The |E|^2 floor only guards the division: tying it to signal
            # power would throttle the rate once the residual drops below
            # the far energy, freezing convergence early.
            mu = optimal_learning_rate(eta, p_y, p_e, c.mu_max, 1e-30)

        self.adapt(mu, e_spec)
        out.mu_per_bin = mu
        self.frame_index += 1
        return out

    def adapt(self, mu_per_bin: np.ndarray, e_spec: np.ndarray) -> None:
        """NLMS weight update with per-frame gradient constraint."""
        c = self.config
        if c.normalization == "block_sum":
            denom = max(float(np.sum(self.far_history[-c.taps:] ** 2)), 1e-10)
            step = mu_per_bin * e_spec / denom
        else:
            step = mu_per_bin * e_spec / (self.power + self.eps)
        self.weights += step[np.newaxis, :] * np.conj(self.spectra)
        # constrain every partition to a causal half-block time response
        blocks = np.fft.irfft(self.weights, n=c.fft_size, axis=1)
        blocks[:, c.block_size:] = 0.0
        self.weights = np.fft.rfft(blocks, axis=1)

    # -- snapshot serialization (tests) --------------------------------

    def save_state(self) -> bytes:
        """Versioned little-endian dump of weights and leakage statistics."""
        c = self.config
        head = struct.pack("<4sIII", STATE_MAGIC, STATE_VERSION, c.num_blocks, c.num_bins)
        body = b"".join([
            self.weights.astype(np.complex128).tobytes(),
            self.spectra.astype(np.complex128).tobytes(),
            self.far_history.tobytes(),
            self.power.tobytes(),
            self.leak.r_ey.tobytes(),
            self.leak.r_yy.tobytes(),
            self.leak.mean_y.tobytes(),
            self.leak.mean_e.tobytes(),
            struct.pack("<ddd?dq", self.leak.eta, self.leak.sigma2_y,
                        self.leak.sigma2_e, self.adapted, self.sum_adapt,
                        self.frame_index),
        ])
        return head + body

    def load_state(self, blob: bytes) -> None:
        c = self.config
        magic, version, nb, nbins = struct.unpack_from("<4sIII", blob)
        if magic != STATE_MAGIC or version != STATE_VERSION:
            raise ConfigurationError("bad MDF state snapshot header")
        if nb != c.num_blocks or nbins != c.num_bins:
            raise ConfigurationError("MDF state snapshot does not match config")
        off = struct.calcsize("<4sIII")
        def take(count, dtype):
            nonlocal off
            arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off).copy()
            off += arr.nbytes
            return arr
        self.weights = take(nb * nbins, np.complex128).reshape(nb, nbins)
        self.spectra = take(nb * nbins, np.complex128).reshape(nb, nbins)
        self.far_history = take(max(c.taps, c.fft_size), np.float64)
        self.power = take(nbins, np.float64)
        self.leak.r_ey = take(nbins, np.float64)
        self.leak.r_yy = take(nbins, np.float64)
        self.leak.mean_y = take(nbins, np.float64)
        self.leak.mean_e = take(nbins, np.float64)
        (self.leak.eta, self.leak.sigma2_y, self.leak.sigma2_e,
         self.adapted, self.sum_adapt,
         self.frame_index) = struct.unpack_from("<ddd?dq", blob, off)
