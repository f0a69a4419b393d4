"""Deterministic numeric substrate shared by every engine.

Small dense complex linear algebra, a fixed-step RK4 integrator, a DFT with a
pinned frequency convention, and reproducible counter-based random streams.
All math is in dimensionless simulation units; unit relabeling happens in the
CLI layer only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "RngStream",
    "draw",
    "integrate_linear_ode",
    "discrete_fourier_transform",
    "inverse_fourier_transform",
    "spectral_power",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sample grid: t_start + dt * [0 .. n_samples-1]."""

    t_start: float
    dt: float
    n_samples: int

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def t_end(self) -> float:
        """End of the covered interval, one dt past the last sample."""
        return self.t_start + self.dt * self.n_samples

    @property
    def duration(self) -> float:
        return self.dt * self.n_samples

    def index_of(self, t: float) -> int:
        """Nearest sample index; raises if t falls outside the grid."""
        i = int(round((t - self.t_start) / self.dt))
        if i < 0 or i >= self.n_samples:
            raise ValueError(f"t={t} outside grid [{self.t_start}, {self.t_end})")
        return i


class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Identical keys replay the identical draw sequence; distinct stream_ids are
    statistically independent, so parallel workers each own a stream and the
    ensemble result is independent of scheduling. Backed by Philox.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, n: int | None = None):
        """U(0,1) draw(s): scalar when n is None, else array of n."""
        return self._gen.random() if n is None else self._gen.random(n)

    def gaussian(self, n: int | None = None):
        """Standard normal draw(s)."""
        return (
            self._gen.standard_normal()
            if n is None
            else self._gen.standard_normal(n)
        )

    def exponential(self, mean: float, n: int | None = None):
        """Exponential draw(s) with the given mean."""
        if mean <= 0:
            raise ValueError("exponential mean must be positive")
        return self._gen.exponential(mean) if n is None else self._gen.exponential(mean, n)


def draw(stream: RngStream, kind: str, mean: float = 1.0) -> float:
    """Single variate from a stream.

    kind is one of 'uniform01', 'standard_gaussian', 'exponential' (the last
    takes its mean from the keyword).
    """
    if kind == "uniform01":
        return float(stream.uniform())
    if kind == "standard_gaussian":
        return float(stream.gaussian())
    if kind == "exponential":
        return float(stream.exponential(mean))
    raise ValueError(f"unknown draw kind {kind!r}")


def integrate_linear_ode(
    generator: np.ndarray,
    state: np.ndarray,
    dt: float,
    n_steps: int,
) -> np.ndarray:
    """Advance d/dt psi = G psi by n_steps fixed RK4 steps.

    Parameters
    ----------
    generator : (d, d) complex matrix G.
    state : (d,) complex vector.
    dt : step size, > 0.
    n_steps : number of steps taken.

    Classical fourth-order scheme; deterministic for identical inputs. The
    step size is the caller's responsibility (trajectory engines need step
    alignment with their jump clock, so nothing here is adaptive).
    """
    g = np.asarray(generator, dtype=complex)
    psi = np.array(state, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"generator must be square, got shape {g.shape}")
    if psi.shape[0] != g.shape[0]:
        raise ValueError(
            f"dimension mismatch: generator {g.shape[0]}, state {psi.shape[0]}"
        )
    if dt <= 0:
        raise ValueError("dt must be positive")
    for _ in range(n_steps):
        k1 = g @ psi
        k2 = g @ (psi + (0.5 * dt) * k1)
        k3 = g @ (psi + (0.5 * dt) * k2)
        k4 = g @ (psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(psi).all():
            raise FloatingPointError("non-finite state during integration")
    return psi


def discrete_fourier_transform(series, dt: float):
    """One-sided DFT of a real series.

    Returns (frequencies, spectrum) with frequencies k/(N*dt) in cycles per
    unit time, k = 0 .. floor(N/2). Raw unnormalized coefficients; use
    spectral_power for the Parseval sum.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise ValueError("series must have at least 2 samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return np.fft.rfftfreq(x.size, dt), np.fft.rfft(x)


def inverse_fourier_transform(spectrum, n_samples: int) -> np.ndarray:
    """Invert a one-sided spectrum back to the real series of length n_samples."""
    return np.fft.irfft(np.asarray(spectrum, dtype=complex), n=n_samples)


def spectral_power(spectrum, n_samples: int) -> float:
    """Total power sum |X_k|^2/N over the full (two-sided) spectrum.

    Equals sum(x_n^2) for the originating real series, which is the Parseval
    identity in the one-sided bookkeeping (interior bins count twice).
    """
    s = np.abs(np.asarray(spectrum, dtype=complex)) ** 2
    total = s[0] + 2.0 * s[1:].sum()
    if n_samples % 2 == 0:
        total -= s[-1]  # Nyquist bin is unpaired for even N
    return float(total / n_samples)
