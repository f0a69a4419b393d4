"""Thermal oscillator energy statistics, continuous versus discrete.

Everything is a function of the single dimensionless parameter x (photon
energy over thermal energy); energies are in photon-energy units. The two
treatments share the mean in the x -> 0 limit but differ in variance: the
discrete ladder adds the particle term mean^2 + mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream


@dataclass(frozen=True)
class EnergyMoments:
    mean: float
    variance: float

    def __post_init__(self) -> None:
        if self.mean <= 0 or self.variance < 0:
            raise ValueError("mean must be > 0 and variance >= 0")


def _check_x(x: float) -> float:
    x = float(x)
    if x <= 0:
        raise ValueError(f"thermal parameter x must be positive, got {x}")
    return x


def moments_continuous(x: float) -> EnergyMoments:
    """Equipartition-style moments: mean 1/x, variance 1/x^2."""
    x = _check_x(x)
    return EnergyMoments(mean=1.0 / x, variance=1.0 / (x * x))


def moments_discrete(x: float) -> EnergyMoments:
    """Quantized-ladder moments: mean 1/(e^x - 1), variance mean^2 + mean."""
    x = _check_x(x)
    mean = 1.0 / math.expm1(x)
    return EnergyMoments(mean=mean, variance=mean * mean + mean)


def sample_energy(x: float, model: str, n: int, stream: RngStream) -> np.ndarray:
    """Draw n energies from the Boltzmann-weighted distribution.

    model='continuous' draws exponential with mean 1/x; model='discrete'
    draws the occupation-number geometric law on {0, 1, 2, ...} via the
    inverse CDF, floor(-ln U / x), so tests can replay it exactly.
    """
    x = _check_x(x)
    if n < 1:
        raise ValueError("n must be >= 1")
    if model == "continuous":
        return stream.exponential(1.0 / x, n)
    if model == "discrete":
        u = stream.uniform(n)
        return np.floor(-np.log(u) / x)
    raise ValueError(f"unknown model {model!r}")


def sample_report(x: float, n: int, seed: int) -> dict:
    """Analytic moments plus sampled moments for both models, as plain dicts.

    Sampler streams are split per model (stream_id 0 continuous, 1 discrete).
    stderr_mean is the standard error of the sampled mean; CLI emits this
    structure as JSON.
    """
    out: dict = {"x": x, "n": n, "seed": seed}
    for model, sid, analytic in (
        ("continuous", 0, moments_continuous(x)),
        ("discrete", 1, moments_discrete(x)),
    ):
        samples = sample_energy(x, model, n, RngStream(seed, sid))
        out[f"analytic_{model}"] = {
            "mean": analytic.mean,
            "variance": analytic.variance,
        }
        out[f"sampled_{model}"] = {
            "mean": float(samples.mean()),
            "variance": float(samples.var()),
            "stderr_mean": float(samples.std() / math.sqrt(n)),
        }
    return out
