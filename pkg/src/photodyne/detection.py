"""Detection interface: continuous intensity in, discrete photoelectrons out.

The point process is an inhomogeneous Poisson realization drawn by thinning,
the balanced-homodyne current is built from two real count records binned and
low-passed, and the wave-particle correlator couples a counting arm to a
homodyne arm of the same stochastic wave.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import FieldModel, FieldPath, LocalOscillator, generate_path, mix_with_local_oscillator, split_beam
from .numerics import RngStream, TimeGrid
from .records import CountRecord, PhotocurrentRecord

__all__ = [
    "CountRecord",
    "PhotocurrentRecord",
    "NoiseWidthPrediction",
    "sample_counts",
    "bhd_difference_current",
    "predict_noise_widths",
    "run_semiclassical_correlator",
]

THINNING_MARGIN = 1.1


@dataclass(frozen=True)
class NoiseWidthPrediction:
    """Analytic RMS widths of the filtered difference current.

    shot_width is the no-signal width A_LO * sqrt(pi * bandwidth) under this
    package's one-pole filter convention (time constant 1/(2 pi B), unit DC
    gain, impulses binned at the sample spacing). signal_width is the width
    contributed by in-phase amplitude fluctuations, 2 * A_LO * sqrt(var),
    valid when the signal band sits well below the filter corner.
    """

    shot_width: float
    signal_width: float

    def __post_init__(self) -> None:
        if self.shot_width < 0 or self.signal_width < 0:
            raise ValueError("widths must be >= 0")


def sample_counts(
    intensity,
    grid: TimeGrid,
    stream: RngStream,
    efficiency: float = 1.0,
    dark_rate: float = 0.0,
    dead_time: float = 0.0,
) -> CountRecord:
    """Draw one inhomogeneous Poisson record at rate intensity(t) by thinning.

    Homogeneous candidates at 1.1x the sampled maximum are kept with
    probability rate(t)/majorant, the rate linearly interpolated between
    samples. The efficiency/dark/dead-time hooks default to the ideal
    detector and are applied as rate scaling, additive background, and
    post-hoc pruning respectively.
    """
    rate = np.asarray(intensity, dtype=float)
    if rate.size != grid.n_samples:
        raise ValueError("intensity length does not match grid")
    if (rate < 0).any():
        raise ValueError("negative intensity sample")
    if not 0.0 <= efficiency <= 1.0:
        raise ValueError("efficiency must be in [0, 1]")
    rate = efficiency * rate + dark_rate
    t0, t1 = grid.t_start, grid.t_end
    majorant = THINNING_MARGIN * float(rate.max()) if rate.size else 0.0
    if majorant <= 0.0:
        return CountRecord(np.empty(0), t0, t1)

    blocks = []
    t = t0
    block = max(64, int(majorant * (t1 - t0) * 1.25) + 64)
    while t < t1:
        gaps = stream.exponential(1.0 / majorant, block)
        ts = t + np.cumsum(gaps)
        blocks.append(ts[ts < t1])
        t = ts[-1]
        block = 256
    cand = np.concatenate(blocks) if blocks else np.empty(0)
    if cand.size == 0:
        return CountRecord(np.empty(0), t0, t1)
    u = stream.uniform(cand.size)
    local = np.interp(cand, grid.times, rate)
    kept = cand[u * majorant < local]

    if dead_time > 0.0 and kept.size:
        alive = [kept[0]]
        for tk in kept[1:]:
            if tk - alive[-1] >= dead_time:
                alive.append(tk)
        kept = np.asarray(alive)
    return CountRecord(kept, t0, t1)


def _one_pole(x: np.ndarray, a: float) -> np.ndarray:
    """y[n] = a y[n-1] + (1-a) x[n], zero initial state, block-vectorized."""
    n = x.size
    out = np.empty(n)
    # a^(-block) kept well below overflow
    block = max(1, min(8192, int(-60.0 / math.log(a)) if a > 0 else 8192))
    prev = 0.0
    i = 0
    while i < n:
        j = min(block, n - i)
        powers = a ** np.arange(1, j + 1)
        driven = np.cumsum((1.0 - a) * x[i : i + j] / powers)
        out[i : i + j] = powers * (prev + driven)
        prev = out[i + j - 1]
        i += j
    return out


def bhd_difference_current(
    port1_intensity,
    port2_intensity,
    grid: TimeGrid,
    filter_bandwidth: float,
    stream: RngStream,
) -> PhotocurrentRecord:
    """Difference photocurrent of two detectors with shot noise and filtering.

    Each port generates its own count record; impulses are binned on the grid
    (area 1 per count, so bins carry counts/dt), subtracted, and passed
    through the one-pole low-pass with corner filter_bandwidth. Port 1 drives
    the current positive. DC gain is 1, so the mean output equals the rate
    difference.
    """
    c1 = sample_counts(port1_intensity, grid, stream)
    c2 = sample_counts(port2_intensity, grid, stream)
    n = grid.n_samples
    idx1 = np.clip(((c1.timestamps - grid.t_start) / grid.dt).astype(int), 0, n - 1)
    idx2 = np.clip(((c2.timestamps - grid.t_start) / grid.dt).astype(int), 0, n - 1)
    impulses = (
        np.bincount(idx1, minlength=n).astype(float)
        - np.bincount(idx2, minlength=n)
    ) / grid.dt
    a = math.exp(-2.0 * math.pi * filter_bandwidth * grid.dt)
    current = _one_pole(impulses, a)
    return PhotocurrentRecord(grid, current, filter_bandwidth)


def predict_noise_widths(
    lo: LocalOscillator, signal_variance: float, bandwidth: float
) -> NoiseWidthPrediction:
    """Analytic widths under the documented filter convention (see type)."""
    if signal_variance < 0 or bandwidth < 0:
        raise ValueError("variance and bandwidth must be >= 0")
    return NoiseWidthPrediction(
        shot_width=lo.amplitude * math.sqrt(math.pi * bandwidth),
        signal_width=2.0 * lo.amplitude * math.sqrt(signal_variance),
    )


def run_semiclassical_correlator(
    model: FieldModel,
    lo: LocalOscillator,
    duration: float,
    segment_halfwidth: float,
    stream: RngStream,
    dt: float,
    bandwidth: float | None = None,
    bin_width: float | None = None,
    chunk_samples: int = 1_000_000,
):
    """Wave-particle correlator: clicks on one arm trigger current averaging
    on the other.

    The wave is split 50/50; one arm is counted at its intensity, the other
    is homodyned against the local oscillator. Photocurrent segments centered
    on each click are accumulated into the raw (unnormalized) conditional
    average; converting to h(tau) is the analyzers' job.

    Long durations are simulated as independent stationary realizations of at
    most chunk_samples samples each, all drawn from the one stream; triggers
    whose segment would cross a chunk edge are dropped.

    Returns (CorrelationSeries with normalization='raw', counts_used).
    """
    from .analyzers import CorrelationSeries, segment_sums

    if segment_halfwidth * 4 > duration:
        raise ValueError("duration must be much longer than the segment halfwidth")
    if bandwidth is None:
        bandwidth = 0.1 / dt
    k = int(round(segment_halfwidth / dt))
    n_total = int(round(duration / dt))
    lag = None
    seg_sum = seg_sumsq = None
    n_used = 0
    cur_total = 0.0
    cur_samples = 0
    done = 0
    while done < n_total:
        n_chunk = min(chunk_samples, n_total - done)
        if n_chunk <= 2 * k + 1:
            break
        grid = TimeGrid(t_start=0.0, dt=dt, n_samples=n_chunk)
        path = generate_path(model, grid, stream)
        arm_count, arm_wave = split_beam(path)
        counts = sample_counts(arm_count.intensity(), grid, stream)
        port1, port2 = mix_with_local_oscillator(arm_wave, lo)
        current = bhd_difference_current(
            port1.intensity(), port2.intensity(), grid, bandwidth, stream
        )
        lag, s, ss, m = segment_sums(
            counts.timestamps, current, segment_halfwidth, bin_width
        )
        if seg_sum is None:
            seg_sum, seg_sumsq = s, ss
        else:
            seg_sum += s
            seg_sumsq += ss
        n_used += m
        cur_total += float(current.samples.sum())
        cur_samples += current.samples.size
        done += n_chunk

    if lag is None:
        raise ValueError("duration shorter than one segment window")
    if n_used == 0:
        values = np.zeros_like(lag)
        stderr = np.full_like(lag, np.inf)
    else:
        values = seg_sum / n_used
        var = np.maximum(seg_sumsq / n_used - values**2, 0.0)
        stderr = np.sqrt(var / n_used)
    meta = {
        "n_triggers": n_used,
        "unconditional_mean": cur_total / cur_samples if cur_samples else 0.0,
    }
    series = CorrelationSeries(
        lags=lag, values=values, stderr=stderr, normalization="raw", meta=meta
    )
    return series, n_used
