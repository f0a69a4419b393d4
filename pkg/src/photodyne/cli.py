"""Command-line entry points.

Subcommands: blackbody (moment comparison report), run (generate records),
analyze (estimate correlations from records), compare (Monte Carlo against
regression curves), audit (classical-bound verdicts on saved series).

Exit codes: 0 success, 2 configuration or argument error, 3 missing or
inconsistent data or a failed computation, 4 statistically inconclusive
result (audit cannot call a verdict, or compare has no usable bins).
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analyzers import (
    CorrelationSeries,
    audit_classical_bounds,
    dominant_oscillation_frequency,
    estimate_g2,
    estimate_h,
    squeezing_spectrum,
)
from .blackbody import sample_report
from .config import ConfigError, DataError, ExperimentConfig, RunManifest
from .detection import bhd_difference_current, sample_counts
from .fields import FieldModel, LocalOscillator, generate_path, mix_with_local_oscillator, split_beam
from .numerics import RngStream, TimeGrid
from .quantum import SystemParams, build_system, expectation, steady_state, unravel_ensemble
from .records import (
    load_count_record,
    load_photocurrent,
    read_table,
    save_count_record,
    save_photocurrent,
    write_table,
)

_COUNTS_FMT = "counts_{:05d}.txt"
_CURRENT_FMT = "current_{:05d}.csv"


def _system_params(cfg: ExperimentConfig) -> SystemParams:
    return SystemParams(
        g=cfg.g,
        kappa=cfg.kappa,
        gamma=cfg.gamma,
        drive=cfg.drive,
        fock_cutoff=cfg.fock_cutoff,
    )


def _field_model(cfg: ExperimentConfig) -> FieldModel:
    return FieldModel(
        kind=cfg.kind,
        amplitude=cfg.amplitude,
        phase=cfg.phase,
        mean_intensity=cfg.mean_intensity,
        tau_c=cfg.tau_c,
        burst_rate=cfg.burst_rate,
        burst_freq=cfg.burst_freq,
        burst_decay=cfg.burst_decay,
        burst_amp=cfg.burst_amp,
        burst_sign=cfg.burst_sign,
    )


def _lo_phase(cfg: ExperimentConfig) -> float:
    """Aligned phase: stationary-field phase for quantum runs, carrier phase
    for semiclassical ones. Without lo_align the configured phase is used."""
    if not cfg.lo_align:
        return cfg.lo_phase
    if cfg.source == "quantum":
        system = build_system(_system_params(cfg))
        return float(np.angle(expectation(system.a, steady_state(system))))
    return cfg.phase


def _traj_grid(cfg: ExperimentConfig) -> TimeGrid:
    n = int(round(cfg.duration / cfg.dt))
    if n < 2:
        raise ConfigError("duration must cover at least two samples")
    return TimeGrid(t_start=0.0, dt=cfg.dt, n_samples=n)


def _quantum_worker(cfg_text: str, outdir: str, first: int, n: int, theta: float):
    cfg = ExperimentConfig.from_text(cfg_text)
    system = build_system(_system_params(cfg))
    grid = _traj_grid(cfg)
    base = Path(outdir)
    for rec in unravel_ensemble(
        system,
        grid,
        n,
        cfg.seed,
        jump_fraction=cfg.jump_fraction,
        lo_phase=theta,
        burn_in=cfg.burn_in,
        first_stream=first,
    ):
        save_count_record(base / _COUNTS_FMT.format(rec.traj_id), rec.counts)
        save_photocurrent(base / _CURRENT_FMT.format(rec.traj_id), rec.current)
    return n


def _semiclassical_worker(cfg_text: str, outdir: str, first: int, n: int, theta: float):
    cfg = ExperimentConfig.from_text(cfg_text)
    model = _field_model(cfg)
    lo = LocalOscillator(cfg.lo_amplitude, theta)
    grid = _traj_grid(cfg)
    base = Path(outdir)
    for i in range(first, first + n):
        stream = RngStream(cfg.seed, i)
        path = generate_path(model, grid, stream)
        arm_count, arm_wave = split_beam(path)
        counts = sample_counts(
            arm_count.intensity(),
            grid,
            stream,
            efficiency=cfg.efficiency,
            dark_rate=cfg.dark_rate,
            dead_time=cfg.dead_time,
        )
        port1, port2 = mix_with_local_oscillator(arm_wave, lo)
        current = bhd_difference_current(
            port1.intensity(), port2.intensity(), grid, cfg.bandwidth, stream
        )
        save_count_record(base / _COUNTS_FMT.format(i), counts)
        save_photocurrent(base / _CURRENT_FMT.format(i), current)
    return n


def _run_records(cfg: ExperimentConfig, outdir: Path) -> None:
    theta = _lo_phase(cfg)
    worker = _quantum_worker if cfg.source == "quantum" else _semiclassical_worker
    cfg_text = cfg.to_text()
    if cfg.workers == 1:
        worker(cfg_text, str(outdir), 0, cfg.n_trajectories, theta)
        return
    per = math.ceil(cfg.n_trajectories / cfg.workers)
    jobs = []
    first = 0
    while first < cfg.n_trajectories:
        n = min(per, cfg.n_trajectories - first)
        jobs.append((first, n))
        first += n
    with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [
            pool.submit(worker, cfg_text, str(outdir), first, n, theta)
            for first, n in jobs
        ]
        for f in futures:
            f.result()


def _cmd_blackbody(args) -> int:
    if args.x <= 0:
        raise ConfigError("x must be > 0")
    if args.n < 2:
        raise ConfigError("need at least 2 samples")
    report = sample_report(args.x, args.n, args.seed)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    cfg, applied = cfg.with_env_overrides()
    if args.outdir is not None:
        from dataclasses import replace

        cfg = replace(cfg, outdir=args.outdir)
    for key, val in applied.items():
        print(f"environment override: {key} = {val}")
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.ini").write_text(cfg.to_text())
    _run_records(cfg, outdir)
    manifest = RunManifest.for_directory(outdir, cfg)
    manifest.save(outdir)
    print(
        f"run complete: {cfg.n_trajectories} x {cfg.duration} time units "
        f"({cfg.source}) -> {outdir}"
    )
    return 0


def _load_run(indir: Path):
    manifest = RunManifest.load(indir)
    manifest.validate_files(indir)
    cfg_path = indir / "config.ini"
    if not cfg_path.is_file():
        raise DataError(f"config.ini not found in {indir}")
    cfg = ExperimentConfig.from_text(cfg_path.read_text())
    if cfg.config_hash() != manifest.config_hash:
        raise DataError("config.ini does not match the manifest hash")
    pairs = []
    i = 0
    while True:
        cpath = indir / _COUNTS_FMT.format(i)
        ppath = indir / _CURRENT_FMT.format(i)
        if not cpath.is_file():
            break
        if not ppath.is_file():
            raise DataError(f"count record {i} has no matching current record")
        pairs.append((load_count_record(cpath), load_photocurrent(ppath)))
        i += 1
    if not pairs:
        raise DataError(f"no records found in {indir}")
    return cfg, pairs


def _si_block(cfg: ExperimentConfig, peaks: dict) -> dict:
    """Report-only relabeling: one package rate unit = si_rate_scale_mhz MHz.

    The default 20 MHz makes kappa = 1 correspond to a 1/(50 ns) decay rate.
    Angular model frequencies map to linear MHz via w * scale / (2 pi); the
    coupling-anchor entry gives g on the same footing for comparison with
    realistic cavity numbers (tens of MHz).
    """
    scale = cfg.si_rate_scale_mhz
    out = {
        "rate_unit_mhz": scale,
        "linewidth_anchor_mhz": 2.0 * cfg.kappa * scale,
        "coupling_anchor_mhz": cfg.g * scale / (2.0 * math.pi),
    }
    for name, omega in peaks.items():
        if omega is not None and math.isfinite(omega):
            out[f"{name}_mhz"] = omega * scale / (2.0 * math.pi)
    return out


def _current_mean_resolved(pairs) -> bool:
    """True when the pooled current mean stands above its sampling noise.

    h is normalized by this mean; a mean consistent with zero (phase-random
    sources) would turn the conditional average into noise ratios."""
    means = np.array([cur.mean() for _, cur in pairs])
    if means.size >= 2:
        se = float(means.std(ddof=1)) / math.sqrt(means.size)
    else:
        cur = pairs[0][1]
        span = cur.grid.dt * (cur.grid.n_samples - 1)
        n_eff = max(8.0, span * cur.bandwidth)
        se = float(cur.samples.std()) / math.sqrt(n_eff)
    return abs(float(means.mean())) > 3.0 * se


def _cmd_analyze(args) -> int:
    indir = Path(args.indir)
    cfg, pairs = _load_run(indir)
    counts = [c for c, _ in pairs]
    g2 = estimate_g2(counts, cfg.max_lag, cfg.bin_width)
    if _current_mean_resolved(pairs):
        h = estimate_h(pairs, cfg.halfwidth, bin_width=cfg.bin_width)
        if cfg.max_frequency > 0:
            freqs = np.linspace(0.0, cfg.max_frequency, cfg.n_frequencies)
        else:
            freqs = np.linspace(
                0.0, 0.5 * math.pi / cfg.bin_width, cfg.n_frequencies
            )
        spectrum = squeezing_spectrum(h, freqs)
    else:
        h = None
        spectrum = None
    report_audit = audit_classical_bounds(g2, h)
    try:
        g2_peak = dominant_oscillation_frequency(g2.values, cfg.bin_width)
    except ValueError:
        g2_peak = None

    write_table(
        indir / "g2.csv",
        {"normalization": "g2", "n_events": g2.meta["n_events"]},
        "tau,value,stderr",
        [g2.lags, g2.values, g2.stderr],
    )
    if h is not None:
        write_table(
            indir / "h.csv",
            {"normalization": "h", "n_triggers": h.meta["n_triggers"]},
            "tau,value,stderr",
            [h.lags, h.values, h.stderr],
        )
        sq_cols = [spectrum.frequencies, spectrum.values]
        sq_header = "omega,value"
        if spectrum.stderr is not None:
            sq_cols.append(spectrum.stderr)
            sq_header += ",stderr"
        write_table(
            indir / "squeezing.csv", dict(spectrum.meta), sq_header, sq_cols
        )
        dip_omega, dip_value = spectrum.minimum()
    else:
        dip_omega = dip_value = None
    report = {
        "config_hash": cfg.config_hash(),
        "source": cfg.source,
        "n_records": len(pairs),
        "n_events": int(g2.meta["n_events"]),
        "n_triggers": int(h.meta["n_triggers"]) if h is not None else None,
        "g2_zero": g2.value_at(0.0),
        "g2_zero_stderr": float(g2.stderr[0]),
        "h_min": float(h.values.min()) if h is not None else None,
        "h_max": float(h.values.max()) if h is not None else None,
        "squeezing_dip_omega": dip_omega,
        "squeezing_dip_value": dip_value,
        "g2_oscillation_omega": g2_peak,
        "audit": report_audit.to_dict(),
        "si": _si_block(
            cfg,
            {"g2_oscillation": g2_peak, "squeezing_dip": dip_omega},
        ),
    }
    (indir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    print(f"analyzed {len(pairs)} records, {report['n_events']} events")
    if h is None:
        print("mean current consistent with zero; h and squeezing skipped")
    print(
        f"g2(0) = {report['g2_zero']:.4f} +- {report['g2_zero_stderr']:.4f}, "
        f"audit: {report_audit.overall}"
    )
    print(f"wrote {indir / 'report.json'}")
    return 0


def _bin_average(lags: np.ndarray, values: np.ndarray, edges: np.ndarray):
    """Mean of (lags, values) inside each [edges[i], edges[i+1]) bin."""
    out = np.empty(edges.size - 1)
    for i in range(out.size):
        m = (lags >= edges[i]) & (lags < edges[i + 1])
        out[i] = values[m].mean() if m.any() else np.nan
    return out


def _cmd_compare(args) -> int:
    from .quantum import g2_regression, h_regression

    indir = Path(args.indir)
    cfg, _ = _load_run(indir)
    if cfg.source != "quantum":
        raise ConfigError("compare needs a quantum run; semiclassical has no regression twin")
    for name in ("g2.csv", "h.csv"):
        if not (indir / name).is_file():
            raise DataError(f"{name} not found; run analyze first")
    _, _, g2_cols = read_table(indir / "g2.csv")
    _, _, h_cols = read_table(indir / "h.csv")
    mc_g2 = CorrelationSeries(g2_cols[0], g2_cols[1], g2_cols[2], "g2")
    mc_h = CorrelationSeries(h_cols[0], h_cols[1], h_cols[2], "h")

    system = build_system(_system_params(cfg))
    n_tau = int(round(cfg.max_lag / cfg.dt)) + 1
    tau_grid = TimeGrid(t_start=0.0, dt=cfg.dt, n_samples=n_tau)
    theta = _lo_phase(cfg)
    reg_g2 = g2_regression(system, tau_grid)
    reg_h = h_regression(system, tau_grid, lo_phase=theta)

    def z_stats(mc: CorrelationSeries, reg: CorrelationSeries, positive_only: bool):
        lags = mc.lags
        if positive_only:
            keep = lags >= 0
        else:
            keep = np.ones(lags.size, dtype=bool)
        width = cfg.bin_width
        edges = np.concatenate([lags[keep] - 0.5 * width, [lags[keep][-1] + 0.5 * width]])
        ref = _bin_average(reg.lags, reg.values, edges)
        vals = mc.values[keep]
        errs = mc.stderr[keep]
        ok = np.isfinite(ref) & (errs > 0)
        if not ok.any():
            return {
                "n_bins": 0,
                "max_abs_z": math.nan,
                "mean_abs_z": math.nan,
                "frac_within_3": math.nan,
            }
        z = (vals[ok] - ref[ok]) / errs[ok]
        return {
            "n_bins": int(ok.sum()),
            "max_abs_z": float(np.max(np.abs(z))),
            "mean_abs_z": float(np.mean(np.abs(z))),
            "frac_within_3": float(np.mean(np.abs(z) <= 3.0)),
        }

    mc_peak = None
    try:
        mc_peak = dominant_oscillation_frequency(mc_g2.values, cfg.bin_width)
    except ValueError:
        pass
    reg_peak = dominant_oscillation_frequency(reg_g2.values[reg_g2.lags >= 0], cfg.dt)

    result = {
        "config_hash": cfg.config_hash(),
        "g2": z_stats(mc_g2, reg_g2, positive_only=True),
        "h": z_stats(mc_h, reg_h, positive_only=True),
        "g2_peak_mc": mc_peak,
        "g2_peak_regression": reg_peak,
        "g2_zero_mc": mc_g2.value_at(0.0),
        "g2_zero_regression": reg_g2.value_at(0.0),
    }
    (indir / "compare.json").write_text(
        json.dumps(result, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"g2: {result['g2']['n_bins']} bins, max |z| = {result['g2']['max_abs_z']:.2f}; "
        f"h: {result['h']['n_bins']} bins, max |z| = {result['h']['max_abs_z']:.2f}"
    )
    print(f"wrote {indir / 'compare.json'}")
    if result["g2"]["n_bins"] == 0 and result["h"]["n_bins"] == 0:
        return 4
    return 0


def _cmd_audit(args) -> int:
    indir = Path(args.indir)
    g2 = h = None
    if (indir / "g2.csv").is_file():
        _, _, cols = read_table(indir / "g2.csv")
        g2 = CorrelationSeries(cols[0], cols[1], cols[2], "g2")
    if (indir / "h.csv").is_file():
        _, _, cols = read_table(indir / "h.csv")
        h = CorrelationSeries(cols[0], cols[1], cols[2], "h")
    if g2 is None and h is None:
        raise DataError(f"no g2.csv or h.csv in {indir}; run analyze first")
    report = audit_classical_bounds(g2, h)
    (indir / "audit.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    for check in report.checks:
        if math.isnan(check.margin):
            print(f"{check.name}: {check.verdict}")
        else:
            print(
                f"{check.name}: {check.verdict} "
                f"(margin {check.margin:+.4f}, stderr {check.stderr:.4f})"
            )
    print(f"overall: {report.overall}")
    return 4 if report.overall == "inconclusive" else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photodyne",
        description="Photodetection statistics: stochastic waves vs quantum trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"photodyne {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blackbody", help="moment report for the mode-energy models")
    p.add_argument("x", type=float, help="dimensionless quantum/thermal energy ratio")
    p.add_argument("--n", type=int, default=200_000, help="samples per model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_blackbody)

    p = sub.add_parser("run", help="generate click and current records")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", default=None, help="override the configured outdir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("analyze", help="estimate g2, h, and the squeezing spectrum")
    p.add_argument("--indir", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("compare", help="Monte Carlo vs regression (quantum runs)")
    p.add_argument("--indir", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("audit", help="classical-bound verdicts on analyzed series")
    p.add_argument("--indir", required=True)
    p.set_defaults(func=_cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ArithmeticError, FloatingPointError, ValueError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
