"""Driven single-atom cavity: master equation, regression correlators, and a
mixed jump/diffusion unraveling whose records feed the same estimators as the
semiclassical pipeline.

Conventions, fixed package-wide:
  basis        atom (ground, excited) tensor cavity Fock 0..fock_cutoff-1
  hamiltonian  g (a^dag sm + a sp) + drive (a^dag + a), rotating frame
  collapse     sqrt(kappa) a, sqrt(gamma) sm
  flattening   row-major, vec(A rho B) = kron(A, B^T) vec(rho)
  quadrature   a_theta = (a e^{-i theta} + a^dag e^{i theta}) / 2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream, TimeGrid, integrate_linear_ode
from .records import CountRecord, PhotocurrentRecord

__all__ = [
    "SystemParams",
    "DEFAULTS",
    "System",
    "TrajectoryRecord",
    "build_system",
    "liouvillian",
    "steady_state",
    "evolve_master",
    "expectation",
    "basis_state",
    "g2_regression",
    "h_regression",
    "unravel_mixed",
    "unravel_ensemble",
    "ensemble_number_expectation",
]

STEADY_RESIDUAL_TOL = 1e-10
CUTOFF_POPULATION_TOL = 1e-8
NOISE_CHUNK = 4096


@dataclass(frozen=True)
class SystemParams:
    """Rates in a common inverse-time unit; fock_cutoff counts cavity levels."""

    g: float
    kappa: float
    gamma: float
    drive: float
    fock_cutoff: int

    def __post_init__(self) -> None:
        if self.kappa <= 0 or self.gamma <= 0:
            raise ValueError("kappa and gamma must be > 0")
        if self.g < 0 or self.drive < 0:
            raise ValueError("g and drive must be >= 0")
        if self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be >= 2")

    @property
    def cooperativity(self) -> float:
        """2 g^2 / (kappa gamma), the single-atom cooperativity 2 C1."""
        return 2.0 * self.g**2 / (self.kappa * self.gamma)


DEFAULTS = SystemParams(g=0.75, kappa=1.0, gamma=1.0, drive=0.18, fock_cutoff=8)


@dataclass(frozen=True)
class System:
    params: SystemParams
    a: np.ndarray
    sm: np.ndarray
    hamiltonian: np.ndarray
    collapse: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def build_system(params: SystemParams) -> System:
    nc = params.fock_cutoff
    a_c = np.diag(np.sqrt(np.arange(1, nc, dtype=float)), k=1).astype(complex)
    eye_c = np.eye(nc, dtype=complex)
    eye_a = np.eye(2, dtype=complex)
    sm_a = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    a = np.kron(eye_a, a_c)
    sm = np.kron(sm_a, eye_c)
    h = params.g * (a.conj().T @ sm + a @ sm.conj().T) + params.drive * (
        a.conj().T + a
    )
    collapse = (math.sqrt(params.kappa) * a, math.sqrt(params.gamma) * sm)
    return System(params=params, a=a, sm=sm, hamiltonian=h, collapse=collapse)


def liouvillian(system: System) -> np.ndarray:
    d = system.dim
    eye = np.eye(d, dtype=complex)
    h = system.hamiltonian
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in system.collapse:
        cdc = c.conj().T @ c
        lv += (
            np.kron(c, c.conj())
            - 0.5 * np.kron(cdc, eye)
            - 0.5 * np.kron(eye, cdc.T)
        )
    return lv


def steady_state(system: System) -> np.ndarray:
    """Null vector of the Liouvillian with unit trace.

    Solved as a linear system with the first row replaced by the trace
    constraint. Raises if the residual exceeds STEADY_RESIDUAL_TOL or if the
    top Fock level holds more than CUTOFF_POPULATION_TOL population, which
    means the cutoff is biting.
    """
    d = system.dim
    lv = liouvillian(system)
    m = lv.copy()
    m[0, :] = 0.0
    m[0, (d + 1) * np.arange(d)] = 1.0
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    x = np.linalg.solve(m, rhs)
    residual = float(np.linalg.norm(lv @ x))
    if residual > STEADY_RESIDUAL_TOL:
        raise ArithmeticError(f"steady-state residual {residual:.3e}")
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    nc = system.params.fock_cutoff
    top = float(sum(rho[i * nc + nc - 1, i * nc + nc - 1].real for i in range(2)))
    if top > CUTOFF_POPULATION_TOL:
        raise ValueError(
            f"top Fock level population {top:.3e}; raise fock_cutoff"
        )
    return rho


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(op @ rho))


def basis_state(system: System, excited: bool, n_photons: int) -> np.ndarray:
    """Product state |atom> |n_photons> as a ket."""
    nc = system.params.fock_cutoff
    if not 0 <= n_photons < nc:
        raise ValueError("photon number outside cutoff")
    psi = np.zeros(system.dim, dtype=complex)
    psi[(1 if excited else 0) * nc + n_photons] = 1.0
    return psi


def evolve_master(
    system: System, rho0: np.ndarray, grid: TimeGrid, substeps: int = 1
) -> np.ndarray:
    """Density matrices at every grid time, RK4 on the flattened equation.

    rho0 is the state at grid.times[0]. substeps > 1 subdivides each grid
    interval for stiff parameter sets without changing the output sampling.
    """
    d = system.dim
    if rho0.shape != (d, d):
        raise ValueError("rho0 dimension mismatch")
    lv = liouvillian(system)
    out = np.empty((grid.n_samples, d, d), dtype=complex)
    vec = rho0.reshape(-1).astype(complex)
    out[0] = rho0
    h = grid.dt / substeps
    for i in range(1, grid.n_samples):
        vec = integrate_linear_ode(lv, vec, h, substeps)
        out[i] = vec.reshape(d, d)
    return out


def _conditional_state(system: System, rho_ss: np.ndarray) -> tuple[np.ndarray, float]:
    """State right after a cavity emission, and the mean photon number."""
    a = system.a
    nbar = expectation(a.conj().T @ a, rho_ss).real
    if nbar <= 0:
        raise ArithmeticError("zero cavity population; correlators undefined")
    rho_c = a @ rho_ss @ a.conj().T / nbar
    return rho_c, nbar


def g2_regression(system: System, tau_grid: TimeGrid, substeps: int = 1):
    """Normalized intensity correlation by the regression rule.

    The emission-conditioned state is propagated under the same generator and
    its photon number is normalized by the stationary one. The returned
    series covers -tau_max..tau_max by even reflection; tau_grid must start
    at 0.
    """
    from .analyzers import CorrelationSeries

    if tau_grid.t_start != 0.0:
        raise ValueError("tau_grid must start at 0")
    rho_ss = steady_state(system)
    rho_c, nbar = _conditional_state(system, rho_ss)
    states = evolve_master(system, rho_c, tau_grid, substeps)
    num = system.a.conj().T @ system.a
    g2 = np.einsum("tij,ji->t", states, num).real / nbar
    lags = np.concatenate([-tau_grid.times[:0:-1], tau_grid.times])
    values = np.concatenate([g2[:0:-1], g2])
    return CorrelationSeries(lags=lags, values=values, stderr=None, normalization="g2")


def h_regression(
    system: System,
    tau_grid: TimeGrid,
    lo_phase: float | None = None,
    substeps: int = 1,
):
    """Emission-conditioned quadrature evolution over the stationary value.

    lo_phase defaults to the phase of the stationary field amplitude, which
    maximizes the homodyne signal. Only tau >= 0 is computable here; negative
    lags exist only in sampled records.
    """
    from .analyzers import CorrelationSeries

    if tau_grid.t_start != 0.0:
        raise ValueError("tau_grid must start at 0")
    rho_ss = steady_state(system)
    amp = expectation(system.a, rho_ss)
    theta = float(np.angle(amp)) if lo_phase is None else float(lo_phase)
    quad = 0.5 * (
        system.a * np.exp(-1j * theta) + system.a.conj().T * np.exp(1j * theta)
    )
    denom = expectation(quad, rho_ss).real
    if abs(denom) < 1e-30:
        raise ArithmeticError("stationary quadrature is zero at this phase")
    rho_c, _ = _conditional_state(system, rho_ss)
    states = evolve_master(system, rho_c, tau_grid, substeps)
    vals = np.einsum("tij,ji->t", states, quad).real / denom
    return CorrelationSeries(
        lags=tau_grid.times.copy(),
        values=vals,
        stderr=None,
        normalization="h",
        meta={"lo_phase": theta},
    )


@dataclass(frozen=True)
class TrajectoryRecord:
    """Click record and homodyne current from one unraveled trajectory.

    current is None when the ensemble was run counts-only."""

    traj_id: int
    counts: CountRecord
    current: PhotocurrentRecord | None
    atom_jumps: int


class _EnsembleEngine:
    """Batched Euler stepper for the mixed jump/diffusion unraveling.

    Cavity output is split: a fraction jump_fraction of kappa feeds the
    counting channel (recorded clicks), the rest feeds homodyne detection at
    phase lo_phase. Atomic decay is an unrecorded jump channel. Per step and
    per trajectory the draws are two jump uniforms and one Wiener gaussian,
    pre-drawn in fixed blocks of NOISE_CHUNK steps (uniforms first) from one
    counter-based stream per trajectory, so results do not depend on
    batching.

    A click during step n collapses the state entering step n+1; its
    timestamp is the time of the first post-collapse current sample.
    """

    def __init__(
        self,
        system: System,
        dt: float,
        jump_fraction: float,
        lo_phase: float,
        seed: int,
        stream_ids: list[int],
    ):
        if not 0.0 <= jump_fraction <= 1.0:
            raise ValueError("jump_fraction must be inside [0, 1]")
        p = system.params
        self.system = system
        self.dt = dt
        self.s = jump_fraction
        self.theta = lo_phase
        d = system.dim
        damp = 0.5 * (
            p.kappa * system.a.conj().T @ system.a
            + p.gamma * system.sm.conj().T @ system.sm
        )
        # exact one-step propagator for the no-jump generator; the Euler
        # alternative leaves an O(dt) bias that dominates tight ensemble
        # averages long before sampling noise does
        gen = -1j * system.hamiltonian - damp
        prop = integrate_linear_ode(gen, np.eye(d, dtype=complex), dt / 64.0, 64)
        self.prop_t = prop.T.copy()
        half = integrate_linear_ode(gen, np.eye(d, dtype=complex), dt / 128.0, 64)
        self.prop_half_t = half.T.copy()
        self.a_t = system.a.T.copy()
        self.sm_t = system.sm.T.copy()
        self.rate_cav = jump_fraction * p.kappa
        self.rate_atom = p.gamma
        self.hom_amp = math.sqrt((1.0 - jump_fraction) * p.kappa)
        self.streams = [RngStream(seed, sid) for sid in stream_ids]
        self.batch = len(stream_ids)
        psi0 = basis_state(system, excited=False, n_photons=0)
        self.psi = np.tile(psi0, (self.batch, 1))
        self._chunk_pos = NOISE_CHUNK

    def _refill(self) -> None:
        b = self.batch
        self.u_cav = np.empty((b, NOISE_CHUNK))
        self.u_atom = np.empty((b, NOISE_CHUNK))
        self.dw = np.empty((b, NOISE_CHUNK))
        for i, st in enumerate(self.streams):
            u = st.uniform(2 * NOISE_CHUNK)
            self.u_cav[i] = u[:NOISE_CHUNK]
            self.u_atom[i] = u[NOISE_CHUNK:]
            self.dw[i] = st.gaussian(NOISE_CHUNK)
        self.dw *= math.sqrt(self.dt)
        self._chunk_pos = 0

    def step(self):
        """Advance one step. Returns (current_samples, cavity_jump_mask)."""
        if self._chunk_pos >= NOISE_CHUNK:
            self._refill()
        j = self._chunk_pos
        self._chunk_pos += 1
        dt = self.dt
        psi = self.psi

        a_psi = psi @ self.a_t
        sm_psi = psi @ self.sm_t
        n_cav = np.einsum("bi,bi->b", a_psi.conj(), a_psi).real
        n_atom = np.einsum("bi,bi->b", sm_psi.conj(), sm_psi).real
        quad = (np.exp(-1j * self.theta) * np.einsum(
            "bi,bi->b", psi.conj(), a_psi
        )).real
        j_dt = 2.0 * self.hom_amp * quad * dt + self.dw[:, j]
        current = j_dt / dt

        jump_cav = self.u_cav[:, j] < self.rate_cav * n_cav * dt
        jump_atom = (~jump_cav) & (self.u_atom[:, j] < self.rate_atom * n_atom * dt)

        new = (
            psi + (self.hom_amp * np.exp(-1j * self.theta)) * a_psi * j_dt[:, None]
        ) @ self.prop_t
        # reductions act at the step midpoint: drop the diffusive kick for
        # that step (zero-mean), but keep the drift on both sides of the
        # collapse, otherwise every click skips a full step of drift
        if jump_cav.any():
            half = psi[jump_cav] @ self.prop_half_t
            new[jump_cav] = (half @ self.a_t) @ self.prop_half_t
        if jump_atom.any():
            half = psi[jump_atom] @ self.prop_half_t
            new[jump_atom] = (half @ self.sm_t) @ self.prop_half_t
        norm = np.sqrt(np.einsum("bi,bi->b", new.conj(), new).real)
        if not (norm > 0).all():
            raise FloatingPointError("trajectory norm collapsed to zero")
        self.psi = new / norm[:, None]
        return current, jump_cav, jump_atom

    def photon_number(self) -> np.ndarray:
        a_psi = self.psi @ self.a_t
        return np.einsum("bi,bi->b", a_psi.conj(), a_psi).real


def _run_batch(
    system: System,
    grid: TimeGrid,
    seed: int,
    stream_ids: list[int],
    jump_fraction: float,
    lo_phase: float,
    burn_in: float,
    store_current: bool,
) -> list[TrajectoryRecord]:
    eng = _EnsembleEngine(system, grid.dt, jump_fraction, lo_phase, seed, stream_ids)
    n_burn = int(round(burn_in / grid.dt))
    for _ in range(n_burn):
        eng.step()
    b = eng.batch
    n = grid.n_samples
    currents = np.empty((b, n)) if store_current else None
    click_steps: list[list[int]] = [[] for _ in range(b)]
    atom_totals = np.zeros(b, dtype=int)
    for m in range(n):
        cur, jc, ja = eng.step()
        if store_current:
            currents[:, m] = cur
        atom_totals += ja
        if jc.any():
            for i in np.nonzero(jc)[0]:
                click_steps[i].append(m)
    out = []
    for i in range(b):
        ts = grid.t_start + grid.dt * (np.asarray(click_steps[i], dtype=float) + 1.0)
        counts = CountRecord(ts, grid.t_start, grid.t_end)
        rec = None
        if store_current:
            rec = PhotocurrentRecord(
                grid,
                currents[i],
                bandwidth=0.5 / grid.dt,
                meta={"lo_phase": lo_phase, "jump_fraction": jump_fraction},
            )
        out.append(
            TrajectoryRecord(
                traj_id=stream_ids[i],
                counts=counts,
                current=rec,
                atom_jumps=int(atom_totals[i]),
            )
        )
    return out


def _default_phase(system: System) -> float:
    return float(np.angle(expectation(system.a, steady_state(system))))


def unravel_ensemble(
    system: System,
    grid: TimeGrid,
    n_traj: int,
    seed: int,
    jump_fraction: float = 0.5,
    lo_phase: float | None = None,
    burn_in: float = 25.0,
    first_stream: int = 0,
    batch_size: int = 512,
    store_current: bool = True,
):
    """Yield TrajectoryRecord for n_traj independent trajectories.

    Trajectory k uses counter stream first_stream + k, so any contiguous or
    disjoint ensemble can be reproduced piecewise. Each trajectory relaxes
    for burn_in time units before its record window opens. store_current
    False keeps only click records; the diffusion noise is still consumed,
    so the trajectories are identical either way.
    """
    if n_traj <= 0:
        raise ValueError("n_traj must be positive")
    theta = _default_phase(system) if lo_phase is None else float(lo_phase)
    done = 0
    while done < n_traj:
        b = min(batch_size, n_traj - done)
        ids = [first_stream + done + i for i in range(b)]
        yield from _run_batch(
            system, grid, seed, ids, jump_fraction, theta, burn_in, store_current
        )
        done += b


def unravel_mixed(
    system: System,
    grid: TimeGrid,
    seed: int,
    jump_fraction: float = 0.5,
    lo_phase: float | None = None,
    burn_in: float = 25.0,
    stream_id: int = 0,
) -> TrajectoryRecord:
    """Single trajectory; identical to the matching ensemble member."""
    return next(
        unravel_ensemble(
            system,
            grid,
            1,
            seed,
            jump_fraction,
            lo_phase,
            burn_in,
            first_stream=stream_id,
        )
    )


def ensemble_number_expectation(
    system: System,
    grid: TimeGrid,
    n_traj: int,
    seed: int,
    jump_fraction: float = 0.5,
    lo_phase: float | None = None,
    batch_size: int = 1024,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean photon number over trajectories started in the ground state.

    No burn-in: the transient itself is the object. Returns (mean, stderr)
    per grid sample; the mean converges to the master-equation photon
    number as n_traj grows, and stderr is the trajectory spread / sqrt(n).
    """
    theta = _default_phase(system) if lo_phase is None else float(lo_phase)
    total = np.zeros(grid.n_samples)
    total2 = np.zeros(grid.n_samples)
    done = 0
    while done < n_traj:
        b = min(batch_size, n_traj - done)
        ids = list(range(done, done + b))
        eng = _EnsembleEngine(system, grid.dt, jump_fraction, theta, seed, ids)
        vals = eng.photon_number()
        total[0] += vals.sum()
        total2[0] += (vals * vals).sum()
        for m in range(1, grid.n_samples):
            eng.step()
            vals = eng.photon_number()
            total[m] += vals.sum()
            total2[m] += (vals * vals).sum()
        done += b
    mean = total / n_traj
    var = np.maximum(total2 / n_traj - mean * mean, 0.0)
    return mean, np.sqrt(var / n_traj)
