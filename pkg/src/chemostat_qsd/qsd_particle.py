"""Particle Monte Carlo estimation of the quasi-stationary law.

Two estimators, both built on the exact simulator and independent of the
spectral eigensolve:

* a resampling particle system: m copies of the process run in parallel,
  and whenever one hits n = 0 it instantly adopts the state of a uniformly
  chosen other particle.  The time-averaged empirical measure converges to
  the conditioned law, and the per-particle resampling frequency estimates
  the survival rate lambda;

* a conditioned ensemble: independent trajectories whose surviving fraction
  S(t) decays like e^{-lambda t} in the quasi-stationary regime, with the
  conditional empirical law at each grid time.

Particles advance asynchronously between their own jumps (a priority queue
of precomputed jump times); a resampling donor's state is interpolated to
the absorption time by the deterministic flow, which is exact because
donors evolve deterministically between their own jumps.  All randomness is
counter-based, so results are independent of thread scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .qsd_spectral import QsdEstimate, discretize
from .simulator import HybridState, StepFailure, ensemble

__all__ = [
    "ParticleCloud",
    "SurvivalCurve",
    "FlemingViotResult",
    "ConditionedEnsembleResult",
    "AllAbsorbedSimultaneously",
    "WindowEmpty",
    "fleming_viot",
    "conditioned_ensemble",
    "sample_states",
]


class AllAbsorbedSimultaneously(RuntimeError):
    """A resampling donor was itself absorbed (impossible for m >= 2)."""


class WindowEmpty(RuntimeError):
    """Too few surviving paths in the survival-slope fit window."""


@dataclass(frozen=True)
class ParticleCloud:
    """Final state of the particle system: one (n, y) per particle."""

    n: np.ndarray
    y: np.ndarray
    t: float
    resample_count: int
    base_seed: int

    def __post_init__(self):
        if np.any(self.n < 1):
            raise AllAbsorbedSimultaneously("cloud contains a dead particle")

    @property
    def m(self):
        return self.n.size

    def states(self):
        return [HybridState(int(n), float(y), self.t)
                for n, y in zip(self.n, self.y)]


@dataclass(frozen=True)
class SurvivalCurve:
    """Fraction of independent paths still alive at each grid time."""

    t_grid: np.ndarray
    survival: np.ndarray
    paths: int

    def __post_init__(self):
        if np.any(np.diff(self.survival) > 1e-12):
            raise ValueError("survival must be non-increasing")

    @property
    def survivors(self):
        return np.rint(self.survival * self.paths).astype(np.int64)


@dataclass(frozen=True)
class FlemingViotResult:
    """Particle estimate of the conditioned law and the survival rate.

    estimate.lam is the resampling-rate estimator lam_hat =
    resamples / ((t_end - burn_in) * m); lam_se its block standard error.
    overflow_mass is the empirical-mass fraction falling beyond the grid.
    """

    estimate: QsdEstimate
    lam_se: float
    resample_count: int
    n_samples: int
    overflow_mass: float
    cloud: ParticleCloud
    burn_in: float
    t_end: float


@dataclass(frozen=True)
class ConditionedEnsembleResult:
    """Survival curve, conditional laws, and the log-slope rate estimate."""

    survival: SurvivalCurve
    #: per grid time: (n_values, y_values) of the surviving paths
    conditional: tuple
    lam: float
    lam_se: float
    fit_window: tuple


def _initial_arrays(initial, m, params):
    if initial is None:
        initial = HybridState(2, 0.5 * params.y_star)
    if isinstance(initial, HybridState):
        if initial.n < 1:
            raise ValueError("initial particle state needs n >= 1")
        return (np.full(m, initial.n, dtype=np.int64),
                np.full(m, initial.y, dtype=float))
    n0, y0 = initial
    n0 = np.asarray(n0, dtype=np.int64)
    y0 = np.asarray(y0, dtype=float)
    if n0.shape != (m,) or y0.shape != (m,):
        raise ValueError("initial arrays must have one entry per particle")
    if np.any(n0 < 1) or np.any(y0 < 0):
        raise ValueError("initial particles need n >= 1 and y >= 0")
    return n0.copy(), y0.copy()


def _run_fv(params, n0, y0, t_end, burn_in, seed, rtol, atol, sample_dt,
            nodes, n_cap, nblocks):
    pf, bk, hard, ty, tb = params.pack()
    out = _core._fv_core(pf, bk, hard, ty, tb, n0, y0, float(t_end),
                         float(burn_in), np.uint64(seed), rtol, atol,
                         float(sample_dt), nodes, n_cap, nblocks)
    status = out[0]
    if status == 4:
        raise AllAbsorbedSimultaneously("resampling donor was dead")
    if status != 0:
        raise StepFailure("particle integration failed")
    return out


def fleming_viot(params, m_particles, t_end, burn_in=None, initial=None,
                 seed=0, disc=None, sample_dt=0.05, rtol=1e-9, atol=1e-12,
                 nblocks=20):
    """Resampling particle estimate of the QSD and survival rate.

    The empirical law is time-averaged over (burn_in, t_end], binned onto
    the grid of ``disc`` (the spectral discretization; built with defaults
    when omitted).  burn_in defaults to 10 / lam_pilot with lam_pilot from
    a short pilot run, so the cloud forgets its initialization.
    """
    if m_particles < 2:
        raise ValueError("need at least 2 particles")
    if disc is None:
        disc = discretize(params)
    nodes = np.asarray(disc.y_grid, dtype=float)
    n_cap = disc.n_max
    n0, y0 = _initial_arrays(initial, m_particles, params)
    if burn_in is None:
        m_pilot = min(m_particles, 200)
        t_pilot = 20.0 / params.D
        out = _run_fv(params, n0[:m_pilot].copy(), y0[:m_pilot].copy(),
                      t_pilot, 0.0, np.uint64(seed) ^ np.uint64(0xA5A5A5A5),
                      rtol, atol, sample_dt, nodes, n_cap, 1)
        lam_pilot = out[4] / (t_pilot * m_pilot)
        if lam_pilot <= 0:
            lam_pilot = params.D  # no resamples seen; fall back to 1/D scale
        burn_in = 10.0 / lam_pilot
    if t_end <= burn_in:
        raise ValueError("t_end must exceed burn_in")
    out = _run_fv(params, n0, y0, t_end, burn_in, seed, rtol, atol,
                  sample_dt, nodes, n_cap, nblocks)
    _, hist, overflow, nsamp, res_total, res_blocks, nf, yf = out
    if nsamp < 1:
        raise ValueError("no sampling times fell inside (burn_in, t_end]")
    total = hist.sum()
    if total <= 0:
        raise ValueError("empirical measure is empty")
    mass = hist / (total + overflow)
    kappa = mass.sum(axis=1)
    dens = mass / np.diff(nodes)[None, :]
    span = t_end - burn_in
    lam_hat = res_total / (span * m_particles)
    block_rates = res_blocks / ((span / nblocks) * m_particles)
    lam_se = float(block_rates.std(ddof=1) / np.sqrt(nblocks))
    est = QsdEstimate(disc=disc, kappa=kappa, densities=dens,
                      lam=float(lam_hat), residual=float("nan"),
                      method="fleming-viot", params=params)
    cloud = ParticleCloud(n=nf, y=yf, t=float(t_end),
                          resample_count=int(res_total), base_seed=int(seed))
    return FlemingViotResult(estimate=est, lam_se=lam_se,
                             resample_count=int(res_total),
                             n_samples=int(nsamp),
                             overflow_mass=float(overflow / (total + overflow)),
                             cloud=cloud, burn_in=float(burn_in),
                             t_end=float(t_end))


def conditioned_ensemble(params, initial, t_grid, n_paths, seed, rtol=1e-9,
                         atol=1e-12, window=(0.01, 0.5), min_survivors=100):
    """Survival curve and conditional laws from independent trajectories.

    lam is minus the least-squares slope of log S(t) over the grid window
    where S lies in [window[0], window[1]].
    """
    if initial.n < 1:
        raise ValueError("initial state needs n >= 1 (n = 0 is absorbing)")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing with >= 2 points")
    horizon = float(t_grid[-1])
    summ = ensemble(params, initial, horizon, n_paths, seed, rtol=rtol,
                    atol=atol, t_grid=t_grid, keep_samples=True)
    t_abs = np.where(np.isnan(summ.extinction_times), np.inf,
                     summ.extinction_times)
    alive = t_abs[None, :] > t_grid[:, None]
    surv = alive.sum(axis=1)
    S = surv / n_paths
    curve = SurvivalCurve(t_grid=t_grid, survival=S, paths=n_paths)
    conditional = tuple(
        (summ.sample_n[alive[k], k].copy(), summ.sample_y[alive[k], k].copy())
        for k in range(t_grid.size))
    lo, hi = window
    mask = (S >= lo) & (S <= hi) & (surv > 0)
    if mask.sum() < 2 or surv[mask].max() < min_survivors:
        raise WindowEmpty(
            f"fit window S in [{lo}, {hi}] has too few surviving paths")
    x = t_grid[mask]
    z = np.log(S[mask])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res_, _, _ = np.linalg.lstsq(A, z, rcond=None)
    lam = -float(coef[0])
    nfit = x.size
    if nfit > 2:
        zres = z - A @ coef
        s2 = float(zres @ zres) / (nfit - 2)
        sxx = float(((x - x.mean()) ** 2).sum())
        lam_se = float(np.sqrt(s2 / sxx))
    else:
        lam_se = float("nan")
    return ConditionedEnsembleResult(survival=curve, conditional=conditional,
                                     lam=lam, lam_se=lam_se,
                                     fit_window=(float(x[0]), float(x[-1])))


def sample_states(estimate, size, seed):
    """Draw (n, y) pairs from a gridded QSD estimate.

    Cells are chosen with probability equal to their mass; y is uniform
    within the chosen cell.  Returns (n_array, y_array).
    """
    rng = np.random.default_rng(seed)
    mass = estimate.cell_mass
    p = mass.ravel()
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    idx = rng.choice(p.size, size=size, p=p)
    m = estimate.disc.m_cells
    n = idx // m + 1
    cell = idx % m
    yl = estimate.disc.y_grid[:-1][cell]
    w = estimate.disc.widths[cell]
    y = yl + w * rng.random(size)
    return n.astype(np.int64), y
