"""Exact path simulation of the coupled count/nutrient process.

Between population jumps the nutrient follows its ODE at fixed count; jump
times are realized by integrating the cumulative hazard alongside the
nutrient until it crosses an exponential draw.  This is exact in
distribution up to the ODE tolerance, and works even when the death rate is
unbounded near y = 0 (no majorant rate is needed).

Trajectories are deterministic functions of (params, initial state, seed,
tolerance), independent of thread count.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from ._rng import CounterStream, stream_key

__all__ = [
    "EventKind",
    "HybridState",
    "TrajectoryEvent",
    "Trajectory",
    "EnsembleSummary",
    "StepFailure",
    "flow",
    "next_jump",
    "simulate",
    "ensemble",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


class StepFailure(RuntimeError):
    """The ODE integrator could not meet the tolerance at minimum step size."""


class EventKind(enum.IntEnum):
    BIRTH = _core.BIRTH
    DEATH = _core.DEATH
    WASHOUT = _core.WASHOUT
    EXTINCTION = _core.EXTINCTION
    NUTRIENT_HIT_ZERO = _core.HIT_ZERO
    NUTRIENT_LEAVE_ZERO = _core.LEAVE_ZERO


@dataclass(frozen=True)
class HybridState:
    """Process state: count n, nutrient y, at time t."""

    n: int
    y: float
    t: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("count n must be >= 0")
        if self.y < 0:
            raise ValueError("nutrient y must be >= 0")


@dataclass(frozen=True)
class TrajectoryEvent:
    t: float
    kind: EventKind
    n_after: int
    y_at: float


@dataclass(frozen=True)
class Trajectory:
    """Ordered event log of one path, with optional dense samples.

    samples is None or a structured view (t, n, y) on a uniform grid;
    absorbed iff an Extinction event was logged, at time t_absorption.
    """

    params: object
    seed: int
    events: tuple
    samples: np.ndarray | None
    absorbed: bool
    t_absorption: float | None
    y_min: float = 0.0
    y_max: float = 0.0
    y_max_pre_absorption: float = 0.0

    @property
    def extinction_time(self):
        return self.t_absorption


@dataclass(frozen=True)
class EnsembleSummary:
    """Order-independent aggregation of independent paths.

    t_grid / survivors / survival give S(t) = fraction of paths still alive;
    extinction_times has NaN for paths surviving past the horizon.
    """

    params: object
    base_seed: int
    n_paths: int
    horizon: float
    t_grid: np.ndarray
    survivors: np.ndarray
    survival: np.ndarray
    extinction_times: np.ndarray
    sample_n: np.ndarray | None  # (paths, len(t_grid)) counts at grid times
    sample_y: np.ndarray | None
    y_min: np.ndarray = field(default=None)
    y_max: np.ndarray = field(default=None)
    y_max_pre_absorption: np.ndarray = field(default=None)


def _check_tols(rtol, atol):
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be > 0")


def flow(params, n, y0, dt, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Nutrient level after time dt of deterministic flow at fixed count n."""
    if y0 < 0:
        raise ValueError("y0 must be >= 0")
    if dt < 0:
        raise ValueError("dt must be >= 0")
    _check_tols(rtol, atol)
    pf, bk, _, ty, tb = params.pack()
    status, y = _core._flow_core(pf, bk, ty, tb, int(n), float(y0), float(dt),
                                 rtol, atol)
    if status != 0:
        raise StepFailure(f"flow failed at n={n}, y0={y0}")
    return y


def next_jump(params, state, rng, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
              t_cap=math.inf):
    """Time, kind and nutrient level of the next population event.

    rng is a CounterStream; its counter is advanced by exactly the draws
    consumed.  Returns (t_jump, EventKind, y_at_jump); kind EXTINCTION is
    returned directly for hard death at the nutrient boundary.  Returns
    (t_cap, None, y_at_cap) if no event occurs before t_cap.
    """
    if state.n < 1:
        raise ValueError("next_jump needs n >= 1")
    _check_tols(rtol, atol)
    if not isinstance(rng, CounterStream):
        raise TypeError("rng must be a CounterStream")
    pf, bk, hard, ty, tb = params.pack()
    cap = _core._INF_TIME if math.isinf(t_cap) else float(t_cap)
    code, t, y, ctr = _core._next_jump_core(
        pf, bk, hard, ty, tb, int(state.n), float(state.y), float(state.t),
        cap, np.uint64(rng.key), np.int64(rng.counter), rtol, atol)
    rng.counter = int(ctr)
    if code == _core.NJ_FAIL:
        raise StepFailure(f"hazard integration failed at n={state.n}, y={state.y}")
    if code == _core.NJ_CAPPED:
        return t, None, y
    if code == _core.NJ_HARD_EXTINCT:
        return t, EventKind.EXTINCTION, 0.0
    kind = {_core.NJ_BIRTH: EventKind.BIRTH,
            _core.NJ_WASHOUT: EventKind.WASHOUT,
            _core.NJ_DEATH: EventKind.DEATH}[code]
    return t, kind, y


def simulate(params, initial, horizon, seed, rtol=DEFAULT_RTOL,
             atol=DEFAULT_ATOL, sample_dt=None):
    """One trajectory from the given state up to the horizon.

    The path continues after extinction with the empty-population nutrient
    relaxation, so dense samples cover the full horizon.  Bit-identical
    output for identical (params, initial, seed, tolerances).
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    _check_tols(rtol, atol)
    pf, bk, hard, ty, tb = params.pack()
    if sample_dt is not None:
        if sample_dt <= 0:
            raise ValueError("sample_dt must be > 0")
        sample_ts = np.arange(0.0, horizon + 0.5 * sample_dt, sample_dt)
    else:
        sample_ts = np.empty(0)
    key = np.uint64(stream_key(np.uint64(seed), np.uint64(0)))
    out = _core._simulate_core(pf, bk, hard, ty, tb, int(initial.n),
                               float(initial.y), float(horizon), key,
                               rtol, atol, sample_ts)
    (status, ev_t, ev_k, ev_n, ev_y, samp_n, samp_y, absorbed, t_abs,
     ymin, ymax, ymax_pre, _ctr) = out
    if status != 0:
        raise StepFailure("trajectory integration failed")
    events = tuple(
        TrajectoryEvent(float(t), EventKind(int(k)), int(n), float(y))
        for t, k, n, y in zip(ev_t, ev_k, ev_n, ev_y))
    samples = None
    if sample_dt is not None:
        samples = np.zeros(sample_ts.shape[0],
                           dtype=[("t", float), ("n", np.int64), ("y", float)])
        samples["t"] = sample_ts
        samples["n"] = samp_n
        samples["y"] = samp_y
    return Trajectory(params=params, seed=int(seed), events=events,
                      samples=samples, absorbed=bool(absorbed),
                      t_absorption=float(t_abs) if absorbed else None,
                      y_min=float(ymin), y_max=float(ymax),
                      y_max_pre_absorption=float(ymax_pre))


def ensemble(params, initial, horizon, n_paths, base_seed, rtol=DEFAULT_RTOL,
             atol=DEFAULT_ATOL, t_grid=None, keep_samples=False):
    """Independent paths with derived per-path streams; order-independent.

    Path p uses the counter stream keyed by (base_seed, p), identical to
    simulate(..., seed=...) with that derived key.  t_grid defaults to 201
    uniform points on [0, horizon].
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    _check_tols(rtol, atol)
    pf, bk, hard, ty, tb = params.pack()
    if t_grid is None:
        t_grid = np.linspace(0.0, horizon, 201)
    t_grid = np.asarray(t_grid, dtype=float)
    n_init = np.full(n_paths, int(initial.n), dtype=np.int64)
    y_init = np.full(n_paths, float(initial.y))
    (stat, t_abs, y_lo, y_hi, y_hi_pre, S_n, S_y, _nev) = _core._ensemble_core(
        pf, bk, hard, ty, tb, n_init, y_init, float(horizon),
        np.uint64(base_seed), rtol, atol, t_grid)
    if np.any(stat != 0):
        bad = int(np.argmax(stat != 0))
        raise StepFailure(f"path {bad} failed integration")
    survivors = (t_abs[None, :] > t_grid[:, None]).sum(axis=1)
    ext = np.where(np.isfinite(t_abs), t_abs, np.nan)
    return EnsembleSummary(
        params=params, base_seed=int(base_seed), n_paths=n_paths,
        horizon=float(horizon), t_grid=t_grid,
        survivors=survivors.astype(np.int64),
        survival=survivors / n_paths,
        extinction_times=ext,
        sample_n=S_n if keep_samples else None,
        sample_y=S_y if keep_samples else None,
        y_min=y_lo, y_max=y_hi, y_max_pre_absorption=y_hi_pre)
