"""Command-line front end.

Subcommands: simulate, equilibria, qsd-spectral, qsd-particle, verify.
Model parameters come from a sectioned key = value config file; outputs are
CSV (17 significant digits, schema-stable column order) and JSON summaries
carrying a schema_version field.  Exit codes: 0 ok, 1 verification
check-failure, 2 numerical failure, 3 config error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from .equilibria import table as eq_table
from .model import BirthLaw, ChemostatParams, DeathLaw, ModelError, drift
from .simulator import HybridState, StepFailure, ensemble, simulate

SCHEMA_VERSION = 1

__all__ = ["ParseError", "ValidationError", "RunConfig", "parse_config",
           "main"]


class ParseError(Exception):
    """Config file is missing, unreadable or syntactically invalid."""


class ValidationError(Exception):
    """Config file parses but violates a model invariant."""


class RunConfig:
    """Validated model parameters plus run-level settings."""

    def __init__(self, params, seed=0, out_dir=".", threads=None,
                 quiet=False):
        self.params = params
        self.seed = seed
        self.out_dir = out_dir
        self.threads = threads
        self.quiet = quiet


def _fmt(x):
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _get_float(section, key, default=None):
    if key not in section:
        if default is not None:
            return default
        raise ValidationError(
            f"[{section.name}] missing required key {key!r}")
    try:
        return float(section[key])
    except ValueError:
        raise ValidationError(
            f"[{section.name}] {key} = {section[key]!r} is not a number"
        ) from None


def _parse_birth(cp):
    if "birth" not in cp:
        raise ValidationError("missing [birth] section")
    sec = cp["birth"]
    kind = sec.get("kind", "monod").strip().lower()
    try:
        if kind == "monod":
            return BirthLaw.monod(_get_float(sec, "b_inf"),
                                  _get_float(sec, "K"))
        if kind == "table":
            try:
                y = [float(v) for v in sec.get("y", "").split()]
                b = [float(v) for v in sec.get("b", "").split()]
            except ValueError:
                raise ValidationError(
                    "[birth] y and b must be whitespace-separated numbers"
                ) from None
            return BirthLaw.table(y, b)
    except ModelError as exc:
        raise ValidationError(f"[birth] {exc}") from None
    raise ValidationError(f"[birth] unknown kind {kind!r} "
                          "(expected monod or table)")


def _parse_death(cp):
    if "death" not in cp:
        raise ValidationError("missing [death] section")
    sec = cp["death"]
    kind = sec.get("kind", "constant").strip().lower()
    try:
        hard = sec.getboolean("hard", fallback=False)
    except ValueError:
        raise ValidationError(
            f"[death] hard = {sec['hard']!r} is not a boolean") from None
    try:
        if kind == "constant":
            return DeathLaw.constant(_get_float(sec, "d"), hard=hard)
        if kind in ("singular", "singular_power"):
            sigma = _get_float(sec, "sigma")
            if not 0.0 <= sigma < 1.0:
                raise ValidationError(
                    f"[death] sigma = {_fmt(sigma)}: the death rate must be "
                    "integrable at 0, which requires 0 <= sigma < 1")
            return DeathLaw.singular_power(_get_float(sec, "d0"),
                                           _get_float(sec, "c"), sigma,
                                           hard=hard)
    except ModelError as exc:
        raise ValidationError(f"[death] {exc}") from None
    raise ValidationError(f"[death] unknown kind {kind!r} "
                          "(expected constant or singular)")


def parse_config(path):
    """Read and validate a model config file into ChemostatParams."""
    if path is None:
        raise ParseError("no config file given (use --config)")
    if not os.path.exists(path):
        raise ParseError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if "model" not in cp:
        raise ValidationError("missing [model] section")
    sec = cp["model"]
    try:
        return ChemostatParams(
            D=_get_float(sec, "D"),
            y_star=_get_float(sec, "y_star"),
            R=_get_float(sec, "R", 1.0),
            eta=_get_float(sec, "eta", 0.0),
            birth=_parse_birth(cp),
            death=_parse_death(cp),
        )
    except ModelError as exc:
        raise ValidationError(f"[model] {exc}") from None


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, payload):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_simulate(args):
    params = parse_config(args.config)
    out = _ensure_dir(args.out or args.out_dir)
    initial = HybridState(args.n0, args.y0)
    tr = simulate(params, initial, args.horizon, args.seed,
                  sample_dt=args.sample_dt)
    _write_csv(os.path.join(out, "events.csv"),
               ["t", "kind", "n_after", "y_at"],
               [(e.t, e.kind.name, e.n_after, e.y_at) for e in tr.events])
    if tr.samples is not None:
        _write_csv(os.path.join(out, "samples.csv"), ["t", "n", "y"],
                   [(float(s["t"]), int(s["n"]), float(s["y"]))
                    for s in tr.samples])
    es = ensemble(params, initial, args.horizon, args.paths, args.seed)
    _write_csv(os.path.join(out, "survival.csv"), ["t", "survivors", "S"],
               [(float(t), int(k), float(s)) for t, k, s in
                zip(es.t_grid, es.survivors, es.survival)])
    if not args.quiet:
        frac = float(np.isnan(es.extinction_times).mean())
        print(f"simulated {args.paths} paths to t = {_fmt(args.horizon)}; "
              f"surviving fraction {frac:.4f}; wrote {out}/")
    return 0


def _cmd_equilibria(args):
    params = parse_config(args.config)
    out = _ensure_dir(args.out or args.out_dir)
    tab = eq_table(params, args.n_max)
    present = dict(tab.roots)
    rows = []
    for n in range(args.n_max + 1):
        if n in present:
            y = present[n]
            rows.append((n, y, drift(params, n, y), 1))
        else:
            rows.append((n, float("nan"), float("nan"), 0))
    _write_csv(os.path.join(out, "equilibria.csv"),
               ["n", "y_n", "G_n_residual", "exists"], rows)
    if not args.quiet:
        k = len(tab.roots)
        print(f"{k} equilibria written to {out}/equilibria.csv")
    return 0


def _bound_rhs(params, n_max):
    tab = eq_table(params, n_max)
    vals = [n * (params.b(y) + params.D + params.d(y))
            for n, y in tab.roots if n >= 1]
    return min(vals) if vals else float("inf")


def _qsd_outputs(out, estimate, extra, u_se=None):
    disc = estimate.disc
    centers = disc.centers
    rows = []
    for n in range(1, disc.n_max + 1):
        for i in range(disc.m_cells):
            row = [n, float(centers[i]), float(estimate.densities[n - 1, i])]
            if u_se is not None:
                row.append(float(u_se[n - 1, i]))
            rows.append(tuple(row))
    header = ["n", "y_cell_center", "u_n"]
    if u_se is not None:
        header.append("u_n_se")
    _write_csv(os.path.join(out, "qsd.csv"), header, rows)
    _write_json(os.path.join(out, "summary.json"), extra)


def _cmd_qsd_spectral(args):
    from . import qsd_spectral as qs
    params = parse_config(args.config)
    out = _ensure_dir(args.out or args.out_dir)
    est = qs.qsd(params, m_cells=args.cells, n_max=args.nmax,
                 y_max=args.ymax, tol=args.tol)
    bound = _bound_rhs(params, args.nmax)
    _qsd_outputs(out, est, {
        "method": est.method,
        "lambda": est.lam,
        "kappa": [float(v) for v in est.kappa],
        "residual": est.residual,
        "bound_rhs": bound,
        "bound_satisfied": bool(est.lam < bound),
        "cells": est.disc.m_cells,
        "n_max": est.disc.n_max,
    })
    if not args.quiet:
        print(f"lambda = {_fmt(est.lam)} (residual {est.residual:.3e}); "
              f"wrote {out}/")
    return 0


def _cmd_qsd_particle(args):
    from . import qsd_particle as qp
    from . import qsd_spectral as qs
    params = parse_config(args.config)
    out = _ensure_dir(args.out or args.out_dir)
    disc = qs.discretize(params, m_cells=args.cells, n_max=args.nmax)
    fv = qp.fleming_viot(params, args.particles, t_end=args.t_end,
                         burn_in=args.burn_in, seed=args.seed, disc=disc)
    est = fv.estimate
    # in-sample binomial scale per bin; sampling is autocorrelated, so this
    # is a lower bound on the true error
    draws = fv.n_samples * args.particles
    p_bin = est.cell_mass
    u_se = np.sqrt(np.clip(p_bin * (1 - p_bin), 0, None) / draws)
    u_se /= disc.widths[None, :]
    bound = _bound_rhs(params, args.nmax)
    _qsd_outputs(out, est, {
        "method": est.method,
        "lambda": est.lam,
        "lambda_se": fv.lam_se,
        "kappa": [float(v) for v in est.kappa],
        "resamples": fv.resample_count,
        "burn_in": fv.burn_in,
        "t_end": fv.t_end,
        "particles": args.particles,
        "overflow_mass": fv.overflow_mass,
        "bound_rhs": bound,
        "bound_satisfied": bool(est.lam < bound),
        "cells": disc.m_cells,
        "n_max": disc.n_max,
    }, u_se=u_se)
    if not args.quiet:
        print(f"lambda = {_fmt(est.lam)} +- {_fmt(fv.lam_se)} "
              f"({fv.resample_count} resamplings); wrote {out}/")
    return 0


def _cmd_verify(args):
    from . import verification
    params = parse_config(args.config) if args.config else None
    report = verification.run_all(params=params, quick=args.quick,
                                  seed=args.seed)
    if not args.quiet:
        print(report.summary())
    if args.out:
        out = _ensure_dir(args.out)
        _write_json(os.path.join(out, "verify.json"), _jsonable({
            "passed": report.passed,
            "checks": [{
                "name": c.name,
                "property": c.prop,
                "passed": c.passed,
                "measured": c.measured,
                "threshold": c.threshold,
                "detail": c.detail,
            } for c in report.checks],
        }))
    return 0 if report.passed else 1


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _add_common(sp):
    sp.add_argument("--config", help="model config file")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=".",
                    help="default output directory")
    sp.add_argument("--threads", type=int, default=None,
                    help="numba thread count for parallel ensembles")
    sp.add_argument("--quiet", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="chemostat-qsd",
        description="exact simulation and quasi-stationary analysis of a "
                    "stochastic chemostat")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate trajectories")
    _add_common(sp)
    sp.add_argument("--n0", type=int, default=1)
    sp.add_argument("--y0", type=float, default=0.5)
    sp.add_argument("--horizon", type=float, default=50.0)
    sp.add_argument("--paths", type=int, default=1)
    sp.add_argument("--sample-dt", type=float, default=None)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("equilibria", help="tabulate nutrient equilibria")
    _add_common(sp)
    sp.add_argument("--n-max", type=int, default=50)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=_cmd_equilibria)

    sp = sub.add_parser("qsd-spectral",
                        help="quasi-stationary law by sparse eigensolve")
    _add_common(sp)
    sp.add_argument("--cells", type=int, default=512)
    sp.add_argument("--nmax", type=int, default=50)
    sp.add_argument("--ymax", choices=["y1", "ystar"], default="y1")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=_cmd_qsd_spectral)

    sp = sub.add_parser("qsd-particle",
                        help="quasi-stationary law by particle Monte Carlo")
    _add_common(sp)
    sp.add_argument("--particles", type=int, default=10_000)
    sp.add_argument("--t-end", type=float, default=60.0)
    sp.add_argument("--burn-in", type=float, default=None)
    sp.add_argument("--cells", type=int, default=512)
    sp.add_argument("--nmax", type=int, default=50)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=_cmd_qsd_particle)

    sp = sub.add_parser("verify", help="run the verification suite")
    _add_common(sp)
    sp.add_argument("--quick", action="store_true",
                    help="reduced Monte Carlo scale")
    sp.add_argument("--out", help="output directory for verify.json")
    sp.set_defaults(func=_cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads is not None:
        import numba
        limit = numba.config.NUMBA_NUM_THREADS
        numba.set_num_threads(min(max(1, args.threads), limit))
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except StepFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
