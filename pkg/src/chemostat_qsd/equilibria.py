"""Stationary nutrient levels y_n at fixed population size.

For each count n, G_n(y) = D (y_star - y) - n * b_tilde(y) is strictly
decreasing on (0, y_star], so it has at most one root.  A root exists for
every n when eta = 0 and exactly for n <= D y_star / eta when eta > 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import drift

__all__ = ["root", "table", "EquilibriaTable"]


@dataclass(frozen=True)
class EquilibriaTable:
    """Roots y_n of G_n, strictly decreasing in n, all inside [0, y_star].

    roots            list of (n, y_n) for every n that has a root
    n_max_with_root  largest n carrying a root, or None if unbounded (eta = 0)
    n0               minimal n with n * eta > D * y_star, or None (eta = 0)
    boundary_roots   set of n whose root sits exactly at y = 0
    """

    roots: tuple
    n_max_with_root: int | None
    n0: int | None
    boundary_roots: frozenset

    def y(self, n):
        for m, ym in self.roots:
            if m == n:
                return ym
        raise KeyError(f"no equilibrium for n={n}")

    def __contains__(self, n):
        return any(m == n for m, _ in self.roots)


def _has_root(params, n):
    if n == 0:
        return True
    if params.eta == 0.0:
        return True
    return n * params.eta <= params.D * params.y_star


def root(params, n, tol=None):
    """Root of G_n(y) = 0, bracketed to width <= tol, or None if no root.

    n = 0 returns y_star exactly.  For eta > 0 and n > D y_star / eta the
    drift is negative on all of [0, y_star] and None is returned.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if tol is None:
        tol = 1e-12 * params.y_star
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if n == 0:
        return params.y_star
    if not _has_root(params, n):
        return None
    g0 = params.D * params.y_star - n * params.eta  # limit of G_n at y -> 0+
    if g0 == 0.0:
        return 0.0
    # G_n is strictly decreasing with G_n(0+) > 0 > G_n(y_star)
    return brentq(lambda y: drift(params, n, y), 0.0, params.y_star,
                  xtol=tol, rtol=4 * np.finfo(float).eps)


def table(params, n_max, tol=None):
    """Equilibria y_n for n = 0..n_max (truncated earlier when eta > 0)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    roots = []
    boundary = set()
    for n in range(n_max + 1):
        y = root(params, n, tol)
        if y is None:
            break
        roots.append((n, y))
        if y == 0.0:
            boundary.add(n)
    if params.eta > 0.0:
        n0 = int(params.D * params.y_star / params.eta) + 1
        # guard against floating division landing on the wrong side
        while n0 * params.eta <= params.D * params.y_star:
            n0 += 1
        while (n0 - 1) * params.eta > params.D * params.y_star:
            n0 -= 1
        n_last = roots[-1][0] if roots else None
        return EquilibriaTable(tuple(roots), n_last, n0, frozenset(boundary))
    return EquilibriaTable(tuple(roots), None, None, frozenset(boundary))
