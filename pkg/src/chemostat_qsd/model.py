"""Model parameters and pointwise rate functions for the stochastic chemostat.

The state of the process is (n, y): a bacteria count n coupled to a nutrient
concentration y.  Between population jumps the nutrient follows

    dy/dt = D (y_star - y) - n * b_tilde(y),

where b_tilde(y) = b(y)/R + eta * 1_{y>0}, and the population jumps with
per-capita birth rate b(y), washout rate D and background death rate d(y).

Everything in this module is an immutable value object or a pure function;
instances are safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelError",
    "BirthLaw",
    "DeathLaw",
    "ChemostatParams",
    "birth_rate",
    "death_rate",
    "drift",
]

#: kind codes used by the jitted kernels
BIRTH_MONOD = 0
BIRTH_TABLE = 1


class ModelError(ValueError):
    """A law or parameter violates its construction invariants."""


@dataclass(frozen=True)
class BirthLaw:
    """Per-capita birth rate b(y), saturating, with b(0) = 0.

    Either a Monod law b(y) = b_inf * y / (K + y), or a tabulated monotone
    function interpolated piecewise-linearly and clamped to its last value
    above the table range.
    """

    kind: int
    b_inf: float = 0.0
    K: float = 1.0
    table_y: np.ndarray | None = None
    table_b: np.ndarray | None = None
    #: metadata only: whether db/dy(0) > 0 is claimed by the user
    differentiable_at_zero: bool = True

    @classmethod
    def monod(cls, b_inf, K, differentiable_at_zero=True):
        if b_inf < 0:
            raise ModelError("b_inf must be >= 0")
        if K <= 0:
            raise ModelError("Monod half-saturation K must be > 0")
        return cls(BIRTH_MONOD, b_inf=float(b_inf), K=float(K),
                   differentiable_at_zero=differentiable_at_zero)

    @classmethod
    def table(cls, y, b, differentiable_at_zero=False):
        y = np.asarray(y, dtype=float)
        b = np.asarray(b, dtype=float)
        if y.ndim != 1 or y.shape != b.shape or y.size < 2:
            raise ModelError("tabulated law needs matching 1-d arrays, size >= 2")
        if y[0] != 0.0 or b[0] != 0.0:
            raise ModelError("tabulated law must start at (0, 0)")
        if not np.all(np.diff(y) > 0):
            raise ModelError("tabulated nutrient grid must be strictly increasing")
        if not np.all(np.diff(b) >= 0):
            raise ModelError("tabulated birth rate must be non-decreasing")
        yc = y.copy()
        bc = b.copy()
        yc.setflags(write=False)
        bc.setflags(write=False)
        return cls(BIRTH_TABLE, b_inf=float(b[-1]), table_y=yc, table_b=bc,
                   differentiable_at_zero=differentiable_at_zero)

    def __call__(self, y):
        if y <= 0.0:
            return 0.0
        if self.kind == BIRTH_MONOD:
            return self.b_inf * y / (self.K + y)
        if y >= self.table_y[-1]:
            return float(self.table_b[-1])
        return float(np.interp(y, self.table_y, self.table_b))


@dataclass(frozen=True)
class DeathLaw:
    """Per-capita background death rate d(y), non-increasing in y.

    d(y) = d0 + c * y**(-sigma) with 0 <= sigma < 1; the constant law is the
    special case c = 0.  With ``hard=True`` the value at y = 0 is treated as
    infinite regardless of the tail: the whole population dies the instant the
    nutrient is exhausted.  The infinite value is never stored as a float; it
    is signalled through :func:`death_rate` returning ``math.inf``.
    """

    d0: float
    c: float = 0.0
    sigma: float = 0.0
    hard: bool = False

    @classmethod
    def constant(cls, d_star, hard=False):
        if d_star <= 0:
            raise ModelError("constant death rate must be > 0")
        return cls(d0=float(d_star), hard=hard)

    @classmethod
    def singular_power(cls, d0, c, sigma, hard=False):
        if d0 < 0 or c < 0 or d0 + c <= 0:
            raise ModelError("death rate must be positive for y > 0")
        if not 0.0 <= sigma < 1.0:
            raise ModelError("singular exponent sigma must satisfy 0 <= sigma < 1")
        return cls(d0=float(d0), c=float(c), sigma=float(sigma), hard=hard)

    def __post_init__(self):
        if self.d0 < 0 or self.c < 0 or self.d0 + self.c <= 0:
            raise ModelError("death rate must be positive for y > 0")
        if not 0.0 <= self.sigma < 1.0:
            raise ModelError("singular exponent sigma must satisfy 0 <= sigma < 1")

    @property
    def infinite_at_zero(self):
        return self.hard or (self.c > 0 and self.sigma > 0)

    def __call__(self, y):
        if y <= 0.0:
            return math.inf if self.infinite_at_zero else self.d0 + self.c
        if self.c == 0.0:
            return self.d0
        return self.d0 + self.c * y ** (-self.sigma)


@dataclass(frozen=True)
class ChemostatParams:
    """All constants of the chemostat model.

    D       dilution rate (1/time); also the per-capita washout rate
    y_star  nutrient concentration of the inflowing medium
    R       biomass yield (nutrient consumed per birth is b(y)/R)
    eta     per-capita maintenance consumption, active only while y > 0
    """

    D: float
    y_star: float
    R: float
    eta: float
    birth: BirthLaw
    death: DeathLaw

    def __post_init__(self):
        if self.D <= 0 or self.y_star <= 0 or self.R <= 0 or self.eta < 0:
            raise ModelError("need D > 0, y_star > 0, R > 0, eta >= 0")

    def b(self, y):
        return self.birth(y)

    def d(self, y):
        return self.death(y)

    def b_tilde(self, y):
        """Per-capita nutrient consumption rate b(y)/R + eta * 1_{y>0}."""
        if y <= 0.0:
            return 0.0
        return self.birth(y) / self.R + self.eta

    def pack(self):
        """Flatten to plain arrays for the jitted kernels.

        Returns (pf, birth_kind, hard, table_y, table_b) where pf holds
        [D, y_star, R, eta, b_inf, K, d0, c, sigma].
        """
        pf = np.array([
            self.D, self.y_star, self.R, self.eta,
            self.birth.b_inf, self.birth.K,
            self.death.d0, self.death.c, self.death.sigma,
        ])
        empty = np.empty(0)
        tab_y = self.birth.table_y if self.birth.table_y is not None else empty
        tab_b = self.birth.table_b if self.birth.table_b is not None else empty
        return pf, self.birth.kind, int(self.death.hard), tab_y, tab_b


def birth_rate(params, n, y):
    """Total birth rate n * b(y); zero for empty population or no nutrient."""
    if n <= 0:
        return 0.0
    return n * params.b(y)


def death_rate(params, n, y):
    """Total death-plus-washout rate n * (D + d(y)).

    Returns ``math.inf`` when d(0) is infinite, y = 0 and n > 0; the
    simulator treats that as instantaneous death.
    """
    if n <= 0:
        return 0.0
    d = params.d(y)
    if math.isinf(d):
        return math.inf
    return n * (params.D + d)


def drift(params, n, y):
    """Nutrient drift D (y_star - y) - n * b_tilde(y) at fixed count n."""
    return params.D * (params.y_star - y) - n * params.b_tilde(y)
