"""Quasi-stationary distribution by a sparse eigensolve.

The stationary conditional system couples one transport equation per
population level n:

    d/dt nu_n = -d/dy(G_n nu_n) + (n-1) b nu_{n-1}
                + (n+1)(D+d) nu_{n+1} - n(b+D+d) nu_n,

with absorption (death from n=1) appearing only as loss.  The generator is
discretized by an upwind finite volume in cell-mass variables on a nutrient
grid that contains every equilibrium y_n as a node, so the transport speed
G_n has one sign per cell and the matrix is an M-matrix up to sign: inverse
power iteration then preserves positivity without any clipping.  The
quasi-stationary law and survival rate come from A nu = -lambda nu with
lambda of smallest magnitude.

Truncation at n_max drops the inflow from level n_max + 1 and counts births
out of n_max as loss; the exponentially small tail mass kappa_{n_max} is
reported so the truncation can be checked post hoc.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .equilibria import table as equilibria_table

__all__ = [
    "Discretization",
    "QsdEstimate",
    "GridError",
    "NoConvergence",
    "NegativeMass",
    "PreconditionViolated",
    "discretize",
    "assemble",
    "solve",
    "qsd",
    "structural_checks",
    "drift_condition",
]


class GridError(ValueError):
    """A cell straddles a sign change of some transport speed G_n."""


class NoConvergence(RuntimeError):
    """Inverse power iteration did not reach the residual tolerance."""


class NegativeMass(RuntimeError):
    """Converged eigenvector has mixed signs beyond tolerance."""


class PreconditionViolated(ValueError):
    """The exponential-weight parameters fail their defining inequality."""


@dataclass(frozen=True)
class Discretization:
    """Nutrient grid and population truncation for the eigensolve.

    y_grid   strictly increasing node array from 0 to y_max, containing
             every equilibrium y_n (n = 1..n_max) that lies inside
    n_max    population truncation level (unknowns are n = 1..n_max)
    scheme   only "upwind-fv" is implemented
    """

    y_grid: np.ndarray
    n_max: int
    scheme: str = "upwind-fv"

    def __post_init__(self):
        y = np.asarray(self.y_grid, dtype=float)
        if y.ndim != 1 or y.size < 3:
            raise GridError("grid needs at least 3 nodes")
        if y[0] != 0.0:
            raise GridError("grid must start at y = 0")
        if not np.all(np.diff(y) > 0):
            raise GridError("grid nodes must be strictly increasing")
        if self.n_max < 1:
            raise GridError("n_max must be >= 1")
        if self.scheme != "upwind-fv":
            raise GridError(f"unknown scheme {self.scheme!r}")
        yc = y.copy()
        yc.setflags(write=False)
        object.__setattr__(self, "y_grid", yc)

    @property
    def m_cells(self):
        return self.y_grid.size - 1

    @property
    def widths(self):
        return np.diff(self.y_grid)

    @property
    def centers(self):
        return 0.5 * (self.y_grid[:-1] + self.y_grid[1:])


@dataclass(frozen=True)
class QsdEstimate:
    """Quasi-stationary law on the (n, cell) grid plus the survival rate.

    kappa[n-1] is the weight of level n; densities[n-1, i] the conditional
    density u_n on cell i (cell mass = u_n * width).  Total mass is 1.
    residual is the L1 eigen-defect ||A nu + lambda nu||_1.
    """

    disc: Discretization
    kappa: np.ndarray
    densities: np.ndarray
    lam: float
    residual: float
    method: str
    params: object = None

    @property
    def cell_mass(self):
        return self.densities * self.disc.widths[None, :]

    def marginal_y(self):
        """Density of the nutrient marginal on the cells."""
        return self.densities.sum(axis=0)

    def mean_n(self):
        n = np.arange(1, self.kappa.size + 1)
        return float(n @ self.kappa)


def _roots_inside(params, n_max, y_max):
    tab = equilibria_table(params, n_max)
    out = []
    for n, yn in tab.roots:
        if n >= 1 and 0.0 < yn < y_max * (1.0 - 1e-12):
            out.append(yn)
    return out


def discretize(params, m_cells=512, n_max=50, y_max="y1"):
    """Build a grid on [0, y_max] containing every equilibrium as a node.

    y_max is "y1", "ystar" or an explicit number.  Uniform nodes are laid
    down first; each root replaces its nearest interior node when close
    (avoiding degenerate slivers), otherwise it is inserted.
    """
    if isinstance(y_max, str):
        if y_max == "y1":
            Y = equilibria_table(params, 1).y(1)
        elif y_max == "ystar":
            Y = params.y_star
        else:
            raise ValueError("y_max must be 'y1', 'ystar' or a number")
    else:
        Y = float(y_max)
    if not 0.0 < Y <= params.y_star:
        raise GridError("y_max must lie in (0, y_star]")
    if m_cells < 2:
        raise GridError("need at least 2 cells")
    uniform = np.linspace(0.0, Y, m_cells + 1)
    h = Y / m_cells
    roots = np.array(_roots_inside(params, n_max, Y))
    if roots.size:
        # drop interior uniform nodes crowding a root, then add the roots
        near = np.min(np.abs(uniform[:, None] - roots[None, :]), axis=1)
        keep = near >= 0.3 * h
        keep[0] = keep[-1] = True
        nodes = np.unique(np.concatenate([uniform[keep], roots]))
    else:
        nodes = uniform
    return Discretization(nodes, n_max)


def _cell_rates(params, disc):
    """Per-cell birth and death rates (cell-averaged where singular)."""
    yc = disc.centers
    b = np.array([params.b(v) for v in yc])
    death = params.death
    if death.c > 0.0 and death.sigma > 0.0:
        # closed-form cell average of y**(-sigma): finite since sigma < 1
        yl = disc.y_grid[:-1]
        yr = disc.y_grid[1:]
        s = death.sigma
        avg = (yr ** (1.0 - s) - yl ** (1.0 - s)) / ((1.0 - s) * disc.widths)
        d = death.d0 + death.c * avg
    elif death.c > 0.0:
        d = np.full(yc.size, death.d0 + death.c)
    else:
        d = np.full(yc.size, death.d0)
    return b, d


def assemble(params, disc):
    """Sparse generator acting on stacked cell masses, levels n = 1..n_max.

    Column sums equal minus the absorption flux: -(D + d) for n = 1 cells,
    -n_max * b for the truncation level, 0 otherwise (and both for
    n_max = 1), which is the conservation structure of the killed process.
    """
    y = disc.y_grid
    m = disc.m_cells
    n_max = disc.n_max
    w = disc.widths
    b, d = _cell_rates(params, disc)
    D = params.D
    rows = []
    cols = []
    vals = []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    from .equilibria import root as _eq_root
    for n in range(1, n_max + 1):
        base = (n - 1) * m
        # transport d/dy(G_n .): upwind fluxes at interior faces
        gfaces = np.array([_speed(params, n, v) for v in y])
        # the face at the root y_n carries exactly zero flux; the computed
        # root is only accurate to its bracketing tolerance, so snap it
        yn = _eq_root(params, n)
        if yn is not None and 0.0 < yn < y[-1]:
            k = int(np.argmin(np.abs(y - yn)))
            if abs(y[k] - yn) <= 1e-7 * y[-1]:
                gfaces[k] = 0.0
        # every interior sign change of G_n must sit on a node (flux 0)
        for i in range(m):
            gl = gfaces[i]
            gr = gfaces[i + 1]
            if gl * gr < 0.0:
                raise GridError(
                    f"cell [{y[i]:.6g}, {y[i+1]:.6g}] straddles the root of "
                    f"G_{n}; include y_{n} as a grid node")
        for j in range(1, m):
            g = gfaces[j]
            if g > 0.0:
                add(base + j, base + j - 1, g / w[j - 1])
                add(base + j - 1, base + j - 1, -g / w[j - 1])
            elif g < 0.0:
                add(base + j - 1, base + j, -g / w[j])
                add(base + j, base + j, g / w[j])
        # boundary faces carry no flux: nothing enters from outside, and a
        # negative speed at y = 0 means the nutrient is pinned there, so
        # mass accumulates in the first cell instead of leaking out
        for i in range(m):
            k = base + i
            add(k, k, -n * (b[i] + D + d[i]))
            if n > 1:
                add(k - m, k, n * (D + d[i]))  # death/washout to level n-1
            if n < n_max:
                add(k + m, k, n * b[i])  # birth to level n+1
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n_max * m, n_max * m))
    return A.tocsc()


def _speed(params, n, y):
    return params.D * (params.y_star - y) - n * params.b_tilde(y)


def solve(operator, disc, tol=1e-10, max_iter=200, params=None):
    """Leading eigenpair A nu = -lambda nu by inverse power iteration.

    -A is an M-matrix (nonnegative off-diagonal of A, column sums <= 0), so
    (-A)^{-1} is entrywise nonnegative and the iterates stay positive; no
    sign projection is ever needed.  Falls back to a dense eigensolve for
    small systems if the iteration stalls.
    """
    A = operator.tocsc()
    N = A.shape[0]
    x = np.full(N, 1.0 / N)
    try:
        lu = spla.splu(-A)
    except RuntimeError as exc:  # singular factorization
        raise NoConvergence(f"LU factorization failed: {exc}") from None
    lam = np.nan
    res = np.inf
    for _ in range(max_iter):
        z = lu.solve(x)
        s = z.sum()
        if s <= 0:
            raise NegativeMass("iterate lost positivity")
        z /= s
        Az = A @ z
        lam = -Az.sum()
        res = np.abs(Az + lam * z).sum()
        x = z
        if res <= tol:
            break
    else:
        if N < 2000:
            return _solve_dense(A, disc, tol, params)
        raise NoConvergence(
            f"residual {res:.3e} > tol {tol:.3e} after {max_iter} iterations")
    if x.min() < -1e-12:
        raise NegativeMass(f"converged vector has min {x.min():.3e}")
    return _package(x, lam, res, disc, "spectral", params)


def _solve_dense(A, disc, tol, params):
    w, V = np.linalg.eig(A.toarray())
    k = int(np.argmin(np.abs(w.real)))
    if abs(w[k].imag) > 1e-8 * (1.0 + abs(w[k].real)):
        raise NoConvergence("leading eigenvalue is not real")
    v = V[:, k].real
    if v.sum() < 0:
        v = -v
    if v.min() < -1e-8 * v.max():
        raise NegativeMass("dense eigenvector has mixed signs")
    v = np.clip(v, 0.0, None)
    v /= v.sum()
    lam = float(-w[k].real)
    res = float(np.abs(A @ v + lam * v).sum())
    return _package(v, lam, res, disc, "spectral-dense", params)


def _package(x, lam, res, disc, method, params):
    m = disc.m_cells
    mass = x.reshape(disc.n_max, m)
    kappa = mass.sum(axis=1)
    dens = mass / disc.widths[None, :]
    return QsdEstimate(disc=disc, kappa=kappa, densities=dens,
                       lam=float(lam), residual=float(res), method=method,
                       params=params)


def qsd(params, m_cells=512, n_max=50, y_max="y1", tol=1e-10, max_iter=200):
    """Convenience wrapper: discretize, assemble and solve in one call."""
    disc = discretize(params, m_cells, n_max, y_max)
    A = assemble(params, disc)
    return solve(A, disc, tol=tol, max_iter=max_iter, params=params)


def structural_checks(estimate, equilibria, refine=(2, 4), atom_ratio=1.5,
                      kappa_min=1e-8):
    """Report on the structural properties of a converged estimate.

    (a) positivity of u_n on interior cells of the resolvable window
        (y_{n_max}, y_1): below the smallest resolved equilibrium the
        truncated system is transport-dominated and the discrete vector is
        legitimately zero, so cells there are excluded, as are the cells
        touching the domain ends and, per level, the cell containing y_n;
    (b) no atom formation at any y_n: the mass held by the cells flanking
        y_n vanishes under grid refinement (a Dirac mass would keep it
        constant); the refinement-to-refinement mass ratio must stay below
        atom_ratio.  The density itself may legitimately diverge like an
        integrable power of the distance to y_n, so it is not the
        discriminating quantity;
    (c) no mass above y_1 (and a fortiori above y_star).

    Returns a dict with boolean fields and supporting numbers.
    """
    disc = estimate.disc
    params = estimate.params
    y1 = equilibria.y(1)
    n_max = disc.n_max
    # smallest equilibrium actually inside the truncated system
    y_floor = 0.0
    for n in range(n_max, 0, -1):
        if n in equilibria:
            y_floor = equilibria.y(n)
            break
    yc = disc.centers
    interior = (yc > y_floor) & (yc < y1)
    interior[0] = False
    interior[-1] = False
    pos_ok = True
    worst = np.inf
    for n in range(1, n_max + 1):
        u = estimate.densities[n - 1]
        mask = interior.copy()
        if n in equilibria:
            yn = equilibria.y(n)
            # y_n is a shared node: exclude both flanking cells
            k = int(np.searchsorted(disc.y_grid, yn, side="right")) - 1
            if 0 <= k < mask.size:
                mask[k] = False
            if 0 <= k - 1 < mask.size:
                mask[k - 1] = False
        if mask.any():
            mn = float(u[mask].min())
            worst = min(worst, mn)
            if mn <= 0.0:
                pos_ok = False
    # (b) refinement study around each equilibrium
    atom_ok = True
    ratios = {}
    if params is not None:
        base_cells = disc.m_cells
        # levels with negligible weight hold only floating-point noise at
        # the root cells, so ratios there are meaningless
        levels = {n for n in range(1, n_max + 1)
                  if estimate.kappa[n - 1] >= kappa_min}
        prev = _root_cell_mass(estimate, equilibria, levels)
        for f in refine:
            est_f = qsd(params, m_cells=base_cells * f, n_max=n_max,
                        y_max=float(disc.y_grid[-1]),
                        tol=max(estimate.residual, 1e-10) * 10, max_iter=200)
            cur = _root_cell_mass(est_f, equilibria, levels)
            rs = {}
            for n in cur:
                if prev.get(n, 0.0) > 0.0:
                    rs[n] = cur[n] / prev[n]
            ratios[f] = rs
            if rs and max(rs.values()) > atom_ratio:
                atom_ok = False
            prev = cur
    above = float(estimate.cell_mass[:, yc > y1 * (1.0 + 1e-9)].sum())
    return {
        "positivity_ok": pos_ok,
        "positivity_window": (float(y_floor), float(y1)),
        "min_interior_density": float(worst),
        "no_atom_ok": atom_ok,
        "atom_mass_ratios": ratios,
        "mass_above_y1": above,
        "mass_above_y1_ok": above < 1e-8,
    }


def _root_cell_mass(estimate, equilibria, levels):
    """Total mass of the two cells flanking each equilibrium node."""
    disc = estimate.disc
    out = {}
    for n in sorted(levels):
        if n not in equilibria:
            continue
        yn = equilibria.y(n)
        if not 0.0 < yn < disc.y_grid[-1]:
            continue
        k = int(np.searchsorted(disc.y_grid, yn, side="right")) - 1
        lo = max(k - 1, 0)
        hi = min(k + 1, disc.m_cells - 1)
        out[n] = float(estimate.cell_mass[n - 1, lo:hi + 1].sum())
    return out


def drift_condition(params, alpha, a0, n_grid=None, y_grid=None):
    """Uniform negativity of the exponential-weight drift for large n.

    With a(y) = alpha * y + a0, the weighted generator rate per individual is

        Xi(n, y) = b(y) (e^{a(y)} - 1 - alpha n / R)
                   + (D + d(y)) (e^{-a(y)} - 1)
                   + D alpha (y_star - y) - alpha eta 1_{y>0}.

    Returns (A, N0) with Xi(n, y) <= -A for every grid y and every n > N0,
    or None if no such pair exists within the n grid.
    """
    if alpha <= 0 or a0 <= 0:
        raise PreconditionViolated("need alpha > 0 and a0 > 0")
    D = params.D
    if D * (np.exp(-a0) - 1.0) + D * alpha * params.y_star >= 0.0:
        raise PreconditionViolated(
            "need D (e^{-a0} - 1) + D alpha y_star < 0")
    if n_grid is None:
        n_grid = np.arange(0, 201)
    if y_grid is None:
        y_grid = np.linspace(0.0, params.y_star, 2001)
    n_grid = np.asarray(n_grid)
    y_grid = np.asarray(y_grid, dtype=float)
    b = np.array([params.b(v) for v in y_grid])
    d = np.array([params.d(v) for v in y_grid])
    a = alpha * y_grid + a0
    ind = (y_grid > 0.0).astype(float)
    worst = np.empty(n_grid.size)
    for i, n in enumerate(n_grid):
        xi = (b * (np.exp(a) - 1.0 - alpha * n / params.R)
              + (D + d) * (np.exp(-a) - 1.0)
              + D * alpha * (params.y_star - y_grid)
              - alpha * params.eta * ind)
        worst[i] = np.max(xi)  # a singular d gives -inf entries, never +inf
    # smallest N0 with max_y Xi(n, .) < 0 for every n > N0 in the grid
    neg = worst < 0.0
    if not neg[-1]:
        return None
    k = n_grid.size - 1
    while k > 0 and neg[k - 1]:
        k -= 1
    N0 = int(n_grid[k - 1]) if k > 0 else int(n_grid[0])
    tail = worst[k:] if k > 0 else worst
    A = float(-tail.max())
    if A <= 0.0:
        return None
    return A, N0
