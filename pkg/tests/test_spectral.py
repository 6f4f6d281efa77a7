import numpy as np
import pytest

from chemostat_qsd import table
from chemostat_qsd.qsd_spectral import (Discretization, GridError,
                                        PreconditionViolated, assemble,
                                        discretize, drift_condition, qsd,
                                        solve, structural_checks)


class TestDiscretize:
    def test_contains_all_roots(self, monod_params):
        disc = discretize(monod_params, m_cells=128, n_max=20)
        tab = table(monod_params, 20)
        for n in range(2, 21):
            yn = tab.y(n)
            assert np.min(np.abs(disc.y_grid - yn)) < 1e-14

    def test_spans_zero_to_y1(self, monod_params, y1_exact):
        disc = discretize(monod_params, m_cells=64, n_max=10)
        assert disc.y_grid[0] == 0.0
        assert disc.y_grid[-1] == pytest.approx(y1_exact, abs=1e-10)

    def test_ystar_domain(self, monod_params):
        disc = discretize(monod_params, m_cells=64, n_max=10, y_max="ystar")
        assert disc.y_grid[-1] == monod_params.y_star

    def test_widths_positive(self, monod_params):
        disc = discretize(monod_params, m_cells=512, n_max=50)
        assert np.all(disc.widths > 0)

    def test_validation(self):
        with pytest.raises(GridError):
            Discretization(np.array([0.1, 0.2, 0.3]), 5)  # must start at 0
        with pytest.raises(GridError):
            Discretization(np.array([0.0, 0.2, 0.2]), 5)


class TestAssemble:
    def test_missing_root_node_raises(self, monod_params):
        # a plain uniform grid misses the equilibria
        disc = Discretization(np.linspace(0.0, 0.19258240356725198, 65), 5)
        with pytest.raises(GridError):
            assemble(monod_params, disc)

    def test_column_sums_equal_absorption(self, monod_params):
        disc = discretize(monod_params, m_cells=64, n_max=6)
        A = assemble(monod_params, disc)
        col = np.asarray(A.sum(axis=0)).ravel()
        m = disc.m_cells
        b, d = [], []
        from chemostat_qsd.qsd_spectral import _cell_rates
        b, d = _cell_rates(monod_params, disc)
        # level 1 columns lose exactly the absorption rate D + d per cell
        np.testing.assert_allclose(col[:m], -(monod_params.D + d), rtol=1e-12)
        # interior levels are conservative
        for n in range(2, 6):
            np.testing.assert_allclose(col[(n - 1) * m: n * m], 0.0,
                                       atol=1e-12)
        # the truncation level loses its births
        np.testing.assert_allclose(col[5 * m:], -6 * b, rtol=1e-12,
                                   atol=1e-12)

    def test_transport_consistency(self, pure_death_params):
        # with b = d = 0-coupling removed, the discrete operator applied to
        # smooth cell masses approximates -(G u)' to first order
        p = pure_death_params

        def residual(cells):
            disc = discretize(p, m_cells=cells, n_max=1, y_max="ystar")
            A = assemble(p, disc)
            yc = disc.centers
            w = disc.widths
            u = np.exp(-((yc - 0.5) / 0.15) ** 2)  # smooth bump
            kill = np.array([p.D + p.d(v) for v in yc])
            out = (A @ (u * w)) / w + kill * u  # strip the killing term
            G = p.D * (p.y_star - yc)
            dGu = np.gradient(G * u, yc)
            return np.abs(out + dGu)[5:-5].max()

        e1 = residual(400)
        e2 = residual(800)
        assert e1 < 0.2
        assert e2 < 0.62 * e1  # O(h): halving h about halves the error


class TestSolve:
    def test_pure_death_eigenvalue(self, pure_death_params):
        est = qsd(pure_death_params, m_cells=64, n_max=1)
        assert est.lam == pytest.approx(2.0, abs=1e-6)
        assert est.kappa[0] == pytest.approx(1.0, abs=1e-10)

    def test_desk_estimate_structure(self, monod_params):
        est = qsd(monod_params, m_cells=128, n_max=30)
        assert est.lam > 0
        assert est.residual < 1e-10
        assert est.kappa.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(est.densities >= 0)
        assert est.kappa[-1] < 1e-8  # truncation tail is negligible
        # integral of u_n equals kappa_n by construction of the mass grid
        np.testing.assert_allclose(est.cell_mass.sum(axis=1), est.kappa,
                                   atol=1e-14)

    def test_rate_bound(self, monod_params):
        est = qsd(monod_params, m_cells=128, n_max=30)
        tab = table(monod_params, 30)
        bound = min(n * (monod_params.b(y) + monod_params.D
                         + monod_params.d(y))
                    for n, y in tab.roots if n >= 1)
        assert est.lam < bound

    def test_refinement_stability(self, monod_params):
        a = qsd(monod_params, m_cells=128, n_max=30)
        b = qsd(monod_params, m_cells=256, n_max=35)
        assert abs(b.lam - a.lam) / a.lam < 0.01

    def test_singular_death_solvable(self, singular_params):
        est = qsd(singular_params, m_cells=128, n_max=30)
        assert est.lam > 0
        assert est.residual < 1e-8

    def test_dense_fallback_agrees(self, pure_death_params):
        disc = discretize(pure_death_params, m_cells=40, n_max=2)
        A = assemble(pure_death_params, disc)
        from chemostat_qsd.qsd_spectral import _solve_dense
        dense = _solve_dense(A, disc, 1e-10, pure_death_params)
        sparse = solve(A, disc, params=pure_death_params)
        assert dense.lam == pytest.approx(sparse.lam, rel=1e-8)


@pytest.fixture(scope="module")
def desk_estimate(monod_params):
    return qsd(monod_params, m_cells=128, n_max=20)


class TestStructuralChecks:
    def test_report(self, monod_params, desk_estimate):
        tab = table(monod_params, 30)
        rep = structural_checks(desk_estimate, tab)
        assert rep["positivity_ok"]
        assert rep["no_atom_ok"]
        assert rep["mass_above_y1_ok"]
        # no atom: flanking-cell mass shrinks under refinement
        for rs in rep["atom_mass_ratios"].values():
            assert all(v < 1.5 for v in rs.values())


class TestDriftCondition:
    def test_desk_pair_exists(self, monod_params):
        out = drift_condition(monod_params, alpha=0.3, a0=1.0)
        assert out is not None
        A, N0 = out
        assert A > 0 and N0 >= 0

    def test_precondition(self, monod_params):
        with pytest.raises(PreconditionViolated):
            drift_condition(monod_params, alpha=-0.1, a0=1.0)
        with pytest.raises(PreconditionViolated):
            # alpha y_star too large for this a0
            drift_condition(monod_params, alpha=2.0, a0=0.1)

    def test_small_alpha_limit(self, pure_death_params):
        # alpha -> 0 with b = 0: Xi -> (D + d)(e^{-a0} - 1) < 0 uniformly,
        # so the bound holds from small N0 on.  (With b > 0 the term
        # b (e^{a0} - 1) survives the limit and only large n compensates.)
        out = drift_condition(pure_death_params, alpha=1e-4, a0=1.0)
        assert out is not None
        _, N0 = out
        assert N0 <= 5

    def test_n0_not_constrained_at_zero(self, monod_params):
        # the bound is only required for large n; Xi(0, y) may be positive
        p = monod_params
        alpha, a0 = 0.3, 1.0
        y = 0.5
        xi0 = (p.b(y) * (np.exp(alpha * y + a0) - 1.0)
               + (p.D + p.d(y)) * (np.exp(-(alpha * y + a0)) - 1.0)
               + p.D * alpha * (p.y_star - y))
        out = drift_condition(p, alpha=alpha, a0=a0)
        assert out is not None
        assert xi0 > 0  # n = 0 violates the bound, which is allowed
