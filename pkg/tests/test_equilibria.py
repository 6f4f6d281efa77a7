import numpy as np
import pytest

from chemostat_qsd import ChemostatParams, BirthLaw, DeathLaw, drift, root, table


class TestRoot:
    def test_n0_is_ystar(self, monod_params):
        assert root(monod_params, 0) == monod_params.y_star

    def test_y1_quadratic_oracle(self, monod_params, y1_exact):
        # G_1 = 0 reduces to y^2 + 5y - 1 = 0 for this configuration
        assert root(monod_params, 1) == pytest.approx(y1_exact, abs=1e-12)

    def test_y2_quadratic_oracle(self, monod_params):
        # 2 b(y) = 1 - y  =>  y^2 + 10 y - 1 = 0
        exact = (np.sqrt(104.0) - 10.0) / 2.0
        assert root(monod_params, 2) == pytest.approx(exact, abs=1e-12)

    def test_no_root_above_threshold(self, maintenance_params):
        # eta = 0.4: n eta > D y_star from n = 3 on
        assert root(maintenance_params, 3) is None
        assert root(maintenance_params, 2) is not None

    def test_no_root_large_eta(self):
        p = ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=2.0,
                            birth=BirthLaw.monod(5.0, 1.0),
                            death=DeathLaw.constant(1.0))
        assert root(p, 1) is None

    def test_boundary_root_when_exact_integer(self):
        # n0 = D y_star / eta = 4 exactly: y_4 = 0
        p = ChemostatParams(D=1.0, y_star=1.0, R=1.0, eta=0.25,
                            birth=BirthLaw.monod(5.0, 1.0),
                            death=DeathLaw.constant(1.0))
        assert root(p, 4) == 0.0
        assert root(p, 5) is None

    def test_bracket_sign_change(self, monod_params):
        tol = 1e-12
        for n in (1, 2, 7):
            y = root(monod_params, n, tol=tol)
            assert drift(monod_params, n, max(y - 2 * tol, 1e-300)) > 0
            assert drift(monod_params, n, y + 2 * tol) < 0

    def test_invalid_args(self, monod_params):
        with pytest.raises(ValueError):
            root(monod_params, -1)
        with pytest.raises(ValueError):
            root(monod_params, 1, tol=0.0)


class TestTable:
    def test_strictly_decreasing(self, monod_params):
        tab = table(monod_params, 10)
        ys = [y for _, y in tab.roots]
        assert len(ys) == 11
        assert all(a > b for a, b in zip(ys, ys[1:]))
        assert tab.y(0) == monod_params.y_star
        assert tab.n_max_with_root is None and tab.n0 is None

    def test_maintenance_truncation(self, maintenance_params):
        tab = table(maintenance_params, 10)
        assert [n for n, _ in tab.roots] == [0, 1, 2]
        assert tab.n_max_with_root == 2
        assert tab.n0 == 3
        assert 2 in tab and 3 not in tab

    def test_consumption_asymptotics_monotone(self, monod_params):
        p = monod_params
        target = p.D * p.y_star * p.R
        errs = [abs(n * p.b(root(p, n)) / target - 1.0)
                for n in (10, 100, 1000)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.01

    def test_roots_accumulate_at_zero(self, monod_params):
        tab = table(monod_params, 200)
        assert tab.y(200) < 0.002

    def test_lookup_missing(self, monod_params):
        tab = table(monod_params, 3)
        with pytest.raises(KeyError):
            tab.y(7)
