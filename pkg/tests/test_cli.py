import csv
import json
import math

import pytest

from chemostat_qsd import cli

DESK_CFG = """\
[model]
D = 1.0
y_star = 1.0
R = 1.0
eta = 0.0

[birth]
kind = monod
b_inf = 5.0
K = 1.0

[death]
kind = constant
d = 1.0
"""


@pytest.fixture()
def cfg(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text(DESK_CFG)
    return str(path)


def _read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


class TestParseConfig:
    def test_roundtrip(self, cfg):
        p = cli.parse_config(cfg)
        assert p.D == 1.0 and p.y_star == 1.0 and p.eta == 0.0
        assert p.b(1.0) == pytest.approx(2.5)
        assert p.d(0.5) == 1.0

    def test_defaults(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("[model]\nD = 2\ny_star = 3\n"
                        "[birth]\nb_inf = 1\nK = 1\n"
                        "[death]\nd = 1\n")
        p = cli.parse_config(str(path))
        assert p.R == 1.0 and p.eta == 0.0

    def test_table_birth(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("[model]\nD = 1\ny_star = 1\n"
                        "[birth]\nkind = table\ny = 0 1 2\nb = 0 2 3\n"
                        "[death]\nd = 1\n")
        p = cli.parse_config(str(path))
        assert p.b(0.5) == pytest.approx(1.0)

    def test_singular_death(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("[model]\nD = 1\ny_star = 1\n"
                        "[birth]\nb_inf = 5\nK = 1\n"
                        "[death]\nkind = singular\nd0 = 0.5\nc = 0.5\n"
                        "sigma = 0.5\nhard = true\n")
        p = cli.parse_config(str(path))
        assert p.death.infinite_at_zero
        assert p.d(0.25) == pytest.approx(0.5 + 0.5 / 0.5)

    def test_missing_file(self):
        with pytest.raises(cli.ParseError):
            cli.parse_config("/nonexistent/model.cfg")

    def test_no_config(self):
        with pytest.raises(cli.ParseError):
            cli.parse_config(None)

    def test_syntax_error(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("D = 1\n")  # key before any section header
        with pytest.raises(cli.ParseError):
            cli.parse_config(str(path))

    @pytest.mark.parametrize("body,fragment", [
        ("[birth]\nb_inf = 5\nK = 1\n[death]\nd = 1\n", "[model]"),
        ("[model]\ny_star = 1\n[birth]\nb_inf = 5\nK = 1\n"
         "[death]\nd = 1\n", "'D'"),
        ("[model]\nD = 1\ny_star = 1\n[death]\nd = 1\n", "[birth]"),
        ("[model]\nD = 1\ny_star = 1\n[birth]\nb_inf = 5\nK = 1\n",
         "[death]"),
        ("[model]\nD = 1\ny_star = 1\neta = -0.5\n"
         "[birth]\nb_inf = 5\nK = 1\n[death]\nd = 1\n", "eta"),
        ("[model]\nD = 1\ny_star = 1\n[birth]\nkind = weird\n"
         "[death]\nd = 1\n", "unknown kind"),
        ("[model]\nD = 1\ny_star = 1\n[birth]\nb_inf = 5\nK = 1\n"
         "[death]\nkind = singular\nd0 = 1\nc = 1\nsigma = 1.2\n", "sigma"),
        ("[model]\nD = abc\ny_star = 1\n[birth]\nb_inf = 5\nK = 1\n"
         "[death]\nd = 1\n", "not a number"),
    ])
    def test_validation_errors(self, tmp_path, body, fragment):
        path = tmp_path / "m.cfg"
        path.write_text(body)
        with pytest.raises(cli.ValidationError, match=None) as exc:
            cli.parse_config(str(path))
        assert fragment.strip("[]'") in str(exc.value)


class TestExitCodes:
    def test_config_error_is_3(self, tmp_path, capsys):
        rc = cli.main(["equilibria", "--config", "/nope.cfg",
                       "--out", str(tmp_path)])
        assert rc == 3
        assert "config error" in capsys.readouterr().err

    def test_bad_sigma_is_3(self, tmp_path, capsys):
        path = tmp_path / "m.cfg"
        path.write_text("[model]\nD = 1\ny_star = 1\n"
                        "[birth]\nb_inf = 5\nK = 1\n"
                        "[death]\nkind = singular\nd0 = 1\nc = 1\n"
                        "sigma = 1.5\n")
        rc = cli.main(["equilibria", "--config", str(path),
                       "--out", str(tmp_path / "out")])
        assert rc == 3


class TestEquilibria:
    def test_output_schema(self, cfg, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["equilibria", "--config", cfg, "--n-max", "10",
                       "--out", str(out), "--quiet"])
        assert rc == 0
        header, rows = _read_csv(out / "equilibria.csv")
        assert header == ["n", "y_n", "G_n_residual", "exists"]
        assert len(rows) == 11
        y1 = (math.sqrt(29.0) - 5.0) / 2.0
        assert float(rows[1][1]) == pytest.approx(y1, abs=1e-10)
        assert abs(float(rows[1][2])) < 1e-9
        assert all(r[3] == "1" for r in rows)

    def test_missing_roots_flagged(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("[model]\nD = 1\ny_star = 1\neta = 0.4\n"
                        "[birth]\nb_inf = 5\nK = 1\n[death]\nd = 1\n")
        out = tmp_path / "out"
        rc = cli.main(["equilibria", "--config", str(path), "--n-max", "5",
                       "--out", str(out), "--quiet"])
        assert rc == 0
        _, rows = _read_csv(out / "equilibria.csv")
        assert [r[3] for r in rows] == ["1", "1", "1", "0", "0", "0"]
        assert math.isnan(float(rows[3][1]))


class TestSimulate:
    def test_outputs(self, cfg, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["simulate", "--config", cfg, "--n0", "3",
                       "--y0", "0.4", "--horizon", "10", "--paths", "50",
                       "--sample-dt", "1.0", "--seed", "5",
                       "--out", str(out), "--quiet"])
        assert rc == 0
        header, rows = _read_csv(out / "events.csv")
        assert header == ["t", "kind", "n_after", "y_at"]
        ts = [float(r[0]) for r in rows]
        assert ts == sorted(ts)
        header, rows = _read_csv(out / "samples.csv")
        assert header == ["t", "n", "y"]
        assert len(rows) == 11
        header, rows = _read_csv(out / "survival.csv")
        assert header == ["t", "survivors", "S"]
        S = [float(r[2]) for r in rows]
        assert S[0] == 1.0
        assert all(a >= b for a, b in zip(S, S[1:]))

    def test_deterministic_bytes(self, cfg, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = cli.main(["simulate", "--config", cfg, "--horizon", "20",
                           "--paths", "20", "--seed", "3", "--out", str(out),
                           "--quiet"])
            assert rc == 0
            outs.append({f.name: f.read_bytes()
                         for f in sorted(out.iterdir())})
        assert outs[0] == outs[1]


class TestQsdSpectral:
    def test_outputs(self, cfg, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["qsd-spectral", "--config", cfg, "--cells", "64",
                       "--nmax", "10", "--out", str(out), "--quiet"])
        assert rc == 0
        with open(out / "summary.json") as fh:
            summary = json.load(fh)
        assert summary["schema_version"] == 1
        assert summary["method"] == "spectral"
        assert summary["bound_satisfied"] is True
        assert 1.0 < summary["lambda"] < 2.0
        assert summary["residual"] < 1e-8
        assert sum(summary["kappa"]) == pytest.approx(1.0, abs=1e-9)
        header, rows = _read_csv(out / "qsd.csv")
        assert header == ["n", "y_cell_center", "u_n"]
        # equilibria are inserted as extra nodes, so cells >= requested
        assert summary["cells"] >= 64
        assert len(rows) == summary["cells"] * 10
        assert all(float(r[2]) >= 0.0 for r in rows)


class TestQsdParticle:
    def test_outputs(self, cfg, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["qsd-particle", "--config", cfg,
                       "--particles", "300", "--t-end", "20",
                       "--burn-in", "5", "--cells", "32", "--nmax", "10",
                       "--seed", "8", "--out", str(out), "--quiet"])
        assert rc == 0
        with open(out / "summary.json") as fh:
            summary = json.load(fh)
        assert summary["method"] == "fleming-viot"
        assert summary["lambda"] > 0 and summary["lambda_se"] > 0
        assert summary["resamples"] > 0
        header, rows = _read_csv(out / "qsd.csv")
        assert header == ["n", "y_cell_center", "u_n", "u_n_se"]
        assert len(rows) == summary["cells"] * 10


class TestVerify:
    def test_quick_passes_and_writes_report(self, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["verify", "--quick", "--seed", "100",
                       "--out", str(out), "--quiet"])
        assert rc == 0
        with open(out / "verify.json") as fh:
            report = json.load(fh)
        assert report["passed"] is True
        assert len(report["checks"]) == 12
        for c in report["checks"]:
            assert c["passed"] is True
            assert c["name"] and c["property"]
