"""CLI surface: schemas, determinism, exit codes, negative controls."""

import pytest

from lamopt.cli import main
from lamopt.validate import run_checks


def read(path):
    return path.read_text().splitlines()


class TestFigures:
    def test_fig6_schema_and_coverage(self, tmp_path):
        out = tmp_path / "fig6.csv"
        assert main(["fig6", "--out", str(out)]) == 0
        lines = read(out)
        assert lines[0] == "k,var_eta_s2,lambda_per_hr,T_galerkin"
        # 19 concentrations x 2 variances x 5 rates
        assert len(lines) - 1 == 19 * 2 * 5

    def test_fig5_regime_columns_gated(self, tmp_path):
        out = tmp_path / "fig5.csv"
        assert main(["fig5", "--out", str(out)]) == 0
        lines = read(out)
        assert lines[0] == "k,T_galerkin,T_weak_asymptotic,T_strong_asymptotic"
        rows = [l.split(",") for l in lines[1:]]
        weak_rows = [r for r in rows if r[2]]
        strong_rows = [r for r in rows if r[3]]
        assert weak_rows and strong_rows
        assert all(float(r[0]) < 0.1 for r in weak_rows)
        assert all(float(r[0]) > 0.05 for r in strong_rows)
        # mid-range concentrations always have the general column
        assert all(r[1] for r in rows)

    def test_rerun_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["fig5", "--out", str(a)])
        main(["fig5", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestOptimizeAndSimulate:
    def test_optimize_row(self, tmp_path):
        out = tmp_path / "opt.csv"
        assert main(["optimize", "--out", str(out),
                     "--provider", "asymptotic"]) == 0
        header, row = read(out)
        assert header.startswith("k,lambda_per_hr,provider,x_opt_km,R_opt_km")
        fields = row.split(",")
        assert fields[2] == "asymptotic"
        assert float(fields[4]) > 0

    def test_simulate_episode(self, tmp_path):
        cfg = tmp_path / "scen.cfg"
        cfg.write_text("k = 20\nlambda_per_hr = 0.2\nstrategy = optimal\n"
                       "duration_hr = 30\nseed = 5\n")
        out = tmp_path / "ep.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        header, row = read(out)
        assert header.split(",")[:4] == ["strategy", "k", "lambda_per_hr",
                                         "duration_hr"]
        assert row.split(",")[0] == "optimal"

    def test_simulate_ctrw_mode(self, tmp_path):
        out = tmp_path / "mc.csv"
        assert main(["simulate", "--out", str(out), "--mode", "ctrw",
                     "--trials", "2000", "--x-km", "0.0"]) == 0
        header, row = read(out)
        assert header == ("k,lambda_per_hr,x_km,R_km,mean_T_hr,ci_half_width,"
                          "n,censored_count")
        assert int(row.split(",")[6]) == 2000

    def test_simulate_seed_changes_bytes(self, tmp_path):
        cfg = tmp_path / "scen.cfg"
        cfg.write_text("k = 20\nlambda_per_hr = 0.2\nduration_hr = 20\n")
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        main(["simulate", "--config", str(cfg), "--out", str(a), "--seed", "1"])
        main(["simulate", "--config", str(cfg), "--out", str(b), "--seed", "1"])
        main(["simulate", "--config", str(cfg), "--out", str(c), "--seed", "2"])
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_config_error_exit_code(self, tmp_path):
        out = tmp_path / "x.csv"
        assert main(["optimize", "--config", "/no/such/file",
                     "--out", str(out)]) == 2
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense_key = 3\n")
        assert main(["optimize", "--config", str(bad), "--out", str(out)]) == 2


class TestValidate:
    def test_clean_run_passes(self, capsys):
        assert main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "checks passed" in out

    def test_drift_sign_injection_fails(self, capsys):
        assert main(["validate", "--inject", "flip-drift-sign"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_sigma_injection_fails_psd(self):
        results = run_checks(inject="sigma-sign-bug",
                             names={"check_diffusion_shape"})
        assert len(results) == 1
        assert not results[0].passed
        assert "PSD" in results[0].measured

    def test_report_csv(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        code = main(["validate", "--out", str(out)])
        assert code == 0
        lines = read(out)
        assert lines[0] == "check,passed,measured,expected,seconds"
        assert len(lines) > 10
