"""End-to-end tests for the experiment driver: config, CSV, exit codes."""

import argparse
import math

import numpy as np
import pytest

from freemult import __version__
from freemult.cli import (
    ExperimentConfig,
    _trial_seed,
    build_config,
    main,
    parse_config,
    write_csv,
)
from freemult.errors import SolverError
import freemult.cli as cli_module


def namespace(**overrides) -> argparse.Namespace:
    """Flag namespace with nothing overridden unless asked."""
    base = dict(seed=None, out=None, n_grid=None, N=None, r=None, svg=False, workers=None)
    base.update(overrides)
    return argparse.Namespace(**base)


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def config_text(**overrides) -> str:
    """Baseline Rademacher + quadratic-profile run, selectively overridden."""
    entries = {
        "xlaw": "rademacher",
        "sigma": "1.0",
        "g": "poly:1,1,0.5",
        "n_grid": "16,64,256,1024",
        "N": "32",
        "trials": "2",
        "seed": "0",
        "r_values": "1",
    }
    entries.update(overrides)
    return "".join(f"{key} = {value}\n" for key, value in entries.items())


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1].split(","), [line.split(",") for line in lines[2:]]


class TestParseConfig:
    def test_round_trip(self, tmp_path):
        path = write_config(tmp_path, "a = 1\nb = hello world\n")
        assert parse_config(path) == {"a": "1", "b": "hello world"}

    def test_comments_and_blanks(self, tmp_path):
        path = write_config(tmp_path, "# top\n\nseed = 3   # trailing\n   \n")
        assert parse_config(path) == {"seed": "3"}

    def test_empty_is_usage_error(self, tmp_path):
        path = write_config(tmp_path, "# only a comment\n")
        with pytest.raises(ValueError, match="empty"):
            parse_config(path)

    def test_missing_separator(self, tmp_path):
        path = write_config(tmp_path, "seed 3\n")
        with pytest.raises(ValueError, match="key = value"):
            parse_config(path)

    def test_duplicate_key(self, tmp_path):
        path = write_config(tmp_path, "seed = 1\nseed = 2\n")
        with pytest.raises(ValueError, match="duplicate"):
            parse_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="cannot read"):
            parse_config(str(tmp_path / "nope.cfg"))


class TestBuildConfig:
    def test_defaults(self):
        cfg = build_config({"seed": "5"}, namespace())
        assert cfg.seed == 5
        assert cfg.n_grid == (4, 8, 16, 32)
        assert cfg.N == 64
        assert cfg.r_values == (1.0,)
        assert cfg.xlaw.kind == "rademacher"
        assert cfg.g.kind == "polynomial"
        assert not cfg.svg

    def test_flags_override_file(self):
        raw = {"seed": "1", "N": "16", "n_grid": "2,4", "r_values": "1", "out": "a"}
        args = namespace(seed=9, N=128, n_grid="8,16,32", r="1,2", out="b", svg=True, workers=3)
        cfg = build_config(raw, args)
        assert cfg.seed == 9
        assert cfg.N == 128
        assert cfg.n_grid == (8, 16, 32)
        assert cfg.r_values == (1.0, 2.0)
        assert str(cfg.out) == "b"
        assert cfg.svg
        assert cfg.workers == 3

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys: sigmma"):
            build_config({"sigmma": "1"}, namespace())

    def test_law_builders(self):
        semi = build_config({"xlaw": "semicircle", "sigma": "0.5"}, namespace())
        assert semi.xlaw.variance == pytest.approx(0.25)
        two = build_config({"xlaw": "two_point", "p": "0.8", "a": "-0.5", "b": "2"}, namespace())
        assert two.xlaw.atoms == (-0.5, 2.0)
        atomic = build_config(
            {"xlaw": "atomic", "atoms": "-1:0.5, 1:0.5", "g": "exp"}, namespace()
        )
        assert atomic.xlaw.moment(2) == pytest.approx(1.0)
        assert atomic.g.kind == "exp"

    def test_bad_atom_entry(self):
        with pytest.raises(ValueError, match="value:weight"):
            build_config({"xlaw": "atomic", "atoms": "1;0.5"}, namespace())

    def test_unknown_profile(self):
        with pytest.raises(ValueError, match="unknown profile"):
            build_config({"g": "cubic"}, namespace())

    def test_bad_poly_coefficients(self):
        with pytest.raises(ValueError, match="must be numbers"):
            build_config({"g": "poly:1,x"}, namespace())

    def test_grid_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            build_config({"n_grid": "8,4"}, namespace())

    def test_r_floor(self):
        with pytest.raises(ValueError, match=">= 1"):
            build_config({"r_values": "0.5"}, namespace())

    def test_mode_law_mismatch(self):
        with pytest.raises(ValueError, match="semicircle"):
            build_config({"mode": "gue", "xlaw": "rademacher"}, namespace())

    def test_bad_bool(self):
        with pytest.raises(ValueError, match="boolean"):
            build_config({"svg": "maybe"}, namespace())

    def test_auto_mode_follows_law(self):
        assert build_config({"xlaw": "semicircle"}, namespace()).ensemble_mode() == "gue"
        assert (
            build_config({"xlaw": "rademacher"}, namespace()).ensemble_mode()
            == "haar_conjugated_diagonal"
        )


class TestCsvWriter:
    def test_header_and_float_round_trip(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, "cumulants", ("a", "b"), [(1, 0.1), (2, 1.0 / 3.0)])
        first, header, rows = read_csv(path)
        assert first == f"# freemult-lab v{__version__} cumulants"
        assert header == ["a", "b"]
        assert float(rows[0][1]) == 0.1
        assert float(rows[1][1]) == 1.0 / 3.0

    def test_numpy_floats_not_leaked(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, "x", ("v",), [(np.float64(0.25),)])
        assert path.read_text().splitlines()[2] == "0.25"


class TestTrialSeed:
    def test_deterministic_and_distinct(self):
        a = _trial_seed(0, 8, 0)
        assert a == _trial_seed(0, 8, 0)
        others = {_trial_seed(0, 8, 1), _trial_seed(0, 16, 0), _trial_seed(1, 8, 0)}
        assert a not in others
        assert 0 <= a < 2**64


class TestCumulantsCommand:
    def test_runs_and_reports_residual_decay(self, tmp_path):
        cfg = write_config(tmp_path, config_text(out=tmp_path / "out"))
        assert main(["cumulants", "--config", cfg]) == 0
        first, header, rows = read_csv(tmp_path / "out" / "cumulants.csv")
        assert first.endswith(" cumulants")
        assert header == ["k", "n", "yn_cumulant", "limit_cumulant", "residual"]
        k2 = [abs(float(r[4])) for r in rows if r[0] == "2"]
        assert k2 == sorted(k2, reverse=True)
        assert k2[0] > k2[-1]

    def test_constant_profile_has_zero_residuals(self, tmp_path):
        cfg = write_config(
            tmp_path, f"g = one\nn_grid = 2,4,8\nout = {tmp_path / 'out'}\n"
        )
        assert main(["cumulants", "--config", cfg]) == 0
        _, _, rows = read_csv(tmp_path / "out" / "cumulants.csv")
        assert all(float(r[4]) == 0.0 for r in rows)

    def test_exp_half_sigma_limit_column(self, tmp_path):
        cfg = write_config(
            tmp_path,
            f"xlaw = rademacher\nsigma = 0.5\ng = exp\nn_grid = 2,4\nout = {tmp_path / 'o'}\n",
        )
        assert main(["cumulants", "--config", cfg]) == 0
        _, _, rows = read_csv(tmp_path / "o" / "cumulants.csv")
        k1 = [float(r[3]) for r in rows if r[0] == "1"]
        assert k1[0] == pytest.approx(math.exp(0.5), rel=1e-12)


class TestLimitLawCommand:
    def test_tables_and_figure(self, tmp_path):
        cfg = write_config(tmp_path, config_text(out=tmp_path / "out", svg="true"))
        assert main(["limit-law", "--config", cfg]) == 0
        _, header, rows = read_csv(tmp_path / "out" / "limit_law.csv")
        assert header == ["law", "x", "pdf", "cdf"]
        labels = {r[0] for r in rows}
        assert labels == {"log", "singular"}
        svg = (tmp_path / "out" / "limit_law.svg").read_text()
        assert svg.startswith("<?xml")

    def test_mass_symmetry_and_second_moment(self, tmp_path):
        cfg = write_config(tmp_path, config_text(out=tmp_path / "out"))
        assert main(["limit-law", "--config", cfg]) == 0
        _, _, rows = read_csv(tmp_path / "out" / "limit_law.csv")
        for label in ("log", "singular"):
            cdf = [float(r[3]) for r in rows if r[0] == label]
            assert cdf[-1] == pytest.approx(1.0, abs=1e-3)
        log_pdf = np.array([float(r[2]) for r in rows if r[0] == "log"])
        assert np.max(np.abs(log_pdf - log_pdf[::-1])) <= 1e-6
        x = np.array([float(r[1]) for r in rows if r[0] == "singular"])
        pdf = np.array([float(r[2]) for r in rows if r[0] == "singular"])
        # E s^2 equals the first limit cumulant e^{c2/2}; sigma_ho = 1 here
        assert np.trapezoid(x * x * pdf, x) == pytest.approx(math.exp(2.0), rel=1e-3)

    def test_off_normalization_model_is_config_error(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path, f"g = poly:1,1\nn_grid = 2,4\nout = {tmp_path / 'o'}\n"
        )
        assert main(["limit-law", "--config", cfg]) == 2
        assert "exp-normalized" in capsys.readouterr().err


class TestConvergenceCommand:
    def test_files_and_rate_columns(self, tmp_path):
        cfg = write_config(
            tmp_path, config_text(out=tmp_path / "out", n_grid="4,8,16,32", N="24")
        )
        assert main(["convergence", "--config", cfg]) == 0
        out = tmp_path / "out"
        _, header, rows = read_csv(out / "convergence_matrix.csv")
        assert header == [
            "n", "N", "r", "trial", "kolmogorov", "wasserstein", "zolotarev_lb",
            "predicted_beta1", "fitted_beta1",
        ]
        assert len(rows) == 4 * 2  # grid x trials, one r
        assert all(0.0 <= float(r[4]) <= 1.0 for r in rows)
        # Zolotarev never exceeds W_1 (duality, same representation)
        assert all(float(r[6]) <= float(r[5]) + 1e-9 for r in rows)
        _, _, exact = read_csv(out / "convergence_exact.csv")
        assert {r[0] for r in exact} == {"1", "2", "3"}
        _, _, rates = read_csv(out / "rates.csv")
        exact_fits = [float(r[3]) for r in rates if r[0] == "exact"]
        assert all(f >= 0.4 for f in exact_fits)
        matrix_rows = [r for r in rates if r[0] == "matrix"]
        assert matrix_rows[0][2] == "0.1"  # rate table at r=1, gamma=1
        _, _, spectra = read_csv(out / "spectra.csv")
        assert len(spectra) == 4 * 2 * 24

    def test_byte_identical_across_worker_counts(self, tmp_path):
        cfg = write_config(tmp_path, config_text(n_grid="4,8,16,32", N="16"))
        outs = []
        for tag, workers in (("a", "1"), ("b", "4"), ("c", "1")):
            out = tmp_path / tag
            code = main(
                ["convergence", "--config", cfg, "--out", str(out), "--workers", workers]
            )
            assert code == 0
            outs.append(out)
        names = [
            "convergence_exact.csv", "convergence_matrix.csv", "spectra.csv", "rates.csv"
        ]
        for name in names:
            reference = (outs[0] / name).read_bytes()
            assert (outs[1] / name).read_bytes() == reference
            assert (outs[2] / name).read_bytes() == reference

    def test_constant_profile_gives_zero_exact_route(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            f"g = one\nn_grid = 2,4,8\nN = 8\ntrials = 1\nout = {tmp_path / 'o'}\n",
        )
        assert main(["convergence", "--config", cfg]) == 0
        # no limit density for a flat profile, so only the exact route reports
        assert "matrix route skipped" in capsys.readouterr().out
        assert not (tmp_path / "o" / "convergence_matrix.csv").exists()
        _, _, exact = read_csv(tmp_path / "o" / "convergence_exact.csv")
        assert all(float(r[2]) == 0.0 for r in exact)
        _, _, rates = read_csv(tmp_path / "o" / "rates.csv")
        exact_rates = [r for r in rates if r[0] == "exact"]
        assert exact_rates and all(r[3] == "inf" for r in exact_rates)

    def test_exact_route_skipped_without_closed_form(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            f"xlaw = semicircle\nsigma = 0.5\ng = exp\nn_grid = 2,4\nN = 8\n"
            f"trials = 1\nout = {tmp_path / 'o'}\n",
        )
        assert main(["convergence", "--config", cfg]) == 0
        assert "exact route skipped" in capsys.readouterr().out
        assert not (tmp_path / "o" / "convergence_exact.csv").exists()
        assert (tmp_path / "o" / "convergence_matrix.csv").exists()


class TestVerifyCommand:
    def test_default_suite_passes(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "seed = 0\n")
        assert main(["verify", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert out.count(": PASS") == 7
        assert "verify: 7/7 checks passed" in out

    def test_failing_check_sets_exit_code(self, tmp_path, capsys, monkeypatch):
        cfg = write_config(tmp_path, "seed = 0\n")
        broken = (("stub", lambda cfg_: (False, "forced failure")),)
        monkeypatch.setattr(cli_module, "_VERIFY_CHECKS", broken)
        assert main(["verify", "--config", cfg]) == 1
        assert "stub: FAIL" in capsys.readouterr().out

    def test_numeric_error_maps_to_exit_three(self, tmp_path, capsys, monkeypatch):
        cfg = write_config(tmp_path, "seed = 0\n")

        def explode(cfg_):
            raise SolverError("fixed point diverged")

        monkeypatch.setitem(cli_module._COMMANDS, "verify", (explode, "doc"))
        assert main(["verify", "--config", cfg]) == 3
        assert "fixed point diverged" in capsys.readouterr().err


class TestUsageErrors:
    def test_empty_config_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "# nothing here\n")
        assert main(["verify", "--config", cfg]) == 2
        assert "empty" in capsys.readouterr().err

    def test_corrupted_value_exits_two_with_diagnostic(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "N = minus two\n")
        assert main(["cumulants", "--config", cfg]) == 2
        assert "must be an integer" in capsys.readouterr().err

    def test_help_documents_columns(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["convergence", "--help"])
        assert exc.value.code == 0
        assert "kolmogorov" in capsys.readouterr().out

    def test_missing_subcommand_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
