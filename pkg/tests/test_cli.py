import os
import subprocess
import sys

import numpy as np
import pytest

from pdflow import cli
from pdflow.errors import ConfigError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestParseIni:
    def test_sections_and_lines(self):
        raw = cli.parse_ini("# c\n[system]\nn = 2\n\n[stepper]\nh=0.01\n")
        assert raw["system"]["n"] == cli.Entry("2", 3)
        assert raw["stepper"]["h"].lineno == 6

    def test_duplicate_key_names_both_lines(self):
        with pytest.raises(ConfigError, match=r"line 5: duplicate key 'n' \(lines 2 and 5\)"):
            cli.parse_ini("[system]\nn = 2\nkind = DOOB_BM\n# x\nn = 3\n")

    def test_duplicate_section(self):
        with pytest.raises(ConfigError, match="lines 1 and 3"):
            cli.parse_ini("[system]\nn = 1\n[system]\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="line 1: unknown section"):
            cli.parse_ini("[solver]\n")

    def test_entry_outside_section(self):
        with pytest.raises(ConfigError, match="line 1"):
            cli.parse_ini("n = 2\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            cli.parse_ini("[system]\njust words\n")


class TestParseConfig:
    def test_minimal_dufresne_defaults(self):
        cfg = cli.parse_config("[experiment]\nkind = DUFRESNE\n")
        assert isinstance(cfg, cli.VerifyConfig)
        assert cfg.experiment.h == 1e-3
        assert cfg.experiment.paths == 4000

    def test_burke_pair_rejected(self):
        text = "[system]\nkind = BURKE_PAIR\nn = 2\nlambda = 1\nnu = 1\n"
        with pytest.raises(ConfigError, match=r"requires 2\(λ−ν\)>n−1") as info:
            cli.parse_config(text)
        assert info.value.lineno == 4

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="line 3: unknown key 'foo'"):
            cli.parse_config("[system]\nkind = DOOB_BM\nfoo = 1\n")

    def test_key_not_used_by_command(self):
        with pytest.raises(ConfigError, match="line 4: key 'scheme' in \\[stepper\\] is not used"):
            cli.parse_config("[experiment]\nkind = STADE\n[stepper]\nscheme = EULER_PROJECTED\n")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="line 3: .*expected integer"):
            cli.parse_config("[system]\nkind = DOOB_BM\nn = two\n")

    def test_non_integer_count(self):
        with pytest.raises(ConfigError, match="expected integer"):
            cli.parse_config("[system]\nkind = DOOB_BM\n[experiment]\npaths = 2.5\n")

    def test_simulate_defaults(self):
        cfg = cli.parse_config("[system]\nkind = DOOB_BM\nn = 2\nnu = 1.5\n")
        assert isinstance(cfg, cli.SimulateConfig)
        assert cfg.stepper.h == 1e-3 and cfg.paths == 4000
        np.testing.assert_array_equal(cfg.x0, np.eye(2)[None])

    def test_x0_must_be_pd(self):
        with pytest.raises(ConfigError, match="line 4: .*x0"):
            cli.parse_config("[system]\nkind = DOOB_BM\nn = 1\nx0 = -1\n")

    def test_functionals(self):
        cfg = cli.parse_config("[system]\nkind = DOOB_BM\nn = 2\n[experiment]\nfunctionals = INT_TRACE:0 LOG_EIG:0:1\n")
        assert [f.kind.value for f in cfg.functionals] == ["INT_TRACE", "LOG_EIG"]

    def test_functional_index_checked(self):
        with pytest.raises(ConfigError, match="line 5"):
            cli.parse_config("[system]\nkind = DOOB_BM\nn = 2\n[experiment]\nfunctionals = LOG_EIG:0:5\n")

    def test_specfun_inferred(self):
        cfg = cli.parse_config("[system]\nnu = 0.5\n[experiment]\nfunction = bessel_b\nX = 2 | 0.5\n")
        assert isinstance(cfg, cli.SpecfunConfig) and cfg.function == "bessel_B"

    def test_toda_inferred(self):
        cfg = cli.parse_config("[system]\nn = 2\nN = 3\nlambda = 0.6 0.1 -0.5\n")
        assert isinstance(cfg, cli.TodaConfig) and cfg.init == "critical"

    def test_matrix_syntax(self):
        assert len(cli._matrices("2 0; 0 1 | 3 1; 1 3")) == 2
        with pytest.raises(ValueError):
            cli._matrices("1 2 3; 4 5 6")


class TestMain:
    def test_simulate_zero_horizon(self, tmp_path):
        cfg = write(tmp_path, "s.ini", "[system]\nkind = DOOB_BM\nn = 2\nnu = 1.5\n[experiment]\nT = 0\npaths = 3\n")
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(out), "-q"]) == 0
        lines = (out / "path_0000.csv").read_text().splitlines()
        assert lines[0] == "# pdflow-path v1"
        assert {ln.split(",")[0] for ln in lines[2:]} == {"0.0"}
        assert len(lines) == 2 + 4
        assert sorted(os.listdir(out)) == ["path_0000.csv", "report.txt", "results.csv"]

    def test_bad_output_path(self, tmp_path):
        cfg = write(tmp_path, "s.ini", "[system]\nkind = DOOB_BM\n[experiment]\nT = 0\npaths = 1\n")
        bad = tmp_path / "no" / "such" / "dir"
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(bad), "-q"]) == 2
        assert not (tmp_path / "no").exists()

    def test_config_error_exit(self, tmp_path):
        cfg = write(tmp_path, "b.ini", "[system]\nkind = BURKE_PAIR\nn = 2\nlambda = 1\nnu = 1\n")
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(out), "-q"]) == 2
        assert not out.exists()

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "nope.ini"), "-q"]) == 2

    def test_usage_error(self):
        assert cli.main(["frobnicate"]) == 2

    def test_verify_pass_and_determinism(self, tmp_path):
        cfg = write(tmp_path, "v.ini", "[experiment]\nkind = STADE\n")
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["verify", "--kind", "STADE", "--config", cfg, "--output-dir", str(a), "-q"]) == 0
        assert cli.main(["verify", "--kind", "STADE", "--config", cfg, "--output-dir", str(b), "-q"]) == 0
        assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
        assert (a / "report.txt").read_bytes() == (b / "report.txt").read_bytes()
        assert (a / "results.csv").read_text().startswith("# pdflow-report v1\n")

    def test_verify_check_failure_exit(self, tmp_path):
        # a zero z threshold fails any Monte Carlo comparison
        cfg = write(tmp_path, "v.ini", "[experiment]\nkind = BURKE_OUTPUT\npaths = 200\nz_threshold = 0\n")
        out = tmp_path / "o"
        assert cli.main(["verify", "--kind", "BURKE_OUTPUT", "--config", cfg, "--output-dir", str(out), "-q"]) == 1
        assert "FAIL" in (out / "report.txt").read_text()

    def test_verify_kind_mismatch(self, tmp_path):
        cfg = write(tmp_path, "v.ini", "[experiment]\nkind = STADE\n")
        assert cli.main(["verify", "--kind", "CASCADE", "--config", cfg, "-q", "--output-dir", str(tmp_path / "o")]) == 2

    def test_numeric_failure_exit(self, tmp_path):
        cfg = write(tmp_path, "c.ini", "[experiment]\nfunction = c_s\ns = 0.3\n")
        out = tmp_path / "o"
        assert cli.main(["specfun-eval", "--config", cfg, "--output-dir", str(out), "-q"]) == 3
        text = (out / "report.txt").read_text()
        assert "DomainError" in text
        assert not (out / "results.csv").exists()

    def test_specfun_eval(self, tmp_path):
        cfg = write(tmp_path, "d.ini", "[experiment]\nfunction = dyson_max_cdf\nnu_vec = 1.5\ny = 0.4\n")
        out = tmp_path / "o"
        assert cli.main(["specfun-eval", "--config", cfg, "--output-dir", str(out), "-q"]) == 0
        row = (out / "results.csv").read_text().splitlines()[2].split(",")
        assert row[0] == "dyson_max_cdf"
        assert float(row[2]) == pytest.approx(1 - np.exp(-2 * 1.5 * 0.4), abs=1e-12)

    def test_toda(self, tmp_path):
        cfg = write(tmp_path, "t.ini", "[system]\nn = 2\nN = 3\nlambda = 0.6 0.1 -0.5\n[experiment]\nT = 0.05\n[output]\nrecord_every = 10\n")
        out = tmp_path / "o"
        assert cli.main(["toda", "--config", cfg, "--output-dir", str(out), "-q"]) == 0
        assert (out / "results.csv").read_text().startswith("# pdflow-toda v1\n")
        assert "C_1" in (out / "report.txt").read_text()

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write(tmp_path, "s.ini", "[system]\nkind = DOOB_BM\n[experiment]\nT = 0.01\npaths = 2\n")
        a, b = tmp_path / "a", tmp_path / "b"
        cli.main(["simulate", "--config", cfg, "--output-dir", str(a), "-q", "--seed", "1"])
        cli.main(["simulate", "--config", cfg, "--output-dir", str(b), "-q", "--seed", "2"])
        assert (a / "results.csv").read_text() != (b / "results.csv").read_text()


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "v.ini", "[experiment]\nkind = STADE\n")
    r = subprocess.run([sys.executable, "-m", "pdflow", "verify", "--kind", "STADE", "--config", cfg, "--output-dir", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "wrote report.txt, results.csv" in r.stderr
