import math
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdflow import verify
from pdflow.errors import ParameterError
from pdflow.verify import ExperimentConfig, ExperimentKind, StatReport


class TestStatReport:
    def test_pass_rule(self):
        r = StatReport.compare("c", "K", 1.0, 0.1, 1.2, 0.0)
        assert r.z_score == pytest.approx(-2.0)
        assert r.passed

    def test_ks_floor(self):
        assert not StatReport.compare("c", "K", 1.0, 0.1, 1.0, ks_p=0.005).passed

    def test_tolerance(self):
        assert StatReport.tolerance("t", "K", 5e-7, 1e-6).passed
        assert not StatReport.tolerance("t", "K", 2e-6, 1e-6).passed
        assert not StatReport.tolerance("t", "K", float("nan"), 1e-6).passed

    def test_zero_error_exact(self):
        assert StatReport.compare("c", "K", 1.0, 0.0, 1.0).passed
        assert not StatReport.compare("c", "K", 1.0, 0.0, 1.1).passed

    def test_row_columns(self):
        row = StatReport.compare("c", "K", 1.0, 0.1, 1.0, provenance={"b": 2, "a": (1.0, 2.0)}).row()
        assert list(row) == verify.REPORT_COLUMNS
        assert row["params"] == "a=[1.0 2.0];b=2"
        assert row["ks_p"] == ""


class TestTwoSample:
    def test_identical_streams(self):
        x = np.random.default_rng(1).standard_normal(500)
        r = verify.two_sample_report(x, x.copy())
        assert r.z_score == 0.0 and r.passed

    def test_shifted_means_fail(self):
        g = np.random.default_rng(2)
        r = verify.two_sample_report(g.standard_normal(1000), 1.0 + g.standard_normal(1000))
        assert abs(r.z_score) > 10 and not r.passed

    def test_calibration_pass_rate(self):
        g = np.random.default_rng(3)
        rate = np.mean([verify.two_sample_report(g.standard_normal(200), g.standard_normal(200)).passed for _ in range(400)])
        # |z| <= 3 and KS p >= 0.01 jointly pass about 98.7% of null runs
        assert 0.96 <= rate <= 1.0

    def test_degenerate_variance(self):
        r = verify.two_sample_report(np.ones(40), np.ones(40))
        assert r.passed and "degenerate" in r.note
        assert not verify.two_sample_report(np.ones(40), 2 * np.ones(40)).passed

    def test_minimum_size(self):
        with pytest.raises(ParameterError):
            verify.two_sample_report(np.zeros(10), np.zeros(40))


class TestDysonMax:
    @pytest.mark.parametrize("nu, y", [(0.5, 1.0), (2.0, 0.3), (1.3, 4.0)])
    def test_scalar_reduction(self, nu, y):
        assert verify.dyson_max_cdf([nu], [y]) == pytest.approx(1 - math.exp(-2 * nu * y), abs=1e-12)

    def test_limit_at_infinity(self):
        assert verify.dyson_max_cdf([2.0, 1.0], [60.0, 40.0]) == pytest.approx(1.0, abs=1e-12)

    def test_in_unit_interval(self):
        v = verify.dyson_max_cdf([2.0, 1.0], [2.0, 1.0])
        assert 0.0 <= v <= 1.0

    def test_input_checks(self):
        with pytest.raises(ParameterError):
            verify.dyson_max_cdf([1.0, 2.0], [2.0, 1.0])
        with pytest.raises(ParameterError):
            verify.dyson_max_cdf([1.0], [-1.0])

    @given(st.floats(0.2, 3.0), st.floats(0.05, 2.0), st.floats(0.1, 3.0), st.floats(0.05, 1.0), st.integers(0, 1), st.floats(0.01, 0.5))
    def test_monotone_in_each_coordinate(self, nu2, dnu, y2, dy, which, bump):
        nu = [nu2 + dnu, nu2]
        y = [y2 + dy, y2]
        base = verify.dyson_max_cdf(nu, y)
        up = list(y)
        up[which] += bump
        if which == 1 and up[1] >= up[0]:
            return
        assert verify.dyson_max_cdf(nu, up) >= base - 1e-12

    def test_survival_mc_n1(self):
        alive, plus = verify.dyson_survival_mc([1.0], [0.5], 10.0, 1e-2, np.random.default_rng(4), 20000)
        p = plus / 20000
        ref = 1 - math.exp(-2 * 1.0 * 0.5)
        assert abs(p - ref) / math.sqrt(ref * (1 - ref) / 20000) < 3.5


class TestExperimentConfig:
    def test_defaults_filled(self):
        c = ExperimentConfig("DUFRESNE")
        assert (c.n, c.nu, c.paths, c.h) == (2, 2.0, 4000, 1e-3)

    def test_quick_shrinks_paths(self):
        assert ExperimentConfig("DUFRESNE", quick=True).paths == 500

    def test_burke_hypothesis(self):
        with pytest.raises(ParameterError, match=r"2\(λ−ν\)>n−1"):
            ExperimentConfig("BURKE_OUTPUT", n=2, lam=(1.0,), nu=1.0)

    def test_dufresne_parameter(self):
        with pytest.raises(ParameterError):
            ExperimentConfig("DUFRESNE", n=3, nu=0.5)


class TestDispatch:
    def test_every_kind_registered(self):
        assert set(verify.EXPERIMENTS) == set(ExperimentKind)

    def test_acceptance_covers_thirteen_criteria(self):
        assert sorted(verify.ACCEPTANCE) == list(range(1, 14))
        covered = {k for _, kinds in verify.ACCEPTANCE.values() for k in kinds}
        assert covered.isdisjoint(verify.SUPPLEMENTARY)
        assert covered | set(verify.SUPPLEMENTARY) == set(ExperimentKind)

    def test_errors_carry_experiment_context(self, monkeypatch):
        def boom(cfg):
            raise ParameterError("bad")

        monkeypatch.setitem(verify.EXPERIMENTS, ExperimentKind.STADE, boom)
        with pytest.raises(verify.ExperimentError, match="STADE: ParameterError: bad") as info:
            verify.run_experiment(ExperimentConfig("STADE"))
        assert isinstance(info.value.cause, ParameterError)

    def test_deterministic(self):
        a = verify.run_experiment(ExperimentConfig("DRESSING"))
        b = verify.run_experiment(ExperimentConfig("DRESSING"))
        assert verify.results_csv(a) == verify.results_csv(b)

    def test_dressing_passes(self):
        reports = verify.run_experiment(ExperimentConfig("DRESSING"))
        assert verify.experiment_passed(reports)
        assert all(r.estimate <= 1e-12 for r in reports if "residual" in r.check and "perturbed" not in r.check)

    def test_acceptance_status_not_run(self):
        status = verify.acceptance_status({ExperimentKind.STADE: verify.run_experiment(ExperimentConfig("STADE"))})
        assert status[1] is None


class TestDufresneScalar:
    def test_n1_law(self):
        # at n = 1 the limit law is inverse gamma with shape nu and scale 1, mean 1/(nu - 1)
        reports = verify.run_experiment(ExperimentConfig("DUFRESNE", n=1, nu=2.0, paths=4000))
        assert verify.experiment_passed(reports)
        tr = reports[0]
        assert tr.reference == pytest.approx(1.0, rel=0.1)
        assert tr.provenance["truncation_T"] > 0


class TestOutput:
    def test_csv_header(self):
        text = verify.results_csv([StatReport.compare("c", "K", 1.0, 0.1, 1.0)])
        lines = text.splitlines()
        assert lines[0] == "# pdflow-report v1"
        assert lines[1] == ",".join(verify.REPORT_COLUMNS)
        assert lines[2].startswith("K,c,")

    def test_report_text_lists_criteria(self):
        results = {k: [StatReport.tolerance("x", k.value, 0.0, 1.0)] for k in ExperimentKind}
        text = verify.report_text(results)
        for num, (title, _) in verify.ACCEPTANCE.items():
            assert f"{num:2d}. PASS {title}" in text

    def test_atomic_write(self, tmp_path):
        p = tmp_path / "a.txt"
        verify.atomic_write(p, "hello\n")
        assert p.read_text() == "hello\n"
        assert os.listdir(tmp_path) == ["a.txt"]

    def test_atomic_write_failure_leaves_nothing(self, tmp_path):
        with pytest.raises(OSError):
            verify.atomic_write(tmp_path / "missing" / "a.txt", "x")
        assert os.listdir(tmp_path) == []


@pytest.mark.parametrize("kind", ["CALCULUS_IDENTITIES", "STADE", "WHITTAKER_MARGINAL", "INTERTWINING_BURKE", "INTERTWINING_MY", "INTERTWINING_SYM", "INTERTWINING_NCT", "INTERTWINING_HG"])
def test_fast_experiments_pass(kind):
    assert verify.experiment_passed(verify.run_experiment(ExperimentConfig(kind)))
