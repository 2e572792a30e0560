import math

import numpy as np
import pytest

from densigraph import synth
from densigraph.errors import AllFitsFailed, DegenerateSample, NonPositiveSample
from densigraph.statfit import (
    FAMILIES,
    cdf_eval,
    fit_exponential,
    fit_gamma,
    fit_loglogistic,
    fit_normal,
    fit_weibull,
    ks_critical_95,
    ks_statistic,
    rank_fits,
)


class TestExponential:
    def test_closed_form(self):
        assert fit_exponential([2, 2, 2])["rate"] == pytest.approx(0.5)

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveSample):
            fit_exponential([1.0, -1.0, 2.0])

    def test_recovery(self):
        sample = synth.sample_distribution("exponential", {"rate": 1.5}, 10_000, 101)
        assert 1.425 <= fit_exponential(sample)["rate"] <= 1.575


class TestNormal:
    def test_two_points(self):
        p = fit_normal([-1.0, 1.0])
        assert p["mu"] == 0.0 and p["sigma"] == 1.0

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            fit_normal([5.0, 5.0, 5.0])

    def test_recovery(self):
        sample = synth.sample_distribution("normal", {"mu": 10, "sigma": 2}, 10_000, 102)
        p = fit_normal(sample)
        assert 9.9 <= p["mu"] <= 10.1 and 1.9 <= p["sigma"] <= 2.1


class TestGamma:
    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            fit_gamma([1.0, 1.0, 1.0, 1.0])

    def test_shape_one_is_exponential_cdf(self):
        assert cdf_eval("gamma", {"shape": 1.0, "scale": 2.0}, 2.0) == pytest.approx(
            1 - math.exp(-1), abs=1e-12
        )

    def test_recovery(self):
        sample = synth.sample_distribution("gamma", {"shape": 2, "scale": 3}, 10_000, 103)
        p = fit_gamma(sample)
        assert 1.9 <= p["shape"] <= 2.1 and 2.85 <= p["scale"] <= 3.15


class TestWeibull:
    def test_shape_one_is_exponential_cdf(self):
        assert cdf_eval("weibull", {"shape": 1.0, "scale": 2.0}, 2.0) == pytest.approx(
            1 - math.exp(-1), abs=1e-12
        )

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            fit_weibull([3.0, 3.0, 3.0])

    def test_recovery(self):
        sample = synth.sample_distribution("weibull", {"shape": 1.5, "scale": 2}, 10_000, 104)
        p = fit_weibull(sample)
        assert 1.425 <= p["shape"] <= 1.575 and 1.9 <= p["scale"] <= 2.1


class TestLogLogistic:
    def test_median_anchor(self):
        sample = synth.sample_distribution("loglogistic", {"scale": 5, "shape": 2}, 500, 7)
        p = fit_loglogistic(sample)
        assert cdf_eval("loglogistic", p, p["scale"]) == pytest.approx(0.5, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            fit_loglogistic([4.0, 4.0, 4.0, 4.0])

    def test_recovery(self):
        sample = synth.sample_distribution("loglogistic", {"scale": 3, "shape": 4}, 10_000, 105)
        p = fit_loglogistic(sample)
        assert 2.85 <= p["scale"] <= 3.15 and 3.8 <= p["shape"] <= 4.2


class TestCdf:
    def test_loglogistic_at_scale(self):
        assert cdf_eval("loglogistic", {"scale": 5, "shape": 2}, 5.0) == 0.5

    def test_exponential_at_zero(self):
        assert cdf_eval("exponential", {"rate": 1.0}, 0.0) == 0.0

    def test_standard_normal_table(self):
        # standard-normal table: Phi(1.96) = 0.975002
        assert cdf_eval("normal", {"mu": 0, "sigma": 1}, 1.96) == pytest.approx(
            0.975002, abs=5e-7
        )

    def test_monotone_and_limits(self):
        for family, params in [
            ("exponential", {"rate": 2.0}),
            ("gamma", {"shape": 2.0, "scale": 1.5}),
            ("weibull", {"shape": 0.8, "scale": 1.0}),
            ("loglogistic", {"scale": 1.0, "shape": 3.0}),
            ("normal", {"mu": 0.0, "sigma": 1.0}),
        ]:
            x = np.linspace(-5, 50, 400)
            f = np.asarray(cdf_eval(family, params, x))
            assert (np.diff(f) >= -1e-15).all()
            assert f[0] >= 0.0 and f[-1] <= 1.0
            assert cdf_eval(family, params, 1e9) == pytest.approx(1.0, abs=1e-6)


class TestKsStatistic:
    def test_single_point_median(self):
        # F(m) = 0.5 for the fitted median => D = 0.5
        assert ks_statistic([5.0], "loglogistic", {"scale": 5.0, "shape": 2.0}) == 0.5

    def test_midpoint_quantile_construction(self):
        # sample at quantiles (i - 0.5)/n gives D = 0.5/n exactly
        n = 40
        params = {"rate": 1.3}
        u = (np.arange(1, n + 1) - 0.5) / n
        sample = synth.inverse_cdf("exponential", params, u)
        assert ks_statistic(sample, "exponential", params) == pytest.approx(0.5 / n, abs=1e-12)

    def test_calibration_single_seed(self):
        sample = synth.sample_distribution("gamma", {"shape": 2, "scale": 3}, 1000, 11)
        d = ks_statistic(sample, "gamma", {"shape": 2, "scale": 3})
        assert d < ks_critical_95(1000)


class TestRankFits:
    def test_singleton_family(self):
        sample = synth.sample_distribution("exponential", {"rate": 1.0}, 200, 3)
        report = rank_fits(sample, families=["exponential"])
        assert report.best == "exponential"

    def test_loglogistic_data_selects_loglogistic(self):
        sample = synth.sample_distribution("loglogistic", {"scale": 3, "shape": 4}, 10_000, 21)
        assert rank_fits(sample).best == "loglogistic"

    def test_gamma_data_selects_gamma(self):
        sample = synth.sample_distribution("gamma", {"shape": 2, "scale": 3}, 10_000, 22)
        assert rank_fits(sample).best == "gamma"

    def test_zero_drop_recorded(self):
        sample = np.concatenate([np.zeros(20), synth.sample_distribution("gamma", {"shape": 2, "scale": 3}, 80, 5)])
        report = rank_fits(sample)
        assert report.dropped_zero_fraction == pytest.approx(0.2)

    def test_low_confidence_flag(self):
        sample = synth.sample_distribution("gamma", {"shape": 2, "scale": 3}, 20, 5)
        assert rank_fits(sample).low_confidence

    def test_all_fits_failed(self):
        with pytest.raises(AllFitsFailed):
            rank_fits(np.full(50, 3.0), families=["weibull", "loglogistic", "gamma"])

    def test_report_json_fields(self):
        sample = synth.sample_distribution("gamma", {"shape": 2, "scale": 3}, 500, 8)
        report = rank_fits(sample, subject="camA")
        import json

        obj = json.loads(report.to_json())
        assert obj["subject"] == "camA"
        assert obj["best"] == report.candidates[0].family
        assert set(obj["deviation_buckets"]) == {"le_3pct", "le_5pct"}
        ks = [c["ks_stat"] for c in obj["candidates"]]
        assert ks == sorted(ks)

    def test_families_order_is_legend_order(self):
        assert FAMILIES == ("exponential", "gamma", "loglogistic", "normal", "weibull")
