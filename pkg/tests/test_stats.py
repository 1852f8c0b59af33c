import math

import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, strategies as st

from merws.errors import InsufficientHorizon, WrongRegime
from merws.mittag import ml_moment
from merws.model import derive_params, diffusive_variance
from merws.oracle import enumerate_distribution, expected_sigma2
from merws.stats import (
    TestReport,
    band,
    enumeration_chi_square,
    ensemble_run,
    lil_monitor,
    lil_statistics,
    lower_bound,
    mixture_excess_kurtosis,
    two_sided,
    upper_bound,
    verify_clt,
    verify_enumeration,
    verify_gram_limit,
    verify_martingale_mean,
    verify_mixture_clt,
    verify_second_moment,
    verify_superdiffusive,
)


@pytest.fixture(scope="module")
def small_ensemble():
    return ensemble_run(derive_params(2, 0.4, 0.2), 1000, 4000, 11, [10, 100, 1000])


def test_two_trajectories_one_step():
    ens = ensemble_run(derive_params(2, 0.4, 0.2), 1, 2, 5, [1])
    assert ens.sigma2_stats(1)["mean"] == 1.0
    assert ens.martingale_mean(1) == (1.0, 0.0)


def test_ensemble_needs_two_trajectories():
    with pytest.raises(ValueError):
        ensemble_run(derive_params(2, 0.4, 0.2), 10, 1, 5)


def test_mean_sigma2_against_oracle():
    params = derive_params(2, 0.55, 0.2)
    ens = ensemble_run(params, 1000, 10**5, 31, [1000])
    stats = ens.sigma2_stats(1000)
    assert abs(stats["mean"] - expected_sigma2(params, 1000)) <= 3 * stats["se"]


def test_merge_equals_full_run():
    params = derive_params(2, 0.9, 0.05)
    cps = [10, 100, 500]
    full = ensemble_run(params, 500, 600, 77, cps, diagnostics=True)
    first = ensemble_run(params, 500, 300, 77, cps, diagnostics=True)
    second = ensemble_run(params, 500, 300, 77, cps, traj_start=300, diagnostics=True)
    merged = first.merge(second)
    assert np.array_equal(merged.positions, full.positions)
    assert np.array_equal(merged.grams, full.grams)
    assert np.array_equal(merged.qv, full.qv)
    for got, want in zip(merged.to_dict()["checkpoints"], full.to_dict()["checkpoints"]):
        assert got["mean_position"] == pytest.approx(want["mean_position"], rel=1e-9, abs=1e-12)
        assert np.allclose(got["second_moment"], want["second_moment"], rtol=1e-9, atol=0)
        assert got["scaled_sigma2_moments"] == pytest.approx(want["scaled_sigma2_moments"], rel=1e-9)


def test_merge_rejects_mismatch():
    params = derive_params(2, 0.4, 0.2)
    a = ensemble_run(params, 50, 10, 1, [50])
    with pytest.raises(ValueError):
        a.merge(ensemble_run(params, 50, 10, 2, [50], traj_start=10))
    with pytest.raises(ValueError):
        a.merge(ensemble_run(params, 50, 10, 1, [50], traj_start=20))
    with pytest.raises(ValueError):
        a.merge(ensemble_run(derive_params(2, 0.5, 0.2), 50, 10, 1, [50], traj_start=10))


def test_standard_error_split_half():
    params = derive_params(2, 0.4, 0.2)
    full = ensemble_run(params, 200, 8000, 3, [200])
    half = ensemble_run(params, 200, 2000, 3, [200])
    ratio = half.sigma2_stats(200)["se"] / full.sigma2_stats(200)["se"]
    assert 1.0 <= ratio <= 4.0  # ideal value 2
    _, se_full = full.mean_position(200)
    _, se_half = half.mean_position(200)
    assert np.all((se_half / se_full > 1.0) & (se_half / se_full < 4.0))


def test_workers_do_not_change_the_ensemble():
    params = derive_params(3, 0.6, 0.1)
    one = ensemble_run(params, 300, 1000, 99, chunk_size=64, workers=1, diagnostics=True)
    many = ensemble_run(params, 300, 1000, 99, chunk_size=64, workers=16, diagnostics=True)
    assert np.array_equal(one.positions, many.positions)
    assert np.array_equal(one.grams, many.grams)
    assert np.array_equal(one.w, many.w)
    assert one.to_dict() == many.to_dict()


def test_ensemble_determinism(small_ensemble):
    again = ensemble_run(derive_params(2, 0.4, 0.2), 1000, 4000, 11, [10, 100, 1000])
    assert np.array_equal(again.positions, small_ensemble.positions)
    assert again.generator == small_ensemble.generator


def test_records_layout(small_ensemble):
    rows = list(small_ensemble.records())
    assert len(rows) == 4000 * 3
    traj, n, pos, gram, s2 = rows[4]
    assert (traj, n) == (1, 100)
    assert s2 == sum(gram) and len(pos) == 2


def test_ks_invariant_under_scaling(rng):
    x = rng.standard_normal(3000)
    y = rng.standard_normal(5000) * 1.1
    assert sps.ks_2samp(2 * x, 2 * y).statistic == sps.ks_2samp(x, y).statistic
    assert sps.kstest(2 * x, lambda t: sps.norm.cdf(t / 2)).statistic == pytest.approx(
        sps.kstest(x, "norm").statistic, abs=1e-15)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 5))
def test_two_sided_pass_flag(stat, ref, tol):
    assert two_sided("t", stat, ref, tol, 1).passed == (abs(stat - ref) <= tol)


def test_report_kinds():
    assert upper_bound("u", 0.1, 0.2, 5).passed and not upper_bound("u", 0.3, 0.2, 5).passed
    assert lower_bound("l", 0.3, 0.2, 5).passed and not lower_bound("l", 0.1, 0.2, 5).passed
    assert band("b", 2.0, 1.0, 0.05, 20, 5).passed and not band("b", 30.0, 1.0, 0.05, 20, 5).passed
    rep = two_sided("x", 1.0, 1.0, 0.0, 7, notes="n")
    assert isinstance(rep, TestReport)
    assert rep.to_dict()["sample_size"] == 7
    assert rep.line().startswith("[PASS] x:")


def test_martingale_and_second_moment_reports(small_ensemble):
    reports = verify_martingale_mean(small_ensemble) + verify_second_moment(small_ensemble, 1000)
    assert len(reports) == 3 + 4
    assert all(r.passed for r in reports)


def test_enumeration_chi_square_accepts_the_walk():
    params = derive_params(1, 0.4, 0.2)
    law = enumerate_distribution(params, 4)
    ens = ensemble_run(params, 4, 10**5, 8, [4])
    stat, pval, cells, outside = enumeration_chi_square(law, ens)
    assert outside == 0 and cells >= 10 and pval > 1e-3
    assert all(r.passed for r in verify_enumeration(law, ens))


def test_enumeration_chi_square_rejects_a_different_walk():
    law = enumerate_distribution(derive_params(1, 0.4, 0.2), 4)
    ens = ensemble_run(derive_params(1, 0.7, 0.2), 4, 10**5, 8, [4])
    assert enumeration_chi_square(law, ens)[1] < 1e-6


def test_gram_limit_horizon_guard(small_ensemble):
    with pytest.raises(InsufficientHorizon):
        verify_gram_limit(small_ensemble)


def test_gram_limit_small_scale():
    ens = ensemble_run(derive_params(2, 0.55, 0.2), 10**4, 2000, 5)
    reports = verify_gram_limit(ens, ml_draws=10**5, share_tol=0.02, m2_tol=0.15, m3_tol=0.3, ks_tol=0.06)
    names = [r.name for r in reports]
    assert names[:2] == ["gram_share[axis=0]", "gram_share[axis=1]"]
    assert len(reports) == 6
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_clt_regime_guards(small_ensemble, superdiffusive):
    with pytest.raises(WrongRegime):
        verify_clt(small_ensemble, "critical", min_horizon=1)
    sup = ensemble_run(superdiffusive, 100, 10, 1, [100])
    with pytest.raises(WrongRegime):
        verify_clt(sup, min_horizon=1)
    with pytest.raises(WrongRegime):
        verify_mixture_clt(sup, min_horizon=1)
    with pytest.raises(WrongRegime):
        lil_monitor(sup, min_horizon=1)
    with pytest.raises(WrongRegime):
        verify_superdiffusive(small_ensemble)
    with pytest.raises(InsufficientHorizon):
        verify_clt(small_ensemble)
    with pytest.raises(InsufficientHorizon):
        lil_monitor(small_ensemble)


def test_clt_small_scale(small_ensemble):
    reports = verify_clt(small_ensemble, min_horizon=1, var_tol=0.15, ks_tol=0.06)
    assert [r.kind for r in reports] == ["two-sided", "upper", "two-sided", "upper", "upper"]
    assert reports[0].reference == pytest.approx(diffusive_variance(small_ensemble.params))
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_mixture_kurtosis_reference():
    assert mixture_excess_kurtosis(1 - 1e-6) == pytest.approx(0.0, abs=1e-4)
    b = 0.8
    assert mixture_excess_kurtosis(b) == pytest.approx(3 * (ml_moment(b, 2) / ml_moment(b, 1) ** 2 - 1))
    assert mixture_excess_kurtosis(b) > 0


def test_mixture_clt_one_dimension():
    params = derive_params(1, 0.4, 0.2)
    ens = ensemble_run(params, 10**5, 10**4, 2718)
    reports = verify_mixture_clt(ens)
    var, kurt = reports
    assert var.reference == pytest.approx(diffusive_variance(params) / math.gamma(1.8), rel=1e-12)
    assert var.passed, var.line()
    assert kurt.passed, kurt.line()


def test_lil_guard_skips_small_sigma2():
    params = derive_params(2, 0.1, 0.8)
    ens = ensemble_run(params, 100, 200, 4, [1, 2, 3, 100])
    sup = lil_statistics(ens, n_min=1)
    assert sup.shape == (200,)
    # sigma^2 <= e at n <= 2 for every trajectory, so only n=3 and n=100 can count
    s2 = ens.grams[:, :, :].sum(axis=2)
    never = (s2 <= math.e).all(axis=1)
    assert np.isnan(sup[never]).all()
    assert np.isfinite(sup[~never]).all()


def test_lil_band_one_dimension():
    params = derive_params(1, 0.4, 0.2)
    ens = ensemble_run(params, 10**6, 1000, 1618)
    rep = lil_monitor(ens)
    assert rep.qualitative and rep.kind == "band"
    assert rep.reference == pytest.approx(diffusive_variance(params))
    assert math.isfinite(rep.statistic) and rep.passed, rep.line()


def test_superdiffusive_small_scale(superdiffusive):
    n_h = 10**4
    cps = [10, 100, 1000, n_h]
    ens = ensemble_run(superdiffusive, n_h, 2000, 6, cps)
    reports = verify_superdiffusive(ens)
    by_name = {r.name: r for r in reports}
    assert {"L_mean[axis=0]", "L_second_moment[axis=1]", "fluctuation_ks[axis=0]",
            "L_cauchy_mean_square_decreasing", "outer_trace_vs_oracle[n=1000]"} <= set(by_name)
    assert by_name["L_cauchy_mean_square_decreasing"].passed
    assert all(r.passed for r in reports if r.name.startswith(("L_mean", "outer_trace")))
