import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from merws.errors import RejectsDimension, RejectsSimplex, RejectsStop, WrongRegime
from merws.model import (
    Regime,
    asymptotic_variance,
    classify_by_probability,
    classify_regime,
    critical_probability,
    derive_params,
    diffusive_variance,
    diffusive_variance_from_probabilities,
    params_for_regime,
    superdiffusive_variance,
    superdiffusive_variance_from_probabilities,
)

from conftest import valid_triples


def test_one_dimensional_critical_value_without_stops():
    params = derive_params(1, 0.75, 1e-9)
    assert params.p_crit == pytest.approx(0.75, abs=1e-8)


def test_critical_example_by_hand():
    params = derive_params(2, 0.5, 0.2)
    assert params.q == pytest.approx(0.1, abs=1e-15)
    assert params.a == pytest.approx(0.4, abs=1e-15)
    assert params.b == pytest.approx(0.8, abs=1e-15)
    assert params.p_crit == pytest.approx(0.5, abs=1e-15)
    assert params.regime is Regime.CRITICAL


def test_simplex_violation():
    with pytest.raises(RejectsSimplex):
        derive_params(3, 0.9, 0.5)


@pytest.mark.parametrize("d", [0, -1, 1.5])
def test_rejects_dimension(d):
    with pytest.raises(RejectsDimension):
        derive_params(d, 0.3, 0.2)


@pytest.mark.parametrize("r", [0.0, 1.0, -0.1, 1.2])
def test_rejects_stop(r):
    with pytest.raises(RejectsStop):
        derive_params(1, 0.3, r)


def test_no_stop_only_behind_flag():
    params = derive_params(1, 0.6, 0.0, allow_no_stop=True)
    assert params.b == 1.0 and params.q == pytest.approx(0.4)


@pytest.mark.parametrize(
    "d,p,r,expected",
    [(1, 0.4, 0.2, Regime.DIFFUSIVE), (2, 0.5, 0.2, Regime.CRITICAL), (2, 0.9, 0.05, Regime.SUPERDIFFUSIVE)],
)
def test_regime_examples(d, p, r, expected):
    params = derive_params(d, p, r)
    assert classify_regime(params) is expected
    assert classify_by_probability(params) is expected


def test_critical_probability_values():
    assert critical_probability(1, 0.2) == pytest.approx(0.6)
    assert critical_probability(2, 0.05) == pytest.approx(0.59375)


def test_variance_with_zero_memory():
    params = derive_params(1, 0.4, 0.2)
    assert params.a == pytest.approx(0.0, abs=1e-15)
    assert diffusive_variance(params) == pytest.approx(1.0, abs=1e-15)


def test_superdiffusive_variance_both_forms():
    params = derive_params(2, 0.9, 0.05)
    a = (3.6 - 0.95) / 3
    by_hand = 0.95 / (2 * (2 * a - 0.95))
    assert superdiffusive_variance(params) == pytest.approx(by_hand, abs=1e-12)
    assert superdiffusive_variance_from_probabilities(params) == pytest.approx(by_hand, abs=1e-12)


def test_wrong_regime_for_variances(critical):
    with pytest.raises(WrongRegime):
        diffusive_variance(critical)
    with pytest.raises(WrongRegime):
        superdiffusive_variance(critical)
    with pytest.raises(WrongRegime):
        asymptotic_variance(critical)
    with pytest.raises(WrongRegime):
        superdiffusive_variance(derive_params(1, 0.4, 0.2))


@settings(max_examples=300, deadline=None)
@given(valid_triples())
def test_invariants_hold_for_valid_params(triple):
    d, p, r = triple
    params = derive_params(d, p, r)
    assert 0.0 <= params.q <= 1.0
    assert params.p + (2 * d - 1) * params.q + params.r == pytest.approx(1.0, abs=1e-12)
    assert params.a == pytest.approx((2 * d * p + r - 1) / (2 * d - 1), abs=1e-12)
    assert params.b == pytest.approx(params.a + 2 * d * params.q, abs=1e-12)
    assert -1.0 < params.a < 1.0
    # re-validation is idempotent
    assert derive_params(params.d, params.p, params.r) == params


@settings(max_examples=300, deadline=None)
@given(valid_triples())
def test_variance_forms_agree(triple):
    params = derive_params(*triple)
    if params.regime is Regime.DIFFUSIVE:
        v2 = diffusive_variance(params)
        assert v2 == pytest.approx(diffusive_variance_from_probabilities(params), rel=1e-9)
    elif params.regime is Regime.SUPERDIFFUSIVE:
        t2 = superdiffusive_variance(params)
        assert t2 == pytest.approx(superdiffusive_variance_from_probabilities(params), rel=1e-9)


def test_regime_equivalence_over_random_triples():
    import numpy as np

    rng = np.random.default_rng(7)
    checked = 0
    while checked < 10**4:
        d = int(rng.integers(1, 8))
        r = float(rng.uniform(1e-6, 1 - 1e-6))
        p = float(rng.uniform(0, 1 - r))
        params = derive_params(d, p, r)
        assert classify_regime(params) is classify_by_probability(params)
        checked += 1


@pytest.mark.parametrize("d", [1, 2, 3, 5])
@pytest.mark.parametrize("r", [0.05, 0.2, 0.6])
def test_params_for_regime(d, r):
    for regime in Regime:
        params = params_for_regime(d, r, regime)
        assert params.regime is regime
        if regime is Regime.CRITICAL:
            assert params.p == pytest.approx(critical_probability(d, r), abs=1e-15)
            assert abs(2 * params.a - params.b) <= 1e-12


@given(st.integers(1, 10), st.floats(1e-4, 1 - 1e-4))
def test_critical_gap_identity(d, r):
    # p - p_crit = (2d-1)(2a-b)/(4d)
    p = min(critical_probability(d, r) * 0.9, 1 - r)
    params = derive_params(d, p, r)
    lhs = params.p - params.p_crit
    rhs = (2 * d - 1) * (2 * params.a - params.b) / (4 * d)
    assert math.isclose(lhs, rhs, abs_tol=1e-12)
