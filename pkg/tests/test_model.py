import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdiff.model import (
    CERTIFIED_DELTA,
    ModelError,
    PowerLawParams,
    growth_ratio_max,
    build_power_law,
    check_cross_diffusion_bound,
    check_power_law_conditions,
    check_limit_continuity,
    check_model,
    from_callables,
    invert_increasing,
)


def test_power_law_closed_forms(power_law):
    assert power_law.f[0](np.array(2.0)) == pytest.approx(34.0, rel=1e-15)
    assert power_law.f12(np.array(2.0), np.array(3.0)) == pytest.approx(0.03, rel=1e-14)
    assert power_law.kappa1 == 1.0


@pytest.mark.parametrize("params", [PowerLawParams(), PowerLawParams(beta=2, delta=9, alpha=0.01),
                                    PowerLawParams(alpha1=0.5, alpha2=2, alpha3=3, gamma=2)])
def test_power_law_vanishes_at_zero(params):
    m = build_power_law(params)
    zero = np.array(0.0)
    for i in range(3):
        assert m.f[i](zero) == 0 and m.q[i](zero) == 0
    assert m.f12(zero, np.array(3.0)) == 0 and m.f21(np.array(3.0), zero) == 0
    assert m.kappa1 == min(params.alpha1, params.alpha2, params.alpha3)


def test_q_inverse_is_root(power_law):
    m = build_power_law(PowerLawParams(beta=2, delta=9))
    y = np.array([0.0, 0.25, 16.0])
    np.testing.assert_allclose(m.q_inverse(0, y), [0.0, 0.5, 4.0], rtol=1e-15)


def test_invalid_params_rejected():
    with pytest.raises(ModelError):
        build_power_law(PowerLawParams(alpha1=0.0))
    with pytest.raises(ModelError):
        build_power_law(PowerLawParams(beta=-1.0))


def test_power_law_conditions_certified():
    rep = check_power_law_conditions(PowerLawParams())
    assert rep.passed
    assert all(not c.witnesses for c in rep.checks)


def test_power_law_conditions_alpha_too_large():
    rep = check_power_law_conditions(PowerLawParams(alpha=0.1))
    assert not rep.passed
    (bad,) = rep.failures()
    assert bad.witnesses[0].lhs == 1.0
    assert bad.witnesses[0].rhs == pytest.approx(10.24)
    assert "10.24" in rep.to_text()


def test_power_law_conditions_delta_too_small():
    rep = check_power_law_conditions(PowerLawParams(delta=4))
    (bad,) = rep.failures()
    assert (bad.witnesses[0].lhs, bad.witnesses[0].rhs) == (4.0, 5.0)


def test_cross_bound_certified_passes(power_law):
    rep = check_cross_diffusion_bound(power_law, eta_max=1.0, delta_cand=1 - 1 / math.sqrt(2))
    assert rep.passed, rep.to_text()
    assert CERTIFIED_DELTA == pytest.approx(0.29289321881345254, abs=1e-16)


def test_cross_bound_without_cross_diffusion_passes_any_delta():
    m = build_power_law(PowerLawParams(alpha=0.0))
    for d in (0.01, 0.5, 0.99):
        assert check_cross_diffusion_bound(m, delta_cand=d).passed


def test_cross_bound_strong_cross_diffusion_fails():
    m = build_power_law(PowerLawParams(alpha=5.0, alpha1=0.01, alpha2=0.01, delta=2.0))
    rep = check_cross_diffusion_bound(m)
    assert not rep.passed
    a5 = [c for c in rep.failures() if c.name == "cross_diffusion_bound"][0]
    w = a5.witnesses[0]
    assert w.lhs > w.rhs and "witness" in rep.to_text()


def test_check_model_certified(power_law):
    rep = check_model(power_law)
    assert rep.passed, rep.to_text()
    assert np.all(np.isfinite(growth_ratio_max(power_law)))


def test_check_model_flags_inconsistent_derivative():
    good = build_power_law(PowerLawParams())
    bad = from_callables(
        f=good.f, df=(good.df[0], lambda s: 2.0 + 5 * s**4, good.df[2]),
        f12=good.f12, f21=good.f21,
        d1f12=good.d1f12, d2f12=good.d2f12, d1f21=good.d1f21, d2f21=good.d2f21,
        q=good.q, dq=good.dq, kappa1=1.0,
    )
    rep = check_model(bad)
    assert not rep.passed
    assert any("f2'" in c.inequality or "f2'" in c.name for c in rep.failures())


def test_generic_bundle_matches_power_law(power_law):
    m = from_callables(
        f=power_law.f, df=power_law.df, f12=power_law.f12, f21=power_law.f21,
        d1f12=power_law.d1f12, d2f12=power_law.d2f12, d1f21=power_law.d1f21, d2f21=power_law.d2f21,
        q=power_law.q, dq=power_law.dq, kappa1=1.0,
    )
    assert check_model(m).passed
    y = np.geomspace(1e-6, 1e6, 50)
    np.testing.assert_allclose(m.q_inverse(0, y), y, rtol=1e-12)


def test_limit_continuity_advisory(power_law):
    assert check_limit_continuity(power_law).passed


def test_invert_increasing_bracket_growth():
    y = np.array([0.0, 1e-8, 3.0, 1e9])
    x = invert_increasing(np.cbrt, lambda s: 1 / (3 * np.cbrt(s) ** 2), y)
    np.testing.assert_allclose(x, y**3, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(1, 3), gamma=st.floats(1, 3), scale=st.floats(0, 1))
def test_certified_family_passes_a5(beta, gamma, scale):
    delta = 1 + 4 * max(beta, gamma - 1)
    alpha = scale * math.sqrt(min(1.0, delta) / 1024)
    params = PowerLawParams(delta=delta, beta=beta, gamma=gamma, alpha=alpha)
    assert check_power_law_conditions(params).passed
    assert check_cross_diffusion_bound(build_power_law(params)).passed


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=20))
def test_linear_lower_bound(vals):
    m = build_power_law(PowerLawParams(alpha1=0.7, alpha2=2, alpha3=1.3))
    s = np.array(vals)
    for i in range(3):
        assert np.all(m.f[i](s) >= m.kappa1 * s)
