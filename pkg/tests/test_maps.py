import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdiff.maps import (
    GOLDEN_S0,
    F_eval,
    F_inverse,
    F_jacobian,
    J_closed_form_identity,
    J_flux,
    g_eval,
    g_inverse,
    g_jacobian,
    reconstruct,
    identity_g_inverse,
)
from crossdiff.model import PowerLawParams, build_power_law

# J for f = q = identity, 30-digit mpmath quadrature of the min-integrand
J_ORACLE = {
    0.1: 0.1,
    GOLDEN_S0: 0.6180339887498948482,
    1.0: 0.93714568761017055618,
    5.0: 2.2633684184156875236,
    50.0: 4.482641702670085952,
}


def test_F_examples(power_law):
    np.testing.assert_array_equal(F_eval(np.zeros(3), power_law), np.zeros(3))
    np.testing.assert_allclose(F_eval(np.ones(3), power_law), [2.005, 2.005, 2.0], rtol=1e-15)
    np.testing.assert_allclose(F_eval(np.array([0.0, 5.0, 0.0]), power_law), [0.0, 3130.0, 0.0], rtol=1e-15)


def test_F_jacobian_examples(power_law):
    J = F_jacobian(np.ones(3), power_law)
    assert J[0, 1] == pytest.approx(0.005, rel=1e-14)
    assert np.linalg.det(J) == pytest.approx(216.36, rel=1e-12)
    diag = F_jacobian(np.array([0.5, 1.5, 2.0]), build_power_law(PowerLawParams(alpha=0.0)))
    np.testing.assert_array_equal(diag, np.diag(np.diag(diag)))


def test_F_jacobian_matches_differences(power_law, rng):
    u = rng.uniform(0.1, 3.0, 3)
    h = 1e-6
    fd = np.stack([(F_eval(u + h * e, power_law) - F_eval(u - h * e, power_law)) / (2 * h) for e in np.eye(3)], axis=1)
    np.testing.assert_allclose(F_jacobian(u, power_law), fd, rtol=1e-7, atol=1e-6)


def test_F_inverse_examples(power_law):
    np.testing.assert_array_equal(F_inverse(np.zeros(3), power_law), np.zeros(3))
    np.testing.assert_allclose(F_inverse(np.array([0.0, 0.0, 3130.0]), power_law), [0.0, 0.0, 5.0], rtol=1e-13)


def test_F_round_trip(power_law, rng):
    u = rng.uniform(0, 10, size=(3, 100))
    assert np.max(np.abs(F_inverse(F_eval(u, power_law), power_law) - u)) <= 1e-10


def test_F_round_trip_with_zero_components(power_law):
    u = np.array([[0.0, 2.0, 0.0, 7.0], [3.0, 0.0, 0.0, 1e-6], [0.5, 0.0, 9.0, 0.0]])
    np.testing.assert_allclose(F_inverse(F_eval(u, power_law), power_law), u, atol=1e-12)


def test_g_examples(identity):
    np.testing.assert_array_equal(g_eval(0.0, 0.0, identity), [0.0, 0.0])
    np.testing.assert_allclose(g_eval(1.0, 1.0, identity), [2.0, 2.0])
    np.testing.assert_allclose(g_eval(2.0, 0.0, identity), [2.0, 0.0])
    np.testing.assert_allclose(g_inverse(np.array([2.0, 2.0]), identity), [1.0, 1.0], rtol=1e-14)
    np.testing.assert_array_equal(g_inverse(np.zeros(2), identity), [0.0, 0.0])


def test_g_round_trip(power_law, rng):
    p = rng.uniform(0, 10, size=(2, 100))
    back = g_inverse(g_eval(p[0], p[1], power_law), power_law)
    assert np.max(np.abs(back - p)) <= 1e-10


def test_g_round_trip_nonlinear_q(rng):
    m = build_power_law(PowerLawParams(beta=2, delta=9))
    p = rng.uniform(0, 10, size=(2, 100))
    assert np.max(np.abs(g_inverse(g_eval(p[0], p[1], m), m) - p)) <= 1e-10


def test_newton_g_inverse_matches_closed_form(identity, rng):
    vw = rng.uniform(0, 10, size=(2, 200))
    newton = g_inverse(vw, identity, closed_form=False)
    _, u2, u3 = identity_g_inverse(vw)
    assert np.max(np.abs(newton - np.stack([u2, u3]))) <= 1e-10


def test_identity_examples():
    np.testing.assert_allclose(identity_g_inverse(np.array([2.0, 2.0])), [1.0, 1.0, 1.0], rtol=1e-15)
    np.testing.assert_array_equal(identity_g_inverse(np.zeros(2)), [0.0, 0.0, 0.0])
    a = identity_g_inverse(np.array([3.0, 7.0]))
    b = identity_g_inverse(np.array([7.0, 3.0]))
    assert a[1] == pytest.approx(b[2], rel=1e-15) and a[2] == pytest.approx(b[1], rel=1e-15)


def test_identity_formula_textbook_branch():
    # the closed form written with the "+sqrt" branch, fine away from cancellation
    v, w = 3.0, 7.0
    u2 = -(w - v + 1) / 2 + math.sqrt((w - v + 1) ** 2 + 4 * v) / 2
    assert identity_g_inverse(np.array([v, w]))[1] == pytest.approx(u2, rel=1e-14)


def test_reconstruct_satisfies_constraint(power_law, rng):
    vw = rng.uniform(0.1, 5, size=(2, 50))
    u = reconstruct(vw[0], vw[1], power_law)
    np.testing.assert_allclose(u[0] + u[1], vw[0], rtol=1e-12)
    np.testing.assert_allclose(u[0] + u[2], vw[1], rtol=1e-12)
    np.testing.assert_allclose(power_law.q[0](u[0]), power_law.q[1](u[1]) * power_law.q[2](u[2]), rtol=1e-12)


@pytest.mark.parametrize("s", sorted(J_ORACLE))
def test_J_identity_oracle(identity, s):
    assert float(J_flux(s, 0, identity, method="quad")) == pytest.approx(J_ORACLE[s], abs=1e-12)
    assert float(J_closed_form_identity(s)) == pytest.approx(J_ORACLE[s], abs=1e-14)


def test_J_zero_and_golden_point(identity):
    assert float(J_flux(0.0, 0, identity)) == 0.0
    assert float(J_flux(GOLDEN_S0, 0, identity)) == pytest.approx(GOLDEN_S0, abs=1e-15)
    assert GOLDEN_S0**2 + GOLDEN_S0 - 1 == pytest.approx(0, abs=1e-15)


def test_J_closed_form_requires_identity(power_law):
    with pytest.raises(ValueError):
        J_flux(1.0, 0, power_law, method="closed")


def test_J_power_law_is_lipschitz(power_law):
    s = np.array([0.0, 0.3, 0.9, 2.0, 4.0])
    J = np.array([float(J_flux(v, 0, power_law)) for v in s])
    assert np.all(np.diff(J) >= 0)
    assert np.all(np.diff(J) <= np.diff(s) + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 20), st.floats(0, 20))
def test_J_identity_lipschitz(s, t):
    Js, Jt = J_closed_form_identity(s), J_closed_form_identity(t)
    assert abs(Js - Jt) <= abs(s - t) + 1e-14


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 10), st.floats(1e-3, 10))
def test_g_jacobian_determinant_at_least_one(u2, u3):
    m = build_power_law(PowerLawParams(beta=2, delta=9))
    assert np.linalg.det(g_jacobian(u2, u3, m)) >= 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-3, 10), min_size=3, max_size=3))
def test_F_jacobian_positive_determinant(u):
    m = build_power_law(PowerLawParams())
    assert np.linalg.det(F_jacobian(np.array(u), m)) > 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=3, max_size=3), st.floats(1e-3, 5))
def test_F3_increasing(u, bump):
    m = build_power_law(PowerLawParams())
    u = np.array(u)
    up = u + np.array([0, 0, bump])
    assert F_eval(up, m)[2] > F_eval(u, m)[2]
