import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from dividend_barrier import (BracketError, DomainError, UnsupportedCaseError,
                              characteristic_roots, closed_form_b0, compute_x_alpha,
                              compute_x_beta, dg_db, f, middle_a, solve_b0,
                              solve_value_function, thresholds)
from dividend_barrier.model import printed_drift_parameter
from dividend_barrier.value_function import hamiltonian_argmax

from .strategies import case_one_params


# --- independent oracles -----------------------------------------------------

def x_alpha_oracle(p):
    """Where -mu S'/(sigma^2 S'') of S = e^{r+ x} - e^{r- x} reaches alpha."""
    rp, rm = characteristic_roots(p, p.alpha)

    def ratio(x):
        d1 = rp * math.exp(rp * x) - rm * math.exp(rm * x)
        d2 = rp * rp * math.exp(rp * x) - rm * rm * math.exp(rm * x)
        return -p.mu * d1 / (p.sigma2 * d2) - p.alpha

    # the ratio blows up where S'' changes sign, so alpha is crossed before that
    inflection = 2.0 * math.log(-rm / rp) / (rp - rm)
    return brentq(ratio, 0.0, inflection * (1 - 1e-12), xtol=1e-14)


def control_oracle(p, x_alpha):
    """Integrate a'(x) = K (1 - u/a) from a(x_alpha) = alpha until a = beta."""
    K = (p.mu ** 2 + 2 * p.c * p.sigma2) / (p.mu * p.sigma2)
    u = 2 * p.delta * p.mu / (p.mu ** 2 + 2 * p.c * p.sigma2)
    hit = lambda x, a: a[0] - p.beta  # noqa: E731
    hit.terminal = True
    sol = solve_ivp(lambda x, a: [K * (1 - u / a[0])], (x_alpha, x_alpha + 1e5), [p.alpha],
                    events=hit, dense_output=True, rtol=1e-12, atol=1e-12, method="DOP853")
    return sol.t_events[0][0], lambda x: float(sol.sol(x)[0])


def hjb_shoot(p, b, xs):
    """Integrate the HJB with the oracle control from g(0)=0, g'(0)=1; normalise g'(b)=1."""
    x_alpha = x_alpha_oracle(p)
    x_beta, a_mid = control_oracle(p, x_alpha)

    def a_of(x):
        if x < x_alpha:
            return p.alpha
        if x >= x_beta:
            return p.beta
        return a_mid(x)

    def rhs(x, y):
        a = a_of(x)
        return [y[1], (p.c * y[0] - (p.mu * a - p.delta) * y[1]) / (0.5 * p.sigma2 * a * a)]

    pts = sorted({0.0, *[t for t in (x_alpha, x_beta) if t < b], b})
    y = [0.0, 1.0]
    dense = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        s = solve_ivp(rhs, (lo, hi), y, dense_output=True, rtol=1e-12, atol=1e-14,
                      method="DOP853")
        dense.append((lo, hi, s.sol))
        y = s.y[:, -1]
    scale = 1.0 / y[1]
    gb = y[0] * scale

    def g(x):
        if x >= b:
            return x - b + gb
        for lo, hi, sol in dense:
            if lo <= x <= hi:
                return sol(x)[0] * scale
        raise AssertionError
    return np.array([g(x) for x in xs])


# --- thresholds -------------------------------------------------------------

def test_x_alpha_reported(params):
    assert compute_x_alpha(params) == pytest.approx(4.72, abs=0.01)


@settings(max_examples=30, deadline=None)
@given(case_one_params())
def test_x_alpha_matches_argmax_condition(p):
    assert compute_x_alpha(p) == pytest.approx(x_alpha_oracle(p), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(case_one_params())
def test_x_beta_matches_control_ode(p):
    x_beta, _ = control_oracle(p, x_alpha_oracle(p))
    assert compute_x_beta(p) == pytest.approx(x_beta, rel=1e-8)


def test_x_beta_derived_value(params):
    x_beta, _ = control_oracle(params, x_alpha_oracle(params))
    assert compute_x_beta(params) == pytest.approx(x_beta, rel=1e-9)
    assert compute_x_beta(params) == pytest.approx(90.9714, abs=1e-3)


def test_x_beta_with_published_drift_constant(params):
    # the c**2 variant of u reproduces the published threshold
    u = printed_drift_parameter(params)
    assert compute_x_beta(params, u=u) == pytest.approx(94.79, abs=0.01)


def test_middle_control_matches_ode(params):
    x_alpha, x_beta = thresholds(params)
    _, a_mid = control_oracle(params, x_alpha_oracle(params))
    xs = np.linspace(x_alpha, x_beta, 41)
    np.testing.assert_allclose(middle_a(xs, params), [a_mid(x) for x in xs], rtol=1e-9)


def test_middle_control_domain(params):
    with pytest.raises(DomainError):
        middle_a(1.0, params)


# --- value function -----------------------------------------------------------

@pytest.mark.parametrize("b", [50.0, 100.0, None, 400.0])
def test_value_matches_hjb_integration(params, b):
    sol = solve_value_function(params, b)
    xs = np.linspace(0.0, sol.b * 1.2, 97)
    np.testing.assert_allclose(sol.value(xs), hjb_shoot(params, sol.b, xs), rtol=1e-8,
                               atol=1e-9)


def test_middle_branch_quadrature(params):
    # S'(x) = S'(x_alpha) exp(-int mu/(sigma^2 a)) and S = S(x_alpha) + int S'
    sol = solve_value_function(params, 100.0)
    x_alpha, x_beta = thresholds(params)
    _, a_mid = control_oracle(params, x_alpha_oracle(params))
    d1 = lambda x: sol.derivative(x_alpha) * math.exp(  # noqa: E731
        -quad(lambda s: params.mu / (params.sigma2 * a_mid(s)), x_alpha, x,
              epsabs=1e-14, epsrel=1e-13)[0])
    for x in (10.0, 40.0, 80.0):
        val = sol.value(x_alpha) + quad(d1, x_alpha, x, epsabs=1e-12, epsrel=1e-12)[0]
        assert sol.value(x) == pytest.approx(val, rel=1e-9)
        assert sol.derivative(x) == pytest.approx(d1(x), rel=1e-9)


def test_xi_eta_quadrature(params):
    # eta = S'(x_beta)/S'(x_alpha) through the middle band; xi = S(x_beta) on the same scale
    sol = solve_value_function(params)
    x_alpha, x_beta = thresholds(params)
    _, a_mid = control_oracle(params, x_alpha_oracle(params))
    integral = quad(lambda s: params.mu / (params.sigma2 * a_mid(s)), x_alpha, x_beta,
                    epsabs=1e-14, epsrel=1e-13)[0]
    assert sol.eta == pytest.approx(math.exp(-integral), rel=1e-9)
    assert sol.xi == pytest.approx(
        (params.beta * params.mu - 2 * params.delta) / (2 * params.c) * sol.eta, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(case_one_params())
def test_smooth_fit(p):
    b0 = solve_b0(p)
    for b in (0.5 * b0, b0, 2.0 * b0):
        gaps = solve_value_function(p, b).smooth_fit_gaps()
        scale = solve_value_function(p, b).value_at_barrier
        for v, d in gaps.values():
            assert v <= 1e-9 * max(1.0, scale)
            assert d <= 1e-9


@settings(max_examples=25, deadline=None)
@given(case_one_params())
def test_hjb_residual_and_slope(p):
    sol = solve_value_function(p)
    xs = np.linspace(0.0, sol.b, 400, endpoint=False)
    res = sol.hjb_residual(xs)
    assert np.max(np.abs(res)) <= 1e-8 * sol.value_at_barrier
    assert np.min(sol.derivative(xs)) >= 1 - 1e-10


def test_argmax_against_scan(params):
    sol = solve_value_function(params, 100.0)
    grid = np.linspace(params.alpha, params.beta, 1000)
    for x in np.linspace(0.5, 99.5, 37):
        g0, g1, g2 = (float(v) for v in sol.derivatives(np.array([x])) for v in [v[0]])
        h = 0.5 * params.sigma2 * grid ** 2 * g2 + (params.mu * grid - params.delta) * g1
        a = float(hamiltonian_argmax(params, g1, g2))
        ha = 0.5 * params.sigma2 * a * a * g2 + (params.mu * a - params.delta) * g1
        assert ha >= h.max() - 1e-12 * abs(h.max())


def test_linear_above_barrier(params):
    sol = solve_value_function(params, 150.0)
    xs = np.array([150.0, 170.0, 400.0])
    np.testing.assert_allclose(np.diff(sol.value(xs)), np.diff(xs), rtol=1e-13)
    assert np.all(sol.derivative(xs) == 1.0)


# --- unconstrained barrier ------------------------------------------------------

def test_b0_value(params):
    assert solve_b0(params) == pytest.approx(198.8677528735, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(case_one_params())
def test_b0_conditions(p):
    b0 = solve_b0(p)
    sol = solve_value_function(p)
    assert sol.derivative(b0 * (1 - 1e-14)) == pytest.approx(1.0, abs=1e-10)
    assert abs(sol.curvature_at_barrier()) < 1e-10
    # at b0 the HJB with g' = 1, g'' = 0 and a = beta gives g = (mu beta - delta)/c
    assert sol.value_at_barrier == pytest.approx((p.mu * p.beta - p.delta) / p.c, rel=1e-9)
    cf = closed_form_b0(p)
    if cf is not None:
        assert cf == pytest.approx(b0, rel=1e-8)


def test_curvature_sign_around_b0(params):
    b0 = solve_b0(params)
    assert solve_value_function(params, 0.9 * b0).curvature_at_barrier() < 0
    assert solve_value_function(params, 1.1 * b0).curvature_at_barrier() > 0


def test_coefficient_signs(params):
    sol = solve_value_function(params)
    assert sol.k2 > 0 and sol.k1 > 0
    # with the ODE-consistent u: A > 0, B < 0
    assert sol.A > 0 > sol.B


def test_unsupported_cases(params):
    with pytest.raises(UnsupportedCaseError, match="CaseII"):
        solve_value_function(params.replace(delta=1.0))
    with pytest.raises(UnsupportedCaseError, match="CaseIII"):
        compute_x_alpha(params.replace(delta=9.0))


def test_barrier_domain(params):
    with pytest.raises(DomainError):
        solve_value_function(params, -1.0)
    with pytest.raises(DomainError):
        solve_value_function(params, 100.0).value(-0.5)


def test_bracket_error_type():
    assert issubclass(BracketError, ArithmeticError)


# --- monotonicity in parameters (b = 100) -------------------------------------------

XS = np.linspace(1.0, 150.0, 60)


def g_curve(p, b=100.0):
    return solve_value_function(p, b).value(XS)


def test_g_decreasing_in_delta(params):
    curves = [g_curve(params.replace(delta=d)) for d in (0.05, 0.1, 0.2, 0.45)]
    for lo, hi in zip(curves[1:], curves[:-1]):
        assert np.all(lo < hi)


def test_g_increasing_in_mu(params):
    curves = [g_curve(params.replace(mu=m)) for m in (1.8, 2.0, 2.5, 3.0)]
    for lo, hi in zip(curves[:-1], curves[1:]):
        assert np.all(lo < hi)


def test_g_decreasing_in_sigma2(params):
    # the HJB shooting oracle agrees; more volatility lowers the return here
    curves = [g_curve(params.replace(sigma2=s)) for s in (30.0, 50.0, 70.0, 90.0)]
    for lo, hi in zip(curves[1:], curves[:-1]):
        assert np.all(lo < hi)
    np.testing.assert_allclose(curves[3], hjb_shoot(params.replace(sigma2=90.0), 100.0, XS),
                               rtol=1e-8)


# --- barrier sensitivity --------------------------------------------------------

def fd_dg_db(p, x, b, h):
    return (solve_value_function(p, b + h).value(x) - solve_value_function(p, b - h).value(x)) / (2 * h)


@pytest.mark.parametrize("x", [3.0, 50.0, 150.0, 250.0])
@pytest.mark.parametrize("ratio", [1.05, 1.5, 3.0])
def test_dg_db_nonpositive_beyond_b0(params, x, ratio):
    b = ratio * solve_b0(params)
    if abs(x - b) < 1.0:
        return
    assert fd_dg_db(params, x, b, 1e-3) <= 1e-10
    assert dg_db(x, params, b) <= 0


@pytest.mark.parametrize("x, b", [(20.0, 100.0), (60.0, 250.0), (150.0, 300.0), (400.0, 300.0)])
def test_dg_db_second_order_fd(params, x, b):
    exact = dg_db(x, params, b)
    errs = [abs(fd_dg_db(params, x, b, h) - exact) for h in (0.4, 0.2, 0.1)]
    assert errs[2] < 1e-6 * max(1.0, abs(exact))
    # central differences: error ratio ~4 per halving until rounding takes over
    if errs[0] > 1e-9:
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_f_is_g_at_b0(params):
    xs = np.array([1.0, 90.0, 250.0])
    np.testing.assert_array_equal(f(xs, params), solve_value_function(params, None).value(xs))
