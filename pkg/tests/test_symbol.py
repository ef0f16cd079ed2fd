import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from couette_ks.errors import DomainError, QuadratureNotConverged, WrongAlpha
from couette_ks.symbol import (
    FlowParams,
    FreqPoint,
    QuadratureConfig,
    accumulated_symbol,
    accumulated_symbol_alpha2,
    green_hat,
    theta,
)


def test_flow_params_domain():
    FlowParams(0.0, 2.0)
    for A, a in [(-1.0, 1.5), (1.0, 1.0), (1.0, 2.5), (math.inf, 1.5)]:
        with pytest.raises(DomainError):
            FlowParams(A, a)
    # symbol-only parameters admit alpha <= 1
    assert FlowParams.for_symbol(1.0, 1.0).alpha == 1.0


def test_quadrature_config_domain():
    with pytest.raises(DomainError):
        QuadratureConfig(rel_tol=1e-3)
    with pytest.raises(DomainError):
        QuadratureConfig(max_subdivisions=0)


@pytest.mark.parametrize(
    "p, s, expected",
    [((0, 0, 0), 3.7, 0.0), ((1, 0, 0), 1.0, 2.0), ((1, -2, 0), 2.0, 1.0)],
)
def test_theta_examples(p, s, expected):
    assert theta(FreqPoint(*p), s, FlowParams(1.0, 2.0)) == expected


def test_theta_sign_reflection():
    f = FlowParams(3.0, 1.5)
    assert theta(FreqPoint(1.0, 2.0, 0.5), 0.7, f, -1) == theta(FreqPoint(1.0, -2.0, 0.5), 0.7, f, 1)


def test_xi_zero_fast_path():
    h = accumulated_symbol(FreqPoint(0.0, 2.0, 0.0), 0.0, 3.0, FlowParams.for_symbol(1.0, 1.0))
    assert h == 6.0


def test_polynomial_case():
    p = FreqPoint(1.0, 0.0, 0.0)
    f = FlowParams(1.0, 2.0)
    assert accumulated_symbol_alpha2(p, 0.0, 1.0, f) == pytest.approx(4 / 3, rel=1e-15)
    assert accumulated_symbol(p, 0.0, 1.0, f, method="quadrature") == pytest.approx(4 / 3, rel=1e-12)


def test_alpha_one_analytic():
    exact = (math.sqrt(2) + math.log(1 + math.sqrt(2))) / 2
    h = accumulated_symbol(FreqPoint(1.0, 0.0, 0.0), 0.0, 1.0, FlowParams.for_symbol(1.0, 1.0))
    assert h == pytest.approx(exact, rel=1e-12)
    assert h == pytest.approx(1.147793, abs=1e-6)


def test_alpha2_degenerate_branch():
    h = accumulated_symbol_alpha2(FreqPoint(0.0, 3.0, 4.0), 0.0, 2.0, FlowParams(5.0, 2.0))
    assert h == 50.0


def test_alpha2_requires_alpha_two():
    with pytest.raises(WrongAlpha):
        accumulated_symbol_alpha2(FreqPoint(1.0, 0.0, 0.0), 0.0, 1.0, FlowParams(1.0, 1.5))


def test_reversed_interval_rejected():
    with pytest.raises(DomainError):
        accumulated_symbol(FreqPoint(1.0, 0.0, 0.0), 1.0, 0.0, FlowParams(1.0, 1.5))


def test_against_scipy_quad(rng):
    f = FlowParams(7.0, 1.3)
    for _ in range(20):
        xi, eta, zeta = rng.uniform(-5, 5, 3)
        t0, t1 = np.sort(rng.uniform(0, 3, 2))
        s_star = -eta / (f.A * xi)
        pts = [s_star] if t0 < s_star < t1 else None
        ref, _ = integrate.quad(
            lambda s: (xi**2 + (eta + f.A * s * xi) ** 2 + zeta**2) ** (f.alpha / 2),
            t0, t1, points=pts, epsabs=0, epsrel=1e-13, limit=200,
        )
        got = accumulated_symbol(FreqPoint(xi, eta, zeta), t0, t1, f)
        assert got == pytest.approx(ref, rel=1e-10)


def test_touching_zero_integrand():
    # zeta = 0 and the drifting eta passes through 0: theta^(alpha/2) has a kink there
    f = FlowParams(1.0, 1.5)
    p = FreqPoint(1e-4, -0.5, 0.0)
    ref, _ = integrate.quad(lambda s: (p.xi**2 + (p.eta + 1e4 * s * p.xi) ** 2) ** 0.75, 0, 1,
                            points=[0.5], epsabs=0, epsrel=1e-13, limit=200)
    got = accumulated_symbol(p, 0.0, 1.0, FlowParams(1e4, 1.5))
    assert got == pytest.approx(ref, rel=1e-10)
    assert f.alpha == 1.5


def test_alpha2_oracle_vectorised(rng):
    n = 10_000
    xi, eta, zeta = rng.uniform(-10, 10, (3, n))
    A = rng.uniform(0, 100, n)
    t = rng.uniform(0, 10, n)
    # per-sample A: evaluate grouped by flow to keep FlowParams scalar
    worst = 0.0
    for chunk in np.array_split(np.arange(n), 20):
        for i in chunk[:25]:
            f = FlowParams(A[i], 2.0)
            p = FreqPoint(xi[i], eta[i], zeta[i])
            q = accumulated_symbol(p, 0.0, t[i], f, method="quadrature")
            c = accumulated_symbol_alpha2(p, 0.0, t[i], f)
            worst = max(worst, abs(q - c) / max(c, 1e-30))
    assert worst <= 1e-9


def test_array_broadcast_matches_scalar():
    f = FlowParams(3.0, 1.7)
    xi = np.linspace(-2, 2, 5)[:, None]
    eta = np.linspace(-1, 1, 4)[None, :]
    H = accumulated_symbol(FreqPoint(xi, eta, 0.3), 0.2, 1.1, f)
    assert H.shape == (5, 4)
    assert H[1, 2] == pytest.approx(
        accumulated_symbol(FreqPoint(xi[1, 0], eta[0, 2], 0.3), 0.2, 1.1, f), rel=1e-13)


def test_max_subdivisions_exhausted():
    quad = QuadratureConfig(rel_tol=1e-14, max_subdivisions=1)
    with pytest.raises(QuadratureNotConverged):
        accumulated_symbol(FreqPoint(1e-3, -50.0, 0.0), 0.0, 1.0, FlowParams(1e5, 1.1), quad=quad,
                           method="quadrature")


def test_green_hat_examples():
    assert green_hat(FreqPoint(3.0, 1.0, 2.0), 0.0, FlowParams(5.0, 1.5)) == 1.0
    assert green_hat(FreqPoint(0.0, 0.0, 0.0), 4.0, FlowParams(5.0, 1.5)) == 1.0
    g = green_hat(FreqPoint(1.0, 0.0, 0.0), 1.0, FlowParams.for_symbol(0.0, 1.0))
    assert g == pytest.approx(math.exp(-1), rel=1e-14)
    g = green_hat(FreqPoint(1.0, 0.0, 0.0), 1.0, FlowParams(1.0, 2.0))
    assert g == pytest.approx(math.exp(-4 / 3), rel=1e-14)
    assert g == pytest.approx(0.263597, abs=1e-6)


def test_scaling_without_shear():
    f = FlowParams(0.0, 1.4)
    p = FreqPoint(0.3, -1.2, 2.0)
    h = accumulated_symbol(p, 0.0, 2.5, f)
    assert h == pytest.approx(2.5 * (0.09 + 1.44 + 4.0) ** 0.7, rel=1e-13)


coord = st.floats(-20, 20, allow_nan=False)
times = st.floats(0, 5, allow_nan=False)
# dyadic times keep t + tau exact, so both sides integrate over the same interval
dyadic = st.integers(0, 320).map(lambda k: k / 64)


@settings(max_examples=60, deadline=None)
@given(coord, coord, coord, st.floats(0, 50), st.floats(1.05, 2.0), times, times, times)
def test_additivity(xi, eta, zeta, A, alpha, a, b, c):
    t0, t1, t2 = sorted((a, b, c))
    f = FlowParams(A, alpha)
    p = FreqPoint(xi, eta, zeta)
    whole = accumulated_symbol(p, t0, t2, f)
    parts = accumulated_symbol(p, t0, t1, f) + accumulated_symbol(p, t1, t2, f)
    assert abs(whole - parts) <= 2e-10 * max(whole, 1e-300) + 1e-300


@settings(max_examples=60, deadline=None)
@given(coord, coord, coord, st.floats(0, 50), st.floats(1.05, 2.0), dyadic, dyadic,
       dyadic, st.sampled_from([1, -1]))
def test_shear_shift_characteristic(xi, eta, zeta, A, alpha, a, b, tau, sign):
    t0, t1 = sorted((a, b))
    f = FlowParams(A, alpha)
    shifted = FreqPoint(xi, eta + sign * A * tau * xi, zeta)
    lhs = accumulated_symbol(shifted, t0, t1, f, sign)
    rhs = accumulated_symbol(FreqPoint(xi, eta, zeta), t0 + tau, t1 + tau, f, sign)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(coord, coord, coord, st.floats(0, 50), st.floats(1.05, 2.0), times, times)
def test_monotone_in_time(xi, eta, zeta, A, alpha, a, b):
    t0, t1 = sorted((a, b))
    f = FlowParams(A, alpha)
    p = FreqPoint(xi, eta, zeta)
    assert accumulated_symbol(p, 0.0, t0, f) <= accumulated_symbol(p, 0.0, t1, f) * (1 + 1e-12)
    g0, g1 = green_hat(p, t0, f), green_hat(p, t1, f)
    assert 0 <= g1 <= g0 * (1 + 1e-12) <= 1 + 1e-12


def test_subnormal_drift_rate_keeps_precision():
    # A * xi is subnormal: the integrand is constant to double precision
    f = FlowParams(5.960464477539063e-08, 1.5)
    p = FreqPoint(2.2250738585072014e-308, 0.0, 1.0)
    t1, t2 = 1.4406029967838023, 1.9710779966085905
    assert accumulated_symbol(p, 0.0, t2, f) == pytest.approx(t2, rel=1e-14)
    split = accumulated_symbol(p, 0.0, t1, f) + accumulated_symbol(p, t1, t2, f)
    assert split == pytest.approx(t2, rel=1e-14)


def test_underflowing_xi_squared_converges():
    # xi^2 underflows to 0, so the integrand is |u|^alpha with u ~ 1e-196
    f = FlowParams(1.0, 1.5)
    xi = -7.454674294994681e-197
    h = accumulated_symbol(FreqPoint(xi, 0.0, 0.0), 0.0, 1.0, f)
    assert h == pytest.approx(abs(xi) ** 1.5 / 2.5, rel=1e-10)
