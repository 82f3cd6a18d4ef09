import math

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from biortho.specfun import (
    QuadratureRule,
    gauss_hermite_rule,
    integrate_gaussian,
    phi,
    phi_average,
    q_function,
    q_inverse,
    r_func,
    split_gaussian_rule,
)


def grid_min(h, q_hat, lo=-10.0, hi=10.0, n=2_000_001):
    x = np.linspace(lo, hi, n)
    obj = q_hat * x * x / 2 - h * x + np.abs(x)
    k = int(np.argmin(obj))
    # refine around the grid minimum with a parabola-free golden search
    a, b = x[max(k - 1, 0)], x[min(k + 1, n - 1)]
    f = lambda t: q_hat * t * t / 2 - h * t + abs(t)
    for _ in range(200):
        m1, m2 = a + (b - a) / 3, b - (b - a) / 3
        if f(m1) < f(m2):
            b = m2
        else:
            a = m1
    t = 0.5 * (a + b)
    return f(t), t


class TestQFunction:
    def test_zero(self):
        assert q_function(0.0) == 0.5

    def test_five_percent_point(self):
        mpmath.mp.dps = 40
        oracle = mpmath.quad(lambda z: mpmath.exp(-z * z / 2) / mpmath.sqrt(2 * mpmath.pi),
                             [mpmath.mpf("1.6448536269514722"), mpmath.inf])
        assert abs(float(oracle) - 0.05) < 1e-10
        assert q_function(1.6448536269514722) == pytest.approx(float(oracle), abs=1e-15)

    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 5.0, 6.5, 7.9])
    def test_relative_accuracy_against_mpmath(self, x):
        mpmath.mp.dps = 40
        exact = float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)
        assert abs(q_function(x) - exact) <= 1e-14 * exact

    @given(st.floats(-8, 8))
    def test_symmetry(self, x):
        assert abs(q_function(x) + q_function(-x) - 1.0) <= 1e-14

    def test_strictly_decreasing(self):
        # Q(x) rounds to 1.0 below about -8.3
        x = np.linspace(-5, 8, 4001)
        assert np.all(np.diff(q_function(x)) < 0)

    def test_array_in_array_out(self):
        out = q_function(np.array([0.0, 1.0]))
        assert isinstance(out, np.ndarray) and out.shape == (2,)


class TestQInverse:
    def test_median(self):
        assert q_inverse(0.5) == 0.0

    def test_round_trip_one(self):
        assert q_inverse(q_function(1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_quartile_against_bisection_oracle(self):
        lo, hi = 0.0, 5.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if q_function(mid) > 0.25:
                lo = mid
            else:
                hi = mid
        oracle = 0.5 * (lo + hi)
        assert abs(oracle - 0.6744897501960817) < 1e-9
        assert q_inverse(0.25) == pytest.approx(oracle, abs=1e-9)

    @given(st.floats(0.001, 0.999))
    def test_round_trip(self, p):
        assert abs(q_function(q_inverse(p)) - p) <= 1e-12

    def test_monotone_decreasing(self):
        ps = np.linspace(0.01, 0.99, 99)
        xs = [q_inverse(p) for p in ps]
        assert np.all(np.diff(xs) < 0)

    @pytest.mark.parametrize("p", [1e-12, 1e-6, 1 - 1e-9])
    def test_tails(self, p):
        x = q_inverse(p)
        assert abs(q_function(x) - p) <= 1e-12 * max(p, 1e-3)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            q_inverse(p)


class TestRFunc:
    def test_zero(self):
        assert r_func(0.0) == 0.0

    def test_underflow_region_is_zero(self):
        assert r_func(1e-9) == 0.0

    @pytest.mark.parametrize("h", [1.0, 4.0])
    def test_matches_quadrature(self, h):
        quad = integrate_gaussian(lambda z: phi(z * math.sqrt(h), 1.0)[0],
                                  split_gaussian_rule((-1 / math.sqrt(h), 1 / math.sqrt(h))))
        assert r_func(h) == pytest.approx(quad, abs=1e-8)

    def test_nonpositive(self):
        h = np.concatenate([[0.0], np.logspace(-8, 3, 500)])
        assert np.all(r_func(h) <= 0.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            r_func(-1e-3)


def test_scalar_and_array_paths_agree():
    xs = np.linspace(-7.5, 7.5, 301)
    np.testing.assert_allclose([q_function(float(x)) for x in xs], q_function(xs), rtol=1e-14)
    hs = np.logspace(-9, 2, 301)
    # r(h) cancels between two tiny terms for small h
    np.testing.assert_allclose([r_func(float(h)) for h in hs], r_func(hs), rtol=1e-13, atol=1e-18)


class TestPhi:
    def test_origin(self):
        assert phi(0.0, 1.0) == (0.0, 0.0)

    @pytest.mark.parametrize("h, expected", [(0.5, (0.0, 0.0)), (2.0, (-0.5, 1.0))])
    def test_grid_search_oracle(self, h, expected):
        value, argmin = grid_min(h, 1.0)
        assert value == pytest.approx(expected[0], abs=1e-9)
        assert argmin == pytest.approx(expected[1], abs=1e-6)
        got = phi(h, 1.0)
        assert got[0] == pytest.approx(value, abs=1e-9)
        assert got[1] == pytest.approx(argmin, abs=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 100), st.floats(1e-2, 100))
    def test_matches_grid_minimum(self, h, q_hat):
        hi = max(10.0, 2 * h / q_hat)
        value, _ = grid_min(h, q_hat, lo=-hi, hi=hi, n=20001)
        got, _ = phi(h, q_hat)
        assert got <= 0.0
        assert got == pytest.approx(value, abs=1e-9)

    def test_odd_minimizer(self):
        h = np.linspace(-5, 5, 101)
        _, xp = phi(h, 2.0)
        _, xm = phi(-h, 2.0)
        np.testing.assert_array_equal(xp, -xm)

    @pytest.mark.parametrize("q_hat", [0.0, -1.0])
    def test_domain(self, q_hat):
        with pytest.raises(ValueError):
            phi(1.0, q_hat)


class TestQuadrature:
    def test_hermite_invariants(self):
        rule = gauss_hermite_rule()
        assert len(rule) == 96
        assert abs(rule.weights.sum() - 1.0) <= 1e-12
        assert abs(np.dot(rule.weights, rule.nodes**2) - 1.0) <= 1e-10
        assert np.all(rule.weights > 0)

    def test_moments(self):
        z = sympy.symbols("z")
        fourth = sympy.integrate(z**4 * sympy.exp(-z**2 / 2) / sympy.sqrt(2 * sympy.pi),
                                 (z, -sympy.oo, sympy.oo))
        assert fourth == 3
        rule = gauss_hermite_rule()
        assert integrate_gaussian(lambda z: np.ones_like(z), rule) == pytest.approx(1, abs=1e-12)
        assert integrate_gaussian(lambda z: z**2, rule) == pytest.approx(1, abs=1e-10)
        assert integrate_gaussian(lambda z: z**4, rule) == pytest.approx(float(fourth), abs=1e-8)

    def test_polynomial_exactness(self):
        # E z^(2k) = (2k - 1)!!
        rule = gauss_hermite_rule(64)
        for k in range(1, 12):
            exact = math.prod(range(1, 2 * k, 2))
            assert integrate_gaussian(lambda z: z ** (2 * k), rule) == pytest.approx(exact, rel=1e-10)

    def test_constant_integrand_broadcasts(self):
        assert integrate_gaussian(lambda z: 2.0) == pytest.approx(2.0, abs=1e-12)

    def test_split_rule_invariants(self):
        rule = split_gaussian_rule((-0.3, 1.7))
        assert abs(rule.weights.sum() - 1.0) <= 1e-12
        assert abs(np.dot(rule.weights, rule.nodes**2) - 1.0) <= 1e-10

    def test_empty_rule(self):
        with pytest.raises(ValueError):
            integrate_gaussian(lambda z: z, QuadratureRule(np.array([]), np.array([])))

    def test_non_finite_integrand(self):
        with pytest.raises(ValueError):
            integrate_gaussian(lambda z: np.full_like(z, np.inf), gauss_hermite_rule(4))


class TestIntegralIdentity:
    @settings(max_examples=60, deadline=None)
    @given(st.floats(1e-3, 50), st.floats(1e-2, 50))
    def test_noise_term(self, chi_hat, q_hat):
        quad = phi_average(math.sqrt(chi_hat), q_hat)
        assert abs(quad - r_func(chi_hat) / q_hat) <= 1e-8

    @settings(max_examples=60, deadline=None)
    @given(st.floats(1e-3, 20), st.floats(1e-3, 50), st.floats(1e-2, 50))
    def test_signal_term(self, m_hat, chi_hat, q_hat):
        s2 = m_hat**2 + chi_hat
        quad = phi_average(math.sqrt(s2), q_hat)
        assert abs(quad - r_func(s2) / q_hat) <= 1e-8

    def test_plain_hermite_is_not_enough(self):
        # kinked integrand: plain Gauss-Hermite stalls far above 1e-8
        h = 3.0
        plain = integrate_gaussian(lambda z: phi(z * math.sqrt(h), 1.0)[0], gauss_hermite_rule())
        assert abs(plain - r_func(h)) > 1e-6
