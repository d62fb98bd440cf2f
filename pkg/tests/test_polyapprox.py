import json
import math

import numpy as np
import pytest
from scipy.special import jv

from iqsp.errors import DomainError
from iqsp.polyapprox import (
    DEFAULT_GRID_POINTS,
    ComplexPolynomial,
    RealPolynomial,
    arcsin_lagrange,
    arcsin_taylor,
    exp_i_a_squared_poly,
    grid_points,
    jacobi_anger_cos,
    jacobi_anger_sin,
    jacobi_anger_square_partial,
    lagrange_bound,
    neg_power_poly,
    smooth_window,
    tophat_window,
    truncation_order_r,
)

GRID = np.linspace(-1, 1, 1001)


def _scan_r(t, eps):
    """Brute-force: first integer r >= t with (t/r)^r <= eps."""
    r = max(1, math.ceil(t))
    while (t / r) ** r > eps:
        r += 1
    return r


class TestRealPolynomial:
    def test_parity_detection_and_mismatch(self):
        assert RealPolynomial([0, 1, 0, 2]).degree == 3
        with pytest.raises(DomainError):
            RealPolynomial([1, 1], parity="even")
        assert RealPolynomial([1, 0, 3], parity="even").parity == "even"

    def test_evaluation_in_both_bases(self):
        mono = RealPolynomial([0, 0, 1], "monomial")
        cheb_form = mono.to_chebyshev()
        assert np.allclose(mono(GRID), GRID**2)
        assert np.allclose(cheb_form(GRID), GRID**2)
        assert np.allclose(cheb_form.coefficients, [0.5, 0, 0.5])

    def test_json_roundtrip(self):
        p = RealPolynomial([0.1, 0, -0.3], parity="even")
        q = RealPolynomial.from_json(json.dumps(p.to_json()))
        assert np.array_equal(p.coefficients, q.coefficients) and q.parity == "even"

    def test_malformed_json(self):
        with pytest.raises(DomainError):
            RealPolynomial.from_json({"coeffs": [1]})

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            RealPolynomial([1.0, float("nan")])

    def test_admissibility(self):
        assert RealPolynomial([0, 1], parity="odd").is_qsp_admissible()
        assert not RealPolynomial([0, 1]).is_qsp_admissible()
        assert not RealPolynomial([0, 1.1], parity="odd").is_qsp_admissible()

    def test_complex_polynomial(self):
        p = ComplexPolynomial([0, 0.5j, 0.5])
        z = np.exp(1j * np.linspace(0, 2 * math.pi, 50))
        assert np.allclose(p(z), 0.5j * z + 0.5 * z**2)
        assert p.degree == 2 and p.is_gqsp_admissible()
        q = ComplexPolynomial.from_json(p.to_json())
        assert np.array_equal(p.coefficients, q.coefficients)


def test_grid_points_env(monkeypatch):
    assert grid_points() == DEFAULT_GRID_POINTS == 1001
    monkeypatch.setenv("IQSP_GRID_POINTS", "2001")
    assert grid_points() == 2001
    monkeypatch.setenv("IQSP_GRID_POINTS", "many")
    with pytest.raises(DomainError):
        grid_points()


class TestTruncationOrder:
    @pytest.mark.parametrize("t", [0.3, 1.0, 2.0, 4.5, 17.0])
    @pytest.mark.parametrize("eps", [math.exp(-1) * 0.999, 1e-2, 1e-6, 1e-12])
    def test_matches_scan(self, t, eps):
        assert truncation_order_r(t, eps) == _scan_r(t, eps)

    def test_values(self):
        assert truncation_order_r(1.0, math.exp(-1)) == 2
        assert truncation_order_r(2.0, 1e-6) == _scan_r(2.0, 1e-6)

    def test_monotone_in_eps(self):
        rs = [truncation_order_r(3.0, 10.0**-k) for k in range(1, 15)]
        assert rs == sorted(rs)

    def test_domain(self):
        with pytest.raises(DomainError):
            truncation_order_r(0.0, 0.1)
        with pytest.raises(DomainError):
            truncation_order_r(1.0, 1.5)


class TestJacobiAnger:
    @pytest.mark.parametrize("t", [1.0, -2.0, 5.0, 12.0])
    @pytest.mark.parametrize("eps", [1e-2, 1e-5, 1e-8])
    def test_grid_error_within_half_eps(self, t, eps):
        c = jacobi_anger_cos(t, eps)
        s = jacobi_anger_sin(t, eps)
        assert np.max(np.abs(c(GRID) - np.cos(t * GRID))) <= eps / 2
        assert np.max(np.abs(s(GRID) - np.sin(t * GRID))) <= eps / 2
        assert c.parity == "even" and s.parity == "odd"
        assert c.is_qsp_admissible() and s.is_qsp_admissible()

    def test_tight_case(self):
        assert jacobi_anger_cos(1.0, 1e-8).measured_error(lambda x: np.cos(x)) <= 5e-9
        assert jacobi_anger_sin(1.0, 1e-8).measured_error(lambda x: np.sin(x)) <= 5e-9

    def test_values_at_zero(self):
        assert abs(jacobi_anger_cos(1.0, 1e-3)(0.0) - 1) <= 5e-4
        assert abs(jacobi_anger_sin(1.0, 1e-3)(0.0)) <= 1e-15

    def test_odd_in_t(self):
        assert jacobi_anger_sin(-1.0, 1e-6)(0.5) == pytest.approx(-jacobi_anger_sin(1.0, 1e-6)(0.5), abs=1e-15)

    def test_degree_monotone(self):
        degrees = [jacobi_anger_cos(2.0, e).degree for e in (1e-2, 1e-4, 1e-8, 1e-12)]
        assert degrees == sorted(degrees) and degrees[0] < degrees[-1]

    def test_domain(self):
        with pytest.raises(DomainError):
            jacobi_anger_cos(0.0, 1e-3)
        with pytest.raises(DomainError):
            jacobi_anger_sin(1.0, 0.5)

    def test_square_identity(self):
        for a in np.linspace(-0.9, 0.9, 19):
            val = jacobi_anger_square_partial(a, 12)
            assert abs(val - np.exp(1j * a * a)) <= 1e-6
        # oracle: direct sum with scipy Bessel values and cos(n arccos a)
        a = 0.7
        direct = jv(0, a) + 2 * sum(1j**n * jv(n, a) * math.cos(n * math.acos(a)) for n in range(1, 9))
        assert jacobi_anger_square_partial(a, 8) == pytest.approx(direct, abs=1e-14)


class TestArcsin:
    def test_k1_is_linear(self):
        p = arcsin_taylor(1)
        assert np.allclose(p.coefficients, [0, 2 / math.pi])

    def test_odd_and_bounded(self):
        for k in (1, 3, 9, 30):
            p = arcsin_taylor(k)
            assert p(0.0) == 0.0
            assert np.sum(np.abs(p.coefficients)) <= 1
            assert p.measured_error(lambda x: (2 / math.pi) * np.arcsin(x)) <= p.bound

    def test_k20(self):
        assert abs(arcsin_taylor(20)(0.5) - (2 / math.pi) * math.asin(0.5)) <= 1e-6

    def test_lagrange_interpolates_nodes(self):
        for q in (4, 8, 12):
            L = 0.25
            p = arcsin_lagrange(q, L)
            nodes = np.linspace(-L, L, q + 1)
            assert np.max(np.abs(p(nodes) - np.arcsin(nodes))) <= 1e-12
            assert p.degree == q - 1

    def test_lagrange_bound_q8(self):
        L = 1 / math.pi
        p = arcsin_lagrange(8, L)
        bound = 2 * math.e * (2 / math.pi) ** 9 / (1 - math.e / math.pi)
        assert lagrange_bound(8, L) == pytest.approx(bound)
        assert p.measured_error(np.arcsin) <= bound

    def test_lagrange_error_shrinks_with_q(self):
        L = 0.2
        e4 = arcsin_lagrange(4, L).measured_error(np.arcsin)
        e8 = arcsin_lagrange(8, L).measured_error(np.arcsin)
        assert e8 <= e4 * (2 * L) ** 4

    @pytest.mark.parametrize("q,L", [(3, 0.2), (0, 0.2), (4, 0.5), (4, 0.0)])
    def test_lagrange_domain(self, q, L):
        with pytest.raises(DomainError):
            arcsin_lagrange(q, L)


class TestWindows:
    def test_tophat_properties(self):
        dp, ep = 0.01, 1e-3
        w = tophat_window(dp, ep)
        vals = w(GRID)
        assert w(0.0) >= 1 - ep
        assert abs(w(1.0)) <= ep
        assert np.array_equal(w(GRID), w(-GRID))
        assert np.max(np.abs(vals)) <= 1
        assert np.min(vals[np.abs(GRID) <= 1 / math.pi]) >= 1 - ep
        assert np.max(np.abs(vals[np.abs(GRID) >= 1 / math.pi + dp])) <= ep

    def test_tophat_domain(self):
        with pytest.raises(DomainError):
            tophat_window(0.1, 1e-3)
        with pytest.raises(DomainError):
            tophat_window(0.01, 0.7)

    def test_smooth_window(self):
        w = smooth_window(0.3, 0.6, 1e-4)
        vals = w(GRID)
        assert np.max(np.abs(1 - vals[np.abs(GRID) <= 0.3])) <= 1e-4
        assert np.max(np.abs(vals[np.abs(GRID) >= 0.6])) <= 1e-4
        assert np.max(np.abs(vals)) <= 1


class TestNegPower:
    def test_spec_case(self):
        delta, eps = 0.25, 1e-3
        p = neg_power_poly(0.5, delta, eps)
        xs = np.linspace(delta, 1, 1001)
        assert np.max(np.abs(p(xs) - 0.25 / np.sqrt(xs))) <= eps
        assert abs(p(delta) - 0.5) <= eps
        assert abs(p(1.0) - math.sqrt(delta) / 2) <= eps
        assert np.max(np.abs(p(GRID))) <= 1

    def test_odd_parity(self):
        p = neg_power_poly(1.0, 0.2, 1e-2, "odd")
        assert p.parity == "odd"
        assert p.measured_error(lambda x: 0.1 / x) <= 1e-2

    def test_domain(self):
        with pytest.raises(DomainError):
            neg_power_poly(-1, 0.2, 1e-2)
        with pytest.raises(DomainError):
            neg_power_poly(0.5, 0.7, 1e-2)
        with pytest.raises(DomainError):
            neg_power_poly(0.5, 0.2, 1e-2, "none")


class TestExpSquared:
    @pytest.mark.parametrize("eps", [1e-2, 1e-6, 1e-10])
    def test_error_and_modulus(self, eps):
        c, s = exp_i_a_squared_poly(eps)
        assert np.max(np.abs(c(GRID) - np.cos(GRID**2))) <= eps
        assert np.max(np.abs(s(GRID) - np.sin(GRID**2))) <= eps
        assert np.max(np.hypot(c(GRID), s(GRID))) <= 1 + 1e-12

    def test_values(self):
        c, s = exp_i_a_squared_poly(1e-6)
        assert abs(c(0.0) - 1) <= 1e-6 and abs(s(0.0)) <= 1e-6
        assert abs(c(1.0) - math.cos(1)) <= 1e-6 and abs(s(1.0) - math.sin(1)) <= 1e-6
        assert c(0.3) == pytest.approx(c(-0.3)) and s(0.3) == pytest.approx(s(-0.3))

    def test_degree_monotone(self):
        degrees = [exp_i_a_squared_poly(e)[0].degree for e in (1e-2, 1e-4, 1e-8)]
        assert degrees == sorted(degrees)
