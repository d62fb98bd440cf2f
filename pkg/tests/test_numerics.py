import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.special import jv

from iqsp.errors import DomainError, SymmetryError
from iqsp.numerics import (
    MAX_DIM,
    StateVector,
    bessel_j,
    chebyshev_T,
    is_hermitian,
    is_unitary,
    kron,
    mat_exp,
    pauli,
    phase_distance,
    phase_fidelity,
    rx,
    unitarity_defect,
)

X, Y, Z = pauli("X"), pauli("Y"), pauli("Z")


def _random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


class TestMatExp:
    def test_zero_generator_gives_identity(self):
        assert np.allclose(mat_exp(np.zeros((2, 2)), 1.0), np.eye(2), atol=1e-15)

    def test_diagonal_generator(self):
        u = mat_exp(Z, math.pi / 2)
        assert np.allclose(u, np.diag([np.exp(-1j * math.pi / 2), np.exp(1j * math.pi / 2)]), atol=1e-14)

    def test_pauli_identity(self):
        u = mat_exp(X, 0.3)
        assert np.allclose(u, math.cos(0.3) * np.eye(2) - 1j * math.sin(0.3) * X, atol=1e-14)

    @pytest.mark.parametrize("n", [2, 5, 16])
    def test_matches_scipy_expm(self, n):
        rng = np.random.default_rng(n)
        h = _random_hermitian(rng, n)
        assert np.allclose(mat_exp(h, 0.7), expm(-0.7j * h), atol=1e-12)

    def test_result_is_unitary(self):
        h = _random_hermitian(np.random.default_rng(3), 8)
        assert is_unitary(mat_exp(h, 2.5))

    def test_group_property(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            h = _random_hermitian(rng, 6)
            t1, t2 = rng.uniform(-3, 3, 2)
            lhs = mat_exp(h, t1) @ mat_exp(h, t2)
            assert np.max(np.abs(lhs - mat_exp(h, t1 + t2))) <= 1e-9

    def test_non_hermitian_rejected(self):
        with pytest.raises(SymmetryError):
            mat_exp(np.array([[0, 1], [0, 0]]), 1.0)

    def test_non_square_rejected(self):
        with pytest.raises(DomainError):
            mat_exp(np.zeros((2, 3)), 1.0)

    def test_oversized_rejected(self):
        with pytest.raises(DomainError):
            mat_exp(np.zeros((2 * MAX_DIM, 2 * MAX_DIM)), 1.0)


class TestBessel:
    def test_trivial_values(self):
        assert bessel_j(0, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert bessel_j(1, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_j0_at_one(self):
        # 40-term power series oracle
        series = sum((-1) ** m / math.factorial(m) ** 2 * 0.25**m for m in range(40))
        assert bessel_j(0, 1.0) == pytest.approx(series, abs=1e-12)
        assert series == pytest.approx(0.765197686558, abs=1e-12)

    @pytest.mark.parametrize("n", [0, 1, 2, 5, 10, 30, 100, 200])
    @pytest.mark.parametrize("t", [0.01, 0.5, 1.0, 3.7, 10.0, 25.0, -7.5, 50.0])
    def test_matches_scipy(self, n, t):
        assert bessel_j(n, t) == pytest.approx(jv(n, t), abs=1e-12)

    def test_recurrence(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 60))
            t = float(rng.uniform(0.1, 40))
            lhs = bessel_j(n - 1, t) + bessel_j(n + 1, t)
            assert abs(lhs - (2 * n / t) * bessel_j(n, t)) <= 1e-9

    @pytest.mark.parametrize("n,t", [(-1, 1.0), (201, 1.0), (3, 51.0), (1.5, 1.0)])
    def test_out_of_range(self, n, t):
        with pytest.raises(DomainError):
            bessel_j(n, t)


class TestChebyshev:
    def test_trivial_values(self):
        assert chebyshev_T(0, 0.7) == 1.0
        assert chebyshev_T(1, -0.3) == pytest.approx(-0.3)
        assert chebyshev_T(2, 0.5) == pytest.approx(-0.5)

    @given(st.integers(0, 60), st.floats(-1, 1))
    @settings(max_examples=200, deadline=None)
    def test_cosine_form(self, n, x):
        assert chebyshev_T(n, x) == pytest.approx(math.cos(n * math.acos(x)), abs=1e-10)
        assert abs(chebyshev_T(n, x)) <= 1 + 1e-12

    def test_recurrence(self):
        rng = np.random.default_rng(9)
        for x in rng.uniform(-1, 1, 100):
            for n in range(1, 30):
                rhs = 2 * x * chebyshev_T(n, x) - chebyshev_T(n - 1, x)
                assert abs(chebyshev_T(n + 1, x) - rhs) <= 1e-10

    def test_outside_interval_rejected(self):
        with pytest.raises(DomainError):
            chebyshev_T(2, 1.5)


class TestHelpers:
    def test_kron_and_pauli(self):
        assert np.allclose(kron(X, Z), np.kron(X, Z))
        assert np.allclose(X @ Y, 1j * Z)

    def test_unitarity_checks(self):
        assert is_unitary(rx(0.4))
        assert not is_unitary(np.array([[1, 0], [0, 2]]))
        assert unitarity_defect(np.eye(3)) == 0.0
        assert is_hermitian(Z) and not is_hermitian(1j * Z)

    def test_rx_convention(self):
        assert np.allclose(rx(0.8), expm(-0.4j * X))

    def test_phase_metrics_ignore_global_phase(self):
        u = rx(0.3)
        assert phase_fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0)
        assert phase_distance(u, np.exp(-1.1j) * u) == pytest.approx(0.0, abs=1e-14)
        assert phase_distance(np.eye(2), Z) == pytest.approx(2.0)


class TestStateVector:
    def test_basis_state(self):
        s = StateVector.basis(3, 5)
        assert s.amplitudes[5] == 1 and s.probability_norm() == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            StateVector(2, np.ones(3))

    def test_immutable(self):
        s = StateVector.basis(1, 0)
        with pytest.raises(ValueError):
            s.amplitudes[0] = 2
