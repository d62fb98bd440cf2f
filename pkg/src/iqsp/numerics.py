"""Dense linear algebra and special-function primitives.

Everything in the package is checked against :func:`mat_exp`, which computes
``exp(-iHt)`` through a Hermitian eigendecomposition.  Matrices are plain
``numpy`` arrays; functions never mutate their inputs and always return new
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SymmetryError

__all__ = [
    "HERMITIAN_TOL",
    "UNITARY_TOL",
    "MAX_DIM",
    "StateVector",
    "as_matrix",
    "is_hermitian",
    "is_unitary",
    "unitarity_defect",
    "mat_exp",
    "bessel_j",
    "chebyshev_T",
    "pauli",
    "kron",
    "phase_fidelity",
    "phase_distance",
    "rx",
]

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
MAX_DIM = 2**12

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(name: str) -> np.ndarray:
    """Return a fresh copy of the named single-qubit Pauli matrix."""
    return _PAULI[name.upper()].copy()


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` into a 2-D complex array, validating the shape."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def unitarity_defect(u: np.ndarray) -> float:
    """Max-entry norm of ``U^dagger U - I``."""
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return math.inf
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return unitarity_defect(u) <= tol


def is_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        return False
    return float(np.max(np.abs(h - h.conj().T), initial=0.0)) <= tol


def mat_exp(h, t: float) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h``.

    The eigendecomposition route gives a result that is unitary to working
    precision, which is what the verification oracle needs.

    Raises
    ------
    SymmetryError
        If ``h`` is not Hermitian within ``HERMITIAN_TOL``.
    DomainError
        If the dimension exceeds ``MAX_DIM``.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise DomainError(f"generator must be square, got {h.shape}")
    if h.shape[0] > MAX_DIM:
        raise DomainError(f"dimension {h.shape[0]} exceeds {MAX_DIM}")
    asym = float(np.max(np.abs(h - h.conj().T), initial=0.0))
    if asym > HERMITIAN_TOL:
        raise SymmetryError(f"generator is not Hermitian (asymmetry {asym:.3e})")
    herm = 0.5 * (h + h.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def rx(phi: float) -> np.ndarray:
    """``R_X(phi) = [[cos(phi/2), -i sin(phi/2)], [-i sin(phi/2), cos(phi/2)]]``."""
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def phase_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Global-phase-insensitive overlap ``|tr(a^dagger b)| / dim``."""
    a = as_matrix(a)
    b = as_matrix(b)
    return float(abs(np.trace(a.conj().T @ b)) / a.shape[0])


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral-norm distance between ``a`` and ``b`` minimised over a global phase."""
    a = as_matrix(a)
    b = as_matrix(b)
    overlap = np.trace(b.conj().T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b, ord=2))


# ---------------------------------------------------------------------------
# Bessel functions of the first kind
# ---------------------------------------------------------------------------

_BESSEL_MAX_ORDER = 200
_BESSEL_MAX_ARG = 50.0


def _bessel_series(n: int, x: float) -> float:
    # sum_k (-1)^k (x/2)^(2k+n) / (k! (k+n)!), accumulated term by term.
    half = x / 2.0
    term = math.exp(n * math.log(half) - math.lgamma(n + 1)) if half > 0 else (1.0 if n == 0 else 0.0)
    total = term
    q = -half * half
    for k in range(1, 200):
        term *= q / (k * (k + n))
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300):
            break
    return total


def _bessel_miller(n: int, x: float) -> float:
    # Miller's downward recurrence normalised by J0 + 2 sum J_2k = 1.
    start = 2 * ((max(n, int(x)) + 20 + int(math.sqrt(40 * max(n, int(x)) + 40))) // 2)
    j_next, j_cur = 0.0, 1e-300
    result = 0.0
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = 2.0 * k / x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if k - 1 == n:
            result = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
    norm += j_cur  # J0 term
    return result / norm


def bessel_j(n: int, t: float) -> float:
    """Bessel function of the first kind ``J_n(t)`` for integer ``0 <= n <= 200``.

    Small arguments use the power series; otherwise Miller's downward
    recurrence is used.  Accurate to about ``1e-13`` absolute for
    ``|t| <= 50``.
    """
    if int(n) != n or n < 0 or n > _BESSEL_MAX_ORDER:
        raise DomainError(f"Bessel order must be an integer in [0, {_BESSEL_MAX_ORDER}], got {n}")
    n = int(n)
    t = float(t)
    if not math.isfinite(t) or abs(t) > _BESSEL_MAX_ARG:
        raise DomainError(f"Bessel argument must satisfy |t| <= {_BESSEL_MAX_ARG}, got {t}")
    sign = -1.0 if (t < 0 and n % 2 == 1) else 1.0
    x = abs(t)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x <= 2.0 or x * x / 4.0 < 0.1 * (n + 1):
        return sign * _bessel_series(n, x)
    return sign * _bessel_miller(n, x)


def chebyshev_T(n: int, x: float) -> float:
    """Chebyshev polynomial ``T_n(x)`` by the three-term recurrence."""
    if int(n) != n or n < 0:
        raise DomainError(f"Chebyshev degree must be a non-negative integer, got {n}")
    x = float(x)
    if abs(x) > 1.0:
        raise DomainError(f"Chebyshev argument must satisfy |x| <= 1, got {x}")
    t_prev, t_cur = 1.0, x
    if n == 0:
        return 1.0
    for _ in range(int(n) - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur


# ---------------------------------------------------------------------------
# State vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateVector:
    """Register state.  ``norm`` is 1 for normalised states; post-selected
    states keep the norm of the branch they were projected from."""

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)
    norm: float = 1.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.num_qubits:
            raise DomainError(
                f"{self.num_qubits} qubits need {2 ** self.num_qubits} amplitudes, got {amps.size}"
            )
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    def probability_norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)
