"""Block encodings and the phase-arithmetic gadgets built from them.

Register layout: ancilla qubits are the most significant factors (ancilla 0
first) and the system register comes last, so the projected block of an
encoding ``U`` is ``U[:system_dim, :system_dim]``.

Encodings are held as lazy operators that can be applied to a stack of
column vectors.  The projected block only needs ``system_dim`` columns, so
it stays cheap even when the full unitary would be large; ``unitary``
materialises the dense matrix on request (up to ``MAX_DIM``).
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares

from .errors import (
    ConstructionError,
    DomainError,
    PreconditionError,
    PromiseViolation,
    UnsupportedSizeError,
)
from .numerics import MAX_DIM, as_matrix, is_unitary, pauli, unitarity_defect
from .polyapprox import (
    ComplexPolynomial,
    RealPolynomial,
    arcsin_lagrange,
    arcsin_taylor,
    exp_i_a_squared_poly,
    jacobi_anger_cos,
    jacobi_anger_sin,
    neg_power_poly,
    smooth_window,
)
from .qsp import GqspSequence, SignalRotation, eval_signal, gqsp_r, solve_gqsp_phases, solve_qsp_phases

__all__ = [
    "BlockEncoding",
    "QetSequence",
    "SmallSquarePlan",
    "from_unitary",
    "be_sin",
    "qet_apply",
    "qet_polynomial",
    "qsp_to_qet_phases",
    "log_block_encode",
    "be_multiply",
    "be_apply_system",
    "lcu_pair",
    "phase_square",
    "phase_power",
    "phase_square_small",
    "small_square_queries",
    "write_matrix",
    "read_matrix",
    "small_square_plan",
    "phase_multiply",
    "phase_product_many",
    "phase_polynomial",
    "coulomb_block_encode",
    "achieved_z_angle",
    "SMALL_ANGLE_LIMIT",
    "PHASE_POWER_CAP",
]

SMALL_ANGLE_LIMIT = 3 / 5
PHASE_POWER_CAP = 6
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


# ---------------------------------------------------------------------------
# Lazy operators
# ---------------------------------------------------------------------------


class _Op:
    """Linear operator on ``2**n_anc * sys_dim`` amplitudes (ancillas first)."""

    def __init__(self, n_anc: int, sys_dim: int):
        self.n_anc = n_anc
        self.sys_dim = sys_dim

    @property
    def dim(self) -> int:
        return (2**self.n_anc) * self.sys_dim

    def apply(self, v: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def apply_adj(self, v: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class _Dense(_Op):
    def __init__(self, n_anc, sys_dim, matrix):
        super().__init__(n_anc, sys_dim)
        self.m = np.asarray(matrix, dtype=complex)
        self.mh = self.m.conj().T

    def apply(self, v):
        return self.m @ v

    def apply_adj(self, v):
        return self.mh @ v


class _OnSystem(_Op):
    def __init__(self, n_anc, sys_dim, matrix):
        super().__init__(n_anc, sys_dim)
        self.m = np.asarray(matrix, dtype=complex)

    def _go(self, v, m):
        k = v.shape[1]
        t = v.reshape(2**self.n_anc, self.sys_dim, k)
        return np.einsum("ij,ajk->aik", m, t).reshape(self.dim, k)

    def apply(self, v):
        return self._go(v, self.m)

    def apply_adj(self, v):
        return self._go(v, self.m.conj().T)


class _OnAncilla(_Op):
    """Single-qubit gate on ancilla ``j``."""

    def __init__(self, n_anc, sys_dim, j, matrix):
        super().__init__(n_anc, sys_dim)
        self.j = j
        self.m = np.asarray(matrix, dtype=complex)

    def _go(self, v, m):
        k = v.shape[1]
        t = v.reshape(2**self.j, 2, -1, k)
        return np.einsum("ij,ajbk->aibk", m, t).reshape(self.dim, k)

    def apply(self, v):
        return self._go(v, self.m)

    def apply_adj(self, v):
        return self._go(v, self.m.conj().T)


class _Embed(_Op):
    """``inner`` acting on ancillas ``off .. off+inner.n_anc-1`` and the system."""

    def __init__(self, n_anc, inner: _Op, off: int):
        super().__init__(n_anc, inner.sys_dim)
        if off < 0 or off + inner.n_anc > n_anc:
            raise ConstructionError("embedding does not fit the register")
        self.inner = inner
        self.off = off

    def _go(self, v, adj):
        k = v.shape[1]
        m = self.inner.n_anc
        rest = self.n_anc - self.off - m
        if self.off == 0 and rest == 0:
            return self.inner.apply_adj(v) if adj else self.inner.apply(v)
        t = v.reshape(2**self.off, 2**m, 2**rest, self.sys_dim, k).transpose(1, 3, 0, 2, 4)
        flat = t.reshape((2**m) * self.sys_dim, -1)
        out = self.inner.apply_adj(flat) if adj else self.inner.apply(flat)
        out = out.reshape(2**m, self.sys_dim, 2**self.off, 2**rest, k).transpose(2, 0, 3, 1, 4)
        return out.reshape(self.dim, k)

    def apply(self, v):
        return self._go(v, False)

    def apply_adj(self, v):
        return self._go(v, True)


class _Seq(_Op):
    """Operators applied in list order (the first entry acts first)."""

    def __init__(self, n_anc, sys_dim, ops):
        super().__init__(n_anc, sys_dim)
        self.ops = list(ops)

    def apply(self, v):
        for op in self.ops:
            v = op.apply(v)
        return v

    def apply_adj(self, v):
        for op in reversed(self.ops):
            v = op.apply_adj(v)
        return v


class _Adjoint(_Op):
    def __init__(self, inner: _Op):
        super().__init__(inner.n_anc, inner.sys_dim)
        self.inner = inner

    def apply(self, v):
        return self.inner.apply_adj(v)

    def apply_adj(self, v):
        return self.inner.apply(v)


class _ZeroPhase(_Op):
    """``exp(i phi (2 Pi - I))`` with ``Pi`` the all-zero projector on ancillas
    ``lo .. n_anc-1``.  With ``signed=True`` ancilla 0 flips the sign of
    ``phi`` (used for the real-part combination)."""

    def __init__(self, n_anc, sys_dim, phi, lo=0, signed=False):
        super().__init__(n_anc, sys_dim)
        sub = n_anc - lo
        inner = np.full(2**sub, np.exp(-1j * phi), dtype=complex)
        inner[0] = np.exp(1j * phi)
        if signed:
            diag = np.concatenate([np.tile(inner, 2 ** (lo - 1)), np.tile(inner.conj(), 2 ** (lo - 1))])
        else:
            diag = np.tile(inner, 2**lo)
        self.diag = np.repeat(diag, sys_dim)

    def apply(self, v):
        return self.diag[:, None] * v

    def apply_adj(self, v):
        return self.diag.conj()[:, None] * v


class _Select(_Op):
    """``|0><0| (x) A + |1><1| (x) B`` controlled on ancilla 0."""

    def __init__(self, n_anc, a: _Op, b: _Op):
        super().__init__(n_anc, a.sys_dim)
        self.a, self.b = a, b

    def apply(self, v):
        h = v.shape[0] // 2
        return np.vstack([self.a.apply(v[:h]), self.b.apply(v[h:])])

    def apply_adj(self, v):
        h = v.shape[0] // 2
        return np.vstack([self.a.apply_adj(v[:h]), self.b.apply_adj(v[h:])])


class _Scaled(_Op):
    def __init__(self, inner: _Op, phase: complex):
        super().__init__(inner.n_anc, inner.sys_dim)
        self.inner, self.phase = inner, phase

    def apply(self, v):
        return self.phase * self.inner.apply(v)

    def apply_adj(self, v):
        return np.conj(self.phase) * self.inner.apply_adj(v)


# ---------------------------------------------------------------------------
# Block encodings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """``(alpha, ancillas, eps)`` block encoding of a ``system_dim`` operator.

    ``alpha * block`` is the encoded operator estimate.  ``queries`` counts
    calls to the underlying signal oracle(s).
    """

    alpha: float
    ancillas: int
    eps: float
    system_dim: int
    op: _Op = field(repr=False)
    queries: int = 0
    label: str = ""
    meta: dict = field(default_factory=dict, repr=False)
    block: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.alpha < 0 or self.eps < 0:
            raise DomainError("alpha and eps must be non-negative")
        if self.op.n_anc != self.ancillas or self.op.sys_dim != self.system_dim:
            raise ConstructionError("operator layout does not match the declared ancillas/system size")
        if self.block is None:
            cols = np.zeros((self.op.dim, self.system_dim), dtype=complex)
            cols[: self.system_dim] = np.eye(self.system_dim)
            blk = self.op.apply(cols)[: self.system_dim]
        else:
            blk = np.asarray(self.block, dtype=complex)
        blk = blk.copy()
        blk.setflags(write=False)
        object.__setattr__(self, "block", blk)

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def encoded(self) -> np.ndarray:
        return self.alpha * self.block

    @property
    def success_probability(self) -> float:
        """Mean post-selection probability over system basis inputs."""
        return float(np.sum(np.abs(self.block) ** 2) / self.system_dim)

    def success_probability_for(self, state) -> float:
        psi = np.asarray(state, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return float(np.linalg.norm(self.block @ psi) ** 2)

    @property
    def unitary(self) -> np.ndarray:
        if self.dim > MAX_DIM:
            raise UnsupportedSizeError(f"dense unitary of dimension {self.dim} exceeds {MAX_DIM}")
        return self.op.apply(np.eye(self.dim, dtype=complex))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Apply the full unitary to a vector or to the columns of a matrix."""
        v = np.asarray(v, dtype=complex)
        if v.ndim == 1:
            return self.op.apply(v[:, None])[:, 0]
        return self.op.apply(v)

    def to_json(self) -> dict:
        out = {
            "alpha": float(self.alpha),
            "ancillas": int(self.ancillas),
            "eps": float(self.eps),
            "dim": int(self.dim),
            "success_probability": self.success_probability,
        }
        return out


@dataclass(frozen=True)
class QetSequence:
    """Projector-controlled phases ``phi_1 .. phi_d`` (reflection convention).

    With ``real_part`` the sequence is run with ``+phi`` and ``-phi`` under
    an extra ancilla so that the block is ``Re Poly``.
    """

    phases: tuple
    real_part: bool = False

    def __post_init__(self):
        phases = tuple(float(p) for p in np.asarray(self.phases, dtype=float).reshape(-1))
        if not phases:
            raise DomainError("a QET sequence needs at least one phase")
        object.__setattr__(self, "phases", phases)

    @property
    def degree(self) -> int:
        return len(self.phases)


def from_unitary(u, label: str = "unitary") -> BlockEncoding:
    """Zero-ancilla, ``alpha = 1`` encoding of a unitary."""
    u = as_matrix(u)
    if u.shape[0] != u.shape[1] or not is_unitary(u, 1e-9):
        raise DomainError("from_unitary needs a unitary matrix")
    return BlockEncoding(1.0, 0, 0.0, u.shape[0], _Dense(0, u.shape[0], u), queries=1, label=label)


def _check_unitary(u) -> np.ndarray:
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        raise DomainError("signal must be square")
    defect = unitarity_defect(u)
    if defect > 1e-9:
        raise DomainError(f"signal is not unitary (defect {defect:.2e})")
    return u


def _generator_norm(u: np.ndarray) -> float:
    return float(np.max(np.abs(np.angle(np.linalg.eigvals(u)))))


def be_sin(u) -> BlockEncoding:
    """One-ancilla encoding of ``sin(H)`` from ``U = exp(iH)``.

    Circuit: ``-i (H (x) I) cU^dagger (ZX (x) I) cU (H (x) I)``, whose
    ``<0|.|0>`` block is ``(U - U^dagger) / 2i = sin(H)``.
    """
    u = _check_unitary(u)
    n = u.shape[0]
    eye = np.eye(n, dtype=complex)
    zero = np.zeros((n, n), dtype=complex)
    cu = np.block([[eye, zero], [zero, u]])
    zx = pauli("Z") @ pauli("X")
    ops = [
        _OnAncilla(1, n, 0, _HADAMARD),
        _Dense(1, n, cu),
        _OnAncilla(1, n, 0, zx),
        _Dense(1, n, cu.conj().T),
        _OnAncilla(1, n, 0, -1j * _HADAMARD),
    ]
    return BlockEncoding(1.0, 1, 0.0, n, _Seq(1, n, ops), queries=2, label="sin(H)")


def qsp_to_qet_phases(psi) -> tuple:
    """Map ``WX_SZ`` phases to reflection-convention phases.

    ``prod_j e^{i phi_j Z} R(a)`` with ``R(a) = [[a, s], [s, -a]]`` then has
    top-left real part equal to ``<+|U_psi|+>``.
    """
    psi = list(psi)
    d = len(psi) - 1
    if d < 1:
        raise DomainError("QET needs a sequence of degree >= 1")
    phis = [psi[0] + psi[d] - math.pi / 2 + d * math.pi / 2]
    phis += [psi[j] - math.pi / 2 for j in range(1, d)]
    return tuple(phis)


def qet_apply(be: BlockEncoding, seq: QetSequence, eps: float | None = None) -> BlockEncoding:
    """Quantum eigenvalue transform of ``be``'s normalised block.

    The signal calls alternate ``U, U^dagger, U, ...`` (``U`` acts first),
    each followed by its projector-controlled phase.
    """
    n = be.ancillas
    sysd = be.system_dim
    phases = seq.phases
    d = len(phases)
    if seq.real_part:
        total = n + 1
        inner = _Embed(total, be.op, 1)
        ops = [_OnAncilla(total, sysd, 0, _HADAMARD)]
    else:
        total = n
        inner = be.op
        ops = []
    for idx, j in enumerate(range(d - 1, -1, -1)):
        ops.append(inner if idx % 2 == 0 else _Adjoint(inner))
        if seq.real_part:
            ops.append(_ZeroPhase(total, sysd, phases[j], lo=1, signed=True))
        else:
            ops.append(_ZeroPhase(total, sysd, phases[j], lo=0))
    if seq.real_part:
        ops.append(_OnAncilla(total, sysd, 0, _HADAMARD))
    out_eps = be.eps / be.alpha * d * d if eps is None else eps
    return BlockEncoding(1.0, total, out_eps, sysd, _Seq(total, sysd, ops), queries=be.queries * d,
                         label=f"QET[{be.label}]", meta={"degree": d, "real_part": seq.real_part})


def _lipschitz(poly: RealPolynomial) -> float:
    der = cheb.chebder(poly.chebyshev_coefficients())
    xs = np.linspace(-1, 1, 2001)
    return float(np.max(np.abs(cheb.chebval(xs, der)))) if len(der) else 0.0


def qet_polynomial(be: BlockEncoding, poly: RealPolynomial, approx_eps: float = 0.0, seed: int = 0) -> BlockEncoding:
    """Encode ``poly(block)`` (real part taken with one extra ancilla).

    The declared error is ``approx_eps`` (the caller's polynomial error)
    plus the propagated input error and the phase-solver residual.
    """
    seq = solve_qsp_phases(poly, seed=seed)
    phis = qsp_to_qet_phases(seq.phases)
    eps = approx_eps + _lipschitz(poly) * be.eps / max(be.alpha, 1e-300) + seq.residual
    out = qet_apply(be, QetSequence(phis, real_part=True), eps=eps)
    out.meta["solver_residual"] = seq.residual
    return out


@functools.lru_cache(maxsize=64)
def _taylor_for(eps: float) -> RealPolynomial:
    k = 1
    while (math.pi / 2) * arcsin_taylor(k).bound > eps / 2:
        k += 1
    return arcsin_taylor(k).to_chebyshev()


def log_block_encode(u, eps: float) -> BlockEncoding:
    """``(pi/2, 2, eps)`` encoding of ``H`` from ``U = exp(iH)`` with ``||H|| <= 1/2``.

    ``be_sin`` followed by QET with a truncated ``(2/pi) arcsin`` series;
    the truncation ``k`` is the smallest one whose tail at ``x = 1/2`` keeps
    ``(pi/2) |tail|`` below ``eps / 2``.
    """
    if not 0 < eps <= 0.5:
        raise DomainError("eps must lie in (0, 1/2]")
    u = _check_unitary(u)
    if _generator_norm(u) > 0.5 + 1e-9:
        raise PreconditionError("log_block_encode needs ||H|| <= 1/2")
    sin_be = be_sin(u)
    poly = _taylor_for(float(eps))
    inner = qet_polynomial(sin_be, poly, approx_eps=poly.bound)
    declared = (math.pi / 2) * (poly.bound + inner.meta["solver_residual"])
    if declared > eps:
        raise ConstructionError("arcsin encoding did not meet its error target")
    return BlockEncoding(
        math.pi / 2, inner.ancillas, eps, inner.system_dim, inner.op, queries=inner.queries,
        label="log(U)/i", meta={"k": poly.meta.get("k"), "degree": poly.degree}, block=inner.block,
    )


def be_multiply(a: BlockEncoding, b: BlockEncoding) -> BlockEncoding:
    """Product ``A B`` on disjoint ancilla registers (``a``'s ancillas first)."""
    if a.system_dim != b.system_dim:
        raise DomainError("system dimensions differ")
    n = a.ancillas + b.ancillas
    ops = [_Embed(n, b.op, a.ancillas), _Embed(n, a.op, 0)]
    return BlockEncoding(
        a.alpha * b.alpha, n, a.alpha * b.eps + b.alpha * a.eps, a.system_dim, _Seq(n, a.system_dim, ops),
        queries=a.queries + b.queries, label=f"({a.label})({b.label})", block=a.block @ b.block,
    )


def be_apply_system(be: BlockEncoding, left=None, right=None) -> BlockEncoding:
    """Multiply the encoding by unitaries on the system register
    (``left @ U @ right``); costs no ancillas and no queries."""
    n, sysd = be.ancillas, be.system_dim
    ops = []
    blk = be.block
    if right is not None:
        ops.append(_OnSystem(n, sysd, right))
        blk = blk @ right
    ops.append(be.op)
    if left is not None:
        ops.append(_OnSystem(n, sysd, left))
        blk = left @ blk
    return BlockEncoding(be.alpha, n, be.eps, sysd, _Seq(n, sysd, ops), be.queries, be.label, dict(be.meta), blk)


def lcu_pair(a: BlockEncoding, b: BlockEncoding, phase: complex = 1j) -> BlockEncoding:
    """Equal-weight combination ``(A + phase B) / 2`` through one select ancilla.

    Both inputs must use the same ancilla layout; the combined encoding has
    ``alpha = 2`` relative to the normalised blocks.
    """
    if a.ancillas != b.ancillas or a.system_dim != b.system_dim:
        raise DomainError("lcu_pair needs encodings with the same layout")
    n = a.ancillas + 1
    sysd = a.system_dim
    sel = _Select(n, a.op, _Scaled(b.op, phase))
    ops = [_OnAncilla(n, sysd, 0, _HADAMARD), sel, _OnAncilla(n, sysd, 0, _HADAMARD)]
    blk = 0.5 * (a.block + phase * b.block)
    return BlockEncoding(2.0, n, a.eps + b.eps, sysd, _Seq(n, sysd, ops), a.queries + b.queries,
                         f"LCU[{a.label},{b.label}]", block=blk)


def achieved_z_angle(m: np.ndarray) -> float:
    """``phi`` such that ``m`` is proportional to ``exp(i phi Z)`` (from ``arg(m00/m11)/2``)."""
    m = np.asarray(m, dtype=complex)
    return float(np.angle(m[0, 0] / m[1, 1]) / 2)


# ---------------------------------------------------------------------------
# Phase squaring and powers (ancilla-based backend)
# ---------------------------------------------------------------------------


def _check_z(w: SignalRotation, limit: float) -> None:
    if not isinstance(w, SignalRotation) or w.axis != "Z":
        raise PreconditionError("expected a Z-axis signal rotation")
    if abs(w.theta) > limit + 1e-12:
        raise PreconditionError(f"|theta| = {abs(w.theta):.6g} exceeds {limit:.6g}")


def phase_power(w: SignalRotation, l: int, eps_prime: float) -> BlockEncoding:
    """Encoding of ``exp(i (theta/2)^l Z)`` with ``2l + 2`` ancillas and ``alpha = 2``.

    ``l`` logarithmic encodings are multiplied (a literal ``Z`` is appended
    when ``l`` is even), giving ``x Z`` with ``x = (theta/2)^l / (pi/2)^l``;
    Jacobi-Anger cosine and sine polynomials at ``t = (pi/2)^l`` are applied
    by QET and combined as ``C + iS``.
    """
    if int(l) != l or l < 1:
        raise DomainError("l must be a positive integer")
    l = int(l)
    if l > PHASE_POWER_CAP:
        raise UnsupportedSizeError(f"l = {l} exceeds the cap {PHASE_POWER_CAP}")
    if not 0 < eps_prime < 0.5:
        raise DomainError("eps' must lie in (0, 1/2)")
    _check_z(w, 1.0)
    u = eval_signal(w)
    if l == 1:
        be = from_unitary(u, label="W_Z")
        return BlockEncoding(1.0, 0, 0.0, 2, be.op, 1, "W_Z", {"l": 1, "backend": "identity"})
    t = (math.pi / 2) ** l
    eps_log = eps_prime / (4 * l * (math.pi / 2) ** (l - 1))
    log_be = log_block_encode(u, eps_log)
    prod = log_be
    for _ in range(l - 1):
        prod = be_multiply(prod, log_be)
    if l % 2 == 0:
        prod = be_apply_system(prod, left=pauli("Z"))
    eps_ja = eps_prime / 2
    cpoly = jacobi_anger_cos(t, eps_ja)
    spoly = jacobi_anger_sin(t, eps_ja)
    c_be = qet_polynomial(prod, cpoly, approx_eps=cpoly.bound)
    s_be = qet_polynomial(prod, spoly, approx_eps=spoly.bound)
    out = lcu_pair(c_be, s_be, 1j)
    meta = {
        "l": l,
        "t": t,
        "eps_log": eps_log,
        "cos_degree": cpoly.degree,
        "sin_degree": spoly.degree,
        "backend": "ancilla",
    }
    return BlockEncoding(2.0, out.ancillas, eps_prime, 2, out.op, out.queries, f"exp(i(theta/2)^{l} Z)", meta, out.block)


def phase_square(w: SignalRotation, eps_prime: float) -> BlockEncoding:
    """Six-ancilla encoding of ``exp(i (theta/2)^2 Z)`` for ``|theta| <= 1``."""
    return phase_power(w, 2, eps_prime)


# ---------------------------------------------------------------------------
# Ancilla-free small-angle squaring
# ---------------------------------------------------------------------------

_SMALL_A_MAX = 0.31  # |theta/2| <= 0.3 plus a margin


@dataclass(frozen=True)
class SmallSquarePlan:
    """Precomputed two-stage circuit for ancilla-free squaring.

    Stage 1 is a GQSP sequence whose signal is the oracle itself
    (``W_Z(theta) = e^{-i theta/2} diag(e^{i theta}, 1)``); it produces a
    rotation about an axis in the XY plane whose cosine is
    ``A(sin(theta/2))``, where ``A`` is an arcsine interpolant times an even
    window.  A fixed phase gate removes the determinant.  Stage 2 is a
    Z-processing QSP sequence using that rotation as its signal, fitted so
    that its output is ``diag(e^{i a^2}, e^{-i a^2})``; Z-processing
    commutes with the unknown axis angle, so the diagonal output is
    unaffected by it.
    """

    tier: int
    stage1: GqspSequence
    det_fix: complex
    stage2: tuple
    lagrange_q: int
    window_degree: int
    measured_error: float

    @property
    def stage1_degree(self) -> int:
        return self.stage1.degree

    @property
    def stage2_degree(self) -> int:
        return len(self.stage2) - 1

    @property
    def queries(self) -> int:
        return self.stage1_degree * self.stage2_degree

    def apply(self, oracle: np.ndarray) -> np.ndarray:
        """Run the circuit with the given 2x2 oracle matrix."""
        o = np.asarray(oracle, dtype=complex)
        s1 = self.stage1
        m = gqsp_r(s1.thetas[0], s1.omegas[0], s1.lam)
        for th, om in zip(s1.thetas[1:], s1.omegas[1:]):
            m = gqsp_r(th, om) @ (o @ m)
        v1 = m @ np.diag([1.0, np.conj(self.det_fix)])
        out = np.diag(np.exp([1j * self.stage2[0], -1j * self.stage2[0]]))
        for psi in self.stage2[1:]:
            out = out @ v1 @ np.diag(np.exp([1j * psi, -1j * psi]))
        return out


def _stage1(tol: float):
    """Arcsine-times-window target as a GQSP polynomial in ``z = e^{i theta}``."""
    inner = math.sin(_SMALL_A_MAX)
    q = 4
    while arcsin_lagrange(q, 1 / math.pi).measured_error(np.arcsin, (-inner, inner)) > tol:
        q += 2
        if q > 24:
            raise ConstructionError("arcsine interpolant cannot reach the requested tolerance")
    pq = arcsin_lagrange(q, 1 / math.pi)
    xs = np.linspace(0, 1, 4001)
    over = np.nonzero(np.abs(pq(xs)) > 1)[0]
    outer = min(0.85, (xs[over[0]] if over.size else 1.0) - 0.02)
    window = smooth_window(inner + 0.005, outer, max(tol, 1e-12))
    a_coeffs = cheb.chebmul(pq.chebyshev_coefficients(), window.coefficients)
    a_coeffs[0::2] = 0.0
    grid = np.linspace(-1, 1, 8001)
    peak = float(np.max(np.abs(cheb.chebval(grid, a_coeffs))))
    if peak > 1:
        raise ConstructionError("arcsine-window product exceeds one")
    deg = len(a_coeffs) - 1
    # sample A(sin(theta/2)) w^D on z = w^2 and read off the z-coefficients
    m = 2 * (deg + 1)
    zz = np.exp(2j * np.pi * np.arange(m) / m)
    ww = np.exp(1j * np.angle(zz) / 2)
    vals = cheb.chebval(((ww - 1 / ww) / 2j).real, a_coeffs) * ww**deg
    coeffs = np.fft.fft(vals) / m
    target = ComplexPolynomial(coeffs[: deg + 1])
    seq = solve_gqsp_phases(target)
    det = -np.exp(1j * (seq.lam + seq.omegas[0]))
    for om in seq.omegas[1:]:
        det *= -np.exp(1j * om)
    return seq, complex(det), q, window.degree


def _stage2(tol: float, seed: int = 0):
    cpoly, spoly = exp_i_a_squared_poly(min(tol, 0.25))
    a = np.linspace(-_SMALL_A_MAX, _SMALL_A_MAX, 63)
    target = cpoly(a) + 1j * spoly(a)
    s = np.sqrt(1 - a * a)

    def unitaries(psi):
        n = a.size
        out = np.zeros((n, 2, 2), dtype=complex)
        out[:, 0, 0] = np.exp(1j * psi[0])
        out[:, 1, 1] = np.exp(-1j * psi[0])
        sig = np.empty((n, 2, 2), dtype=complex)
        sig[:, 0, 0] = sig[:, 1, 1] = a
        sig[:, 0, 1] = sig[:, 1, 0] = 1j * s
        for p in psi[1:]:
            out = out @ sig
            out[:, :, 0] *= np.exp(1j * p)
            out[:, :, 1] *= np.exp(-1j * p)
        return out

    def resid(psi):
        u = unitaries(psi)
        r = np.concatenate([u[:, 0, 0] - target, u[:, 0, 1]])
        return np.concatenate([r.real, r.imag])

    rng = np.random.default_rng(seed)
    for d in range(2, 21, 2):
        best, best_err = None, math.inf
        for _ in range(8):
            x0 = rng.uniform(-math.pi, math.pi, d + 1)
            sol = least_squares(resid, x0, method="lm", xtol=1e-14, ftol=1e-14, max_nfev=400 * (d + 1))
            err = float(np.max(np.abs(resid(sol.x))))
            if err < best_err:
                best, best_err = sol.x, err
            if best_err <= tol:
                break
        if best_err <= tol:
            return tuple(float(p) for p in best), d
    raise ConstructionError("Z-processing stage did not reach its tolerance")


@functools.lru_cache(maxsize=16)
def small_square_plan(tier: int) -> SmallSquarePlan:
    """Plan accurate to about ``0.5 * 10^-tier`` on ``|theta| <= 3/5``."""
    acc = 0.5 * 10.0 ** (-tier)
    seq, det, q, wdeg = _stage1(acc / 8)
    psi, _ = _stage2(acc / 4)
    plan = SmallSquarePlan(tier, seq, det, psi, q, wdeg, 0.0)
    thetas = np.linspace(-SMALL_ANGLE_LIMIT, SMALL_ANGLE_LIMIT, 61)
    err = 0.0
    for th in thetas:
        v = plan.apply(eval_signal(SignalRotation("Z", th)))
        err = max(err, _phase_dist(v, _zrot((th / 2) ** 2)))
    return SmallSquarePlan(tier, seq, det, psi, q, wdeg, err)


_MAX_TIER = 5  # the Z-processing fit does not reach 1e-7 at any tested degree


def _tier(eps: float) -> int:
    return min(_MAX_TIER, max(2, math.ceil(-math.log10(eps) - 1e-9)))


def _zrot(phi: float) -> np.ndarray:
    return np.diag([np.exp(1j * phi), np.exp(-1j * phi)])


def _phase_dist(a: np.ndarray, b: np.ndarray) -> float:
    overlap = np.trace(b.conj().T @ a)
    ph = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b, 2))


def phase_square_small(w: SignalRotation, eps: float) -> np.ndarray:
    """Ancilla-free ``exp(i (theta/2)^2 Z)`` (up to global phase) for ``|theta| <= 3/5``."""
    if not 0 < eps < 1 - math.asin(1 / 3):
        raise DomainError("eps must lie in (0, 1 - arcsin(1/3))")
    _check_z(w, SMALL_ANGLE_LIMIT)
    plan = small_square_plan(_tier(eps))
    return plan.apply(eval_signal(w))


def small_square_queries(eps: float) -> int:
    """Oracle calls made by :func:`phase_square_small` at accuracy ``eps``."""
    return small_square_plan(_tier(eps)).queries


# ---------------------------------------------------------------------------
# Multiplication of phases
# ---------------------------------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _identity_choice(t1: float, t2: float) -> str:
    return "difference" if t1 * t2 > 0 else "sum"


def _small_multiply(o1, o2, t1: float, t2: float, plan: SmallSquarePlan) -> np.ndarray:
    """2x2 circuit for ``W_Z(t1 t2)`` from oracles ``o1 ~ W_Z(t1)``, ``o2 ~ W_Z(t2)``."""
    if _identity_choice(t1, t2) == "sum":
        comb = plan.apply(o1 @ o2)
        return comb @ _X @ plan.apply(o1) @ plan.apply(o2) @ _X
    comb = plan.apply(o1 @ _X @ o2 @ _X)
    return plan.apply(o1) @ plan.apply(o2) @ _X @ comb @ _X


def phase_multiply(w1: SignalRotation, w2: SignalRotation, eps: float) -> BlockEncoding:
    """Encoding of ``exp(i theta1 theta2 Z / 2) = W_Z(theta1 theta2)``.

    Uses the polarisation identity with whichever of ``theta1 +- theta2``
    is smaller in magnitude.  If both angles are within ``3/5`` the
    ancilla-free squaring backend is used (0 ancillas, ``alpha = 1``);
    otherwise three six-ancilla squarings are multiplied.
    """
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    for w in (w1, w2):
        _check_z(w, 1.0)
    t1, t2 = w1.theta, w2.theta
    choice = _identity_choice(t1, t2)
    combined = t1 - t2 if choice == "difference" else t1 + t2
    if max(abs(t1), abs(t2)) <= SMALL_ANGLE_LIMIT:
        plan = small_square_plan(_tier(eps / 3))
        m = _small_multiply(eval_signal(w1), eval_signal(w2), t1, t2, plan)
        meta = {"backend": "ancilla-free", "identity": choice, "squaring_queries": plan.queries,
                "kappa": _kappa(plan.queries, eps / 3)}
        return BlockEncoding(1.0, 0, eps, 2, _Dense(0, 2, m), 4 * plan.queries, "W_Z(theta1 theta2)", meta)
    if abs(combined) > 1:
        raise PreconditionError("combined angle exceeds the squaring range")
    part = eps / 3.5
    sq_c = phase_square(SignalRotation("Z", combined), part)
    sq_1 = phase_square(w1, part)
    sq_2 = phase_square(w2, part)
    x_sq = be_apply_system(be_multiply(sq_1, sq_2), left=_X, right=_X)
    if choice == "sum":
        out = be_multiply(sq_c, x_sq)
    else:
        out = be_multiply(x_sq, be_apply_system(sq_c, left=_X, right=_X))
        out = BlockEncoding(out.alpha, out.ancillas, out.eps, 2, out.op, out.queries, out.label, out.meta,
                            sq_1.block @ sq_2.block @ _X @ sq_c.block @ _X)
    meta = {"backend": "six-ancilla", "identity": choice}
    return BlockEncoding(out.alpha, out.ancillas, eps, 2, out.op, out.queries + sq_c.queries, "W_Z(theta1 theta2)",
                         meta, out.block)


def _kappa(queries: int, eps: float) -> float:
    """Empirical constant in ``queries ~ kappa log^2(1/eps) / loglog(1/eps)``."""
    le = math.log(1 / eps)
    scale = le * le / max(math.log(le), 1e-9)
    return queries / scale


def _tree_product(oracles, angles, plan: SmallSquarePlan):
    """Pairwise products up a binary tree (an unpaired element passes up)."""
    queries = [1] * len(oracles)
    while len(oracles) > 1:
        nxt_o, nxt_a, nxt_q = [], [], []
        for i in range(0, len(oracles) - 1, 2):
            if max(abs(angles[i]), abs(angles[i + 1])) > SMALL_ANGLE_LIMIT:
                raise PreconditionError("intermediate angle leaves the ancilla-free range")
            nxt_o.append(_small_multiply(oracles[i], oracles[i + 1], angles[i], angles[i + 1], plan))
            nxt_a.append(angles[i] * angles[i + 1])
            # the combined oracle and the two single squarings each cost q_i + q_j in total
            nxt_q.append(2 * plan.queries * (queries[i] + queries[i + 1]))
        if len(oracles) % 2:
            nxt_o.append(oracles[-1])
            nxt_a.append(angles[-1])
            nxt_q.append(queries[-1])
        oracles, angles, queries = nxt_o, nxt_a, nxt_q
    return oracles[0], angles[0], queries[0]


def _layer_eps(eps: float, nu: int) -> float:
    return eps / (2 * max(1.0, math.log2(1 / eps)) ** (2 * max(nu - 1, 0)))


def phase_product_many(ws, eps: float) -> BlockEncoding:
    """``W_Z(prod theta_i)`` for a power-of-two list (<= 8) of Z rotations.

    Divide and conquer with the ancilla-free backend, so every
    intermediate result is a 2x2 unitary usable as the next oracle.
    """
    ws = list(ws)
    n = len(ws)
    if n < 1 or n > 8 or n & (n - 1):
        raise UnsupportedSizeError("need 1, 2, 4 or 8 rotations")
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    for w in ws:
        _check_z(w, SMALL_ANGLE_LIMIT)
    nu = int(math.log2(n))
    eps1 = _layer_eps(eps, nu)
    plan = small_square_plan(_tier(eps1 / 3))
    m, angle, queries = _tree_product([eval_signal(w) for w in ws], [w.theta for w in ws], plan)
    meta = {"backend": "ancilla-free", "levels": nu, "layer_eps": eps1, "target_angle": angle}
    return BlockEncoding(1.0, 0, eps, 2, _Dense(0, 2, m), queries, "W_Z(prod theta)", meta)


def phase_polynomial(monomials, eps: float) -> BlockEncoding:
    """``exp(i sum_j a_j prod_i (theta_ij/2)^l_ij Z)`` as a 2x2 unitary.

    ``monomials`` is a list of ``(a_j, [(SignalRotation, power), ...])``.
    Each monomial becomes ``W_Z(c prod phi_k)`` with the repeated angles
    ``phi_k`` and a fictitious constant ``c = a_j 2^{1 - sum l}``; the
    monomials are applied one after another with budget ``eps / M`` each.
    """
    monomials = list(monomials)
    if not 1 <= len(monomials) <= 4:
        raise UnsupportedSizeError("between 1 and 4 monomials are supported")
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    per = eps / len(monomials)
    total = np.eye(2, dtype=complex)
    queries = 0
    target = 0.0
    for coeff, factors in monomials:
        factors = list(factors)
        angles = []
        for w, power in factors:
            _check_z(w, SMALL_ANGLE_LIMIT)
            if int(power) != power or not 1 <= power <= 3:
                raise UnsupportedSizeError("powers must be integers in 1..3")
            angles += [w.theta] * int(power)
        if not angles:
            raise DomainError("a monomial needs at least one factor")
        c = float(coeff) * 2.0 ** (1 - len(angles))
        target += float(coeff) * float(np.prod([a / 2 for a in angles]))
        if c == 1.0 and len(angles) == 1:
            total = eval_signal(SignalRotation("Z", angles[0])) @ total
            queries += 1
            continue
        if abs(c) > SMALL_ANGLE_LIMIT:
            raise PreconditionError(f"fictitious coefficient angle {c:.4g} leaves the ancilla-free range")
        elems = [c] + angles
        oracles = [eval_signal(SignalRotation("Z", t)) for t in elems]
        nu = max(1, math.ceil(math.log2(len(elems))))
        plan = small_square_plan(_tier(_layer_eps(per, nu) / 3))
        m, _, q = _tree_product(oracles, elems, plan)
        total = m @ total
        queries += q
    return BlockEncoding(1.0, 0, eps, 2, _Dense(0, 2, total), queries, "phase polynomial",
                         {"target_angle": target, "monomials": len(monomials)})


# ---------------------------------------------------------------------------
# Coulomb potential
# ---------------------------------------------------------------------------


def coulomb_block_encode(x1, y1, x2, y2, delta: float, eps: float) -> BlockEncoding:
    """Encoding whose block magnitude approximates ``(sqrt(delta)/2) / d``.

    Oracles ``W_Z(x_i)``, ``W_Z(y_i)`` give difference rotations
    ``W_Z(x1 - x2)`` and ``W_Z(y1 - y2)``; ancilla-free squaring of each
    and their product yields ``exp(i (d^2/4) Z)``; the logarithmic
    encoding turns it into a block ``y Z`` with ``y = d^2 / (2 pi)``; an
    even polynomial approximating ``(delta_y^{1/2} / 2) y^{-1/2}`` with
    ``delta_y = delta / (2 pi)`` finishes the job.  Only the magnitude is
    meaningful.
    """
    for v in (x1, y1, x2, y2):
        if abs(v) > 0.25 + 1e-12:
            raise PreconditionError("coordinates must satisfy |.| <= 1/4")
    if not 0 < delta <= 0.5:
        raise DomainError("delta must lie in (0, 1/2]")
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    d2 = (x1 - x2) ** 2 + (y1 - y2) ** 2
    if d2 < delta:
        raise PromiseViolation(f"squared distance {d2:.6g} is below delta = {delta}")
    dx = eval_signal(SignalRotation("Z", x1)) @ _X @ eval_signal(SignalRotation("Z", x2)) @ _X
    dy = eval_signal(SignalRotation("Z", y1)) @ _X @ eval_signal(SignalRotation("Z", y2)) @ _X
    sq_eps = eps / 200
    plan = small_square_plan(_tier(sq_eps))
    v = plan.apply(dx) @ plan.apply(dy)
    v = v / np.sqrt(np.linalg.det(v))  # remove the global phase left by the squarings
    v = _nearest_unitary(v)
    log_be = log_block_encode(v, eps / 200)
    delta_y = delta / (2 * math.pi)
    poly = neg_power_poly(0.5, delta_y, eps / 4, "even")
    out = qet_polynomial(log_be, poly, approx_eps=poly.bound)
    meta = {"delta_y": delta_y, "poly_degree": poly.degree, "squaring_queries": plan.queries,
            "backend": "ancilla-free squaring", "distance": math.sqrt(d2)}
    return BlockEncoding(1.0, out.ancillas, eps, 2, out.op, out.queries * 4 * plan.queries, "Coulomb", meta, out.block)


def _nearest_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


# ---------------------------------------------------------------------------
# Binary matrix format
# ---------------------------------------------------------------------------

MATRIX_MAGIC = b"IQSPMAT1"


def write_matrix(path, m) -> None:
    """Write ``m`` as ``IQSPMAT1``, two little-endian ``u32`` (rows, cols),
    then row-major ``f64`` pairs (real, imaginary)."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DomainError(f"expected a vector or matrix, got shape {arr.shape}")
    rows, cols = arr.shape
    body = np.empty((rows, cols, 2), dtype="<f8")
    body[..., 0] = arr.real
    body[..., 1] = arr.imag
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(body.tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    head = len(MATRIX_MAGIC) + 8
    if len(data) < head or data[: len(MATRIX_MAGIC)] != MATRIX_MAGIC:
        raise DomainError(f"{path}: not an IQSPMAT1 file")
    rows, cols = struct.unpack("<II", data[len(MATRIX_MAGIC) : head])
    if len(data) != head + 16 * rows * cols:
        raise DomainError(f"{path}: truncated or oversized payload")
    body = np.frombuffer(data, dtype="<f8", offset=head).reshape(rows, cols, 2)
    return body[..., 0] + 1j * body[..., 1]
