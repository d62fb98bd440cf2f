"""Banded (bosonic) Hamiltonian simulation with QSP-synthesised rotations.

The tridiagonal ``H`` is split into two one-sparse colourings.  Each
Trotter step for a colouring pairs every row with its partner through the
oracle ``O_f``, orders the pair with a comparator and a controlled swap,
rotates the pair qubit by ``R_X(2 tau g)`` and uncomputes.  For the boson
kind ``g = sqrt(x)``, and the square root is never written to a register.
Instead a QSP circuit maps the register value to the rotation angle:

1. ``U_Phi`` turns the rotation ladder ``R_X(2 x sigma - pi)`` into a
   single-qubit unitary whose top-left entry is ``b = (2/pi) x sigma``,
   using the truncated ``(2/pi) arcsin`` series.
2. A GQSP sequence in ``U_Phi`` (controlled one way) and ``U_Phi^dagger``
   (the other way) evaluates a polynomial ``h`` of ``cos(2 theta) = 2b^2 - 1``
   with ``h = exp(-i tau sqrt(x))`` at every register value.
3. Conjugating by a Hadamard on the pair qubit, with ``G`` on one branch
   and ``G^dagger`` on the other, gives ``Re(h) I + i Im(h) X = R_X(2 tau sqrt x)``.

All steps are simulated on the circuit IR; the per-step map is compiled by
simulating the step on every valid basis input and post-selecting the work
registers on zero.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .circuit import (
    Circuit,
    Compare,
    ControlledUnitary,
    SingleQubit,
    SwapRegisters,
    basis_index,
    build_Of,
    build_U1,
    layout,
    simulate_batch,
)
from .errors import ConstructionError, DomainError, PreconditionError, SimulationError
from .numerics import StateVector, mat_exp, rx
from .polyapprox import ComplexPolynomial, arcsin_taylor
from .qsp import GqspSequence, gqsp_r, solve_gqsp_phases, solve_qsp_phases

__all__ = [
    "BandedHamiltonian",
    "OneSparsePart",
    "TrotterPlan",
    "SqrtRotationPlan",
    "register_width",
    "two_color_split",
    "exact_one_sparse_step",
    "arcsin_order",
    "plan_sqrt_rotation",
    "build_UPhi",
    "uphi_block",
    "uphi_circuit_block",
    "build_sqrt_rotation",
    "sqrt_rotation_map",
    "build_trotter_step",
    "compile_step",
    "trotter_simulate",
    "fidelity",
    "trotter_step_error",
    "error_budget",
    "boson_report",
]

DEFAULT_DELTA = 0.1
_MAX_GQSP_HALF_DEGREE = 64
_MAX_STEPS = 10**7
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


# ---------------------------------------------------------------------------
# Hamiltonians and the two-colouring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandedHamiltonian:
    """Zero-diagonal tridiagonal ``H`` with ``H[x, x+1] = g(x)`` (1-indexed rows)."""

    ncut: int
    weights: tuple
    kind: str = "custom"

    def __post_init__(self):
        if int(self.ncut) < 2:
            raise DomainError("ncut must be at least 2")
        w = tuple(float(v) for v in self.weights)
        if len(w) != self.ncut - 1 or not all(math.isfinite(v) for v in w):
            raise DomainError(f"need {self.ncut - 1} finite couplings, got {len(w)}")
        object.__setattr__(self, "weights", w)
        if self.kind not in ("boson", "linear", "custom"):
            raise DomainError(f"unknown kind {self.kind!r}")

    @classmethod
    def boson(cls, ncut: int) -> "BandedHamiltonian":
        """``a + a^dagger`` truncated to ``ncut`` Fock levels."""
        return cls(ncut, tuple(math.sqrt(x) for x in range(1, ncut)), "boson")

    @classmethod
    def linear(cls, ncut: int) -> "BandedHamiltonian":
        return cls(ncut, tuple(float(x) for x in range(1, ncut)), "linear")

    def g(self, x: int) -> float:
        return self.weights[x - 1]

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.ncut, self.ncut), dtype=complex)
        for x, w in enumerate(self.weights, start=1):
            m[x - 1, x] = m[x, x - 1] = w
        return m

    def norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix()))))


@dataclass(frozen=True)
class OneSparsePart:
    """One colour class: disjoint couplings ``(x, x+1, weight)``."""

    ncut: int
    color: str
    pairs: tuple

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.ncut, self.ncut), dtype=complex)
        for i, j, w in self.pairs:
            m[i - 1, j - 1] = m[j - 1, i - 1] = w
        return m

    def norm(self) -> float:
        return max((abs(w) for _, _, w in self.pairs), default=0.0)


def two_color_split(h: BandedHamiltonian) -> tuple[OneSparsePart, OneSparsePart]:
    """``H_A`` holds couplings (1,2), (3,4), ...; ``H_B`` holds (2,3), (4,5), ...."""
    a = tuple((x, x + 1, h.g(x)) for x in range(1, h.ncut, 2))
    b = tuple((x, x + 1, h.g(x)) for x in range(2, h.ncut, 2))
    return OneSparsePart(h.ncut, "A", a), OneSparsePart(h.ncut, "B", b)


def exact_one_sparse_step(part: OneSparsePart, tau: float) -> np.ndarray:
    """``exp(-i tau H_part)`` assembled from 2x2 blocks ``exp(-i tau w X)``."""
    out = np.eye(part.ncut, dtype=complex)
    for i, j, w in part.pairs:
        c, s = math.cos(tau * w), math.sin(tau * w)
        out[i - 1, i - 1] = out[j - 1, j - 1] = c
        out[i - 1, j - 1] = out[j - 1, i - 1] = -1j * s
    return out


def register_width(ncut: int) -> int:
    """Smallest width holding ``0 .. ncut + 1`` (the oracle briefly writes ``ncut + 1``)."""
    return (int(ncut) + 1).bit_length()


# ---------------------------------------------------------------------------
# sqrt(x) rotation synthesis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrotterPlan:
    order: int
    steps: int
    tau: float
    total_time: float

    def __post_init__(self):
        if self.order not in (1, 2):
            raise DomainError("product-formula order must be 1 or 2")
        if int(self.steps) < 0:
            raise DomainError("step count must be non-negative")
        if abs(self.steps * self.tau - self.total_time) > 1e-12 * max(1.0, abs(self.total_time)):
            raise DomainError("steps * tau must equal the total time")

    @classmethod
    def from_time(cls, total_time: float, steps: int, order: int = 1) -> "TrotterPlan":
        steps = int(steps)
        if steps <= 0:
            if total_time != 0:
                raise DomainError("a non-zero evolution time needs at least one step")
            return cls(order, 0, 0.0, 0.0)
        return cls(order, steps, total_time / steps, total_time)


@dataclass(frozen=True)
class SqrtRotationPlan:
    """Parameters of the ``R_X(2 tau sqrt x)`` synthesis.

    ``k`` is the arcsin truncation order (``U_Phi`` has degree ``2k - 1``),
    ``l`` the GQSP degree in ``U_Phi``, and ``sigma`` the per-unit rotation
    fed into ``U_Phi`` inside the pipeline.  ``fit_error`` is the measured
    worst-case distance to ``R_X(2 tau sqrt x)`` over ``x = 0..ncut``.
    """

    k: int
    l: int
    delta: float
    eps1: float
    eps2: float
    tau: float = 0.0
    ncut: int = 0
    sigma: float = 0.0
    uphi_phases: tuple = field(default=(), repr=False)
    gqsp: GqspSequence | None = field(default=None, repr=False, compare=False)
    fit_error: float = float("nan")

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise DomainError("k and l must be positive")
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")

    @property
    def queries(self) -> int:
        """Rotation-ladder calls per synthesised rotation."""
        return self.l * (len(self.uphi_phases) - 1)


def arcsin_order(eps1: float, delta: float = DEFAULT_DELTA) -> int:
    """Smallest ``k`` with ``(pi/2) * tail`` of the arcsin series at ``1 - delta`` below ``eps1 / 2``."""
    if not 0 < eps1 < 1:
        raise DomainError("eps1 must lie in (0, 1)")
    k = 1
    while (math.pi / 2) * arcsin_taylor(k, 1 - delta).bound > eps1 / 2:
        k += 1
        if k > 400:
            raise ConstructionError("arcsin truncation order exceeds 400")
    return k


@functools.lru_cache(maxsize=32)
def _uphi_phases(k: int, delta: float) -> tuple:
    seq = solve_qsp_phases(arcsin_taylor(k, 1 - delta).to_chebyshev())
    return tuple(seq.phases)


def _zphase(phi: float) -> np.ndarray:
    return np.diag([np.exp(1j * phi), np.exp(-1j * phi)])


def uphi_block(phases, x: int, scale: float) -> np.ndarray:
    """Direct 2x2 product for ``U_Phi`` at register value ``x`` (reference model)."""
    sig = rx(2 * x * scale - math.pi)
    m = _zphase(phases[0])
    for p in phases[1:]:
        m = m @ sig @ _zphase(p)
    return _H @ m @ _H


def _min_energy_interp(w: np.ndarray, vals: np.ndarray, degree: int) -> np.ndarray:
    # Interpolate while minimising the grid energy of the polynomial and its
    # derivative, which keeps it small away from the interpolation nodes.
    grid = np.cos(np.linspace(0, np.pi, 1001))
    tg = cheb.chebvander(grid, degree)
    der = np.zeros((degree + 1, degree + 1))
    for i in range(degree + 1):
        d = cheb.chebder(np.eye(degree + 1)[i])
        der[: d.size, i] = d
    dg = tg @ der
    gram = (tg.T @ tg + 1e-2 * dg.T @ dg) / grid.size
    tp = cheb.chebvander(w, degree)
    n, k = degree + 1, w.size
    kkt = np.block([[2 * gram, tp.T], [tp, np.zeros((k, k))]])
    return np.linalg.solve(kkt, np.concatenate([np.zeros(n), vals]))[:n]


def _fit_exponential(w: np.ndarray, g: np.ndarray, eps: float):
    """Chebyshev ``h`` with ``|h| <= 1 - eps/4`` on [-1, 1] and ``h(w) ~ exp(-i g)``."""
    target = np.exp(-1j * g)
    margin = eps / 4
    fine = np.cos(np.linspace(0, np.pi, 20001))
    best = None
    for extra in (5, 7, 3, 9):
        phase = _min_energy_interp(w, g, w.size + extra)
        for m in range(2, _MAX_GQSP_HALF_DEGREE + 1, 2):
            if best is not None and m >= best[0]:
                break
            co = cheb.chebinterpolate(lambda z: np.exp(-1j * cheb.chebval(z, phase)), m)
            peak = float(np.max(np.abs(cheb.chebval(fine, co))))
            co = co * (1 - margin) / max(peak, 1.0)
            err = float(np.max(np.abs(cheb.chebval(w, co) - target)))
            if err <= 0.9 * eps:
                best = (m, co, err)
                break
    if best is None:
        raise ConstructionError(f"no GQSP degree up to {2 * _MAX_GQSP_HALF_DEGREE} reaches eps2 = {eps:.1e}")
    return best


def _cheb_to_gqsp(co: np.ndarray) -> np.ndarray:
    # T_j(cos 2t) = (y^j + y^-j)/2 with y = exp(2it); shifting by y^m gives a
    # polynomial in y of degree 2m.
    m = co.size - 1
    pg = np.zeros(2 * m + 1, dtype=complex)
    pg[m] += co[0]
    for j in range(1, m + 1):
        pg[m + j] += co[j] / 2
        pg[m - j] += co[j] / 2
    return pg


def _sym_gqsp_scalar(seq: GqspSequence, u: np.ndarray) -> np.ndarray:
    """2x2 block (control 0) of the symmetric GQSP circuit driven by ``u``."""
    ud = u.conj().T
    z = np.zeros((2, 2), dtype=complex)
    sig = np.block([[u, z], [z, ud]])
    m = np.kron(gqsp_r(seq.thetas[0], seq.omegas[0], seq.lam), np.eye(2))
    for th, om in zip(seq.thetas[1:], seq.omegas[1:]):
        m = np.kron(gqsp_r(th, om), np.eye(2)) @ sig @ m
    return m[:2, :2]


@functools.lru_cache(maxsize=64)
def plan_sqrt_rotation(
    ncut: int, tau: float, eps1: float = 1e-4, eps2: float = 1e-4, delta: float = DEFAULT_DELTA, seed: int = 0
) -> SqrtRotationPlan:
    """Choose ``k``, ``l`` and the phase sequences for ``R_X(2 tau sqrt x)``, ``x <= ncut``."""
    if int(ncut) < 1:
        raise DomainError("ncut must be positive")
    if not 0 < eps2 < 1:
        raise DomainError("eps2 must lie in (0, 1)")
    if tau < 0 or not math.isfinite(tau):
        raise DomainError("tau must be a finite non-negative number")
    k = arcsin_order(eps1, delta)
    phases = _uphi_phases(k, float(delta))
    sigma = math.asin(1 - delta) / ncut
    xs = np.arange(ncut + 1)
    b = np.array([uphi_block(phases, int(x), sigma)[0, 0].real for x in xs])
    w = np.clip(2 * b**2 - 1, -1, 1)
    g = tau * np.sqrt(xs)
    m, co, _ = _fit_exponential(w, g, eps2)
    seq = solve_gqsp_phases(ComplexPolynomial(_cheb_to_gqsp(co)), seed=seed)
    err = 0.0
    for x in xs:
        hx = _sym_gqsp_scalar(seq, uphi_block(phases, int(x), sigma))[0, 0]
        pair = np.array([[hx.real, 1j * hx.imag], [1j * hx.imag, hx.real]])
        err = max(err, float(np.max(np.abs(pair - rx(2 * tau * math.sqrt(x))))))
    return SqrtRotationPlan(k, 2 * m, float(delta), float(eps1), float(eps2), float(tau), int(ncut), sigma, phases, seq, err)


def build_UPhi(tau: float, plan: SqrtRotationPlan, n: int, scale: float | None = None, x: str = "x", target: str = "s") -> Circuit:
    """``U_Phi = H (e^{i phi_0 Z} prod U1~ e^{i phi_j Z}) H`` on ``target``, driven by register ``x``.

    ``U1~`` is the shifted ladder ``R_X(2 x scale - pi)``; by default
    ``scale = tau**2``.  The top-left entry of the per-``x`` 2x2 map is
    ``(2/pi) arcsin(sin(x scale))`` up to the arcsin truncation error.
    """
    scale = float(tau) ** 2 if scale is None else float(scale)
    x_top = plan.ncut if plan.ncut else (1 << n) - 1
    if x_top * scale > math.asin(1 - plan.delta) + 1e-15:
        raise PreconditionError(
            f"x_max * scale = {x_top * scale:.4g} exceeds arcsin(1 - delta) = {math.asin(1 - plan.delta):.4g}; use a smaller tau"
        )
    phases = plan.uphi_phases or _uphi_phases(plan.k, plan.delta)
    ladder = build_U1(math.sqrt(scale), n, shifted=True, x=x, target=target)
    regs = layout((x, n), (target, 1))
    gates = [SingleQubit.of(target, _H), SingleQubit.of(target, _zphase(phases[-1]))]
    for p in reversed(phases[:-1]):
        gates.extend(ladder.gates)
        gates.append(SingleQubit.of(target, _zphase(p)))
    gates.append(SingleQubit.of(target, _H))
    return Circuit(regs, tuple(gates))


def build_sqrt_rotation(tau: float, plan: SqrtRotationPlan, n: int, x: str = "x", pair: str = "f") -> Circuit:
    """Circuit whose ``s = c = 0`` block on ``pair`` is ``R_X(2 tau sqrt x)``.

    ``s`` is the ``U_Phi`` qubit and ``c`` the GQSP control.  ``tau`` must
    match the plan it was synthesised for.
    """
    if plan.gqsp is None or abs(plan.tau - tau) > 1e-15:
        raise PreconditionError("the plan was not synthesised for this tau")
    if plan.ncut > (1 << n) - 1:
        raise PreconditionError("register too narrow for the planned range")
    seq = plan.gqsp
    regs = layout((x, n), (pair, 1), ("s", 1), ("c", 1))
    uphi = build_UPhi(tau, plan, n, scale=plan.sigma, x=x, target="s")
    step_fwd = ControlledUnitary("c", uphi, 0)
    step_bwd = ControlledUnitary("c", uphi.inverse(), 1)
    gqsp_gates = [SingleQubit.of("c", gqsp_r(seq.thetas[0], seq.omegas[0], seq.lam))]
    for th, om in zip(seq.thetas[1:], seq.omegas[1:]):
        gqsp_gates.extend([step_fwd, step_bwd, SingleQubit.of("c", gqsp_r(th, om))])
    g = Circuit(layout((x, n), ("s", 1), ("c", 1)), tuple(gqsp_gates))
    gates = (
        SingleQubit.of(pair, _H),
        ControlledUnitary(pair, g, 0),
        ControlledUnitary(pair, g.inverse(), 1),
        SingleQubit.of(pair, _H),
    )
    return Circuit(regs, gates)


def _subspace_map(c: Circuit, x_name: str, x_value: int, target: str) -> np.ndarray:
    cols = np.zeros((1 << c.num_qubits, 2), dtype=complex)
    idx = [basis_index(c, **{x_name: x_value, target: t}) for t in (0, 1)]
    cols[idx, [0, 1]] = 1
    out = simulate_batch(c, cols)
    return out[idx, :]


def sqrt_rotation_map(c: Circuit, x: int, x_name: str = "x", pair: str = "f") -> np.ndarray:
    """Post-selected (``s = c = 0``) 2x2 map on the pair qubit for register value ``x``."""
    return _subspace_map(c, x_name, x, pair)


def uphi_circuit_block(c: Circuit, x: int, x_name: str = "x", target: str = "s") -> np.ndarray:
    return _subspace_map(c, x_name, x, target)


# ---------------------------------------------------------------------------
# Trotter steps
# ---------------------------------------------------------------------------


def _step_registers(n: int) -> tuple:
    return layout(("x", n), ("y", n), ("f", 1), ("p", 1), ("s", 1), ("c", 1))


def build_trotter_step(color: str, ncut: int, tau: float, plan: SqrtRotationPlan) -> Circuit:
    """One ``exp(-i tau H_color)`` step of the boson Hamiltonian as a circuit.

    Pairs the rows with ``O_f``, orders them (``x`` keeps the smaller index,
    ``f`` records whether a swap happened), rotates ``f`` by
    ``R_X(2 tau sqrt x)`` when the row has a partner (flag ``p``), and
    uncomputes.  Valid on inputs ``|x>|0...0>`` with ``1 <= x <= ncut``.
    """
    n = register_width(ncut)
    regs = _step_registers(n)
    of = build_Of(color, n, ncut).on(regs[:2])
    pre = (
        *of.gates,
        Compare("x", "y", "f"),
        SwapRegisters("x", "y", "f"),
        Compare("y", "x", "p"),  # p = (x < y): false only on fixed points
    )
    rot = build_sqrt_rotation(tau, plan, n, x="x", pair="f")
    body = Circuit(regs, (ControlledUnitary("p", Circuit(rot.registers, rot.gates), 1),))
    pre_circ = Circuit(regs, pre)
    return Circuit(regs, pre + body.gates + pre_circ.inverse().gates)


def compile_step(step: Circuit, ncut: int) -> np.ndarray:
    """``ncut x ncut`` map of ``step`` on ``x`` with all work registers post-selected on 0."""
    cols = np.zeros((1 << step.num_qubits, ncut), dtype=complex)
    idx = [basis_index(step, x=x) for x in range(1, ncut + 1)]
    cols[idx, range(ncut)] = 1
    out = simulate_batch(step, cols, debug=True)
    return out[idx, :]


def _as_amplitudes(psi0, ncut: int) -> np.ndarray:
    if psi0 is None:
        v = np.zeros(ncut, dtype=complex)
        v[0] = 1
        return v
    if isinstance(psi0, StateVector):
        amps = psi0.amplitudes
        if amps.size < ncut + 1 or np.any(np.abs(amps[0]) > 0) or np.any(np.abs(amps[ncut + 1 :]) > 0):
            raise DomainError("psi0 must be supported on register values 1..ncut")
        v = np.array(amps[1 : ncut + 1], dtype=complex)
    else:
        v = np.asarray(psi0, dtype=complex).reshape(-1)
        if v.size != ncut:
            raise DomainError(f"psi0 needs {ncut} amplitudes, got {v.size}")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise DomainError("psi0 is the zero vector")
    return v / nrm


def _to_state(v: np.ndarray, ncut: int) -> StateVector:
    n = register_width(ncut)
    amps = np.zeros(1 << n, dtype=complex)
    amps[1 : ncut + 1] = v
    return StateVector(n, amps)


@functools.lru_cache(maxsize=16)
def _compiled(color: str, ncut: int, tau: float, eps1: float, eps2: float, delta: float) -> np.ndarray:
    plan = plan_sqrt_rotation(ncut, tau, eps1, eps2, delta)
    return compile_step(build_trotter_step(color, ncut, tau, plan), ncut)


def _step_maps(h: BandedHamiltonian, plan: TrotterPlan, sqrt_plan, backend: str) -> list:
    a, b = two_color_split(h)
    halves = [(a, plan.tau / 2), (b, plan.tau), (a, plan.tau / 2)] if plan.order == 2 else [(a, plan.tau), (b, plan.tau)]
    if backend == "exact":
        return [exact_one_sparse_step(part, t) for part, t in halves]
    if backend != "qsp":
        raise DomainError(f"unknown backend {backend!r}")
    if h.kind != "boson":
        raise PreconditionError("the QSP backend synthesises sqrt(x) couplings and needs the boson kind")
    eps1, eps2, delta = (1e-4, 1e-4, DEFAULT_DELTA) if sqrt_plan is None else (sqrt_plan.eps1, sqrt_plan.eps2, sqrt_plan.delta)
    maps = []
    for part, t in halves:
        if not part.pairs:
            maps.append(np.eye(h.ncut, dtype=complex))
            continue
        maps.append(_compiled(part.color, h.ncut, float(t), eps1, eps2, delta))
    return maps


def trotter_simulate(
    h: BandedHamiltonian,
    plan: TrotterPlan,
    sqrt_plan: SqrtRotationPlan | None = None,
    psi0=None,
    backend: str = "qsp",
) -> tuple[StateVector, float]:
    """Evolve ``psi0`` for ``plan.total_time`` with ``plan.steps`` product-formula steps.

    ``psi0`` is a length-``ncut`` vector (row ``r`` at position ``r - 1``) or
    a :class:`StateVector` on the index register; it defaults to row 1.  Each
    step is post-selected and renormalised; the returned probability is the
    product of the per-step branch probabilities.  The ``qsp`` backend takes
    the accuracy targets (``eps1``, ``eps2``, ``delta``) from ``sqrt_plan``
    and re-synthesises for the step sizes the formula needs.
    """
    v = _as_amplitudes(psi0, h.ncut)
    if plan.steps == 0:
        return _to_state(v, h.ncut), 1.0
    maps = _step_maps(h, plan, sqrt_plan, backend)
    prob = 1.0
    for _ in range(plan.steps):
        for m in maps:
            v = m @ v
            p = float(np.vdot(v, v).real)
            if p < 1e-12:
                raise SimulationError(f"post-selection probability collapsed to {p:.2e}")
            prob *= p
            v = v / math.sqrt(p)
    return _to_state(v, h.ncut), prob


def fidelity(h: BandedHamiltonian, total_time: float, state: StateVector, psi0=None) -> float:
    """``|<exp(-i H T) psi0 | state>|^2`` against the dense oracle."""
    v0 = _as_amplitudes(psi0, h.ncut)
    exact = mat_exp(h.matrix(), total_time) @ v0
    got = state.amplitudes[1 : h.ncut + 1]
    return float(abs(np.vdot(exact, got)) ** 2)


def trotter_step_error(h: BandedHamiltonian, tau: float, order: int = 1) -> float:
    """Spectral-norm distance between one exact-backend product-formula step and ``exp(-i tau H)``."""
    plan = TrotterPlan(order, 1, float(tau), float(tau))
    step = np.eye(h.ncut, dtype=complex)
    for m in _step_maps(h, plan, None, "exact"):
        step = m @ step
    return float(np.linalg.norm(step - mat_exp(h.matrix(), tau), 2))


def error_budget(eps_total: float, total_time: float, h: BandedHamiltonian, p: int = 1):
    """Concrete ``(N, k, l, delta)`` for an end-to-end error ``eps_total``.

    Half of the budget goes to the product formula: with
    ``Lambda = max(|H_A|, |H_B|)`` the per-step error is bounded by
    ``(2 Lambda tau)^(p+1)``, so ``N = ceil(((2 Lambda T)^(p+1) / (eps/2))^(1/p))``.
    The other half is split evenly between the arcsin stage and the GQSP
    stage.  ``N`` is raised further if the rotation ladder's
    ``ncut tau^2 <= arcsin(1 - delta)`` constraint would fail.
    """
    if not 0 < eps_total <= 0.1:
        raise DomainError("eps_total must lie in (0, 0.1]")
    if p not in (1, 2):
        raise DomainError("p must be 1 or 2")
    if total_time <= 0:
        raise DomainError("total time must be positive")
    a, b = two_color_split(h)
    lam = max(a.norm(), b.norm())
    n_steps = math.ceil(((2 * lam * total_time) ** (p + 1) / (eps_total / 2)) ** (1 / p) - 1e-9)
    delta = DEFAULT_DELTA
    ladder_floor = math.ceil(total_time * math.sqrt(h.ncut / math.asin(1 - delta)))
    n_steps = max(n_steps, ladder_floor, 1)
    if n_steps > _MAX_STEPS:
        raise PreconditionError(f"budget needs {n_steps} steps; loosen eps or shorten T (smaller tau)")
    eps_stage = eps_total / 2
    k = arcsin_order(eps_stage, delta)
    l = plan_sqrt_rotation(h.ncut, total_time / n_steps, eps_stage, eps_stage, delta).l
    return n_steps, k, l, delta


def boson_report(
    ncut: int = 7,
    total_time: float = 1.0,
    steps: int = 100,
    order: int = 1,
    eps1: float = 1e-4,
    eps2: float = 1e-4,
    delta: float = DEFAULT_DELTA,
    backend: str = "qsp",
) -> dict:
    """Run ``a + a^dagger`` from the vacuum and report against the oracle."""
    start = time.perf_counter()
    h = BandedHamiltonian.boson(ncut)
    plan = TrotterPlan.from_time(total_time, steps, order)
    k = l = 0
    sqrt_plan = None
    if backend == "qsp" and plan.steps > 0:
        sqrt_plan = plan_sqrt_rotation(ncut, plan.tau, eps1, eps2, delta)
        k, l = sqrt_plan.k, sqrt_plan.l
    state, prob = trotter_simulate(h, plan, sqrt_plan, None, backend)
    fid = fidelity(h, total_time, state)
    return {
        "ncut": ncut,
        "tau": plan.tau,
        "N": plan.steps,
        "p": order,
        "k": k,
        "l": l,
        "delta": delta,
        "fidelity": fid,
        "success_probability": prob,
        "wall_time_ms": (time.perf_counter() - start) * 1e3,
    }
