"""QSP and GQSP sequences: evaluation, angle solving and iterated composition.

Conventions
-----------
Signal rotations are ``W_Z(theta) = exp(i theta Z / 2)`` and
``W_X(theta) = exp(i theta X / 2)``; the signal value is
``a = cos(theta / 2)``.

``WZ_SX``  ``U = e^{i phi_0 X} prod_k W_Z(theta) e^{i phi_k X}``, read at ``<0|U|0>``.
``WX_SZ``  ``U = e^{i phi_0 Z} prod_k W_X(theta) e^{i phi_k Z}``, read at ``<+|U|+>``.

The two are Hadamard conjugates of each other, so the same phases give the
same response in both.  In ``WX_SZ`` form the matrix is
``[[P(a), i sqrt(1-a^2) Q(a)], [i sqrt(1-a^2) Q*(a), P*(a)]]``.

GQSP uses ``R(theta, omega, lam) = [[e^{i(lam+omega)} cos theta, e^{i omega} sin theta],
[e^{i lam} sin theta, -cos theta]]`` and the ordering
``R_d A R_{d-1} A ... R_1 A R_0`` with ``A = |0><0| (x) U + |1><1| (x) I`` and
``R_0 = R(theta_0, omega_0, lam)``, ``R_j = R(theta_j, omega_j, 0)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as mono
from scipy.optimize import least_squares

from .errors import DomainError, PreconditionError, SolverError
from .numerics import as_matrix, is_unitary, unitarity_defect
from .polyapprox import ComplexPolynomial, RealPolynomial, grid_points

__all__ = [
    "CONVENTIONS",
    "SOLVER_TOL",
    "SignalRotation",
    "QspSequence",
    "GqspSequence",
    "IteratedResult",
    "eval_signal",
    "eval_qsp",
    "qsp_response",
    "qsp_pq",
    "gqsp_r",
    "eval_gqsp",
    "gqsp_pq",
    "solve_qsp_phases",
    "solve_gqsp_phases",
    "gqsp_complement",
    "iterated_compose",
]

CONVENTIONS = ("WZ_SX", "WX_SZ")
SOLVER_TOL = 1e-8
_RESTARTS = 12


@dataclass(frozen=True)
class SignalRotation:
    """``exp(i theta P / 2)`` for ``P`` in ``{X, Z}``."""

    axis: str
    theta: float

    def __post_init__(self):
        if self.axis not in ("X", "Z"):
            raise DomainError(f"axis must be 'X' or 'Z', got {self.axis!r}")
        if not math.isfinite(self.theta):
            raise DomainError("rotation angle must be finite")
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def a(self) -> float:
        return math.cos(self.theta / 2)


@dataclass(frozen=True)
class QspSequence:
    convention: str
    phases: tuple
    residual: float = float("nan")

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise DomainError(f"unknown convention {self.convention!r}")
        phases = tuple(float(p) for p in np.asarray(self.phases, dtype=float).reshape(-1))
        if len(phases) < 1:
            raise DomainError("a QSP sequence needs at least one phase")
        if not all(math.isfinite(p) for p in phases):
            raise DomainError("phases must be finite")
        object.__setattr__(self, "phases", phases)

    @property
    def degree(self) -> int:
        return len(self.phases) - 1

    def with_convention(self, convention: str) -> "QspSequence":
        return QspSequence(convention, self.phases, self.residual)

    def to_json(self) -> dict:
        return {"convention": self.convention, "phases": list(self.phases)}

    @classmethod
    def from_json(cls, obj: dict) -> "QspSequence":
        try:
            return cls(obj["convention"], obj["phases"])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed QSP sequence: {exc}") from exc


@dataclass(frozen=True)
class GqspSequence:
    thetas: tuple
    omegas: tuple
    lam: float = 0.0
    residual: float = float("nan")

    def __post_init__(self):
        thetas = tuple(float(x) for x in np.asarray(self.thetas, dtype=float).reshape(-1))
        omegas = tuple(float(x) for x in np.asarray(self.omegas, dtype=float).reshape(-1))
        if len(thetas) != len(omegas) or not thetas:
            raise DomainError("thetas and omegas must be non-empty and of equal length")
        if not all(math.isfinite(x) for x in thetas + omegas + (self.lam,)):
            raise DomainError("angles must be finite")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def degree(self) -> int:
        return len(self.thetas) - 1

    def to_json(self) -> dict:
        return {"thetas": list(self.thetas), "omegas": list(self.omegas), "lambda": self.lam}

    @classmethod
    def from_json(cls, obj: dict) -> "GqspSequence":
        try:
            return cls(obj["thetas"], obj["omegas"], obj.get("lambda", 0.0))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed GQSP sequence: {exc}") from exc


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def eval_signal(w: SignalRotation) -> np.ndarray:
    c, s = math.cos(w.theta / 2), math.sin(w.theta / 2)
    if w.axis == "Z":
        return np.array([[c + 1j * s, 0], [0, c - 1j * s]], dtype=complex)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def _batched_qsp(phases, theta: np.ndarray, convention: str) -> np.ndarray:
    """Stack of 2x2 QSP unitaries, one per entry of ``theta``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = theta.size
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    if convention == "WX_SZ":
        sig = np.empty((n, 2, 2), dtype=complex)
        sig[:, 0, 0] = c
        sig[:, 1, 1] = c
        sig[:, 0, 1] = 1j * s
        sig[:, 1, 0] = 1j * s
        out = np.zeros((n, 2, 2), dtype=complex)
        out[:, 0, 0] = np.exp(1j * phases[0])
        out[:, 1, 1] = np.exp(-1j * phases[0])
        for phi in phases[1:]:
            out = out @ sig
            out[:, :, 0] *= np.exp(1j * phi)
            out[:, :, 1] *= np.exp(-1j * phi)
        return out
    sig_d = np.stack([c + 1j * s, c - 1j * s], axis=1)
    proc = [np.array([[math.cos(p), 1j * math.sin(p)], [1j * math.sin(p), math.cos(p)]]) for p in phases]
    out = np.broadcast_to(proc[0], (n, 2, 2)).copy()
    for m in proc[1:]:
        out = out * sig_d[:, None, :]
        out = out @ m
    return out


def eval_qsp(seq: QspSequence, theta: float) -> np.ndarray:
    """The 2x2 QSP unitary of ``seq`` for signal angle ``theta``."""
    return _batched_qsp(seq.phases, np.array([theta]), seq.convention)[0]


def qsp_response(seq: QspSequence, a) -> np.ndarray:
    """Matrix element read by the convention (``<0|U|0>`` or ``<+|U|+>``)
    as a function of ``a = cos(theta/2)``."""
    a = np.asarray(a, dtype=float)
    if np.any(np.abs(a) > 1 + 1e-12):
        raise DomainError("signal value must lie in [-1, 1]")
    theta = 2 * np.arccos(np.clip(a, -1, 1)).reshape(-1)
    u = _batched_qsp(seq.phases, theta, seq.convention)
    if seq.convention == "WZ_SX":
        vals = u[:, 0, 0]
    else:
        vals = 0.5 * (u[:, 0, 0] + u[:, 0, 1] + u[:, 1, 0] + u[:, 1, 1])
    return vals.reshape(a.shape)


def qsp_pq(seq: QspSequence, a) -> tuple[np.ndarray, np.ndarray]:
    """``(P(a), Q(a))`` read off a ``WX_SZ`` sequence.

    ``Q`` is undefined at ``|a| = 1``; it is returned as ``nan`` there.
    """
    if seq.convention != "WX_SZ":
        raise DomainError("P/Q readout is defined for the WX_SZ convention")
    a = np.asarray(a, dtype=float).reshape(-1)
    theta = 2 * np.arccos(np.clip(a, -1, 1))
    u = _batched_qsp(seq.phases, theta, "WX_SZ")
    s = np.sqrt(np.clip(1 - a * a, 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(s > 0, u[:, 0, 1] / (1j * np.where(s > 0, s, 1)), np.nan)
    return u[:, 0, 0], q


def gqsp_r(theta: float, omega: float, lam: float = 0.0) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[np.exp(1j * (lam + omega)) * c, np.exp(1j * omega) * s], [np.exp(1j * lam) * s, -c]], dtype=complex
    )


def eval_gqsp(seq: GqspSequence, u) -> np.ndarray:
    """Full ``2 dim(U)`` GQSP unitary; the control qubit is most significant."""
    u = as_matrix(u)
    if u.shape[0] != u.shape[1] or not is_unitary(u, 1e-9):
        raise DomainError(f"signal must be unitary (defect {unitarity_defect(u):.2e})")
    n = u.shape[0]
    eye = np.eye(n, dtype=complex)
    out = np.kron(gqsp_r(seq.thetas[0], seq.omegas[0], seq.lam), eye)
    for th, om in zip(seq.thetas[1:], seq.omegas[1:]):
        out = np.vstack([u @ out[:n], out[n:]])
        r = gqsp_r(th, om)
        out = np.vstack([r[0, 0] * out[:n] + r[0, 1] * out[n:], r[1, 0] * out[:n] + r[1, 1] * out[n:]])
    return out


def gqsp_pq(seq: GqspSequence, z) -> tuple[np.ndarray, np.ndarray]:
    """``(P(z), Q(z))`` for scalar signals ``z`` on the unit circle (vectorised)."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    r0 = gqsp_r(seq.thetas[0], seq.omegas[0], seq.lam)
    p = np.full(z.shape, r0[0, 0])
    q = np.full(z.shape, r0[1, 0])
    for th, om in zip(seq.thetas[1:], seq.omegas[1:]):
        r = gqsp_r(th, om)
        zp = z * p
        p, q = r[0, 0] * zp + r[0, 1] * q, r[1, 0] * zp + r[1, 1] * q
    return p, q


# ---------------------------------------------------------------------------
# QSP angle solving
# ---------------------------------------------------------------------------


def _u_to_t(n: int) -> np.ndarray:
    """Chebyshev-T coefficients of ``U_n``."""
    coeffs = np.zeros(n + 1)
    coeffs[n::-2] = 2.0
    if n % 2 == 0:
        coeffs[0] = 1.0
    return coeffs


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.result_type(c, float))
    m = min(n, len(c))
    out[:m] = c[:m]
    return out


def _spectral_factor(laurent: np.ndarray) -> np.ndarray:
    """Real ``h`` (degree ``m``) with ``|h(z)|^2 = G(z)`` on the unit circle,
    where ``G(z) = laurent[0] + sum_j laurent[j] (z^j + z^-j) / 2``."""
    m = len(laurent) - 1
    if m == 0:
        return np.array([math.sqrt(max(laurent[0], 0.0))])
    full = np.concatenate([laurent[:0:-1] / 2, [laurent[0]], laurent[1:] / 2])
    roots = np.roots(full[::-1])
    order = sorted(range(len(roots)), key=lambda i: (round(abs(roots[i]), 9), -roots[i].imag >= 0, -roots[i].imag))
    chosen = roots[order[:m]]
    h = np.real(np.poly(chosen))[::-1]
    zs = np.exp(2j * np.pi * np.arange(4 * m + 8) / (4 * m + 8))
    gvals = laurent[0] + sum(laurent[j] * np.cos(j * np.angle(zs)) for j in range(1, m + 1))
    hvals = np.abs(mono.polyval(zs, h)) ** 2
    scale = math.sqrt(max(float(np.mean(gvals)), 0.0) / max(float(np.mean(hvals)), 1e-300))
    return h * scale


def _qsp_complete(f: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev coefficients of ``P = f + iB`` and ``Q = iD``."""
    g = -cheb.chebmul(f, f)
    g = _pad(g, 2 * d + 1)
    g[0] += 1.0
    laurent = g[0::2]
    h = _spectral_factor(laurent)
    b = np.zeros(d + 1)
    dd = np.zeros(max(d, 1))
    for j, hj in enumerate(h):
        k = -d + 2 * j
        b[abs(k)] += hj
        if k != 0:
            dd[: abs(k)] += math.copysign(1.0, k) * hj * _u_to_t(abs(k) - 1)
    p = _pad(f, d + 1).astype(complex) + 1j * b
    q = 1j * dd[:d] if d > 0 else np.zeros(0, dtype=complex)
    return p, q


def _strip_layers(p: np.ndarray, q: np.ndarray, d: int) -> np.ndarray:
    phases = np.zeros(d + 1)
    for deg in range(d, 0, -1):
        lead_p = p[deg] * (2.0 ** (deg - 1))
        lead_q = q[deg - 1] * (2.0 ** (deg - 2) if deg >= 2 else 1.0)
        if abs(lead_q) < 1e-300:
            phi = 0.0
        else:
            phi = 0.5 * float(np.angle(lead_p / lead_q))
        e = np.exp(1j * phi)
        ap = cheb.chebmulx(p)
        one_minus = cheb.chebsub(q, cheb.chebmulx(cheb.chebmulx(q))) if len(q) else np.zeros(1)
        new_p = cheb.chebadd(ap / e, e * one_minus)
        new_q = cheb.chebsub(e * cheb.chebmulx(q), p / e) if len(q) else -p / e
        p = _pad(new_p, deg)
        q = _pad(new_q, deg - 1) if deg > 1 else np.zeros(0, dtype=complex)
        phases[deg] = phi
    phases[0] = float(np.angle(p[0]))
    return phases


def _check_nodes(d: int) -> np.ndarray:
    m = max(2 * d + 4, 16)
    return np.cos(np.pi * (np.arange(m) + 0.5) / (2 * m))  # Chebyshev nodes in (0, 1)


def _qsp_residual_fn(f_vals: np.ndarray, a: np.ndarray):
    theta = 2 * np.arccos(a)

    def fn(phases):
        u = _batched_qsp(phases, theta, "WX_SZ")
        vals = 0.5 * (u[:, 0, 0] + u[:, 0, 1] + u[:, 1, 0] + u[:, 1, 1])
        diff = vals - f_vals
        return np.concatenate([diff.real, diff.imag])

    return fn


def _grid_residual_qsp(phases, target: RealPolynomial) -> float:
    a = np.linspace(-1.0, 1.0, grid_points())
    vals = qsp_response(QspSequence("WX_SZ", phases), a)
    return float(np.max(np.abs(vals - target(a))))


@functools.lru_cache(maxsize=256)
def _solve_qsp_cached(coeffs: tuple, d: int, seed: int) -> QspSequence:
    f = np.array(coeffs)
    target = RealPolynomial(f, "chebyshev")
    phases = None
    try:
        p, q = _qsp_complete(f, d)
        phases = _strip_layers(p, q, d)
        if not np.all(np.isfinite(phases)):
            phases = None
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        phases = None
    a_nodes = _check_nodes(d)
    fn = _qsp_residual_fn(target(a_nodes), a_nodes)
    best_phases, best_res = None, math.inf
    rng = np.random.default_rng(seed)
    starts = [] if phases is None else [phases]
    for attempt in range(_RESTARTS + 1):
        if attempt < len(starts):
            start = starts[attempt]
        else:
            start = rng.uniform(-math.pi, math.pi, d + 1)
        res = _grid_residual_qsp(start, target)
        cand = start
        if res > SOLVER_TOL * 0.1:
            sol = least_squares(fn, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000 * (d + 1))
            cand = sol.x
            res = _grid_residual_qsp(cand, target)
        if res < best_res:
            best_phases, best_res = cand, res
        if best_res <= SOLVER_TOL:
            break
    if best_res > SOLVER_TOL:
        raise SolverError(f"QSP phase solve reached residual {best_res:.3e}", best_res)
    return QspSequence("WX_SZ", best_phases, best_res)


def solve_qsp_phases(target: RealPolynomial, d: int | None = None, seed: int = 0) -> QspSequence:
    """Phases (``WX_SZ``) with ``<+|U|+> = target(a)`` to within ``1e-8``.

    The complementary polynomials are found by spectral factorisation of
    ``1 - f^2``, the phases are peeled off layer by layer, and the result
    is polished by Levenberg-Marquardt on Chebyshev nodes.  If that fails,
    seeded random restarts are tried before giving up.
    """
    coeffs = np.asarray(target.chebyshev_coefficients(), dtype=float)
    deg = target.degree
    d = deg if d is None else int(d)
    if deg > d:
        raise PreconditionError(f"target degree {deg} exceeds d = {d}")
    want = "even" if d % 2 == 0 else "odd"
    mag = np.abs(coeffs)
    wrong = mag[(1 - d % 2)::2]
    if np.any(wrong > 1e-12 * max(1.0, mag.max())):
        raise PreconditionError(f"target parity does not match d = {d} ({want} required)")
    if target.sup_norm() > 1 + 1e-9:
        raise PreconditionError("target exceeds 1 in magnitude on [-1, 1]")
    coeffs = _pad(coeffs, d + 1)
    coeffs[(1 - d % 2)::2] = 0.0
    return _solve_qsp_cached(tuple(float(c) for c in coeffs), d, int(seed))


# ---------------------------------------------------------------------------
# GQSP angle solving
# ---------------------------------------------------------------------------


def gqsp_complement(p: np.ndarray) -> np.ndarray:
    """Monomial coefficients of ``Q`` with ``|P|^2 + |Q|^2 = 1`` on the circle."""
    p = np.asarray(p, dtype=complex)
    d = len(p) - 1
    m = max(8 * (d + 1), 64)
    zs = np.exp(2j * np.pi * np.arange(m) / m)
    deficit = 1 - np.abs(mono.polyval(zs, p)) ** 2
    if np.max(np.abs(deficit)) < 1e-14 or d == 0:
        return np.array([math.sqrt(max(float(np.mean(deficit)), 0.0))] + [0.0] * d, dtype=complex)
    # z^d (1 - p(z) conj(p)(1/z)) as an ordinary polynomial of degree 2d.
    corr = np.convolve(p, np.conj(p[::-1]))
    poly = -corr
    poly[d] += 1.0
    roots = np.roots(poly[::-1])
    order = sorted(range(len(roots)), key=lambda i: (round(abs(roots[i]), 9), -roots[i].imag >= 0, -roots[i].imag))
    chosen = roots[order[:d]]
    q = np.poly(chosen)[::-1].astype(complex)
    qvals = np.abs(mono.polyval(zs, q)) ** 2
    q *= math.sqrt(max(float(np.mean(deficit)), 0.0) / max(float(np.mean(qvals)), 1e-300))
    return q


def _gqsp_strip(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    d = len(p) - 1
    thetas = np.zeros(d + 1)
    omegas = np.zeros(d + 1)
    for deg in range(d, 0, -1):
        pd, qd = p[deg], q[deg]
        if max(abs(pd), abs(qd)) > 1e-10:
            th = math.atan2(abs(qd), abs(pd))
            om = float(np.angle(pd)) - float(np.angle(qd)) if abs(qd) > 0 else float(np.angle(pd))
            if abs(pd) == 0:
                om = -float(np.angle(qd))
        else:
            p0, q0 = p[0], q[0]
            th = math.atan2(abs(p0), abs(q0))
            # e^{-i omega} = -(q0/p0) (unit modulus part)
            om = -float(np.angle(-q0 / p0)) if abs(p0) > 0 and abs(q0) > 0 else 0.0
        c, s = math.cos(th), math.sin(th)
        e = np.exp(-1j * om)
        zp = e * c * p + s * q
        q_new = e * s * p - c * q
        p = zp[1:]
        q = q_new[:-1]
        thetas[deg], omegas[deg] = th, om
    th0 = math.atan2(abs(q[0]), abs(p[0]))
    lam = float(np.angle(q[0])) if abs(q[0]) > 1e-300 else 0.0
    om0 = float(np.angle(p[0])) - lam
    thetas[0], omegas[0] = th0, om0
    return thetas, omegas, lam


def _gqsp_grid(d: int) -> np.ndarray:
    m = max(grid_points(), 4 * (d + 1))
    return np.exp(2j * np.pi * np.arange(m) / m)


@functools.lru_cache(maxsize=256)
def _solve_gqsp_cached(re: tuple, im: tuple, d: int, seed: int) -> GqspSequence:
    p = np.array(re) + 1j * np.array(im)
    zs = _gqsp_grid(d)
    target_vals = mono.polyval(zs, p)

    def grid_res(x):
        seq = _unpack(x, d)
        return float(np.max(np.abs(gqsp_pq(seq, zs)[0] - target_vals)))

    fit_z = np.exp(2j * np.pi * np.arange(2 * d + 8) / (2 * d + 8))
    fit_vals = mono.polyval(fit_z, p)

    def fn(x):
        diff = gqsp_pq(_unpack(x, d), fit_z)[0] - fit_vals
        return np.concatenate([diff.real, diff.imag])

    starts = []
    try:
        q = gqsp_complement(p)
        th, om, lam = _gqsp_strip(p.copy(), q.copy())
        x0 = np.concatenate([th, om, [lam]])
        if np.all(np.isfinite(x0)):
            starts.append(x0)
    except (np.linalg.LinAlgError, ValueError, ZeroDivisionError):
        pass
    rng = np.random.default_rng(seed)
    best_x, best_res = None, math.inf
    for attempt in range(_RESTARTS + 1):
        x = starts[attempt] if attempt < len(starts) else rng.uniform(-math.pi, math.pi, 2 * d + 3)
        res = grid_res(x)
        if res > SOLVER_TOL * 0.1:
            sol = least_squares(fn, x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=1000 * (d + 2))
            x = sol.x
            res = grid_res(x)
        if res < best_res:
            best_x, best_res = x, res
        if best_res <= SOLVER_TOL:
            break
    if best_res > SOLVER_TOL:
        raise SolverError(f"GQSP phase solve reached residual {best_res:.3e}", best_res)
    seq = _unpack(best_x, d)
    return GqspSequence(seq.thetas, seq.omegas, seq.lam, best_res)


def _unpack(x: np.ndarray, d: int) -> GqspSequence:
    return GqspSequence(x[: d + 1], x[d + 1 : 2 * d + 2], x[-1])


def solve_gqsp_phases(target: ComplexPolynomial, d: int | None = None, seed: int = 0) -> GqspSequence:
    """GQSP angles whose top-left block is ``target(U)`` (monomial basis in ``U``).

    The complement ``Q`` comes from the roots of ``z^d (1 - |P|^2)``; the
    angles are then peeled off from the highest degree down, and polished
    by Levenberg-Marquardt on the unit circle.
    """
    if target.basis != "monomial":
        raise PreconditionError("GQSP targets are polynomials in U (monomial basis)")
    deg = target.degree
    d = deg if d is None else int(d)
    if deg > d:
        raise PreconditionError(f"target degree {deg} exceeds d = {d}")
    if target.circle_max() > 1 + 1e-9:
        raise PreconditionError("target exceeds 1 in magnitude on the unit circle")
    p = _pad(np.asarray(target.coefficients, dtype=complex), d + 1)
    return _solve_gqsp_cached(tuple(p.real.tolist()), tuple(p.imag.tolist()), d, int(seed))


# ---------------------------------------------------------------------------
# Iterated composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IteratedResult:
    rotation: SignalRotation
    sequence: QspSequence
    oracle_queries: int
    processing_gates: int
    composite: np.ndarray = field(repr=False)

    @property
    def cost(self) -> int:
        return self.processing_gates + self.oracle_queries


def iterated_compose(rotations, q, target: RealPolynomial, seed: int = 0) -> IteratedResult:
    """Compose X-rotations selected by ``q`` and process the result with ``target``.

    ``q`` holds 1-based indices into ``rotations`` (repetitions allowed).
    The composite oracle is the product of the selected ``W_X`` matrices,
    whose signal value is ``a = cos(sum theta_s / 2)``; QSP with ``target``
    then yields an X-rotation by ``2 arccos(target(a))``.  Each QSP layer
    calls the composite oracle once, which costs ``len(q)`` base queries.
    """
    rotations = list(rotations)
    if any(r.axis != "X" for r in rotations):
        raise PreconditionError("iterated composition takes X-axis rotations")
    idx = [int(i) for i in q]
    if not idx or any(i < 1 or i > len(rotations) for i in idx):
        raise PreconditionError("q must be a non-empty list of 1-based rotation indices")
    if not isinstance(target, RealPolynomial):
        raise PreconditionError("target must be a real polynomial")
    if target.sup_norm() > 1 + 1e-9:
        raise PreconditionError("target violates |P| <= 1 on [-1, 1]")
    composite = np.eye(2, dtype=complex)
    for i in idx:
        composite = composite @ eval_signal(rotations[i - 1])
    d = target.degree
    seq = solve_qsp_phases(target, d, seed=seed)
    a = float(composite[0, 0].real)
    value = complex(qsp_response(seq, np.array([a]))[0])
    angle = 2 * math.acos(max(-1.0, min(1.0, value.real)))
    return IteratedResult(
        SignalRotation("X", angle), seq, oracle_queries=d * len(idx), processing_gates=d + 1, composite=composite
    )
