"""Approximating polynomials with measured error bounds.

Each builder returns a :class:`RealPolynomial` whose ``bound`` field is an
over-estimate of the approximation error on ``domain``.  The package-wide
verification grid (``grid_points()`` points, uniform) is used for every
measured check, so ``poly.measured_error(f) <= poly.bound`` is the contract
tests lean on.
"""

from __future__ import annotations

import functools
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as mono
from scipy.optimize import linprog
from scipy.special import erf, erfcinv

from .errors import ConstructionError, DomainError
from .numerics import bessel_j

__all__ = [
    "DEFAULT_GRID_POINTS",
    "DEGREE_CAP",
    "grid_points",
    "uniform_grid",
    "RealPolynomial",
    "ComplexPolynomial",
    "truncation_order_r",
    "jacobi_anger_cos",
    "jacobi_anger_sin",
    "arcsin_taylor",
    "arcsin_lagrange",
    "lagrange_bound",
    "tophat_window",
    "smooth_window",
    "neg_power_poly",
    "exp_i_a_squared_poly",
    "jacobi_anger_square_partial",
]

DEFAULT_GRID_POINTS = 1001
DEGREE_CAP = 2000
_PARITY_TOL = 1e-12


def grid_points() -> int:
    """Verification grid density; ``IQSP_GRID_POINTS`` overrides the default."""
    raw = os.environ.get("IQSP_GRID_POINTS")
    if raw is None:
        return DEFAULT_GRID_POINTS
    try:
        n = int(raw)
    except ValueError as exc:
        raise DomainError(f"IQSP_GRID_POINTS must be an integer, got {raw!r}") from exc
    if n < 3:
        raise DomainError("IQSP_GRID_POINTS must be at least 3")
    return n


def uniform_grid(lo: float = -1.0, hi: float = 1.0, n: int | None = None) -> np.ndarray:
    return np.linspace(lo, hi, grid_points() if n is None else n)


def _parity_of(coeffs: np.ndarray) -> str:
    mag = np.abs(coeffs)
    scale = max(float(mag.max(initial=0.0)), 1.0)
    if np.all(mag[1::2] <= _PARITY_TOL * scale):
        return "even"
    if np.all(mag[0::2] <= _PARITY_TOL * scale):
        return "odd"
    return "none"


@dataclass(frozen=True)
class RealPolynomial:
    """Real polynomial in the Chebyshev or monomial basis.

    ``bound`` is the declared approximation error on ``domain`` (zero for
    exact polynomials such as ``T_n``), and ``meta`` is unused by
    evaluation but keeps track of the truncation parameter that produced
    the polynomial (``R``, ``k``, ``Q``...).
    """

    coefficients: np.ndarray = field(repr=False)
    basis: str = "chebyshev"
    parity: str = "none"
    bound: float = 0.0
    domain: tuple[float, float] = (-1.0, 1.0)
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.basis not in ("chebyshev", "monomial"):
            raise DomainError(f"unknown basis {self.basis!r}")
        coeffs = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if coeffs.size == 0:
            coeffs = np.zeros(1)
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("polynomial coefficients must be finite")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        detected = _parity_of(coeffs)
        if self.parity not in ("even", "odd", "none"):
            raise DomainError(f"unknown parity {self.parity!r}")
        if self.parity != "none" and detected != self.parity:
            raise DomainError(f"declared parity {self.parity} but coefficients are {detected}")

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.abs(self.coefficients) > 0)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.basis == "chebyshev":
            return cheb.chebval(x, self.coefficients)
        return mono.polyval(x, self.coefficients)

    def chebyshev_coefficients(self) -> np.ndarray:
        if self.basis == "chebyshev":
            return np.array(self.coefficients)
        return cheb.poly2cheb(self.coefficients)

    def to_chebyshev(self) -> "RealPolynomial":
        return RealPolynomial(
            self.chebyshev_coefficients(), "chebyshev", self.parity, self.bound, self.domain, self.label, dict(self.meta)
        )

    def scaled(self, factor: float) -> "RealPolynomial":
        return RealPolynomial(
            self.coefficients * factor, self.basis, self.parity, self.bound * abs(factor), self.domain, self.label, dict(self.meta)
        )

    def sup_norm(self, n: int | None = None) -> float:
        return float(np.max(np.abs(self(uniform_grid(-1.0, 1.0, n)))))

    def is_qsp_admissible(self, tol: float = 1e-9) -> bool:
        return self.sup_norm() <= 1.0 + tol and self.parity != "none"

    def measured_error(self, f: Callable, domain: tuple[float, float] | None = None, n: int | None = None) -> float:
        lo, hi = self.domain if domain is None else domain
        xs = uniform_grid(lo, hi, n)
        return float(np.max(np.abs(self(xs) - f(xs))))

    def to_json(self) -> dict:
        return {"basis": self.basis, "parity": self.parity, "coefficients": [float(c) for c in self.coefficients]}

    @classmethod
    def from_json(cls, obj) -> "RealPolynomial":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            coeffs = [float(c) for c in obj["coefficients"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed polynomial description: {exc}") from exc
        basis = obj.get("basis", "chebyshev")
        parity = obj.get("parity") or _parity_of(np.asarray(coeffs))
        return cls(np.asarray(coeffs), basis, parity)


@dataclass(frozen=True)
class ComplexPolynomial:
    """Complex polynomial.  ``basis="monomial"`` is a polynomial in ``z``
    (used for GQSP on the unit circle); ``basis="chebyshev"`` is a
    polynomial in a real variable ``a``."""

    coefficients: np.ndarray = field(repr=False)
    basis: str = "monomial"
    bound: float = 0.0
    label: str = ""

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex).reshape(-1)
        if coeffs.size == 0:
            coeffs = np.zeros(1, dtype=complex)
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("polynomial coefficients must be finite")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        if self.basis not in ("chebyshev", "monomial"):
            raise DomainError(f"unknown basis {self.basis!r}")

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.abs(self.coefficients) > 0)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        if self.basis == "chebyshev":
            return cheb.chebval(x, self.coefficients)
        return mono.polyval(x, self.coefficients)

    def circle_max(self, n: int | None = None) -> float:
        m = max(grid_points() if n is None else n, 4 * (self.degree + 1))
        z = np.exp(2j * np.pi * np.arange(m) / m)
        return float(np.max(np.abs(self(z))))

    def is_gqsp_admissible(self, tol: float = 1e-9) -> bool:
        return self.circle_max() <= 1.0 + tol

    def to_json(self) -> dict:
        return {
            "basis": self.basis,
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }

    @classmethod
    def from_json(cls, obj) -> "ComplexPolynomial":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            raw = obj["coefficients"]
            coeffs = [complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c) for c in raw]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DomainError(f"malformed polynomial description: {exc}") from exc
        return cls(np.asarray(coeffs), obj.get("basis", "monomial"))


# ---------------------------------------------------------------------------
# Jacobi-Anger expansions
# ---------------------------------------------------------------------------


def truncation_order_r(t: float, eps: float) -> int:
    """Smallest integer ``r >= t`` with ``(t/r)^r <= eps``.

    ``(t/r)^r`` is decreasing in ``r`` once ``r >= t``, so an exponential
    search followed by bisection finds the threshold.
    """
    t = float(t)
    eps = float(eps)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    log_eps = math.log(eps)

    def ok(r: int) -> bool:
        return r * math.log(t / r) <= log_eps

    lo = max(1, math.ceil(t))
    if ok(lo):
        return lo
    hi = lo + 1
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _jacobi_anger_R(t: float, eps: float) -> int:
    if t == 0:
        raise DomainError("t must be non-zero")
    if not 0 < eps < 1 / math.e:
        raise DomainError(f"eps must lie in (0, 1/e), got {eps}")
    return truncation_order_r(math.e * abs(t) / 2, 5 * eps / 4) // 2


def _bessel_tail(t: float, start: int, step: int = 2) -> float:
    total = 0.0
    n = start
    while n <= 200:
        term = abs(bessel_j(n, t))
        total += term
        if n > abs(t) + 10 and term < 1e-18:
            break
        n += step
    return 2.0 * total


def jacobi_anger_cos(t: float, eps: float) -> RealPolynomial:
    """Even Chebyshev approximation of ``cos(x t)`` on ``[-1, 1]``.

    Truncated at ``T_{2R}`` with ``R = floor(r(e|t|/2, 5 eps/4) / 2)`` and
    rescaled by ``1/(1+eps/4)`` so that it is bounded by one.  If the
    Bessel tail beyond ``2R`` exceeds ``eps/4`` (which can happen for
    small ``t``), ``R`` is increased until it does not.
    """
    R = _jacobi_anger_R(t, eps)
    while _bessel_tail(t, 2 * R + 2) > eps / 4:
        R += 1
    coeffs = np.zeros(2 * R + 1)
    coeffs[0] = bessel_j(0, t)
    for k in range(1, R + 1):
        coeffs[2 * k] = 2.0 * (-1) ** k * bessel_j(2 * k, t)
    coeffs /= 1.0 + eps / 4
    return RealPolynomial(coeffs, "chebyshev", "even", eps / 2, (-1.0, 1.0), f"cos({t:g} x)", {"R": R, "t": t})


def jacobi_anger_sin(t: float, eps: float) -> RealPolynomial:
    """Odd Chebyshev approximation of ``sin(x t)`` of degree ``2R+1``."""
    R = _jacobi_anger_R(t, eps)
    while _bessel_tail(t, 2 * R + 3) > eps / 4:
        R += 1
    coeffs = np.zeros(2 * R + 2)
    for k in range(0, R + 1):
        coeffs[2 * k + 1] = 2.0 * (-1) ** k * bessel_j(2 * k + 1, t)
    coeffs /= 1.0 + eps / 4
    return RealPolynomial(coeffs, "chebyshev", "odd", eps / 2, (-1.0, 1.0), f"sin({t:g} x)", {"R": R, "t": t})


def jacobi_anger_square_partial(a: float, M: int) -> complex:
    """Partial sum ``J0(a) + 2 sum_{n=1}^{M} i^n J_n(a) T_n(a)``, which
    converges to ``exp(i a^2)`` for ``|a| <= 1``."""
    a = float(a)
    total = complex(bessel_j(0, a))
    tn = cheb.chebval(a, np.eye(M + 1)) if M >= 0 else np.zeros(0)
    for n in range(1, M + 1):
        total += 2.0 * (1j**n) * bessel_j(n, a) * tn[n]
    return total


# ---------------------------------------------------------------------------
# Arcsine approximations
# ---------------------------------------------------------------------------


def arcsin_taylor(k: int, radius: float = 0.5) -> RealPolynomial:
    """First ``k`` terms of the ``(2/pi) arcsin`` Taylor series (monomial basis).

    The series has non-negative coefficients summing to one, so every
    truncation is bounded by one on ``[-1, 1]``.  The declared bound is
    the exact truncation error at ``|x| = radius``, where it is largest
    on ``[-radius, radius]``.
    """
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    if not 0 < radius <= 1:
        raise DomainError("radius must lie in (0, 1]")
    k = int(k)
    coeffs = np.zeros(2 * k)
    c = 1.0
    for l in range(k):
        if l > 0:
            c *= (2 * l - 1) / (2 * l)
        coeffs[2 * l + 1] = (2 / math.pi) * c / (2 * l + 1)
    poly = RealPolynomial(coeffs, "monomial", "odd", 0.0, (-radius, radius), f"(2/pi)arcsin, k={k}", {"k": k})
    tail = (2 / math.pi) * math.asin(radius) - float(poly(radius))
    return RealPolynomial(coeffs, "monomial", "odd", max(tail, 0.0) + 4e-16, (-radius, radius), poly.label, {"k": k})


def lagrange_bound(Q: int, L: float) -> float:
    """Analytic interpolation bound ``2e (2L)^{Q+1} / (1 - eL)``."""
    return 2 * math.e * (2 * L) ** (Q + 1) / (1 - math.e * L)


def arcsin_lagrange(Q: int, L: float) -> RealPolynomial:
    """Interpolant of ``arcsin`` at ``Q+1`` uniform nodes on ``[-L, L]``.

    ``Q`` must be even (the derivative bound behind the declared error
    assumes it), and ``0 < L <= 1/pi``.  The interpolant of an odd function
    at symmetric nodes is odd, so its degree is ``Q - 1``.
    """
    if int(Q) != Q or Q < 2 or Q % 2:
        raise DomainError(f"Q must be an even integer >= 2, got {Q}")
    if not 0 < L <= 1 / math.pi + 1e-15:
        raise DomainError(f"L must lie in (0, 1/pi], got {L}")
    Q = int(Q)
    # Odd powers of the scaled variable x/L, fitted through the non-negative
    # nodes (the negative ones follow by symmetry).  Working in the scaled
    # monomial basis keeps the system well conditioned; extrapolation to
    # [-1, 1] in a Chebyshev basis would not be.
    u = np.arange(Q // 2, Q + 1) * 2 / Q - 1
    powers = np.arange(1, Q, 2)
    keep = u > 0
    vander = u[keep, None] ** powers[None, :]
    sol = np.linalg.solve(vander, np.arcsin(L * u[keep]))
    coeffs = np.zeros(Q)
    coeffs[powers] = sol / L**powers
    return RealPolynomial(coeffs, "monomial", "odd", lagrange_bound(Q, L), (-L, L), f"arcsin Lagrange Q={Q}", {"Q": Q, "L": L})


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


def _even_chebyshev_fit(f: Callable, degree: int) -> np.ndarray:
    coeffs = cheb.chebinterpolate(f, degree)
    coeffs[1::2] = 0.0
    return coeffs


def _window_search(f: Callable, accept: Callable[[np.ndarray], bool], start: int, cap: int = DEGREE_CAP) -> np.ndarray:
    """Smallest even degree (on a doubling-then-bisection search) whose
    Chebyshev interpolant of ``f`` passes ``accept``."""
    deg = max(2, start + start % 2)
    last_bad = 0
    found = None
    while deg <= cap:
        coeffs = _even_chebyshev_fit(f, deg)
        if accept(coeffs):
            found = (deg, coeffs)
            break
        last_bad = deg
        deg *= 2
    if found is None:
        coeffs = _even_chebyshev_fit(f, cap)
        if accept(coeffs):
            found = (cap, coeffs)
        else:
            raise ConstructionError(f"no acceptable window polynomial up to degree {cap}")
    lo, hi = last_bad, found[0]
    best = found[1]
    while hi - lo > 2:
        mid = (lo + hi) // 2
        mid += mid % 2
        if mid >= hi:
            break
        coeffs = _even_chebyshev_fit(f, mid)
        if accept(coeffs):
            hi, best = mid, coeffs
        else:
            lo = mid
    return best


@functools.lru_cache(maxsize=32)
def _tophat_cached(delta_prime: float, eps_prime: float) -> RealPolynomial:
    edge = 1 / math.pi
    centre = edge + delta_prime / 2
    k = float(erfcinv(eps_prime)) / (delta_prime / 2)

    def f(x):
        return 0.5 * (erf(k * (x + centre)) - erf(k * (x - centre)))

    xs = np.linspace(-1.0, 1.0, 20001)
    inner = np.abs(xs) <= edge
    outer = np.abs(xs) >= edge + delta_prime

    def accept(coeffs):
        vals = cheb.chebval(xs, coeffs)
        peak = max(1.0, float(np.max(np.abs(vals))))
        vals = vals / peak
        return bool(vals[inner].min() >= 1 - eps_prime and np.abs(vals[outer]).max() <= eps_prime)

    start = int(k * math.sqrt(max(math.log(1 / eps_prime), 1.0)))
    coeffs = _window_search(f, accept, start)
    peak = max(1.0, float(np.max(np.abs(cheb.chebval(xs, coeffs)))))
    coeffs = coeffs / peak
    return RealPolynomial(
        coeffs, "chebyshev", "even", eps_prime, (-1.0, 1.0), "top-hat window",
        {"delta_prime": delta_prime, "eps_prime": eps_prime, "k": k},
    )


def tophat_window(delta_prime: float, eps_prime: float) -> RealPolynomial:
    """Even polynomial window: at least ``1 - eps'`` on ``[-1/pi, 1/pi]``,
    at most ``eps'`` in magnitude for ``|x| >= 1/pi + delta'``, and bounded
    by one everywhere on ``[-1, 1]``.

    Built as a Chebyshev interpolant of a difference of error functions;
    the degree is the smallest one (found by search, capped at
    ``DEGREE_CAP``) that passes the three checks on a dense grid.
    """
    limit = (math.pi - 3) / (3 * math.pi)
    if not 0 < delta_prime <= limit + 1e-15:
        raise DomainError(f"delta' must lie in (0, {limit:.6f}], got {delta_prime}")
    if not 0 < eps_prime < 0.5:
        raise DomainError(f"eps' must lie in (0, 1/2), got {eps_prime}")
    return _tophat_cached(float(delta_prime), float(eps_prime))


@functools.lru_cache(maxsize=32)
def smooth_window(inner: float, outer: float, eps: float) -> RealPolynomial:
    """Even window equal to one within ``eps`` on ``[-inner, inner]`` and
    below ``eps`` in magnitude for ``|x| >= outer``; bounded by one.

    A wide-transition relative of :func:`tophat_window`, used where the
    transition band may be chosen freely.
    """
    if not 0 < inner < outer <= 1:
        raise DomainError("need 0 < inner < outer <= 1")
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    centre = 0.5 * (inner + outer)
    half = 0.5 * (outer - inner)
    k = float(erfcinv(eps / 2)) / half

    def f(x):
        return 0.5 * (erf(k * (x + centre)) - erf(k * (x - centre)))

    xs = np.linspace(-1.0, 1.0, 20001)
    m_in = np.abs(xs) <= inner
    m_out = np.abs(xs) >= outer

    def accept(coeffs):
        vals = cheb.chebval(xs, coeffs)
        peak = max(1.0, float(np.max(np.abs(vals))))
        vals = vals / peak
        return bool(np.abs(1 - vals[m_in]).max() <= eps and np.abs(vals[m_out]).max() <= eps)

    coeffs = _window_search(f, accept, int(2 * k))
    peak = max(1.0, float(np.max(np.abs(cheb.chebval(xs, coeffs)))))
    return RealPolynomial(coeffs / peak, "chebyshev", "even", eps, (-inner, inner), "smooth window",
                          {"inner": inner, "outer": outer})


# ---------------------------------------------------------------------------
# Negative powers
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _neg_power_cached(c: float, delta: float, eps: float, parity: str) -> RealPolynomial:
    def f(x):
        return (delta**c / 2) * np.power(x, -c)

    fit_x = delta + (1 - delta) * 0.5 * (1 - np.cos(np.linspace(0, math.pi, 400)))
    box_x = np.linspace(0.0, 1.0, 801)
    target = f(fit_x)
    start = 1 if parity == "odd" else 0
    degree = start + 2
    best = None
    while degree <= DEGREE_CAP:
        idx = np.arange(start, degree + 1, 2)
        basis_fit = cheb.chebvander(fit_x, degree)[:, idx]
        basis_box = cheb.chebvander(box_x, degree)[:, idx]
        m = idx.size
        # variables: coefficients (m) and the error level s; minimise s.
        cost = np.zeros(m + 1)
        cost[-1] = 1.0
        ones = np.ones((fit_x.size, 1))
        a_ub = np.vstack([
            np.hstack([basis_fit, -ones]),
            np.hstack([-basis_fit, -ones]),
            np.hstack([basis_box, np.zeros((box_x.size, 1))]),
            np.hstack([-basis_box, np.zeros((box_x.size, 1))]),
        ])
        margin = 1.0 - 1e-6
        b_ub = np.concatenate([target, -target, np.full(box_x.size, margin), np.full(box_x.size, margin)])
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * m + [(0, None)], method="highs")
        if res.status == 0:
            coeffs = np.zeros(degree + 1)
            coeffs[idx] = res.x[:m]
            poly = RealPolynomial(coeffs, "chebyshev", parity, eps, (delta, 1.0), f"x^-{c:g}")
            peak = poly.sup_norm(4001)
            if peak > 1.0:
                poly = poly.scaled(1.0 / peak)
            err = poly.measured_error(f, (delta, 1.0), 4001)
            best = poly
            if err <= 0.9 * eps:
                return RealPolynomial(poly.coefficients, "chebyshev", parity, eps, (delta, 1.0),
                                      f"(delta^{c:g}/2) x^-{c:g}", {"c": c, "delta": delta, "measured": err})
        degree += 2
    raise ConstructionError(f"negative-power polynomial did not reach eps={eps} below degree {DEGREE_CAP}"
                            + ("" if best is None else ""))


def neg_power_poly(c: float, delta: float, eps: float, parity: str = "even") -> RealPolynomial:
    """Polynomial approximating ``f(x) = (delta^c / 2) x^{-c}`` on ``[delta, 1]``.

    The coefficients (with the requested parity) minimise the maximum
    deviation from ``f`` on a Chebyshev-spaced sample of ``[delta, 1]``
    subject to ``|P| <= 1`` on ``[0, 1]``; this is a small linear program.
    Degree grows by two until the measured error is below ``eps``.
    """
    if not c > 0:
        raise DomainError("c must be positive")
    if not 0 < delta <= 0.5 or not 0 < eps <= 0.5:
        raise DomainError("delta and eps must lie in (0, 1/2]")
    if parity not in ("even", "odd"):
        raise DomainError("parity must be 'even' or 'odd'")
    return _neg_power_cached(float(c), float(delta), float(eps), parity)


# ---------------------------------------------------------------------------
# exp(i a^2)
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _exp_sq_cached(eps: float) -> tuple[RealPolynomial, RealPolynomial]:
    xs = np.linspace(-1.0, 1.0, 4001)
    scale = 1.0 / (1.0 + eps / 4)
    for degree in range(2, DEGREE_CAP + 1, 2):
        c = _even_chebyshev_fit(lambda a: np.cos(a * a), degree) * scale
        s = _even_chebyshev_fit(lambda a: np.sin(a * a), degree) * scale
        err = max(
            np.max(np.abs(cheb.chebval(xs, c) - np.cos(xs * xs))),
            np.max(np.abs(cheb.chebval(xs, s) - np.sin(xs * xs))),
        )
        modulus = np.max(np.hypot(cheb.chebval(xs, c), cheb.chebval(xs, s)))
        if err <= 0.5 * eps and modulus <= 1.0:
            meta = {"degree": degree, "measured": float(err)}
            return (
                RealPolynomial(c, "chebyshev", "even", eps, (-1.0, 1.0), "cos(a^2)", meta),
                RealPolynomial(s, "chebyshev", "even", eps, (-1.0, 1.0), "sin(a^2)", meta),
            )
    raise ConstructionError("exp(i a^2) approximation failed")  # pragma: no cover


def exp_i_a_squared_poly(eps: float) -> tuple[RealPolynomial, RealPolynomial]:
    """Chebyshev interpolants of ``(cos(a^2), sin(a^2))`` on ``[-1, 1]``,
    rescaled by ``1/(1+eps/4)``; each is within ``eps`` of its target and
    ``|cos + i sin| <= 1`` on the grid."""
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    return _exp_sq_cached(float(eps))
