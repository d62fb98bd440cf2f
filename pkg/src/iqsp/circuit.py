"""Register-level circuits and a statevector simulator.

Layout
------
Qubit ``q`` of an ``nq``-qubit circuit is tensor axis ``q``; qubit 0 is the
most significant bit of the flat amplitude index.  A register occupies the
qubits ``offset .. offset + width - 1`` and is read big-endian, so its most
significant bit sits at ``offset``.

Gates name the registers they touch instead of holding qubit indices.  Names
are resolved against the layout of the circuit being simulated, which lets
small circuits (``O_f``, the comparator, the rotation ladder) be dropped into
larger ones as long as the register names and widths agree.

Register values are 1-indexed basis labels where the bosonic pipeline is
concerned: matrix row ``r`` (1-based) is register value ``r``.

JSON schema
-----------
``{"registers": [{"name", "width", "offset"}], "gates": [gate, ...]}`` where
each gate carries an ``"op"`` key:

=============  =====================================================
``xor``        ``src``, ``dst``
``add``        ``dst``, ``k``, optional ``src``, ``mask``, ``value``
``cmp``        ``x``, ``y``, ``flag``
``swap``       ``x``, ``y``, optional ``control``
``crx``        ``control``, ``target``, ``angle``
``u``          ``target``, ``bit``, ``matrix`` as ``[[re, im], ...]`` row-major
``ctrl``       ``control``, ``value``, ``circuit`` (nested object)
=============  =====================================================
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError, PostselectionError, SimulationError
from .numerics import StateVector, as_matrix, is_unitary, rx

__all__ = [
    "MAX_QUBITS",
    "Register",
    "XorRegister",
    "AddConst",
    "Compare",
    "SwapRegisters",
    "ControlledRx",
    "SingleQubit",
    "ControlledUnitary",
    "Circuit",
    "layout",
    "simulate",
    "simulate_batch",
    "to_matrix",
    "postselect",
    "basis_index",
    "build_Of",
    "build_cmp",
    "build_cswap",
    "build_U1",
    "of_map",
]

MAX_QUBITS = 14


@dataclass(frozen=True)
class Register:
    name: str
    width: int
    offset: int

    def __post_init__(self):
        if not self.name or not str(self.name).isidentifier():
            raise DomainError(f"register name must be an identifier, got {self.name!r}")
        if int(self.width) < 1:
            raise DomainError(f"register {self.name!r} needs width >= 1")
        if int(self.offset) < 0:
            raise DomainError(f"register {self.name!r} has a negative offset")

    @property
    def qubits(self) -> range:
        return range(self.offset, self.offset + self.width)

    def qubit(self, bit: int) -> int:
        """Global index of the qubit carrying weight ``2**bit``."""
        if not 0 <= bit < self.width:
            raise DomainError(f"bit {bit} outside register {self.name!r}")
        return self.offset + self.width - 1 - bit


def layout(*specs) -> tuple:
    """Registers laid out back to back from ``(name, width)`` pairs."""
    regs, off = [], 0
    for name, width in specs:
        regs.append(Register(name, int(width), off))
        off += int(width)
    return tuple(regs)


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class XorRegister:
    """``dst ^= src``."""

    src: str
    dst: str

    def inverse(self):
        return self

    def registers(self):
        return (self.src, self.dst)

    def to_json(self):
        return {"op": "xor", "src": self.src, "dst": self.dst}


@dataclass(frozen=True)
class AddConst:
    """``dst += k (mod 2**width)``, optionally only when ``src & mask == value``.

    The predicate covers the two cases the bosonic oracles need: a parity
    test (``mask=1``) and an equality test (``mask`` all ones).
    """

    dst: str
    k: int
    src: str | None = None
    mask: int = 0
    value: int = 0

    def inverse(self):
        return AddConst(self.dst, -self.k, self.src, self.mask, self.value)

    def registers(self):
        return (self.dst,) if self.src is None else (self.dst, self.src)

    def to_json(self):
        out = {"op": "add", "dst": self.dst, "k": int(self.k)}
        if self.src is not None:
            out.update(src=self.src, mask=int(self.mask), value=int(self.value))
        return out


@dataclass(frozen=True)
class Compare:
    """``flag ^= (y < x)``; ``x`` and ``y`` are left alone."""

    x: str
    y: str
    flag: str

    def inverse(self):
        return self

    def registers(self):
        return (self.x, self.y, self.flag)

    def to_json(self):
        return {"op": "cmp", "x": self.x, "y": self.y, "flag": self.flag}


@dataclass(frozen=True)
class SwapRegisters:
    """Swap ``x`` and ``y``, controlled on the one-qubit register ``control``."""

    x: str
    y: str
    control: str | None = None

    def inverse(self):
        return self

    def registers(self):
        return (self.x, self.y) if self.control is None else (self.x, self.y, self.control)

    def to_json(self):
        out = {"op": "swap", "x": self.x, "y": self.y}
        if self.control is not None:
            out["control"] = self.control
        return out


@dataclass(frozen=True)
class ControlledRx:
    """Rotation ladder: ``RX(2 * 2**j * base_angle)`` on ``target`` controlled
    on bit ``j`` of ``control``, so the net rotation is ``RX(2 x base_angle)``."""

    control: str
    target: str
    base_angle: float

    def inverse(self):
        return ControlledRx(self.control, self.target, -self.base_angle)

    def registers(self):
        return (self.control, self.target)

    def to_json(self):
        return {"op": "crx", "control": self.control, "target": self.target, "angle": float(self.base_angle)}


@dataclass(frozen=True)
class SingleQubit:
    target: str
    matrix: tuple
    bit: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2) or not is_unitary(m, 1e-9):
            raise DomainError("SingleQubit needs a 2x2 unitary")
        object.__setattr__(self, "matrix", tuple(tuple(complex(v) for v in row) for row in m))

    @classmethod
    def of(cls, target: str, m, bit: int = 0) -> "SingleQubit":
        return cls(target, tuple(map(tuple, as_matrix(m))), bit)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    def inverse(self):
        return SingleQubit.of(self.target, self.array.conj().T, self.bit)

    def registers(self):
        return (self.target,)

    def to_json(self):
        flat = [[v.real, v.imag] for row in self.matrix for v in row]
        return {"op": "u", "target": self.target, "bit": self.bit, "matrix": flat}


@dataclass(frozen=True)
class ControlledUnitary:
    """Run ``circuit`` when the one-qubit register ``control`` equals ``value``."""

    control: str
    circuit: "Circuit"
    value: int = 1

    def __post_init__(self):
        if self.value not in (0, 1):
            raise DomainError("control value must be 0 or 1")

    def inverse(self):
        return ControlledUnitary(self.control, self.circuit.inverse(), self.value)

    def registers(self):
        return (self.control,) + self.circuit.referenced()

    def to_json(self):
        return {"op": "ctrl", "control": self.control, "value": self.value, "circuit": self.circuit.to_json()}


Gate = Union[XorRegister, AddConst, Compare, SwapRegisters, ControlledRx, SingleQubit, ControlledUnitary]
_PERMUTATION_GATES = (XorRegister, AddConst, Compare, SwapRegisters)


@dataclass(frozen=True, eq=False)
class Circuit:
    registers: tuple
    gates: tuple = ()
    _by_name: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        regs = tuple(self.registers)
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise DomainError("register names must be unique")
        used = set()
        for r in regs:
            if used.intersection(r.qubits):
                raise DomainError(f"register {r.name!r} overlaps another register")
            used.update(r.qubits)
        by_name = {r.name: r for r in regs}
        object.__setattr__(self, "registers", regs)
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "_by_name", by_name)
        for g in self.gates:
            self._check_gate(g)

    def _check_gate(self, g) -> None:
        for name in g.registers():
            if name not in self._by_name:
                raise DomainError(f"gate {type(g).__name__} references unknown register {name!r}")
        pair = None
        if isinstance(g, XorRegister):
            pair = (g.src, g.dst)
        elif isinstance(g, (Compare, SwapRegisters)):
            pair = (g.x, g.y)
        if pair and self._by_name[pair[0]].width != self._by_name[pair[1]].width:
            raise DomainError(f"{type(g).__name__} needs registers of equal width")
        one_qubit = []
        if isinstance(g, Compare):
            one_qubit.append(g.flag)
        if isinstance(g, SwapRegisters) and g.control is not None:
            one_qubit.append(g.control)
        if isinstance(g, ControlledRx):
            one_qubit.append(g.target)
        if isinstance(g, ControlledUnitary):
            one_qubit.append(g.control)
            for r in g.circuit.registers:
                mine = self._by_name.get(r.name)
                if mine is None or mine.width != r.width:
                    raise DomainError(f"sub-circuit register {r.name!r} does not match the parent layout")
            if g.control in g.circuit.referenced():
                raise DomainError("a sub-circuit may not act on its own control")
        if isinstance(g, SingleQubit) and not 0 <= g.bit < self._by_name[g.target].width:
            raise DomainError(f"bit {g.bit} outside register {g.target!r}")
        for name in one_qubit:
            if self._by_name[name].width != 1:
                raise DomainError(f"register {name!r} must be a single qubit")

    @property
    def num_qubits(self) -> int:
        return max((r.offset + r.width for r in self.registers), default=0)

    def register(self, name: str) -> Register:
        try:
            return self._by_name[name]
        except KeyError:
            raise DomainError(f"no register named {name!r}") from None

    def referenced(self) -> tuple:
        names = []
        for g in self.gates:
            for n in g.registers():
                if n not in names:
                    names.append(n)
        return tuple(names)

    def inverse(self) -> "Circuit":
        return Circuit(self.registers, tuple(g.inverse() for g in reversed(self.gates)))

    def then(self, *gates) -> "Circuit":
        """A new circuit with ``gates`` (or the gates of circuits) appended."""
        extra = []
        for g in gates:
            extra.extend(g.gates if isinstance(g, Circuit) else [g])
        return Circuit(self.registers, self.gates + tuple(extra))

    def on(self, registers) -> "Circuit":
        """The same gate list over a different (compatible) register layout."""
        return Circuit(tuple(registers), self.gates)

    def gate_count(self) -> int:
        total = 0
        for g in self.gates:
            total += g.circuit.gate_count() if isinstance(g, ControlledUnitary) else 1
        return total

    def to_json(self) -> dict:
        return {
            "registers": [{"name": r.name, "width": r.width, "offset": r.offset} for r in self.registers],
            "gates": [g.to_json() for g in self.gates],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Circuit":
        try:
            regs = tuple(Register(r["name"], int(r["width"]), int(r["offset"])) for r in obj["registers"])
            return cls(regs, tuple(_gate_from_json(g) for g in obj["gates"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed circuit description: {exc}") from exc


def _gate_from_json(g: dict):
    op = g["op"]
    if op == "xor":
        return XorRegister(g["src"], g["dst"])
    if op == "add":
        return AddConst(g["dst"], int(g["k"]), g.get("src"), int(g.get("mask", 0)), int(g.get("value", 0)))
    if op == "cmp":
        return Compare(g["x"], g["y"], g["flag"])
    if op == "swap":
        return SwapRegisters(g["x"], g["y"], g.get("control"))
    if op == "crx":
        return ControlledRx(g["control"], g["target"], float(g["angle"]))
    if op == "u":
        flat = [complex(re, im) for re, im in g["matrix"]]
        return SingleQubit.of(g["target"], np.array(flat).reshape(2, 2), int(g.get("bit", 0)))
    if op == "ctrl":
        return ControlledUnitary(g["control"], Circuit.from_json(g["circuit"]), int(g.get("value", 1)))
    raise DomainError(f"unknown gate op {op!r}")


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _reg_values(idx: np.ndarray, reg: Register, nq: int) -> np.ndarray:
    shift = nq - reg.offset - reg.width
    return (idx >> shift) & ((1 << reg.width) - 1)


def _with_value(idx: np.ndarray, reg: Register, nq: int, val: np.ndarray) -> np.ndarray:
    shift = nq - reg.offset - reg.width
    mask = ((1 << reg.width) - 1) << shift
    return (idx & ~mask) | ((val & ((1 << reg.width) - 1)) << shift)


@functools.lru_cache(maxsize=512)
def _permutation(gate, regs: tuple, nq: int, controls: tuple):
    """Gather index ``src`` (new[i] = old[src[i]]) and the wraparound mask."""
    by = {r.name: r for r in regs}
    idx = np.arange(1 << nq, dtype=np.int64)
    active = np.ones(idx.size, dtype=bool)
    for q, v in controls:
        active &= ((idx >> (nq - 1 - q)) & 1) == v
    wrap = np.zeros(idx.size, dtype=bool)
    if isinstance(gate, XorRegister):
        s, d = by[gate.src], by[gate.dst]
        new = _with_value(idx, d, nq, _reg_values(idx, d, nq) ^ _reg_values(idx, s, nq))
    elif isinstance(gate, AddConst):
        d = by[gate.dst]
        if gate.src is not None:
            active &= (_reg_values(idx, by[gate.src], nq) & gate.mask) == gate.value
        raw = _reg_values(idx, d, nq) + int(gate.k)
        wrap = active & ((raw < 0) | (raw >= (1 << d.width)))
        new = _with_value(idx, d, nq, raw % (1 << d.width))
    elif isinstance(gate, Compare):
        x, y, f = by[gate.x], by[gate.y], by[gate.flag]
        less = (_reg_values(idx, y, nq) < _reg_values(idx, x, nq)).astype(np.int64)
        new = _with_value(idx, f, nq, _reg_values(idx, f, nq) ^ less)
    elif isinstance(gate, SwapRegisters):
        x, y = by[gate.x], by[gate.y]
        if gate.control is not None:
            active &= _reg_values(idx, by[gate.control], nq) == 1
        xv, yv = _reg_values(idx, x, nq), _reg_values(idx, y, nq)
        new = _with_value(_with_value(idx, x, nq, yv), y, nq, xv)
    else:  # pragma: no cover - guarded by the dispatcher
        raise TypeError(type(gate).__name__)
    new = np.where(active, new, idx)
    src = np.empty_like(new)
    src[new] = idx
    src.setflags(write=False)
    return src, (wrap if wrap.any() else None)


def _apply_1q(psi: np.ndarray, nq: int, target: int, u: np.ndarray, controls: tuple) -> None:
    tensor = psi.reshape((2,) * nq + (psi.shape[-1],))
    index = [slice(None)] * nq
    for q, v in controls:
        index[q] = v
    view = tensor[tuple(index)]
    axis = target - sum(1 for q, _ in controls if q < target)
    view = np.moveaxis(view, axis, 0)
    a0 = view[0].copy()
    a1 = view[1]
    new1 = u[1, 0] * a0 + u[1, 1] * a1
    view[0] = u[0, 0] * a0 + u[0, 1] * a1
    view[1] = new1


def _run(gates, psi: np.ndarray, regs: tuple, by: dict, nq: int, controls: tuple, debug: bool) -> np.ndarray:
    for g in gates:
        if isinstance(g, ControlledUnitary):
            q = by[g.control].offset
            psi = _run(g.circuit.gates, psi, regs, by, nq, controls + ((q, g.value),), debug)
        elif isinstance(g, SingleQubit):
            _apply_1q(psi, nq, by[g.target].qubit(g.bit), g.array, controls)
        elif isinstance(g, ControlledRx):
            reg, tgt = by[g.control], by[g.target].offset
            for j in range(reg.width):
                _apply_1q(psi, nq, tgt, rx(2 * (2**j) * g.base_angle), controls + ((reg.qubit(j), 1),))
        else:
            src, wrap = _permutation(g, regs, nq, tuple(sorted(controls)))
            if debug and wrap is not None and np.any(np.abs(psi[wrap]) > 1e-12):
                raise SimulationError(f"register arithmetic wrapped around in {g!r}")
            psi = psi[src]
    return psi


def simulate_batch(c: Circuit, columns: np.ndarray, debug: bool = False) -> np.ndarray:
    """Apply ``c`` to each column of a ``(2**nq, k)`` array."""
    nq = c.num_qubits
    if nq > MAX_QUBITS:
        raise DomainError(f"{nq} qubits exceeds the {MAX_QUBITS}-qubit cap")
    psi = np.array(columns, dtype=complex)
    if psi.ndim == 1:
        psi = psi.reshape(-1, 1)
    if psi.shape[0] != 1 << nq:
        raise DomainError(f"state has {psi.shape[0]} rows but the circuit spans {nq} qubits")
    psi = np.ascontiguousarray(psi)
    return _run(c.gates, psi, c.registers, c._by_name, nq, (), debug)


def simulate(c: Circuit, state: StateVector, debug: bool = False) -> StateVector:
    if state.num_qubits != c.num_qubits:
        raise DomainError(f"state has {state.num_qubits} qubits, circuit has {c.num_qubits}")
    out = simulate_batch(c, state.amplitudes.reshape(-1, 1), debug)[:, 0]
    return StateVector(c.num_qubits, out, state.norm)


def to_matrix(c: Circuit) -> np.ndarray:
    """Dense unitary of ``c`` (column ``j`` is the image of basis state ``j``)."""
    if c.num_qubits > 12:
        raise DomainError("dense circuit matrices are limited to 12 qubits")
    return simulate_batch(c, np.eye(1 << c.num_qubits, dtype=complex))


def basis_index(c: Circuit, **values) -> int:
    """Flat index of the basis state with the given register values (others 0)."""
    nq = c.num_qubits
    idx = 0
    for name, val in values.items():
        reg = c.register(name)
        if not 0 <= int(val) < 1 << reg.width:
            raise DomainError(f"value {val} does not fit register {name!r}")
        idx |= int(val) << (nq - reg.offset - reg.width)
    return idx


def postselect(s: StateVector, reg: Register, value: int) -> tuple[StateVector, float]:
    """Project ``reg`` onto ``value`` and renormalise.

    Returns the conditional state (same width, register fixed to ``value``)
    and the branch probability relative to the input.
    """
    if not 0 <= int(value) < 1 << reg.width:
        raise DomainError(f"value {value} does not fit register {reg.name!r}")
    if reg.offset + reg.width > s.num_qubits:
        raise DomainError(f"register {reg.name!r} lies outside the state")
    idx = np.arange(1 << s.num_qubits)
    keep = _reg_values(idx, reg, s.num_qubits) == int(value)
    amps = np.where(keep, s.amplitudes, 0)
    total = s.probability_norm()
    p = float(np.vdot(amps, amps).real) / total if total > 0 else 0.0
    if p <= 1e-300:
        raise PostselectionError(f"register {reg.name!r} never takes value {value}")
    return StateVector(s.num_qubits, amps / math.sqrt(p * total), s.norm * math.sqrt(p)), p


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def of_map(variant: str, x: int, ncut: int | None = None) -> int:
    """Partner index of row ``x`` (1-based) under colouring ``A`` or ``B``."""
    variant = variant.upper()
    if variant == "A":
        f = x + 1 if x % 2 else x - 1
    elif variant == "B":
        f = x - 1 if x % 2 else x + 1
    else:
        raise DomainError(f"unknown colouring {variant!r}")
    if ncut is not None and not 1 <= f <= ncut:
        return x
    return f


def build_Of(variant: str, n: int, ncut: int | None = None, x: str = "x", y: str = "y") -> Circuit:
    """``|x>|y> -> |x>|y XOR f(x)>`` for colouring ``A`` or ``B``.

    The arithmetic is XOR, a fixed increment or decrement, then a +/-2
    conditioned on the least significant bit of ``x``.  With ``ncut`` set,
    equality-controlled corrections turn unpaired boundary rows into
    fixed points.  The corrections assume ``y`` starts at zero, which is the
    only way the oracle is used.
    """
    variant = str(variant).upper()
    if n < 2:
        raise DomainError("O_f needs registers of at least two qubits")
    if ncut is not None and not 2 <= ncut < (1 << n) - 1:
        raise DomainError(f"ncut = {ncut} needs 2 <= ncut < 2**n - 1 so that ncut + 1 fits")
    full = (1 << n) - 1
    regs = layout((x, n), (y, n))
    if variant == "A":
        gates = [XorRegister(x, y), AddConst(y, -1), AddConst(y, +2, x, 1, 1)]
        if ncut is not None and ncut % 2 == 1:
            gates.append(AddConst(y, -1, x, full, ncut))
    elif variant == "B":
        gates = [XorRegister(x, y), AddConst(y, +1), AddConst(y, -2, x, 1, 1)]
        if ncut is not None:
            gates.append(AddConst(y, +1, x, full, 1))
            if ncut % 2 == 0:
                gates.append(AddConst(y, -1, x, full, ncut))
    else:
        raise DomainError(f"unknown colouring {variant!r}")
    return Circuit(regs, tuple(gates))


def build_cmp(n: int, x: str = "x", y: str = "y", flag: str = "flag") -> Circuit:
    """``|x>|y>|b> -> |x>|y>|b XOR (y < x)>``."""
    return Circuit(layout((x, n), (y, n), (flag, 1)), (Compare(x, y, flag),))


def build_cswap(n: int, x: str = "x", y: str = "y", flag: str = "flag") -> Circuit:
    return Circuit(layout((x, n), (y, n), (flag, 1)), (SwapRegisters(x, y, flag),))


def build_U1(tau: float, n: int, shifted: bool = False, x: str = "x", target: str = "s") -> Circuit:
    """Rotation ladder: ``R_X(2 x tau)``, or ``R_X(2 x tau**2 - pi)`` when shifted."""
    if not 1 <= n <= 10:
        raise DomainError("the rotation ladder supports 1 <= n <= 10")
    regs = layout((x, n), (target, 1))
    if not shifted:
        return Circuit(regs, (ControlledRx(x, target, float(tau)),))
    return Circuit(regs, (ControlledRx(x, target, float(tau) ** 2), SingleQubit.of(target, rx(-math.pi))))
