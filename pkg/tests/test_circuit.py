import itertools
import json
import math

import numpy as np
import pytest
from scipy.linalg import expm

from iqsp.circuit import (
    AddConst,
    Circuit,
    Compare,
    ControlledRx,
    ControlledUnitary,
    SingleQubit,
    SwapRegisters,
    XorRegister,
    basis_index,
    build_cmp,
    build_cswap,
    build_Of,
    build_U1,
    layout,
    of_map,
    postselect,
    simulate,
    simulate_batch,
    to_matrix,
)
from iqsp.errors import DomainError, PostselectionError, SimulationError
from iqsp.numerics import StateVector

X = np.array([[0, 1], [1, 0]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _decode(index, regs, nq):
    """Register values of a flat index (big-endian, qubit 0 most significant)."""
    bits = [(index >> (nq - 1 - q)) & 1 for q in range(nq)]
    return {r.name: int("".join(str(b) for b in bits[r.offset : r.offset + r.width]), 2) for r in regs}


def _encode(values, regs, nq):
    idx = 0
    for r in regs:
        idx |= values[r.name] << (nq - r.offset - r.width)
    return idx


def _permutation_oracle(regs, fn):
    nq = sum(r.width for r in regs)
    m = np.zeros((1 << nq, 1 << nq))
    for j in range(1 << nq):
        m[_encode(fn(_decode(j, regs, nq)), regs, nq), j] = 1
    return m


class TestRegisters:
    def test_layout_offsets(self):
        regs = layout(("x", 3), ("y", 3), ("f", 1))
        assert [r.offset for r in regs] == [0, 3, 6]
        assert list(regs[1].qubits) == [3, 4, 5]
        assert regs[0].qubit(0) == 2  # least significant bit is the last qubit

    def test_validation(self):
        regs = layout(("x", 2), ("y", 2))
        with pytest.raises(DomainError):
            Circuit(regs + layout(("x", 1)), ())
        with pytest.raises(DomainError):
            Circuit(regs, (XorRegister("x", "z"),))
        with pytest.raises(DomainError):
            Circuit(layout(("x", 2), ("y", 3)), (XorRegister("x", "y"),))
        with pytest.raises(DomainError):
            SingleQubit.of("x", np.ones((2, 2)))

    def test_basis_index(self):
        c = Circuit(layout(("x", 3), ("y", 2)), ())
        assert basis_index(c, x=5, y=2) == 0b10110
        with pytest.raises(DomainError):
            basis_index(c, y=4)


class TestPermutationGates:
    regs = layout(("x", 3), ("y", 3), ("f", 1))

    def _check(self, gate, fn):
        c = Circuit(self.regs, (gate,))
        assert np.array_equal(to_matrix(c).real, _permutation_oracle(self.regs, fn))

    def test_xor(self):
        self._check(XorRegister("x", "y"), lambda v: {**v, "y": v["y"] ^ v["x"]})

    def test_add_const(self):
        self._check(AddConst("y", 3), lambda v: {**v, "y": (v["y"] + 3) % 8})

    def test_conditional_add(self):
        def fn(v):
            return {**v, "y": (v["y"] - 2) % 8} if v["x"] & 1 == 1 else v

        self._check(AddConst("y", -2, "x", 1, 1), fn)

    def test_compare(self):
        self._check(Compare("x", "y", "f"), lambda v: {**v, "f": v["f"] ^ int(v["y"] < v["x"])})

    def test_controlled_swap(self):
        def fn(v):
            return {**v, "x": v["y"], "y": v["x"]} if v["f"] else v

        self._check(SwapRegisters("x", "y", "f"), fn)

    def test_wraparound_detected_in_debug(self):
        c = Circuit(layout(("y", 2)), (AddConst("y", 1),))
        state = StateVector.basis(2, 3)
        assert simulate(c, state).amplitudes[0] == 1
        with pytest.raises(SimulationError):
            simulate(c, state, debug=True)


class TestUnitaryGates:
    def test_single_qubit_on_bit(self):
        regs = layout(("x", 2), ("s", 1))
        c = Circuit(regs, (SingleQubit.of("x", H, bit=1),))
        expected = np.kron(np.kron(H, np.eye(2)), np.eye(2))
        assert np.allclose(to_matrix(c), expected)

    def test_controlled_rx_ladder(self):
        regs = layout(("x", 3), ("s", 1))
        c = Circuit(regs, (ControlledRx("x", "s", 0.1),))
        m = to_matrix(c)
        for x in range(8):
            block = m[2 * x : 2 * x + 2, 2 * x : 2 * x + 2]
            assert np.allclose(block, expm(-1j * 0.1 * x * X), atol=1e-14)

    def test_controlled_unitary(self):
        regs = layout(("c", 1), ("s", 1))
        sub = Circuit(layout(("s", 1)), (SingleQubit.of("s", X),))
        c = Circuit(regs, (ControlledUnitary("c", sub, 1),))
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        assert np.allclose(to_matrix(c), cnot)
        c0 = Circuit(regs, (ControlledUnitary("c", sub, 0),))
        assert np.allclose(to_matrix(c0), np.kron(np.diag([0, 1]), np.eye(2)) + np.kron(np.diag([1, 0]), X))

    def test_inverse_and_composition(self):
        rng = np.random.default_rng(3)
        regs = layout(("x", 2), ("y", 2), ("f", 1))
        u = expm(1j * np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, -0.4]]))
        gates = (
            XorRegister("x", "y"),
            AddConst("y", 1, "x", 3, 2),
            Compare("x", "y", "f"),
            SwapRegisters("x", "y", "f"),
            ControlledRx("x", "f", 0.37),
            SingleQubit.of("y", u, bit=1),
        )
        c = Circuit(regs, gates)
        m = to_matrix(c.then(*c.inverse().gates))
        assert np.allclose(m, np.eye(32), atol=1e-13)
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        out = simulate_batch(c, psi)
        assert np.allclose(out[:, 0], to_matrix(c) @ psi)

    def test_json_roundtrip(self):
        c = build_Of("B", 3, ncut=5).then()
        sub = Circuit(layout(("s", 1)), (SingleQubit.of("s", H),))
        big = Circuit(layout(("x", 3), ("y", 3), ("s", 1), ("c", 1)),
                      c.gates + (ControlledRx("x", "s", 0.2), ControlledUnitary("c", sub, 0), Compare("x", "y", "c")))
        back = Circuit.from_json(json.loads(json.dumps(big.to_json())))
        assert np.allclose(to_matrix(back), to_matrix(big))
        assert back.gate_count() == big.gate_count()


class TestBuilders:
    @pytest.mark.parametrize("variant", ["A", "B"])
    @pytest.mark.parametrize("ncut", [2, 5, 6, 7])
    def test_of_matches_pairing(self, variant, ncut):
        n = (ncut + 1).bit_length()
        c = build_Of(variant, n, ncut)
        m = to_matrix(c)
        for x in range(1, ncut + 1):
            col = m[:, basis_index(c, x=x, y=0)]
            assert col[basis_index(c, x=x, y=of_map(variant, x, ncut))] == pytest.approx(1)
        # reference pairing from the two-colouring: A pairs (1,2),(3,4)..., B pairs (2,3),(4,5)...
        for x in range(1, ncut + 1):
            f = of_map(variant, x, ncut)
            assert 1 <= f <= ncut and of_map(variant, f, ncut) == x
            if f != x:
                lo = min(x, f)
                assert (lo % 2 == 1) == (variant == "A")

    def test_of_validation(self):
        with pytest.raises(DomainError):
            build_Of("A", 3, ncut=7)
        with pytest.raises(DomainError):
            build_Of("C", 3)

    def test_cmp_and_cswap(self):
        n = 2
        c = build_cmp(n).then(*build_cswap(n).gates)
        for x, y in itertools.product(range(4), repeat=2):
            out = simulate(c, StateVector.basis(c.num_qubits, basis_index(c, x=x, y=y)))
            idx = int(np.argmax(np.abs(out.amplitudes)))
            vals = _decode(idx, c.registers, c.num_qubits)
            assert (vals["x"], vals["y"]) == (min(x, y), max(x, y))
            assert vals["flag"] == int(y < x)

    def test_u1(self):
        c = build_U1(0.1, 3)
        assert np.allclose(to_matrix(c)[10:12, 10:12], expm(-1j * 0.5 * X), atol=1e-15)
        shifted = build_U1(0.1, 3, shifted=True)
        block = to_matrix(shifted)[10:12, 10:12]
        assert np.allclose(block, expm(-1j * (5 * 0.01 - math.pi / 2) * X), atol=1e-14)
        with pytest.raises(DomainError):
            build_U1(0.1, 11)


class TestPostselect:
    def test_branch_probability(self):
        regs = layout(("a", 1), ("b", 1))
        psi = np.array([0.6, 0, 0, 0.8], dtype=complex)
        state, p = postselect(StateVector(2, psi), regs[0], 1)
        assert p == pytest.approx(0.64)
        assert np.allclose(state.amplitudes, [0, 0, 0, 1])
        assert state.norm == pytest.approx(0.8)

    def test_impossible_branch(self):
        regs = layout(("a", 1), ("b", 1))
        with pytest.raises(PostselectionError):
            postselect(StateVector.basis(2, 0), regs[0], 1)
