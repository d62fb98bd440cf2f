import math

import numpy as np
import pytest
from scipy.linalg import expm

from iqsp.bosonic import (
    BandedHamiltonian,
    TrotterPlan,
    arcsin_order,
    boson_report,
    build_sqrt_rotation,
    build_trotter_step,
    build_UPhi,
    compile_step,
    error_budget,
    exact_one_sparse_step,
    fidelity,
    plan_sqrt_rotation,
    register_width,
    sqrt_rotation_map,
    trotter_simulate,
    trotter_step_error,
    two_color_split,
    uphi_block,
    uphi_circuit_block,
)
from iqsp.errors import DomainError, PreconditionError
from iqsp.numerics import StateVector

X = np.array([[0, 1], [1, 0]], dtype=complex)


def boson_matrix(ncut):
    """a + a^dagger on Fock levels 0 .. ncut - 1."""
    a = np.diag(np.sqrt(np.arange(1, ncut)), 1)
    return a + a.T


@pytest.fixture(scope="module")
def plan7():
    return plan_sqrt_rotation(7, 0.05)


class TestHamiltonian:
    def test_boson_matrix(self):
        for ncut in (2, 5, 8):
            assert np.allclose(BandedHamiltonian.boson(ncut).matrix(), boson_matrix(ncut))

    def test_two_colour_split_sums_to_h(self):
        h = BandedHamiltonian.boson(7)
        a, b = two_color_split(h)
        assert np.allclose(a.matrix() + b.matrix(), h.matrix())
        # each colour is one-sparse: at most one non-zero per row
        for part in (a, b):
            assert np.all(np.count_nonzero(part.matrix(), axis=1) <= 1)

    def test_exact_one_sparse_step(self):
        a, _ = two_color_split(BandedHamiltonian.linear(6))
        assert np.allclose(exact_one_sparse_step(a, 0.3), expm(-0.3j * a.matrix()))

    def test_validation(self):
        with pytest.raises(DomainError):
            BandedHamiltonian(1, ())
        with pytest.raises(DomainError):
            BandedHamiltonian(3, (1.0,))
        with pytest.raises(DomainError):
            TrotterPlan(3, 1, 1.0, 1.0)
        with pytest.raises(DomainError):
            TrotterPlan(1, 2, 0.3, 1.0)

    def test_register_width(self):
        assert register_width(7) == 4
        assert register_width(6) == 3
        assert register_width(2) == 2


class TestSqrtRotation:
    def test_arcsin_order_meets_target(self):
        for eps in (1e-2, 1e-4, 1e-6):
            k = arcsin_order(eps, 0.1)
            assert arcsin_order(eps / 10, 0.1) >= k

    def test_uphi_model_matches_arcsin(self, plan7):
        # with the pipeline's signal scale the argument reaches 1 - delta
        worst = 0.0
        for x in range(8):
            block = uphi_block(plan7.uphi_phases, x, plan7.sigma)[0, 0]
            worst = max(worst, abs(x * plan7.sigma - (math.pi / 2) * block))
        assert worst <= plan7.eps1

    def test_uphi_circuit_matches_model(self, plan7):
        c = build_UPhi(0.05, plan7, 4, scale=plan7.sigma)
        for x in range(8):
            assert np.allclose(uphi_circuit_block(c, x), uphi_block(plan7.uphi_phases, x, plan7.sigma), atol=1e-12)

    def test_uphi_scale_guard(self, plan7):
        with pytest.raises(PreconditionError):
            build_UPhi(0.05, plan7, 4, scale=1.0)

    def test_rotation_map(self, plan7):
        c = build_sqrt_rotation(0.05, plan7, 4)
        assert c.num_qubits == 7
        for x in range(8):
            target = expm(-1j * 0.05 * math.sqrt(x) * X)
            assert np.linalg.norm(sqrt_rotation_map(c, x) - target, 2) <= plan7.eps1 + plan7.eps2
        assert plan7.fit_error <= plan7.eps2

    def test_plan_tau_must_match(self, plan7):
        with pytest.raises(PreconditionError):
            build_sqrt_rotation(0.04, plan7, 4)

    def test_other_cutoff(self):
        plan = plan_sqrt_rotation(3, 0.2, 1e-3, 1e-3)
        c = build_sqrt_rotation(0.2, plan, 2)
        for x in range(4):
            assert np.linalg.norm(sqrt_rotation_map(c, x) - expm(-0.2j * math.sqrt(x) * X), 2) <= 2e-3


class TestTrotter:
    def test_step_register_count(self, plan7):
        step = build_trotter_step("A", 7, 0.05, plan7)
        assert step.num_qubits == 12

    @pytest.mark.parametrize("color", ["A", "B"])
    def test_compiled_step_matches_exact(self, plan7, color):
        step = compile_step(build_trotter_step(color, 7, 0.05, plan7), 7)
        a, b = two_color_split(BandedHamiltonian.boson(7))
        exact = exact_one_sparse_step(a if color == "A" else b, 0.05)
        assert np.linalg.norm(step - exact, 2) <= 2 * (plan7.eps1 + plan7.eps2)

    def test_rabi_cutoff_two(self):
        h = BandedHamiltonian.boson(2)
        plan = TrotterPlan.from_time(1.0, 20, 1)
        state, prob = trotter_simulate(h, plan, plan_sqrt_rotation(2, plan.tau))
        exact = expm(-1j * boson_matrix(2)) @ np.array([1, 0])
        # with one coupling the product formula is exact; only the QSP error remains
        assert abs(np.vdot(exact, state.amplitudes[1:3])) ** 2 >= 1 - 1e-6
        assert 0 < prob <= 1

    def test_exact_backend_converges(self):
        h = BandedHamiltonian.boson(6)
        fids = []
        for n in (10, 40):
            state, prob = trotter_simulate(h, TrotterPlan.from_time(1.0, n, 1), backend="exact")
            assert prob == pytest.approx(1.0)
            fids.append(fidelity(h, 1.0, state))
        assert fids[1] > fids[0] > 0.9

    def test_second_order_beats_first(self):
        h = BandedHamiltonian.boson(5)
        e1 = trotter_step_error(h, 0.05, 1)
        e2 = trotter_step_error(h, 0.05, 2)
        assert e2 < e1

    def test_step_error_oracle(self):
        h = BandedHamiltonian.boson(5)
        a, b = two_color_split(h)
        tau = 0.1
        lie = expm(-1j * tau * b.matrix()) @ expm(-1j * tau * a.matrix())
        assert trotter_step_error(h, tau, 1) == pytest.approx(np.linalg.norm(lie - expm(-1j * tau * h.matrix()), 2))

    def test_custom_initial_state(self):
        h = BandedHamiltonian.linear(4)
        psi0 = np.array([0, 1, 1, 0]) / math.sqrt(2)
        state, _ = trotter_simulate(h, TrotterPlan.from_time(0.5, 200, 2), psi0=psi0, backend="exact")
        exact = expm(-0.5j * h.matrix()) @ psi0
        assert abs(np.vdot(exact, state.amplitudes[1:5])) ** 2 >= 1 - 1e-6

    def test_qsp_backend_needs_boson(self):
        with pytest.raises(DomainError):
            trotter_simulate(BandedHamiltonian.linear(4), TrotterPlan.from_time(1.0, 5, 1))

    def test_zero_time(self):
        h = BandedHamiltonian.boson(3)
        state, prob = trotter_simulate(h, TrotterPlan.from_time(0.0, 0, 1), backend="exact")
        assert isinstance(state, StateVector) and prob == 1.0
        assert fidelity(h, 0.0, state) == pytest.approx(1.0)


class TestBudgetAndReport:
    def test_error_budget_steps(self):
        # Lambda = max coupling over the two colours = 3 for linear(4)
        n, k, l, delta = error_budget(1e-2, 1.0, BandedHamiltonian.linear(4), 1)
        assert n == math.ceil((2 * 3 * 1.0) ** 2 / 5e-3)
        assert delta == 0.1 and k >= 1 and l >= 2

    def test_error_budget_second_order(self):
        n1 = error_budget(1e-2, 1.0, BandedHamiltonian.boson(5), 1)[0]
        n2 = error_budget(1e-2, 1.0, BandedHamiltonian.boson(5), 2)[0]
        assert n2 < n1

    def test_error_budget_domain(self):
        with pytest.raises(DomainError):
            error_budget(0.5, 1.0, BandedHamiltonian.boson(4))
        with pytest.raises(PreconditionError):
            error_budget(1e-10, 10.0, BandedHamiltonian.boson(8))

    def test_report_fields(self):
        rep = boson_report(4, 0.5, 20, 1)
        assert {"ncut", "tau", "N", "p", "k", "l", "delta", "fidelity", "success_probability", "wall_time_ms"} <= set(rep)
        assert rep["tau"] == pytest.approx(0.025)
        assert rep["fidelity"] >= 0.999

    def test_report_exact_backend(self):
        rep = boson_report(4, 0.5, 20, 2, backend="exact")
        assert rep["k"] == rep["l"] == 0 and rep["fidelity"] >= 1 - 1e-4
