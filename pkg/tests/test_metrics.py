import numpy as np
import pytest
from numpy.testing import assert_allclose

from zenosim.metrics import (
    computational_projection,
    concurrence,
    entangling_phase,
    plus_plus_target,
    populations,
    purity,
    state_fidelity,
    trace_distance,
)
from zenosim.qcore import QuantumState, qutrit_qubit_layout


def bell():
    v = np.zeros(4, complex)
    v[0] = v[3] = 1 / np.sqrt(2)
    return v


def random_state(rng, d=4, pure=False):
    if pure:
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        return v / np.linalg.norm(v)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


class TestFidelity:
    def test_self_fidelity(self):
        rng = np.random.default_rng(0)
        psi = random_state(rng, pure=True)
        assert_allclose(state_fidelity(np.outer(psi, psi.conj()), psi), 1.0, atol=1e-12)

    def test_mixed_vs_pure(self):
        rng = np.random.default_rng(1)
        psi = random_state(rng, pure=True)
        assert_allclose(state_fidelity(np.eye(4) / 4, psi), 0.25, atol=1e-12)

    def test_gate_target_definition(self):
        plus = 0.5 * np.ones(4, complex)
        gate = np.diag([1.0, 1.0, -1.0, 1.0])
        out = gate @ plus
        assert_allclose(state_fidelity(np.outer(out, out.conj()), plus_plus_target()), 1.0,
                        atol=1e-12)

    def test_mixing_linearity(self):
        rng = np.random.default_rng(2)
        rho, sigma = random_state(rng), random_state(rng)
        t = random_state(rng, pure=True)
        p = 0.3
        lhs = state_fidelity(p * rho + (1 - p) * sigma, t)
        rhs = p * state_fidelity(rho, t) + (1 - p) * state_fidelity(sigma, t)
        assert_allclose(lhs, rhs, atol=1e-12)

    def test_mixed_target_rejected(self):
        with pytest.raises(ValueError, match="mixed"):
            state_fidelity(np.eye(4) / 4, np.eye(4) / 4)


class TestConcurrence:
    def test_bell_state(self):
        assert_allclose(concurrence(np.outer(bell(), bell())), 1.0, atol=1e-10)

    def test_product_state(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        assert concurrence(np.outer(v, v.conj())) < 1e-10

    def test_werner_closed_form(self):
        # p*Bell + (1-p)*I/4 has concurrence max(0, (3p-1)/2)
        for p in (0.2, 0.5, 0.9):
            rho = p * np.outer(bell(), bell()) + (1 - p) * np.eye(4) / 4
            expected = max(0.0, (3 * p - 1) / 2)
            assert_allclose(concurrence(rho), expected, atol=1e-10)

    def test_local_unitary_invariance(self):
        rng = np.random.default_rng(4)
        rho = random_state(rng)
        base = concurrence(rho)
        for _ in range(100):
            ua, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            ub, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            u = np.kron(ua, ub)
            assert abs(concurrence(u @ rho @ u.conj().T) - base) < 1e-9

    def test_invalid_density_matrix(self):
        with pytest.raises(ValueError, match="invalid"):
            concurrence(np.diag([1.2, -0.2, 0.0, 0.0]))


class TestComputationalProjection:
    def test_no_f_population(self):
        rng = np.random.default_rng(5)
        comp = random_state(rng)
        full = np.zeros((6, 6), complex)
        full[:4, :4] = comp
        out = computational_projection(full)
        assert_allclose(out.subspace_weight, 1.0, atol=1e-12)
        assert_allclose(out.matrix, comp, atol=1e-12)

    def test_pure_fe_rejected(self):
        full = np.zeros((6, 6), complex)
        full[5, 5] = 1.0
        with pytest.raises(ValueError, match="zero weight"):
            computational_projection(full)

    def test_mixture_with_fe(self):
        rng = np.random.default_rng(6)
        comp = random_state(rng)
        full = np.zeros((6, 6), complex)
        full[:4, :4] = 0.9 * comp
        full[5, 5] = 0.1
        out = computational_projection(full)
        assert_allclose(out.subspace_weight, 0.9, atol=1e-12)
        assert_allclose(out.matrix, comp, atol=1e-12)
        assert np.linalg.eigvalsh(out.matrix).min() > -1e-12

    def test_positivity_preserved(self):
        rng = np.random.default_rng(7)
        full = random_state(rng, d=6)
        out = computational_projection(full)
        assert np.linalg.eigvalsh(out.matrix).min() > -1e-12


class TestPopulations:
    def test_basis_state(self):
        lay = qutrit_qubit_layout()
        rho = np.zeros((6, 6), complex)
        rho[0, 0] = 1.0
        pops = populations(QuantumState(lay, "mixed", rho))
        assert pops["gg"] == 1.0 and sum(pops.values()) == 1.0

    def test_maximally_mixed(self):
        lay = qutrit_qubit_layout()
        pops = populations(QuantumState(lay, "mixed", np.eye(6) / 6))
        assert_allclose(list(pops.values()), 1 / 6)


class TestHelpers:
    def test_trace_distance_bounds(self):
        rng = np.random.default_rng(8)
        a, b = random_state(rng), random_state(rng)
        d = trace_distance(a, b)
        assert 0 <= d <= 1
        assert trace_distance(a, a) < 1e-14

    def test_purity_range(self):
        rng = np.random.default_rng(9)
        assert abs(purity(np.eye(4) / 4) - 0.25) < 1e-14
        psi = random_state(rng, pure=True)
        assert abs(purity(np.outer(psi, psi.conj())) - 1.0) < 1e-12

    def test_entangling_phase_local_z_is_zero(self):
        plus = 0.5 * np.ones(4, complex)
        rho = np.outer(plus, plus.conj())
        za = np.kron(np.diag([1, np.exp(0.7j)]), np.eye(2))
        zb = np.kron(np.eye(2), np.diag([1, np.exp(-0.3j)]))
        u = za @ zb
        assert abs(entangling_phase(u @ rho @ u.conj().T)) < 1e-12
        cz = np.diag([1.0, 1.0, 1.0, np.exp(0.4j)])
        assert abs(entangling_phase(cz @ rho @ cz.conj().T) - 0.4) < 1e-12
