import numpy as np
import pytest
from numpy.testing import assert_allclose

from zenosim.device import TWO_PI, DeviceParams, DriveConfig, zero_stark_shifts
from zenosim.metrics import computational_projection, concurrence
from zenosim.qcore import basis_state, qutrit_qubit_layout
from zenosim.zeno import (
    GateProtocol,
    blocking_experiment,
    ideal_gate_unitary,
    ideal_zeno_hamiltonian,
    markovian_rate,
    plus_plus_state,
    run_gate,
)


class TestIdealZenoAlgebra:
    def test_two_matrix_elements(self):
        h = ideal_zeno_hamiltonian(1.0).matrix
        lay = qutrit_qubit_layout()
        i_eg, i_fg = lay.index_of(("e", "g")), lay.index_of(("f", "g"))
        nz = np.nonzero(np.abs(h) > 1e-15)
        assert sorted(zip(*nz)) == sorted([(i_eg, i_fg), (i_fg, i_eg)])
        assert_allclose(abs(h[i_eg, i_fg]), TWO_PI * 0.5)
        assert_allclose(h[i_eg, i_fg], 1j * TWO_PI * 0.5)

    def test_blocked_transition(self):
        h = ideal_zeno_hamiltonian(1.0).matrix
        lay = qutrit_qubit_layout()
        assert h[lay.index_of(("e", "e")), lay.index_of(("f", "e"))] == 0.0

    def test_multi_qubit_couplings(self):
        h = ideal_zeno_hamiltonian(1.0, n_qubits=2).matrix
        lay_dims = (3, 2, 2)
        idx = lambda q, a, b: (q * 2 + a) * 2 + b
        for a in (0, 1):
            for b in (0, 1):
                coupled = abs(h[idx(1, a, b), idx(2, a, b)]) > 1e-12
                assert coupled == (not (a == 1 and b == 1))

    def test_commutes_with_projector(self):
        h = ideal_zeno_hamiltonian(2.0).matrix
        p = np.eye(6)
        p[5, 5] = 0.0
        assert np.linalg.norm(h @ p - p @ h) < 1e-12

    def test_dimension_cap(self):
        with pytest.raises(ValueError, match="capped"):
            ideal_zeno_hamiltonian(1.0, n_qubits=4)


class TestIdealGateUnitary:
    def test_computational_action(self):
        u = ideal_gate_unitary(1.0).matrix
        assert_allclose(np.diag(u)[:4].real, [1, 1, -1, 1], atol=1e-10)
        off = u[:4, :4] - np.diag(np.diag(u[:4, :4]))
        assert np.abs(off).max() < 1e-10

    def test_involution(self):
        u = ideal_gate_unitary(1.0).matrix
        assert_allclose((u @ u)[:4, :4], np.eye(4), atol=1e-10)

    def test_plus_plus_concurrence(self):
        u = ideal_gate_unitary(1.0).matrix
        out = u @ plus_plus_state().data
        comp = computational_projection(np.outer(out, out.conj()))
        assert abs(concurrence(comp.matrix) - 1.0) < 1e-9
        expected = np.array([1, 1, -1, 1]) / 2.0
        phase = out[0] / abs(out[0])
        assert_allclose(out[:4] / phase, expected, atol=1e-10)

    def test_half_period_leaves_computational(self):
        from scipy.linalg import expm
        h = ideal_zeno_hamiltonian(1.0).matrix
        u_half = expm(-1j * 0.5 * h)
        lay = qutrit_qubit_layout()
        out = u_half @ basis_state(lay, ("e", "g")).data
        assert abs(out[lay.index_of(("f", "g"))]) > 1 - 1e-9


class TestGateModels:
    def test_ideal_unitary_model_matches_algebra(self):
        drives = DriveConfig(rabi_freq=1.0, zeno_amp=2.0, stark_shifts=zero_stark_shifts())
        protocol = GateProtocol(initial=plus_plus_state(), drives=drives,
                                model="ideal-unitary", sample_times=(1.0,))
        final = run_gate(protocol)[-1].data
        u = ideal_gate_unitary(1.0).matrix
        out = u @ plus_plus_state().data
        assert_allclose(final, np.outer(out, out.conj()), atol=1e-10)

    def test_ideal_markovian_strong_drive_close_to_unitary(self):
        drives = DriveConfig(rabi_freq=1.0, zeno_amp=20.0, stark_shifts=zero_stark_shifts())
        protocol = GateProtocol(initial=plus_plus_state(), drives=drives,
                                model="ideal-markovian", sample_times=(1.0,))
        final = run_gate(protocol)[-1].data
        comp = computational_projection(final)
        assert concurrence(comp.matrix) > 0.95

    def test_markovian_rate_units(self):
        assert_allclose(markovian_rate(DeviceParams(), 1.0), TWO_PI * 4.0 / 0.15)


class TestBlocking:
    def test_zero_amp_full_transfer(self):
        rows = blocking_experiment(DeviceParams(), 1.0, (0.0,), "full-cavity", n_fock=6)
        assert rows[0]["p_gg"] < 0.05

    def test_monotone_in_eps_and_rabi_ordering(self):
        params = DeviceParams()
        eps = (0.5, 1.5, 3.0)
        slow = blocking_experiment(params, 0.5, eps, "full-cavity", n_fock=12)
        fast = blocking_experiment(params, 2.0, eps, "full-cavity", n_fock=12)
        p_slow = [r["p_gg"] for r in slow]
        p_fast = [r["p_gg"] for r in fast]
        assert all(b >= a - 1e-3 for a, b in zip(p_slow, p_slow[1:]))
        assert all(b >= a - 1e-3 for a, b in zip(p_fast, p_fast[1:]))
        assert all(s >= f - 1e-3 for s, f in zip(p_slow, p_fast))

    def test_ideal_markovian_monotone(self):
        rows = blocking_experiment(DeviceParams(), 1.0, (0.5, 1.0, 2.0), "ideal-markovian")
        p = [r["p_gg"] for r in rows]
        assert p[0] < p[1] < p[2]

    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError):
            blocking_experiment(DeviceParams(), 1.0, (1.0,), "ideal-unitary")
