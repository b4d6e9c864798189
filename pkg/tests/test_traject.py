import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from zenosim.device import TWO_PI
from zenosim.lindblad import (
    CollapseChannel,
    EvolutionProblem,
    HTerm,
    SparseOp,
    StructuredHamiltonian,
    evolve_master,
)
from zenosim.metrics import trace_distance
from zenosim.qcore import QuantumState, SpaceLayout, basis_state
from zenosim.traject import TrajectoryRecord, ensemble_average, escape_detector, run_trajectory


def qubit_layout():
    return SpaceLayout((2,), (("g", "e"),))


def decay_problem(gamma=1.0, t_end=6.0, dt=2e-3):
    lay = qubit_layout()
    sm = SparseOp(2, np.array([0]), np.array([1]), np.array([math.sqrt(gamma) + 0j]))
    ham = StructuredHamiltonian(lay, np.zeros(2), ())
    init = basis_state(lay, ("e",))
    return EvolutionProblem(ham, (CollapseChannel(sm, "decay"),), init,
                            (0.0, t_end), dt=dt, sample_times=(t_end,))


def cavity_problem(n=10, kappa_mhz=0.3, alpha=1.2, t_end=1.5):
    lay = SpaceLayout((n,), (tuple(str(i) for i in range(n)),))
    kappa = TWO_PI * kappa_mhz
    a = np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)
    chan = CollapseChannel(SparseOp.from_dense(math.sqrt(kappa) * a), "cavity")
    ham = StructuredHamiltonian(lay, np.zeros(n), ())
    vec = np.array([alpha**k / math.sqrt(math.factorial(k)) for k in range(n)], complex)
    init = QuantumState(lay, "pure", vec / np.linalg.norm(vec), validate_on_init=False)
    return EvolutionProblem(ham, (chan,), init, (0.0, t_end), sample_times=(t_end,)), a


class TestRunTrajectory:
    def test_no_collapse_is_schroedinger(self):
        lay = qubit_layout()
        op = SparseOp(2, np.array([0]), np.array([1]), np.array([1.0 + 0j]))
        omega = TWO_PI * 1.0
        ham = StructuredHamiltonian(lay, np.zeros(2), (HTerm(op, 0.5 * omega, 0.0),))
        problem = EvolutionProblem(ham, (), basis_state(lay, ("g",)), (0.0, 0.25),
                                   sample_times=(0.25,))
        rec = run_trajectory(problem, seed=11)
        assert rec.jump_log == ()
        p_g = abs(rec.final_state.data[0]) ** 2
        assert abs(p_g - math.cos(omega * 0.125) ** 2) < 1e-8

    def test_determinism_bit_exact(self):
        problem = decay_problem()
        a = run_trajectory(problem, seed=42)
        b = run_trajectory(problem, seed=42)
        assert a.jump_log == b.jump_log
        assert np.array_equal(a.final_state.data, b.final_state.data)
        c = run_trajectory(problem, seed=43)
        assert a.jump_log != c.jump_log or not np.array_equal(
            a.final_state.data, c.final_state.data)

    def test_jump_times_exponential(self):
        # KS test against the truncated-exponential law over 2000 runs
        gamma, t_end = 2.0, 4.0
        problem = decay_problem(gamma=gamma, t_end=t_end, dt=2e-3)
        times = []
        for seed in range(2000):
            rec = run_trajectory(problem, seed=seed)
            if rec.jump_log:
                times.append(rec.jump_log[0][0])
        trunc = 1.0 - math.exp(-gamma * t_end)
        assert len(times) > 1900

        def cdf(x):
            return (1.0 - np.exp(-gamma * np.asarray(x))) / trunc

        _, p = stats.kstest(times, cdf)
        assert p > 0.01

    def test_ensemble_matches_master_photon_number(self):
        problem, a = cavity_problem()
        records = [run_trajectory(problem, seed=s) for s in range(2000)]
        avg = ensemble_average(records, problem.initial.layout)
        n_traj = float(np.real(np.trace(a.conj().T @ a @ avg.state.data)))
        exact = evolve_master(problem)[-1]
        n_master = float(np.real(np.trace(a.conj().T @ a @ exact.data)))
        stderr = 3.0 * float(np.sum(np.abs(np.diag(a.conj().T @ a)) * np.diag(avg.stderr)))
        assert abs(n_traj - n_master) < max(stderr, 0.05)

    def test_mean_square_error_scaling(self):
        # trace-distance error shrinks ~ M^(-1/2)
        problem, _ = cavity_problem(n=8, t_end=1.0)
        exact = evolve_master(problem)[-1]
        errs = []
        for m in (500, 2000, 8000):
            records = [run_trajectory(problem, seed=s) for s in range(m)]
            avg = ensemble_average(records, problem.initial.layout)
            errs.append(trace_distance(avg.state.data, exact.data))
        assert errs[2] < errs[0]
        ratio = errs[0] / errs[2]  # expect ~ 4 for M ratio 16
        assert 1.5 < ratio < 12.0


class TestEnsembleAverage:
    def test_single_record_is_projector(self):
        problem = decay_problem(t_end=0.5)
        rec = run_trajectory(problem, seed=3)
        avg = ensemble_average([rec], problem.initial.layout)
        psi = rec.final_state.data
        assert_allclose(avg.state.data, np.outer(psi, psi.conj()), atol=1e-14)

    def test_two_orthogonal_records(self):
        lay = qubit_layout()
        recs = [
            TrajectoryRecord(basis_state(lay, ("g",)), (), False, 0),
            TrajectoryRecord(basis_state(lay, ("e",)), (), False, 1),
        ]
        avg = ensemble_average(recs, lay)
        assert_allclose(np.linalg.eigvalsh(avg.state.data), [0.5, 0.5], atol=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ensemble_average([], qubit_layout())


class TestEscapeDetector:
    def _record(self, escaped, seed):
        lay = qubit_layout()
        return TrajectoryRecord(basis_state(lay, ("g",)), (), escaped, seed)

    def test_perfect_detector(self):
        assert escape_detector(self._record(True, 5), 1.0) is True
        assert escape_detector(self._record(False, 5), 1.0) is False

    def test_flip_rate(self):
        flips = sum(escape_detector(self._record(True, s), 0.75, seed=9) for s in range(10000))
        assert abs(flips / 10000 - 0.75) < 0.02

    def test_false_positive_rate(self):
        fp = sum(escape_detector(self._record(False, s), 0.75, seed=9) for s in range(10000))
        assert abs(fp / 10000 - 0.25) < 0.02

    def test_range_check(self):
        with pytest.raises(ValueError):
            escape_detector(self._record(True, 0), 0.5)
