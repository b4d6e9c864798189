import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zenosim.bounds import (
    BoundInput,
    analytic_bound,
    assert_cptp,
    channel_from_problem,
    choi_matrix,
    compose,
    depolarizing_channel,
    gate_bound,
    loosened_bound,
    numeric_lower_estimate,
    pinching_channel,
    unitary_channel,
)
from zenosim.device import TWO_PI
from zenosim.lindblad import ZenoProjectorSpec, build_ideal_zeno_problem
from zenosim.zeno import ideal_gate_unitary


class TestClosedForms:
    def test_gate_bound_values(self):
        assert abs(gate_bound(0.05) - 1.857) < 0.01
        assert abs(gate_bound(0.06) - 2.23) < 0.01
        assert gate_bound(0.06) > 2.0

    def test_route_consistency(self):
        # general form with the gate's ||H|| = Omega/2, t = 2pi/Omega
        for rabi in (0.5, 1.0, 2.0):
            for ratio in (0.01, 0.04, 0.06):
                omega = TWO_PI * rabi
                inp = BoundInput(h_norm=omega / 2, gamma=omega / ratio, t=1.0 / rabi)
                assert_allclose(analytic_bound(inp), gate_bound(ratio), rtol=1e-12)

    def test_large_gamma_limit(self):
        vals = [analytic_bound(BoundInput(h_norm=math.pi, gamma=g, t=1.0))
                for g in (1e3, 1e5, 1e7)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 1e-4

    def test_monotone_decreasing_in_gamma(self):
        gs = np.linspace(10, 1000, 50)
        vals = [analytic_bound(BoundInput(h_norm=1.0, gamma=g, t=2.0)) for g in gs]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_loosened_values_and_dominance(self):
        assert_allclose(loosened_bound(0.01), 0.38)
        assert gate_bound(0.01) <= 0.38
        assert loosened_bound(0.06) >= gate_bound(0.06)
        grid = np.linspace(1e-4, 0.06, 100)
        assert all(loosened_bound(r) >= gate_bound(r) for r in grid)


class TestChannels:
    def test_unitary_channel_cptp(self):
        rng = np.random.default_rng(0)
        u, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        s = unitary_channel(u)
        assert_cptp(s)

    def test_choi_of_identity(self):
        s = unitary_channel(np.eye(2))
        j = choi_matrix(s)
        expected = np.zeros((4, 4))
        for i in (0, 3):
            for k in (0, 3):
                expected[i, k] = 1.0
        assert_allclose(j, expected, atol=1e-14)

    def test_pinching_kills_cross_coherence(self):
        p = np.array([1.0, 1.0, 0.0])
        s = pinching_channel(p)
        rho = np.full((3, 3), 1 / 3, dtype=complex)
        out = (s @ rho.reshape(-1)).reshape(3, 3)
        assert out[0, 2] == 0.0 and out[1, 2] == 0.0 and out[0, 1] != 0.0

    def test_channel_from_problem_is_cptp(self):
        problem = build_ideal_zeno_problem(1.0, TWO_PI * 40.0, ZenoProjectorSpec())
        s = channel_from_problem(problem, t=1.0)
        assert_cptp(s, tol=1e-9)

    def test_non_cptp_rejected(self):
        bad = np.eye(36) * 1.2
        with pytest.raises(ValueError):
            assert_cptp(bad)


class TestLowerEstimate:
    def test_identical_channels(self):
        dep = depolarizing_channel(2)
        assert numeric_lower_estimate(dep, dep, samples=16) == 0.0

    def test_identity_vs_depolarizing(self):
        # ancilla-extended trace distance 0.75, diamond value 1.5 unnormalized
        est = numeric_lower_estimate(unitary_channel(np.eye(2)), depolarizing_channel(2),
                                     samples=64)
        assert est >= 1.5 - 1e-9
        assert est <= 1.5 + 1e-6

    def test_sandwich_against_analytic(self):
        rabi = 1.0
        u = ideal_gate_unitary(rabi).matrix
        p_diag = np.ones(6)
        p_diag[5] = 0.0
        ideal = compose(unitary_channel(u), pinching_channel(p_diag))
        for ratio in (0.01, 0.03, 0.06):
            gamma = TWO_PI * rabi / ratio
            problem = build_ideal_zeno_problem(rabi, gamma, ZenoProjectorSpec())
            chan = channel_from_problem(problem, t=1.0 / rabi)
            est = numeric_lower_estimate(chan, ideal, samples=128, refine_steps=32)
            assert est <= gate_bound(ratio)
            assert est > 0.0

    def test_dimension_cap(self):
        big = np.eye(64)
        with pytest.raises(ValueError, match="cap"):
            numeric_lower_estimate(big, big)

    def test_seeded_determinism(self):
        a = unitary_channel(np.eye(2))
        b = depolarizing_channel(2, strength=0.5)
        x = numeric_lower_estimate(a, b, samples=32, seed=5)
        y = numeric_lower_estimate(a, b, samples=32, seed=5)
        assert x == y
