import numpy as np
import pytest
from numpy.testing import assert_allclose

from zenosim.calib import (
    build_stark_table,
    cavity_offsets,
    cross_kerr_rates,
    exact_stark_rate,
    predicted_stark_shift,
    simulated_ramsey,
    steady_state_alpha,
    StarkTable,
)
from zenosim.device import TWO_PI, DeviceParams, DriveConfig, zero_stark_shifts


@pytest.fixture
def params():
    return DeviceParams()


class TestSteadyStateAlpha:
    def test_resonant(self):
        assert_allclose(steady_state_alpha(1.0, 0.0, 0.15), 2.0 / 0.15)

    def test_dispersive_limit(self):
        a = steady_state_alpha(1.0, 50.0, 0.15)
        assert abs(abs(a) - 1.0 / 50.0) < 1e-4

    def test_paper_detuning(self, params):
        # drive on the fe line seen from gg: |Delta| = 14.35 MHz
        offs = cavity_offsets(params)
        delta = offs["gg"] - (params.chif + params.chi2)
        a = steady_state_alpha(1.0, delta, params.kappa)
        assert_allclose(delta, 14.35)
        assert abs(abs(a) - 1.0 / 14.35) < 1e-3

    def test_kappa_positive(self):
        with pytest.raises(ValueError):
            steady_state_alpha(1.0, 0.0, -0.1)


class TestCrossKerrRates:
    def test_equal_frequency_pair_is_zero(self, params):
        p = DeviceParams(chi1=-4.35)  # makes ge and eg degenerate
        rates = cross_kerr_rates(p, 1.0)
        re, im = rates.rate("ge", "eg", "zeno")
        assert re == 0.0 and im == 0.0

    def test_symmetric_cancellation(self, params):
        rates = cross_kerr_rates(params, 1.0)
        a = rates.rate("gg", "eg", "total")[0]
        b = rates.rate("ge", "ee", "total")[0]
        assert abs(a - b) / max(abs(a), abs(b)) < 0.05

    def test_im_scales_quadratically(self, params):
        r1 = cross_kerr_rates(params, 1.0).rate("gg", "eg", "zeno")[1]
        r2 = cross_kerr_rates(params, 2.0).rate("gg", "eg", "zeno")[1]
        assert_allclose(r2 / r1, 4.0, rtol=1e-12)

    def test_antisymmetry_and_im_positive(self, params):
        rates = cross_kerr_rates(params, 1.5)
        for (a, b) in (("gg", "eg"), ("ge", "ee"), ("eg", "fg")):
            re_ab, im_ab = rates.rate(a, b, "total")
            re_ba, im_ba = rates.rate(b, a, "total")
            assert_allclose(re_ab, -re_ba)
            assert_allclose(im_ab, im_ba)
            assert im_ab >= 0.0

    def test_resonant_marker(self, params):
        rates = cross_kerr_rates(params, 1.0)
        assert rates.rate("gg", "fe", "zeno") is None
        assert rates.rate("gg", "fe", "total") is None

    def test_exact_reduces_to_simplified(self, params):
        simp = cross_kerr_rates(params, 1.0).rate("gg", "eg", "zeno")[0]
        exact = exact_stark_rate(params, ("gg", "eg"),
                                 params.chif + params.chi2, 1.0)
        assert abs(exact - simp) / abs(simp) < 1e-3

    def test_exact_finite_on_resonance(self, params):
        # drive on the eg line: simplified form is singular, exact one is not
        val = predicted_stark_shift(params, ("gg", "eg"), params.chi1, 0.5)
        assert np.isfinite(val)
        assert abs(val - (-0.235 * 0.25)) < 0.005


class TestSimulatedRamsey:
    def test_zero_amp_zero_shift(self, params):
        drives = DriveConfig(rabi_freq=0.0, zeno_amp=0.0, stark_shifts=zero_stark_shifts())
        r = simulated_ramsey(params, drives, ("gg", "eg"), duration_us=1.0, n_fock=4)
        assert abs(r.shift_mhz) < 1e-9
        assert r.fit_residual_rad < 1e-9

    def test_steady_state_matches_formula(self, params):
        # long record, late fit window: slope converges to -Re mu / 2pi
        drives = DriveConfig(rabi_freq=0.0, zeno_amp=0.5, symmetric_on=False,
                             stark_shifts=zero_stark_shifts())
        r = simulated_ramsey(params, drives, ("gg", "eg"), duration_us=8.0,
                             n_fock=8, fit_window=0.3)
        pred = -cross_kerr_rates(params, 0.5).rate("gg", "eg", "zeno")[0] / TWO_PI
        assert abs(r.shift_mhz / pred - 1.0) < 0.05

    def test_branch_agreement_with_symmetric_drive(self, params):
        drives = DriveConfig(rabi_freq=0.0, zeno_amp=1.0, symmetric_on=True,
                             stark_shifts=zero_stark_shifts())
        rg = simulated_ramsey(params, drives, ("gg", "eg"), duration_us=1.0, n_fock=8)
        re = simulated_ramsey(params, drives, ("ge", "ee"), duration_us=1.0, n_fock=8)
        rel = abs(rg.shift_mhz - re.shift_mhz) / max(abs(rg.shift_mhz), abs(re.shift_mhz))
        assert rel < 0.05


class TestStarkTable:
    def test_table_roundtrip(self, tmp_path):
        table = StarkTable((0.0, 1.0, 2.0), {
            "g1e1": {0.0: 0.0, 1.0: -0.1, 2.0: -0.4},
            "g2e2": {0.0: 0.0, 1.0: -0.11, 2.0: -0.43},
            "ef": {0.0: 0.0, 1.0: -0.22, 2.0: -0.9},
        })
        path = tmp_path / "stark.json"
        table.to_json(path)
        loaded = StarkTable.from_json(path)
        assert loaded.shifts == table.shifts
        # quadratic interpolation in eps^2
        assert abs(loaded.at("g1e1", 1.5) - (-0.1 + (-0.3) * (1.5**2 - 1) / 3)) < 1e-12

    def test_build_table_quadratic_order(self, params):
        table = build_stark_table(params, (0.5, 1.0), n_fock=6, duration_us=1.0)
        for name in ("g1e1", "g2e2", "ef"):
            assert table.shifts[name][0.0] == 0.0
            r = table.shifts[name][1.0] / table.shifts[name][0.5]
            assert 3.0 < r < 5.0  # leading order eps^2
            assert abs(table.shifts[name][1.0]) > abs(table.shifts[name][0.5])
