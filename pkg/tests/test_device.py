import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zenosim.device import (
    TWO_PI,
    DeviceParams,
    DriveConfig,
    build_collapse_ops,
    build_dispersive_h,
    build_drive_terms,
    build_full_sim_h,
    collapse_channels,
    collapse_rates,
    drive_frequencies,
    sim_generator,
    zero_stark_shifts,
)
from zenosim.qcore import full_layout


@pytest.fixture
def params():
    return DeviceParams()


@pytest.fixture
def layout():
    return full_layout(6)


class TestDeviceParams:
    def test_defaults_are_published_values(self, params):
        assert params.chi1 == -4.25 and params.chi2 == -4.35 and params.chif == -10.0
        assert params.kappa == 0.15
        assert (params.t1_eg, params.t1_fe, params.t2s_eg, params.t2s_fe) == (52.0, 12.9, 22.2, 5.8)
        assert (params.t1_q2, params.t2s_q2) == (18.9, 15.7)

    def test_kappa_positive(self):
        with pytest.raises(ValueError):
            DeviceParams(kappa=-1.0)

    def test_strong_dispersive_warning(self):
        with pytest.warns(UserWarning, match="kappa"):
            DeviceParams(kappa=2.0)


class TestDispersive:
    def test_gg_reference_frame(self, params, layout):
        h = build_dispersive_h(params, layout).matrix
        idx = layout.index_of(("g", "g", 1))
        assert_allclose(h[idx, idx], TWO_PI * 0.5 * params.self_kerr, atol=1e-12)

    def test_eg_one_photon(self, params, layout):
        h = build_dispersive_h(params, layout).matrix
        idx = layout.index_of(("e", "g", 1))
        assert_allclose(h[idx, idx].real,
                        TWO_PI * (-4.25) + TWO_PI * 0.5 * params.self_kerr, atol=1e-12)

    def test_fe_two_photons(self, params, layout):
        # direct evaluation: 2(chif+chi2) + alpha1 + (alpha_c/2)*4
        h = build_dispersive_h(params, layout).matrix
        idx = layout.index_of(("f", "e", 2))
        expected = TWO_PI * (2 * (params.chif + params.chi2) + params.alpha1
                             + 0.5 * params.self_kerr * 4)
        assert_allclose(h[idx, idx].real, expected, atol=1e-10)


class TestDriveBookkeeping:
    def test_offsets(self, params):
        f = drive_frequencies(params)
        assert_allclose(f.omega_fe_offset, -14.35)
        assert_allclose(f.omega_sym_offset, 5.65)

    def test_degenerate_symmetry(self):
        p = DeviceParams(chif=-4.25)  # chif == chi1: tones mirror through the ge line
        f = drive_frequencies(p)
        assert_allclose(f.omega_sym_offset, p.chi2 - p.chi1)
        assert_allclose(0.5 * (f.omega_sym_offset + f.omega_fe_offset), p.chi2)

    def test_zero_amp_zero_operator(self, params, layout):
        drives = DriveConfig(zeno_amp=0.0, stark_shifts=zero_stark_shifts())
        h = build_drive_terms(params, drives, 0.37, layout).matrix
        assert np.abs(h).max() == 0.0

    def test_t0_form(self, params, layout):
        drives = DriveConfig(zeno_amp=1.5, symmetric_on=False, stark_shifts=zero_stark_shifts())
        h = build_drive_terms(params, drives, 0.0, layout).matrix
        nc = layout.factor_dims[2]
        a = np.kron(np.eye(6), np.diag(np.sqrt(np.arange(1, nc)), 1))
        assert_allclose(h, 1j * TWO_PI * 1.5 * (a - a.conj().T), atol=1e-12)

    def test_hermitian_at_random_times(self, params, layout):
        drives = DriveConfig(zeno_amp=2.0, symmetric_on=True, stark_shifts=zero_stark_shifts())
        for t in (0.173, 0.81, 2.44):
            h = build_drive_terms(params, drives, t, layout).matrix
            assert np.linalg.norm(h - h.conj().T) < 1e-12 * max(np.linalg.norm(h), 1)


class TestFullH:
    def test_reduces_to_dispersive(self, params, layout):
        drives = DriveConfig(rabi_freq=0.0, zeno_amp=0.0, stark_shifts=zero_stark_shifts())
        h = build_full_sim_h(params, drives, 0.9, layout).matrix
        assert_allclose(h, build_dispersive_h(params, layout).matrix, atol=1e-14)

    def test_rabi_element(self, params, layout):
        drives = DriveConfig(rabi_freq=1.0, zeno_amp=0.0, stark_shifts=zero_stark_shifts())
        h = build_full_sim_h(params, drives, 0.0, layout).matrix
        i = layout.index_of(("f", "g", 1))
        j = layout.index_of(("e", "g", 1))
        assert_allclose(abs(h[i, j]), TWO_PI * 0.5, atol=1e-12)

    def test_real_expectation_over_time(self, params, layout):
        rng = np.random.default_rng(0)
        psi = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
        psi /= np.linalg.norm(psi)
        drives = DriveConfig(rabi_freq=1.0, zeno_amp=2.0, stark_shifts=zero_stark_shifts())
        for t in (0.0, 0.21, 1.7):
            h = build_full_sim_h(params, drives, t, layout).matrix
            assert abs(np.vdot(psi, h @ psi).imag) < 1e-9

    def test_missing_stark_rejected(self, params, layout):
        drives = DriveConfig(rabi_freq=1.0, zeno_amp=2.0, stark_shifts=None)
        with pytest.raises(ValueError, match="stark"):
            build_full_sim_h(params, drives, 0.0, layout)

    def test_structured_matches_dense(self, params, layout):
        drives = DriveConfig(rabi_freq=1.0, zeno_amp=2.0, symmetric_on=True,
                             stark_shifts={"g1e1": -0.4, "g2e2": -0.43, "ef": -0.9})
        gen = sim_generator(params, drives, layout)
        for t in (0.0, 0.0931, 0.777):
            dense = build_full_sim_h(params, drives, t, layout).matrix
            assert_allclose(gen.matrix_at(t), dense, atol=1e-10)


class TestCollapse:
    def test_infinite_coherence_leaves_cavity_only(self, layout):
        ops = build_collapse_ops(DeviceParams().without_decoherence(), layout)
        assert len(ops) == 1
        nc = layout.factor_dims[2]
        a = np.kron(np.eye(6), np.diag(np.sqrt(np.arange(1, nc)), 1))
        assert_allclose(ops[0].matrix, math.sqrt(TWO_PI * 0.15) * a, atol=1e-12)

    def test_qubit_dephasing_rate(self, params):
        # 1/15.7 - 1/(2*18.9) from the published qubit times
        rates = collapse_rates(params)
        assert_allclose(rates["deph_q2"], 1 / 15.7 - 1 / 37.8, atol=1e-10)
        assert_allclose(rates["deph_q2"], 0.0372, atol=2e-4)

    def test_inconsistent_times_rejected(self):
        with pytest.raises(ValueError, match="dephasing"):
            collapse_rates(DeviceParams(t1_q2=5.0, t2s_q2=15.7))

    def test_channel_structured_matches_dense(self, params, layout):
        ops = build_collapse_ops(params, layout)
        chans = collapse_channels(params, layout)
        assert len(ops) == len(chans) == 7
        for op, ch in zip(ops, chans):
            assert_allclose(ch.dense(), op.matrix, atol=1e-14)

    def test_dropped_qubit_layout(self, params):
        lay = full_layout(5, qutrit_dim=2, qubit_dim=1)
        chans = collapse_channels(params, lay)
        labels = [c.label for c in chans]
        assert "relax_q2" not in labels and "deph_q2" not in labels


class TestUnitsRoundTrip:
    def test_mhz_to_angular_and_back(self, params, layout):
        h = build_dispersive_h(params, layout).matrix
        idx = layout.index_of(("e", "g", 1))
        kerr = TWO_PI * 0.5 * params.self_kerr
        back = (h[idx, idx].real - kerr) / TWO_PI
        assert_allclose(back, params.chi1, atol=1e-12)
