"""Analytic drive side-effects and their numerical calibration.

Off-resonant cavity drives displace the cavity by a state-dependent
steady-state amplitude α_ij = ε/(iΔ_ij + κ/2); pairs of qutrit-qubit states
then accumulate conditional phase at Re μ and lose coherence at Im μ. The
Stark shifts fed to the gate Hamiltonian are calibrated by simulating Ramsey
interferometry with the drives on and fitting the phase-accumulation slope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .device import (
    TWO_PI,
    DeviceParams,
    DriveConfig,
    build_dispersive_h,
    collapse_channels,
    drive_frequencies,
    settled_cavity_state,
    sim_generator,
    zero_stark_shifts,
)
from .lindblad import EvolutionProblem, evolve_master
from .qcore import (
    QuantumState,
    SpaceLayout,
    full_layout,
    partial_trace,
    superposition_state,
    tensor_product,
)

__all__ = [
    "steady_state_alpha",
    "cavity_offsets",
    "CrossRates",
    "cross_kerr_rates",
    "exact_stark_rate",
    "RamseyResult",
    "simulated_ramsey",
    "StarkTable",
    "build_stark_table",
    "PAIR_LABELS",
]

PAIR_LABELS = ("gg", "ge", "eg", "ee", "fg", "fe")
_RESONANT_TOL = 1e-9  # MHz


def steady_state_alpha(eps: float, delta: float, kappa: float) -> complex:
    """Steady-state coherent amplitude α = ε/(iΔ + κ/2) in the drive frame.

    All three arguments share one (cyclic) frequency unit; α is dimensionless.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return eps / (1j * delta + 0.5 * kappa)


def cavity_offsets(params: DeviceParams, qutrit_dim: int = 3) -> dict:
    """Cavity resonance offset from ω_gg per qutrit-qubit state (MHz)."""
    out = {"gg": 0.0, "ge": params.chi2, "eg": params.chi1, "ee": params.chi1 + params.chi2}
    if qutrit_dim == 3:
        out["fg"] = params.chif
        out["fe"] = params.chif + params.chi2
    return out


@dataclass(frozen=True)
class CrossRates:
    """Per-pair conditional-phase (re, rad/µs) and dephasing (im, 1/µs) rates.

    entries[(a, b)][drive] is (re_mu, im_mu) or None when the drive is
    resonant with one of the pair's cavity lines (rates undefined there).
    Drives: "zeno", "symmetric", "total".
    """

    eps_mhz: float
    entries: dict

    def rate(self, a: str, b: str, drive: str = "total"):
        if (a, b) in self.entries:
            return self.entries[(a, b)][drive]
        re_im = self.entries[(b, a)][drive]
        if re_im is None:
            return None
        return (-re_im[0], re_im[1])


def _pair_rate(w_a: float, w_b: float, drive_off: float, eps: float, kappa: float):
    """Simplified strong-dispersive rates; None when a detuning vanishes."""
    d_a = w_a - drive_off
    d_b = w_b - drive_off
    if abs(d_a) < _RESONANT_TOL or abs(d_b) < _RESONANT_TOL:
        return None
    diff = w_a - w_b
    re = TWO_PI * diff * eps**2 / (d_a * d_b)
    im = TWO_PI * diff**2 * eps**2 * kappa / (2.0 * d_a**2 * d_b**2)
    return (re, im)


def exact_stark_rate(params: DeviceParams, pair: tuple[str, str], drive_offset_mhz: float,
                     eps_mhz: float) -> float:
    """Conditional-phase rate (rad/µs) via the full steady-state α products;
    finite on resonance, reduces to the simplified Re μ when |Δ| ≫ κ."""
    w = cavity_offsets(params)
    w_a, w_b = w[pair[0]], w[pair[1]]
    d_a, d_b = w_a - drive_offset_mhz, w_b - drive_offset_mhz
    k2 = 0.25 * params.kappa**2
    re = (w_a - w_b) * eps_mhz**2 * (d_a * d_b + k2) / ((d_a**2 + k2) * (d_b**2 + k2))
    return TWO_PI * re


def predicted_stark_shift(params: DeviceParams, pair: tuple[str, str],
                          drive_offset_mhz: float, eps_mhz: float) -> float:
    """Steady-state transition-frequency shift (MHz) of the (lower, upper)
    pair under one drive: the E-convention counterpart of the phase rate,
    δν = −Re μ / 2π. Finite even when the drive sits on the upper line, which
    is where the Ramsey fit is unavailable (dead coherence)."""
    return -exact_stark_rate(params, pair, drive_offset_mhz, eps_mhz) / TWO_PI


def cross_kerr_rates(params: DeviceParams, eps_mhz: float,
                     zeno_offset_mhz: float | None = None,
                     include_symmetric: bool = True,
                     pairs=None) -> CrossRates:
    """Rate table over state pairs, per drive and summed.

    Antisymmetry of re and symmetry of im under pair exchange hold exactly;
    resonant pairs carry the None marker.
    """
    w = cavity_offsets(params)
    freqs = drive_frequencies(params)
    zeno_off = zeno_offset_mhz if zeno_offset_mhz is not None else freqs.omega_fe_offset
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(PAIR_LABELS) for b in PAIR_LABELS[i + 1:]]
    entries = {}
    for a, b in pairs:
        per = {}
        per["zeno"] = _pair_rate(w[a], w[b], zeno_off, eps_mhz, params.kappa)
        per["symmetric"] = (
            _pair_rate(w[a], w[b], freqs.omega_sym_offset, eps_mhz, params.kappa)
            if include_symmetric else (0.0, 0.0)
        )
        if per["zeno"] is None or per["symmetric"] is None:
            per["total"] = None
        else:
            per["total"] = (per["zeno"][0] + per["symmetric"][0],
                            per["zeno"][1] + per["symmetric"][1])
        entries[(a, b)] = per
    return CrossRates(eps_mhz=eps_mhz, entries=entries)


# ---------------------------------------------------------------------------
# simulated Ramsey calibration


@dataclass(frozen=True)
class RamseyResult:
    pair: tuple[str, str]
    eps_mhz: float
    shift_mhz: float
    slope_rad_per_us: float
    fit_residual_rad: float
    artificial_detuning_mhz: float


def _pair_levels(label: str) -> tuple[str, str]:
    return label[0], label[1]


def simulated_ramsey(params: DeviceParams, drives: DriveConfig, pair: tuple[str, str],
                     artificial_detuning_mhz: float = 5.0, duration_us: float = 1.0,
                     n_fock: int = 10, n_samples: int = 81, fit_window: float = 1.0,
                     residual_threshold_rad: float = 1.0, settle: bool = True) -> RamseyResult:
    """Drive-induced shift of the transition between a pair of qutrit-qubit
    states, from the phase slope of the pair coherence under the full-cavity
    model (no Rabi tone).

    Mirrors the gate's pulse order: the cavity first settles against |gg⟩
    with the drives on, then the superposition is prepared instantaneously
    and the phase is tracked for duration_us (so a window equal to the gate
    time calibrates exactly the phase the gate accumulates). The artificial
    detuning is added to the accumulated phase and removed after the linear
    fit, mirroring the measurement procedure; small oscillations around the
    line are reported as the fit residual. Shifts are relative to the pair's
    undriven frame frequency (for e↔f pairs that subtracts the anharmonicity).
    """
    a, b = pair
    needs_f = "f" in (a[0], b[0])
    qutrit_dim = 3 if needs_f else 2
    layout = full_layout(n_fock, qutrit_dim=qutrit_dim)
    drives = replace(drives, rabi_freq=0.0,
                     stark_shifts=drives.stark_shifts or zero_stark_shifts())

    lev_a, lev_b = _pair_levels(a), _pair_levels(b)
    if not settle:
        init = superposition_state(
            layout, {(lev_a[0], lev_a[1], 0): 1.0, (lev_b[0], lev_b[1], 0): 1.0}
        )
        t_settle = 0.0
    else:
        cav, t_settle = settled_cavity_state(params, drives, n_fock)
        qq_lay = SpaceLayout(layout.factor_dims[:2], layout.labels[:2])
        comp = superposition_state(qq_lay, {lev_a: 1.0, lev_b: 1.0})
        embedded = tensor_product(comp, cav)
        init = QuantumState(layout, "mixed", embedded.data, validate_on_init=False)
    ham = sim_generator(params, drives, layout).shifted(t_settle)
    chans = collapse_channels(params, layout)
    times = tuple(np.linspace(0.0, duration_us, n_samples)[1:])
    problem = EvolutionProblem(ham, chans, init, (0.0, duration_us), sample_times=times)
    states = evolve_master(problem)

    ia = layout.index_of((lev_a[0], lev_a[1], 0)) // n_fock
    ib = layout.index_of((lev_b[0], lev_b[1], 0)) // n_fock
    coh = np.array([partial_trace(s, (0, 1)).data[ia, ib] for s in states])
    t = np.array(times)
    # demodulate the undriven frame rotation (arg ρ_ab rotates at D_b − D_a;
    # e↔f pairs spin at the anharmonicity, far beyond the sampling rate)
    d0 = np.real(np.diag(build_dispersive_h(params, layout).matrix))
    static = d0[layout.index_of((lev_b[0], lev_b[1], 0))] - d0[layout.index_of((lev_a[0], lev_a[1], 0))]
    phase = np.unwrap(np.angle(coh * np.exp(-1j * static * t)))
    phase_fit = phase + TWO_PI * artificial_detuning_mhz * t

    n_fit = max(2, int(round(fit_window * len(t))))
    tf, pf = t[-n_fit:], phase_fit[-n_fit:]
    slope, intercept = np.polyfit(tf, pf, 1)
    residual = float(np.sqrt(np.mean((pf - (slope * tf + intercept)) ** 2)))
    slope -= TWO_PI * artificial_detuning_mhz

    shift = slope / TWO_PI
    if residual > residual_threshold_rad:
        raise RuntimeError(
            f"Ramsey fit residual {residual:.3f} rad above threshold for pair {pair}; "
            "oscillatory transients dominate the window"
        )
    return RamseyResult(pair, drives.zeno_amp, float(shift), float(slope), residual,
                        artificial_detuning_mhz)


@dataclass(frozen=True)
class StarkTable:
    """Calibrated δ_ij(ε) per transition over an ε grid (MHz)."""

    eps_grid: tuple[float, ...]
    shifts: dict = field(default_factory=dict)  # transition -> {eps: shift}

    def at(self, transition: str, eps: float) -> float:
        table = self.shifts[transition]
        if eps in table:
            return table[eps]
        # quadratic leading order: interpolate linearly in ε²
        xs = np.array(sorted(table))
        ys = np.array([table[x] for x in xs])
        return float(np.interp(eps**2, xs**2, ys))

    def drive_shifts(self, eps: float) -> dict:
        return {k: self.at(k, eps) for k in ("g1e1", "g2e2", "ef")}

    def to_json(self, path):
        payload = {
            "eps_grid": list(self.eps_grid),
            "shifts": {k: {str(e): v for e, v in tab.items()} for k, tab in self.shifts.items()},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, path) -> "StarkTable":
        with open(path) as fh:
            payload = json.load(fh)
        shifts = {k: {float(e): v for e, v in tab.items()} for k, tab in payload["shifts"].items()}
        return cls(tuple(payload["eps_grid"]), shifts)


DEFAULT_EPS_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def build_stark_table(params: DeviceParams, eps_grid=DEFAULT_EPS_GRID,
                      drives_template: DriveConfig | None = None,
                      n_fock: int = 10, duration_us: float = 3.0) -> StarkTable:
    """δ_ij(ε) for the transitions entering the gate Hamiltonian.

    Two passes per amplitude: the g↔e shifts are fitted against the bare
    frame, then the e↔f shift is fitted with those corrections applied, so
    the resulting table makes every driven transition exactly resonant in
    the corrected frame.
    """
    grid = tuple(sorted(set(float(e) for e in eps_grid) | {0.0}))
    template = drives_template or DriveConfig(stark_shifts=zero_stark_shifts())
    shifts = {k: {0.0: 0.0} for k in ("g1e1", "g2e2", "ef")}
    for eps in grid:
        if eps == 0.0:
            continue
        base = replace(template, zeno_amp=eps, rabi_freq=0.0, stark_shifts=zero_stark_shifts())
        d_g1e1 = simulated_ramsey(params, base, ("gg", "eg"), duration_us=duration_us,
                                  n_fock=n_fock).shift_mhz
        d_g2e2 = simulated_ramsey(params, base, ("gg", "ge"), duration_us=duration_us,
                                  n_fock=n_fock).shift_mhz
        pass2 = replace(base, stark_shifts={"g1e1": d_g1e1, "g2e2": d_g2e2, "ef": 0.0})
        d_ef = simulated_ramsey(params, pass2, ("eg", "fg"), duration_us=duration_us,
                                n_fock=n_fock).shift_mhz
        shifts["g1e1"][eps] = d_g1e1
        shifts["g2e2"][eps] = d_g2e2
        shifts["ef"][eps] = d_ef
    return StarkTable(grid, shifts)
