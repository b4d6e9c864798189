"""Physical model builders: device parameters, driven Hamiltonians, collapse operators.

Unit convention: configuration values are cyclic frequencies in MHz (ν = ω/2π)
and times in µs; every matrix built here is in angular units (rad/µs). The
rotating frame is the interaction picture of the driven-system Hamiltonian:
cavity frame at the |gg⟩ cavity resonance, qutrit/qubit frames at their bare
transition frequencies, drive phases explicit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .lindblad import CollapseChannel, HTerm, SparseOp, StructuredHamiltonian
from .qcore import Operator, SpaceLayout, full_layout

__all__ = [
    "DeviceParams",
    "DriveConfig",
    "DriveFrequencies",
    "TWO_PI",
    "zero_stark_shifts",
    "build_dispersive_h",
    "drive_frequencies",
    "build_drive_terms",
    "build_full_sim_h",
    "build_collapse_ops",
    "collapse_rates",
    "sim_generator",
    "collapse_channels",
    "PAPER_DEVICE",
]

TWO_PI = 2.0 * math.pi

STARK_KEYS = ("g1e1", "g2e2", "ef")


@dataclass(frozen=True)
class DeviceParams:
    """Device constants in MHz / µs (paper defaults).

    chi1/chi2: dispersive shift of the cavity for qutrit e / qubit e;
    chif: shift for the qutrit f level; kappa: cavity linewidth;
    alpha1/alpha2: transmon anharmonicities; self_kerr: cavity self-Kerr;
    coherence times per transition in µs (math.inf allowed);
    residual_zz: direct qubit-qutrit coupling in kHz, off unless enabled.
    """

    chi1: float = -4.25
    chi2: float = -4.35
    chif: float = -10.0
    kappa: float = 0.15
    alpha1: float = -175.0
    alpha2: float = -225.0
    self_kerr: float = 0.04
    t1_eg: float = 52.0
    t1_fe: float = 12.9
    t2s_eg: float = 22.2
    t2s_fe: float = 5.8
    t1_q2: float = 18.9
    t2s_q2: float = 15.7
    residual_zz: float = 30.0
    residual_zz_on: bool = False

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        for name in ("t1_eg", "t1_fe", "t2s_eg", "t2s_fe", "t1_q2", "t2s_q2"):
            v = getattr(self, name)
            if not (v > 0):  # inf passes
                raise ValueError(f"{name} must be positive or infinite, got {v}")
        chis = (abs(self.chi1), abs(self.chi2), abs(self.chif))
        if min(chis) < 10.0 * self.kappa:
            warnings.warn(
                f"dispersive shifts {chis} are not large against kappa={self.kappa}; "
                "the strong-dispersive assumptions degrade",
                stacklevel=2,
            )

    def without_decoherence(self) -> "DeviceParams":
        """Copy with infinite coherence times (cavity linewidth retained)."""
        inf = math.inf
        return replace(self, t1_eg=inf, t1_fe=inf, t2s_eg=inf, t2s_fe=inf,
                       t1_q2=inf, t2s_q2=inf)


PAPER_DEVICE = DeviceParams()


def zero_stark_shifts() -> dict:
    return {k: 0.0 for k in STARK_KEYS}


@dataclass(frozen=True)
class DriveConfig:
    """Rabi / Zeno / symmetric drive settings (MHz, µs).

    gate_time defaults to one full Rabi oscillation, 1/rabi_freq in cyclic
    units (the angular 2π/Ω_R). stark_shifts maps transition labels
    ("g1e1", "g2e2", "ef") to calibrated shifts in MHz; it must be populated
    (zeros are fine) whenever any drive is on. zeno_offset_mhz overrides the
    Zeno drive detuning from the |gg⟩ cavity line (default: the |fe⟩
    resonance, chif + chi2); the blocking protocol retargets it to chi1.
    rabi_transition selects which qutrit transition the Rabi tone drives.
    """

    rabi_freq: float = 1.0
    zeno_amp: float = 2.0
    symmetric_on: bool = True
    stark_shifts: dict | None = None
    gate_time: float | None = None
    zeno_offset_mhz: float | None = None
    rabi_transition: str = "ef"

    def __post_init__(self):
        if self.zeno_amp < 0:
            raise ValueError("zeno_amp must be >= 0")
        if self.rabi_transition not in ("ef", "ge"):
            raise ValueError("rabi_transition must be 'ef' or 'ge'")

    def resolved_gate_time(self) -> float:
        if self.gate_time is not None:
            return self.gate_time
        if self.rabi_freq <= 0:
            raise ValueError("gate_time required when rabi_freq is 0")
        return 1.0 / self.rabi_freq

    def require_stark(self) -> dict:
        if self.zeno_amp > 0 or self.rabi_freq > 0:
            if self.stark_shifts is None:
                raise ValueError("stark_shifts must be populated (zeros allowed) when drives are on")
            missing = [k for k in STARK_KEYS if k not in self.stark_shifts]
            if missing:
                raise ValueError(f"stark_shifts missing entries: {missing}")
        return self.stark_shifts or zero_stark_shifts()


@dataclass(frozen=True)
class DriveFrequencies:
    """Drive detunings from the |gg⟩ cavity resonance, MHz."""

    omega_fe_offset: float
    omega_sym_offset: float


def drive_frequencies(params: DeviceParams) -> DriveFrequencies:
    """Zeno drive sits on the |fe⟩ cavity line (chif + chi2 from ω_gg); the
    symmetric drive mirrors it through the single-excitation lines so the
    drive-term phase factors are e^{∓i(chif+chi2)t} and e^{∓i(chi2−chif)t}."""
    return DriveFrequencies(
        omega_fe_offset=params.chif + params.chi2,
        omega_sym_offset=params.chi2 - params.chif,
    )


# ---------------------------------------------------------------------------
# embedding helpers


def _check_layout(layout: SpaceLayout):
    if layout.n_factors != 3 or layout.factor_dims[1] not in (1, 2):
        raise ValueError("expected a qutrit ⊗ qubit ⊗ cavity layout")
    if layout.factor_dims[0] not in (2, 3):
        raise ValueError("qutrit factor must have 2 or 3 levels")


def _embed(layout: SpaceLayout, m1: np.ndarray | None, m2: np.ndarray | None,
           mc: np.ndarray | None) -> np.ndarray:
    d1, d2, dc = layout.factor_dims
    a = np.eye(d1) if m1 is None else m1
    b = np.eye(d2) if m2 is None else m2
    c = np.eye(dc) if mc is None else mc
    return np.kron(np.kron(a, b), c).astype(complex)


def _lower(dim: int, lo: int, hi: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[lo, hi] = 1.0
    return m


def _proj(dim: int, k: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[k, k] = 1.0
    return m


def annihilator(n_fock: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_fock)), 1).astype(complex)


# ---------------------------------------------------------------------------
# Hamiltonian builders


def build_dispersive_h(params: DeviceParams, layout: SpaceLayout) -> Operator:
    """Dispersive Hamiltonian (rad/µs):
    (χ1|e1⟩⟨e1| + χ2|e2⟩⟨e2| + χf|f⟩⟨f|) a†a + (α_c/2)(a†a)² + α1|f⟩⟨f|.

    On a 2-level qutrit factor the f terms vanish identically.
    """
    _check_layout(layout)
    d1, d2, nc = layout.factor_dims
    num = np.diag(np.arange(nc)).astype(complex)
    h = TWO_PI * params.chi1 * _embed(layout, _proj(d1, 1), None, num)
    if d2 == 2:
        h += TWO_PI * params.chi2 * _embed(layout, None, _proj(2, 1), num)
    h += TWO_PI * 0.5 * params.self_kerr * _embed(layout, None, None, num @ num)
    if d1 == 3:
        h += TWO_PI * params.chif * _embed(layout, _proj(3, 2), None, num)
        h += TWO_PI * params.alpha1 * _embed(layout, _proj(3, 2), None, None)
    if params.residual_zz_on and d2 == 2:
        # residual ZZ is quoted in kHz; diagonal on |ee⟩-type states
        zz = TWO_PI * params.residual_zz * 1e-3
        h += zz * _embed(layout, _proj(d1, 1), _proj(2, 1), None)
    return Operator(layout, h, hermitian=True)


def build_drive_terms(params: DeviceParams, drives: DriveConfig, t: float,
                      layout: SpaceLayout) -> Operator:
    """Cavity drive terms at time t (µs):
    iε(a e^{+iθ_z t} − a† e^{−iθ_z t}) [+ symmetric tone], always Hermitian,
    with θ_z = 2π·(drive offset from the |gg⟩ line).

    The phase sign is fixed by the resonance condition in this frame: a tone
    on the |fe⟩ line (offset χf + χ2 < 0) must be static in the
    fe-conditioned cavity frame. The published form carries the conjugate
    phases (opposite interaction-picture convention); at t = 0 both agree.
    """
    _check_layout(layout)
    nc = layout.factor_dims[2]
    a = _embed(layout, None, None, annihilator(nc))
    eps = TWO_PI * drives.zeno_amp
    freqs = drive_frequencies(params)
    zeno_off = drives.zeno_offset_mhz if drives.zeno_offset_mhz is not None else freqs.omega_fe_offset
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    if eps > 0:
        th = TWO_PI * zeno_off * t
        h += 1j * eps * (a * np.exp(1j * th) - a.conj().T * np.exp(-1j * th))
        if drives.symmetric_on:
            th_s = TWO_PI * freqs.omega_sym_offset * t
            h += 1j * eps * (a * np.exp(1j * th_s) - a.conj().T * np.exp(-1j * th_s))
    return Operator(layout, h, hermitian=True)


def build_full_sim_h(params: DeviceParams, drives: DriveConfig, t: float,
                     layout: SpaceLayout | None = None) -> Operator:
    """Complete time-dependent Hamiltonian of the driven simulation:
    dispersive + cavity drives + Rabi tone + Stark-shift corrections.

    The Rabi tone on e↔f carries the frame phase e^{−i(α1+δ_ef)t}; on g↔e it
    is phase-free (that transition is the frame reference). The δ_g1e1 and
    δ_g2e2 corrections emulate driving every transition at its calibrated
    Stark-shifted frequency.
    """
    if layout is None:
        layout = full_layout(20)
    _check_layout(layout)
    d1 = layout.factor_dims[0]
    stark = drives.require_stark()
    h = build_dispersive_h(params, layout).matrix.copy()
    h += build_drive_terms(params, drives, t, layout).matrix
    omega = TWO_PI * drives.rabi_freq
    if drives.rabi_freq > 0:
        if drives.rabi_transition == "ef":
            if d1 != 3:
                raise ValueError("e↔f Rabi tone needs the 3-level qutrit factor")
            # resonant when the coefficient co-rotates with the f level
            phase = TWO_PI * (params.alpha1 + stark["ef"]) * t
            ef = _embed(layout, _lower(3, 1, 2), None, None)  # |e⟩⟨f|
            h += 1j * 0.5 * omega * (ef * np.exp(1j * phase) - ef.conj().T * np.exp(-1j * phase))
        else:
            ge = _embed(layout, _lower(d1, 0, 1), None, None)  # |g⟩⟨e|
            h += 1j * 0.5 * omega * (ge - ge.conj().T)
    # detuning corrections: +δ/2 (|g⟩⟨g| − |e⟩⟨e|) per Eq.-style bookkeeping
    sz1 = _proj(d1, 0) - _proj(d1, 1)
    h += TWO_PI * 0.5 * stark["g1e1"] * _embed(layout, sz1, None, None)
    if layout.factor_dims[1] == 2:
        sz2 = _proj(2, 0) - _proj(2, 1)
        h += TWO_PI * 0.5 * stark["g2e2"] * _embed(layout, None, sz2, None)
    return Operator(layout, h, hermitian=True)


# ---------------------------------------------------------------------------
# collapse operators


def _pure_dephasing_rate(t2s: float, t1: float, label: str) -> float:
    if math.isinf(t2s):
        return 0.0
    g = 1.0 / t2s - 1.0 / (2.0 * t1)
    if g < 0:
        raise ValueError(f"inconsistent coherence times for {label}: "
                         f"T2*={t2s} implies negative pure dephasing against T1={t1}")
    return g


def collapse_rates(params: DeviceParams) -> dict:
    """Angular decay rates (1/µs) for every dissipation channel."""
    rates = {"cavity": TWO_PI * params.kappa}
    rates["relax_fe"] = 0.0 if math.isinf(params.t1_fe) else 1.0 / params.t1_fe
    rates["relax_eg"] = 0.0 if math.isinf(params.t1_eg) else 1.0 / params.t1_eg
    rates["relax_q2"] = 0.0 if math.isinf(params.t1_q2) else 1.0 / params.t1_q2
    rates["deph_fe"] = _pure_dephasing_rate(params.t2s_fe, params.t1_fe, "f↔e")
    rates["deph_eg"] = _pure_dephasing_rate(params.t2s_eg, params.t1_eg, "e↔g")
    rates["deph_q2"] = _pure_dephasing_rate(params.t2s_q2, params.t1_q2, "qubit")
    return rates


def build_collapse_ops(params: DeviceParams, layout: SpaceLayout) -> list[Operator]:
    """Collapse operators with rates folded in as prefactors:
    √κ a; √(1/T1) σ₋ per relaxation transition; √(γφ/2) σ_z per dephasing
    transition (γφ = 1/T2* − 1/(2T1)). Channels with zero rate are dropped.
    """
    _check_layout(layout)
    d1, d2, nc = layout.factor_dims
    rates = collapse_rates(params)
    out = []

    def add(name, rate, m1=None, m2=None, mc=None):
        if rate > 0:
            out.append(Operator(layout, math.sqrt(rate) * _embed(layout, m1, m2, mc)))

    add("cavity", rates["cavity"], mc=annihilator(nc))
    if d1 == 3:
        add("relax_fe", rates["relax_fe"], m1=_lower(3, 1, 2))
    add("relax_eg", rates["relax_eg"], m1=_lower(d1, 0, 1))
    if d2 == 2:
        add("relax_q2", rates["relax_q2"], m2=_lower(2, 0, 1))
    if d1 == 3:
        add("deph_fe", 0.5 * rates["deph_fe"], m1=_proj(3, 1) - _proj(3, 2))
    add("deph_eg", 0.5 * rates["deph_eg"], m1=_proj(d1, 0) - _proj(d1, 1))
    if d2 == 2:
        add("deph_q2", 0.5 * rates["deph_q2"], m2=_proj(2, 0) - _proj(2, 1))
    return out


# ---------------------------------------------------------------------------
# structured forms consumed by the solver


def _channel_order(params: DeviceParams, d1: int, d2: int = 2) -> list[str]:
    rates = collapse_rates(params)
    names = ["cavity"]
    if d1 == 3:
        names.append("relax_fe")
    names.append("relax_eg")
    if d2 == 2:
        names.append("relax_q2")
    if d1 == 3:
        names.append("deph_fe")
    names.append("deph_eg")
    if d2 == 2:
        names.append("deph_q2")
    keep = {"cavity": rates["cavity"], "relax_fe": rates["relax_fe"],
            "relax_eg": rates["relax_eg"], "relax_q2": rates["relax_q2"],
            "deph_fe": rates["deph_fe"], "deph_eg": rates["deph_eg"],
            "deph_q2": rates["deph_q2"]}
    return [n for n in names if keep[n] > 0]


def collapse_channels(params: DeviceParams, layout: SpaceLayout) -> tuple[CollapseChannel, ...]:
    """build_collapse_ops as solver channels (same operators, labeled)."""
    ops = build_collapse_ops(params, layout)
    labels = _channel_order(params, layout.factor_dims[0], layout.factor_dims[1])
    return tuple(CollapseChannel.from_operator(op, label)
                 for op, label in zip(ops, labels, strict=True))


def sim_generator(params: DeviceParams, drives: DriveConfig,
                  layout: SpaceLayout) -> StructuredHamiltonian:
    """The full driven Hamiltonian in the solver's structural form.

    matrix_at(t) of the result equals build_full_sim_h(params, drives, t)
    elementwise; the split into a static diagonal plus harmonic coupling
    terms is what lets the integrator factor the fast frame phases out.
    """
    _check_layout(layout)
    d1, _, nc = layout.factor_dims
    stark = drives.require_stark()

    diag = np.real(np.diag(build_dispersive_h(params, layout).matrix)).copy()
    sz1 = _proj(d1, 0) - _proj(d1, 1)
    diag += TWO_PI * 0.5 * stark["g1e1"] * np.real(np.diag(_embed(layout, sz1, None, None)))
    if layout.factor_dims[1] == 2:
        sz2 = _proj(2, 0) - _proj(2, 1)
        diag += TWO_PI * 0.5 * stark["g2e2"] * np.real(np.diag(_embed(layout, None, sz2, None)))

    terms = []
    eps = TWO_PI * drives.zeno_amp
    if eps > 0:
        a_op = SparseOp.from_dense(_embed(layout, None, None, annihilator(nc)))
        freqs = drive_frequencies(params)
        zeno_off = drives.zeno_offset_mhz if drives.zeno_offset_mhz is not None else freqs.omega_fe_offset
        terms.append(HTerm(a_op, amp=1j * eps, freq=TWO_PI * zeno_off))
        if drives.symmetric_on:
            terms.append(HTerm(a_op, amp=1j * eps, freq=TWO_PI * freqs.omega_sym_offset))
    omega = TWO_PI * drives.rabi_freq
    if omega > 0:
        if drives.rabi_transition == "ef":
            if d1 != 3:
                raise ValueError("e↔f Rabi tone needs the 3-level qutrit factor")
            ef = SparseOp.from_dense(_embed(layout, _lower(3, 1, 2), None, None))
            terms.append(HTerm(ef, amp=1j * 0.5 * omega,
                               freq=TWO_PI * (params.alpha1 + stark["ef"])))
        else:
            ge = SparseOp.from_dense(_embed(layout, _lower(d1, 0, 1), None, None))
            terms.append(HTerm(ge, amp=1j * 0.5 * omega, freq=0.0))
    return StructuredHamiltonian(layout, diag, tuple(terms))


def settle_problem(params: DeviceParams, drives: DriveConfig, n_fock: int,
                   conditioned: str = "gg", duration_us: float | None = None):
    """Cavity-only relaxation toward the driven state: while the transmons
    sit in an eigenstate the cavity factorizes exactly, so the settle phase
    runs on the cavity alone (vacuum start, ~5/κ). Returns (problem, t_end);
    t_end is 0 when no drive is on."""
    from .lindblad import EvolutionProblem
    from .qcore import QuantumState, SpaceLayout

    lay = SpaceLayout((n_fock,), (tuple(str(n) for n in range(n_fock)),))
    n = np.arange(n_fock)
    chi = {"gg": 0.0, "ge": params.chi2, "eg": params.chi1, "ee": params.chi1 + params.chi2,
           "fg": params.chif, "fe": params.chif + params.chi2}[conditioned]
    diag = TWO_PI * (chi * n + 0.5 * params.self_kerr * n**2)
    terms = []
    eps = TWO_PI * drives.zeno_amp
    if eps > 0:
        a_op = SparseOp.from_dense(annihilator(n_fock))
        freqs = drive_frequencies(params)
        zeno_off = drives.zeno_offset_mhz if drives.zeno_offset_mhz is not None else freqs.omega_fe_offset
        terms.append(HTerm(a_op, amp=1j * eps, freq=TWO_PI * zeno_off))
        if drives.symmetric_on:
            terms.append(HTerm(a_op, amp=1j * eps, freq=TWO_PI * freqs.omega_sym_offset))
    ham = StructuredHamiltonian(lay, diag, tuple(terms))
    kappa = TWO_PI * params.kappa
    chan = CollapseChannel(SparseOp.from_dense(math.sqrt(kappa) * annihilator(n_fock)), "cavity")
    vac = np.zeros(n_fock, complex)
    vac[0] = 1.0
    init = QuantumState(lay, "pure", vac, validate_on_init=False)
    t_end = duration_us if duration_us is not None else 5.0 / kappa
    if eps == 0:
        t_end = 0.0
    problem = EvolutionProblem(ham, (chan,), init, (0.0, max(t_end, 1e-6)),
                               sample_times=(max(t_end, 1e-6),))
    return problem, t_end


def settled_cavity_state(params: DeviceParams, drives: DriveConfig, n_fock: int,
                         conditioned: str = "gg", duration_us: float | None = None):
    """Cavity density matrix after the settle phase, plus its duration."""
    from .lindblad import evolve_master

    problem, t_end = settle_problem(params, drives, n_fock, conditioned, duration_us)
    if t_end <= 0:
        return problem.initial.to_mixed(), 0.0
    return evolve_master(problem)[0], t_end
