"""Simulated state tomography: 36-setting measurement scheme, iterative MLE
reconstruction, the Fock-truncation artifact model, and post-selection analysis.

Each setting pairs a Gell-Mann ⊗ Pauli observable with a deterministic
measurement state from its top eigenspace; a pre-rotation maps that state
onto |gg⟩ so every setting reduces to the one projector the readout provides.
The measured record is the projector expectation ⟨Π_k⟩ ∈ [0, 1] per setting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import computational_projection, concurrence, state_fidelity
from .qcore import QuantumState, partial_trace, qutrit_qubit_layout
from .traject import TrajectoryRecord, ensemble_average

__all__ = [
    "ObservableSet",
    "TomogramData",
    "build_observable_set",
    "simulate_tomography",
    "mle_reconstruct",
    "truncation_model",
    "postselect_analysis",
]

_SQ2 = 1.0 / math.sqrt(2.0)


def _gm_ops() -> list[tuple[str, np.ndarray]]:
    """Labeled generalized Gell-Mann basis of the qutrit (identity included)."""
    ops = []

    def pair(lo, hi, name):
        x = np.zeros((3, 3), complex)
        x[lo, hi] = x[hi, lo] = 1.0
        y = np.zeros((3, 3), complex)
        y[lo, hi] = -1j
        y[hi, lo] = 1j
        ops.append((f"x_{name}", x))
        ops.append((f"y_{name}", y))

    ops.append(("id3", np.eye(3, dtype=complex)))
    ops.append(("z_ge", np.diag([1.0, -1.0, 0.0]).astype(complex)))
    ops.append(("z_gef", (np.diag([1.0, 1.0, -2.0]) / math.sqrt(3.0)).astype(complex)))
    pair(0, 1, "ge")
    pair(1, 2, "ef")
    pair(0, 2, "gf")
    return ops


def _pauli_ops() -> list[tuple[str, np.ndarray]]:
    return [
        ("id2", np.eye(2, dtype=complex)),
        ("x", np.array([[0, 1], [1, 0]], complex)),
        ("y", np.array([[0, -1j], [1j, 0]], complex)),
        ("z", np.diag([1.0, -1.0]).astype(complex)),
    ]


def _sic_states() -> list[np.ndarray]:
    """36 symmetric product probe states: the qutrit Weyl-Heisenberg SIC orbit
    times the qubit tetrahedron.

    The tight-frame geometry matters: with it, the maximum-likelihood repair
    of trace-deficient data is exactly an admixed maximally mixed state.
    """
    w = np.exp(2j * np.pi / 3.0)
    shift = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], complex)
    clock = np.diag([1.0, w, w**2])
    fiducial = np.array([0.0, 1.0, -1.0], complex) / math.sqrt(2.0)
    sic3 = [np.linalg.matrix_power(shift, j) @ np.linalg.matrix_power(clock, k) @ fiducial
            for j in range(3) for k in range(3)]
    cb, sb = 1.0 / math.sqrt(3.0), math.sqrt(2.0 / 3.0)
    sic2 = [np.array([1.0, 0.0], complex)]
    sic2 += [np.array([cb, np.exp(2j * np.pi * k / 3.0) * sb], complex) for k in range(3)]
    return [np.kron(a, b) for a in sic3 for b in sic2]


def _completion_unitary(v: np.ndarray) -> np.ndarray:
    """Unitary mapping v to the first basis vector (deterministic Householder QR)."""
    d = len(v)
    m = np.concatenate([v[:, None], np.eye(d, dtype=complex)], axis=1)
    q, _ = np.linalg.qr(m)
    # QR may flip the first column's phase; align it with v
    phase = np.vdot(q[:, 0], v)
    q[:, 0] *= phase / abs(phase)
    return q.conj().T


@dataclass(frozen=True)
class ObservableSet:
    """The 36 tomography settings on the qutrit ⊗ qubit space."""

    labels: tuple[str, ...]
    operators: np.ndarray       # (36, 6, 6) Gell-Mann ⊗ Pauli products
    meas_states: np.ndarray     # (36, 6) top-eigenspace vectors
    pre_rotations: np.ndarray   # (36, 6, 6) unitaries mapping each state to |gg⟩
    gram_condition: float

    @property
    def projectors(self) -> np.ndarray:
        return np.einsum("ki,kj->kij", self.meas_states, self.meas_states.conj())

    def expectation_values(self, rho) -> np.ndarray:
        m = rho.density_matrix() if isinstance(rho, QuantumState) else np.asarray(rho)
        return np.real(np.einsum("kij,ji->k", self.operators, m))

    def probabilities(self, rho) -> np.ndarray:
        m = rho.density_matrix() if isinstance(rho, QuantumState) else np.asarray(rho)
        return np.real(np.einsum("ki,ij,kj->k", self.meas_states.conj(), m, self.meas_states))


def build_observable_set() -> ObservableSet:
    """The 36 tomography settings: Gell-Mann ⊗ Pauli observables paired with
    symmetric product probe states, each probe mapped onto |gg⟩ by its
    pre-rotation so the readout needs only the one projector it provides.

    The 36 rank-1 measurement projectors span the full 36-dimensional real
    space of 6×6 Hermitian operators (Gram nonsingularity asserted, condition
    number recorded); observable expectation values are linear in the
    reconstructed state and exposed through expectation_values().
    """
    labels = [f"{lab3}*{lab2}" for lab3, _ in _gm_ops() for lab2, _ in _pauli_ops()]
    ops = [np.kron(m3, m2) for _, m3 in _gm_ops() for _, m2 in _pauli_ops()]
    states = _sic_states()
    rots = [_completion_unitary(v) for v in states]
    states_arr = np.asarray(states)
    gram = np.abs(states_arr.conj() @ states_arr.T) ** 2
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or np.linalg.matrix_rank(gram) < 36:
        raise AssertionError("tomography projectors do not span the operator space")
    return ObservableSet(tuple(labels), np.asarray(ops), states_arr,
                         np.asarray(rots), cond)


@dataclass(frozen=True)
class TomogramData:
    """Measured projector expectations per setting (possibly shot-sampled)."""

    labels: tuple[str, ...]
    expectations: np.ndarray
    shots: int = 0
    postselect_fraction: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.expectations, dtype=float)
        if np.any(vals < -1e-9) or np.any(vals > 1 + 1e-9):
            raise ValueError("projector expectations must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "expectations", vals)


def simulate_tomography(rho, obs: ObservableSet | None = None, shots: int = 0,
                        seed: int = 0, postselect_fraction: float = 0.0) -> TomogramData:
    """Forward model: exact projector expectations, binomially sampled when
    shots > 0 (one binary |gg⟩-click measurement per setting)."""
    obs = obs or build_observable_set()
    p = np.clip(obs.probabilities(rho), 0.0, 1.0)
    if shots < 0:
        raise ValueError("shots must be >= 0")
    if shots > 0:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        p = rng.binomial(shots, p) / shots
    return TomogramData(obs.labels, p, shots, postselect_fraction)


def _herm_basis(d: int = 6) -> np.ndarray:
    """Orthonormal real basis of d×d Hermitian matrices, shape (d², d, d)."""
    out = []
    for i in range(d):
        m = np.zeros((d, d), complex)
        m[i, i] = 1.0
        out.append(m)
    s = 1.0 / math.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), complex)
            m[i, j] = m[j, i] = s
            out.append(m)
            m = np.zeros((d, d), complex)
            m[i, j] = -1j * s
            m[j, i] = 1j * s
            out.append(m)
    return np.asarray(out)


def _log_likelihood(f: np.ndarray, q: np.ndarray, w: float) -> float:
    # Gaussian measurement model on the setting expectations
    return float(-0.5 * w * np.sum((f - q) ** 2))


def mle_reconstruct(data: TomogramData, obs: ObservableSet | None = None,
                    max_iter: int = 10000, gain_tol: float = 1e-10,
                    step_tol: float = 1e-10, dilution: float = 0.1) -> QuantumState:
    """Most-likely physical density matrix for the measured setting
    expectations under a Gaussian measurement model.

    The unconstrained trace-one optimum is solved exactly (linear least
    squares over Hermitian matrices); when it is already positive it *is* the
    maximum-likelihood state. Otherwise a diluted iteration
    ρ ← N[(1 + λR̃)ρ(1 + λR̃)] ascends the likelihood (R̃ the trace-projected
    gradient, λ starting at the dilution with backtracking, so the likelihood
    is non-decreasing by construction) until the gain and step norm fall
    below tolerance or max_iter. Trace-deficient data (settings scaled by a
    lost-population factor) comes back as an admixed maximally mixed state.
    """
    obs = obs or build_observable_set()
    if len(data.expectations) != len(obs.labels):
        raise ValueError("data does not match the observable set")
    pis = obs.projectors
    f = np.asarray(data.expectations, dtype=float)
    w = float(data.shots) if data.shots > 0 else 1.0
    layout = qutrit_qubit_layout()

    # exact trace-constrained least squares in a Hermitian operator basis
    basis = _herm_basis(6)
    design = np.real(np.einsum("kij,bji->kb", pis, basis))
    if np.linalg.matrix_rank(design) < basis.shape[0]:
        raise ValueError("tomogram does not span the operator space")
    tr_vec = np.real(np.einsum("bii->b", basis))
    kkt = np.zeros((37, 37))
    kkt[:36, :36] = design.T @ design
    kkt[:36, 36] = tr_vec
    kkt[36, :36] = tr_vec
    rhs = np.concatenate([design.T @ f, [1.0]])
    sol = np.linalg.solve(kkt, rhs)
    x = np.einsum("b,bij->ij", sol[:36], basis)
    x = 0.5 * (x + x.conj().T)
    w_eig = np.linalg.eigvalsh(x)
    if w_eig.min() >= -1e-10:
        rho = x
    else:
        # positivity boundary active: diluted multiplicative ascent
        rho = np.eye(6, dtype=complex) / 6.0
        q = np.real(np.einsum("kij,ji->k", pis, rho))
        logl = _log_likelihood(f, q, w)
        lam = dilution
        noise_floor = 1e-13 * max(1.0, abs(logl))
        for _ in range(max_iter):
            r = np.einsum("k,kij->ij", w * (f - q), pis)
            r = 0.5 * (r + r.conj().T)
            r -= np.real(np.trace(r @ rho)) * np.eye(6)
            rnorm = np.linalg.norm(r)
            if rnorm < 1e-14:
                break
            step_dir = r / rnorm
            improved = False
            while lam > 1e-9:
                m = np.eye(6) + lam * step_dir
                cand = m @ rho @ m.conj().T
                cand /= np.real(np.trace(cand))
                qc = np.real(np.einsum("kij,ji->k", pis, cand))
                logl_c = _log_likelihood(f, qc, w)
                if logl_c >= logl - noise_floor:
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break  # ascent exhausted at float precision
            gain = logl_c - logl
            step = float(np.linalg.norm(cand - rho))
            rho, q, logl = cand, qc, logl_c
            lam = min(lam * 1.35, 50.0)
            if gain < gain_tol and step < step_tol:
                break
        if not np.isfinite(logl):
            raise RuntimeError("MLE iteration diverged")
    # output hygiene: clip roundoff negatives, renormalize
    wv, vv = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    wv = np.clip(wv, 0.0, None)
    rho = (vv * wv) @ vv.conj().T
    rho /= np.real(np.trace(rho))
    return QuantumState(layout, "mixed", rho, validate_on_init=False)


def truncation_model(rho_full: QuantumState, n_cut: int,
                     obs: ObservableSet | None = None) -> QuantumState:
    """Tomography-pulse bandwidth surrogate: zero every cavity component with
    n > n_cut, reduce to the qutrit-qubit space (now trace-deficient), and
    reconstruct through the MLE — the lost weight returns as a mixed admixture."""
    layout = rho_full.layout
    if layout.n_factors != 3:
        raise ValueError("truncation_model expects a qutrit ⊗ qubit ⊗ cavity state")
    n_fock = layout.factor_dims[2]
    obs = obs or build_observable_set()
    m = rho_full.to_mixed().data.copy()
    keep = np.tile(np.arange(n_fock) <= n_cut, layout.dim // n_fock)
    m[~keep, :] = 0.0
    m[:, ~keep] = 0.0
    reduced = partial_trace(
        QuantumState(layout, "mixed", m, validate_on_init=False), (0, 1)
    ).data
    probs = np.clip(np.real(np.einsum("ki,ij,kj->k", obs.meas_states.conj(), reduced,
                                      obs.meas_states)), 0.0, 1.0)
    return mle_reconstruct(TomogramData(obs.labels, probs))


def postselect_analysis(records: list[TrajectoryRecord], flags, target: np.ndarray,
                        fractions) -> list[dict]:
    """Fidelity/concurrence after discarding a fraction of the shots,
    detector-flagged records first (ties broken by seed order).

    Records are full-model trajectories; states are reduced to the
    qutrit-qubit space and projected to the computational subspace.
    """
    if len(records) != len(flags):
        raise ValueError("one flag per record required")
    order = sorted(range(len(records)), key=lambda i: (not flags[i], records[i].seed))
    layout = records[0].final_state.layout
    rows = []
    for frac in fractions:
        if not 0.0 <= frac < 1.0:
            raise ValueError("discard fractions must lie in [0, 1)")
        n_drop = int(round(frac * len(records)))
        kept = [records[i] for i in sorted(order[n_drop:])]
        if not kept:
            raise ValueError("all records discarded")
        avg = ensemble_average(kept, layout)
        reduced = partial_trace(avg.state, (0, 1))
        comp = computational_projection(reduced)
        rows.append({
            "fraction": float(frac),
            "n_kept": len(kept),
            "fidelity": comp.subspace_weight * state_fidelity(comp.matrix, target),
            "concurrence": concurrence(comp.matrix),
        })
    return rows
