"""Quantum-jump (Monte Carlo wavefunction) unraveling of the master-equation problems.

Norm-threshold algorithm: the pure state evolves under the non-Hermitian
H_eff = H − (i/2)ΣL†L; a jump fires when the squared norm crosses a uniform
threshold, with the crossing time refined by log-linear interpolation and the
step re-integrated to the refined time. Channels are selected with
probability ∝ ⟨L†L⟩ and the state re-normalized.

Trajectories use the same diagonal interaction picture as the density-matrix
solver. Randomness comes from a counter-based generator (numpy Philox) keyed
by an explicit 64-bit seed recorded in the output; all draws are made before
the hot loop so records do not depend on the compilation path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lindblad import EvolutionProblem
from .qcore import QuantumState, SpaceLayout

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


__all__ = [
    "TrajectoryRecord",
    "EnsembleAverage",
    "run_trajectory",
    "ensemble_average",
    "escape_detector",
]

# Fixed per-run draw budget keeps stream consumption deterministic for
# chained protocols; hundreds of jumps per segment is far beyond anything
# physical in these problems.
_THRESHOLD_BUFFER = 512


@dataclass(frozen=True)
class TrajectoryRecord:
    """One stochastic unraveling run.

    escaped is set when the monitored-manifold population exceeded 0.5 at any
    integration step (the spec's leaked-population criterion; jumps that
    empty the manifold are caught by the pre-jump sample).
    """

    final_state: QuantumState
    jump_log: tuple[tuple[float, int], ...]
    escaped: bool
    seed: int
    max_flagged_population: float = 0.0

    def __post_init__(self):
        if self.final_state.kind != "pure":
            raise ValueError("trajectory states are pure")


@dataclass(frozen=True)
class EnsembleAverage:
    """Mean of |ψ⟩⟨ψ| over records with a per-entry standard error."""

    state: QuantumState
    stderr: np.ndarray
    n_records: int


def _pack(problem: EvolutionProblem):
    h = problem.hamiltonian
    d = h.dim
    diag = h.static_diag
    rows, cols, vals, ws = [], [], [], []
    for term in h.terms:
        rows.append(term.op.rows)
        cols.append(term.op.cols)
        vals.append(term.amp * term.op.vals)
        ws.append(term.freq + diag[term.op.rows] - diag[term.op.cols])
    t_rows = np.concatenate(rows) if rows else np.zeros(0, np.intp)
    t_cols = np.concatenate(cols) if cols else np.zeros(0, np.intp)
    t_vals = np.concatenate(vals) if vals else np.zeros(0, complex)
    t_w = np.concatenate(ws) if ws else np.zeros(0, float)

    n_ch = len(problem.collapse_ops)
    ptr = [0]
    c_rows, c_cols, c_vals, c_w = [], [], [], []
    q = np.zeros(d)
    for ch in problem.collapse_ops:
        if ch.op is None:
            raise ValueError("trajectory unraveling needs permutation-structured collapse operators")
        c_rows.append(ch.op.rows)
        c_cols.append(ch.op.cols)
        c_vals.append(ch.op.vals)
        c_w.append(diag[ch.op.rows] - diag[ch.op.cols])
        ptr.append(ptr[-1] + len(ch.op.rows))
        q += ch.ldagl_diag()
    pk = dict(
        dim=d,
        diag=np.asarray(diag, float),
        t_rows=t_rows.astype(np.int64),
        t_cols=t_cols.astype(np.int64),
        t_vals=t_vals.astype(np.complex128),
        t_w=t_w.astype(np.float64),
        ch_ptr=np.asarray(ptr, np.int64),
        ch_rows=(np.concatenate(c_rows) if n_ch else np.zeros(0)).astype(np.int64),
        ch_cols=(np.concatenate(c_cols) if n_ch else np.zeros(0)).astype(np.int64),
        ch_vals=(np.concatenate(c_vals) if n_ch else np.zeros(0)).astype(np.complex128),
        ch_w=(np.concatenate(c_w) if n_ch else np.zeros(0)).astype(np.float64),
        q=q,
    )
    return pk


@njit(cache=True)
def _heff_apply(psi, tau, t_rows, t_cols, t_vals, t_w, q, out):
    d = psi.shape[0]
    for i in range(d):
        out[i] = -0.5 * q[i] * psi[i]
    for k in range(t_rows.shape[0]):
        ph = t_vals[k] * np.exp(1j * (t_w[k] * tau))
        out[t_rows[k]] += -1j * ph * psi[t_cols[k]]
        out[t_cols[k]] += -1j * np.conj(ph) * psi[t_rows[k]]
    return out


@njit(cache=True)
def _rk4_step(psi, tau, h, t_rows, t_cols, t_vals, t_w, q):
    d = psi.shape[0]
    k1 = np.empty(d, np.complex128)
    k2 = np.empty(d, np.complex128)
    k3 = np.empty(d, np.complex128)
    k4 = np.empty(d, np.complex128)
    _heff_apply(psi, tau, t_rows, t_cols, t_vals, t_w, q, k1)
    _heff_apply(psi + (0.5 * h) * k1, tau + 0.5 * h, t_rows, t_cols, t_vals, t_w, q, k2)
    _heff_apply(psi + (0.5 * h) * k2, tau + 0.5 * h, t_rows, t_cols, t_vals, t_w, q, k3)
    _heff_apply(psi + h * k3, tau + h, t_rows, t_cols, t_vals, t_w, q, k4)
    return psi + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


@njit(cache=True)
def _traj_core(psi0, t_total, dt, t_rows, t_cols, t_vals, t_w, q,
               ch_ptr, ch_rows, ch_cols, ch_vals, ch_w,
               thresholds, channel_draws, flag_idx):
    d = psi0.shape[0]
    psi = psi0.copy()
    tau = 0.0
    n_ch = ch_ptr.shape[0] - 1
    jump_times = np.empty(thresholds.shape[0], np.float64)
    jump_channels = np.empty(thresholds.shape[0], np.int64)
    n_jumps = 0
    draw = 0
    threshold = thresholds[draw] if thresholds.shape[0] > 0 else -1.0
    max_flag = 0.0
    overflow = False

    n_steps = max(1, int(np.ceil(t_total / dt - 1e-9)))
    h_nom = t_total / n_steps
    step = 0
    while step < n_steps:
        h = min(h_nom, t_total - tau)
        if h <= 1e-15:
            break
        psi_pre = psi.copy()
        n_pre = np.real(np.vdot(psi, psi))
        psi_full = _rk4_step(psi, tau, h, t_rows, t_cols, t_vals, t_w, q)
        n_post = np.real(np.vdot(psi_full, psi_full))
        jumped = False
        if n_post < threshold and n_ch > 0:
            # refine jump time by log-linear interpolation, redo partial step
            if n_pre <= threshold:
                frac = 1e-9
            else:
                frac = (np.log(n_pre) - np.log(threshold)) / (np.log(n_pre) - np.log(n_post))
                if frac < 1e-9:
                    frac = 1e-9
                if frac > 1.0:
                    frac = 1.0
            h_star = frac * h
            psi_star = _rk4_step(psi_pre, tau, h_star, t_rows, t_cols, t_vals, t_w, q)
            tau_star = tau + h_star
            # channel weights at the pre-jump state
            weights = np.zeros(n_ch)
            total = 0.0
            for c in range(n_ch):
                acc = 0.0
                for k in range(ch_ptr[c], ch_ptr[c + 1]):
                    acc += (np.abs(ch_vals[k]) ** 2) * (np.abs(psi_star[ch_cols[k]]) ** 2)
                weights[c] = acc
                total += acc
            if total > 0.0:
                if draw + 1 >= thresholds.shape[0]:
                    overflow = True
                    break
                target = channel_draws[draw] * total
                chosen = n_ch - 1
                acc = 0.0
                for c in range(n_ch):
                    acc += weights[c]
                    if target <= acc:
                        chosen = c
                        break
                new_psi = np.zeros(d, np.complex128)
                for k in range(ch_ptr[chosen], ch_ptr[chosen + 1]):
                    ph = ch_vals[k] * np.exp(1j * (ch_w[k] * tau_star))
                    new_psi[ch_rows[k]] += ph * psi_star[ch_cols[k]]
                nrm = np.sqrt(np.real(np.vdot(new_psi, new_psi)))
                psi = new_psi / nrm
                jump_times[n_jumps] = tau_star
                jump_channels[n_jumps] = chosen
                n_jumps += 1
                draw += 1
                threshold = thresholds[draw]
                # finish the remainder of this step from the jump time
                rem = h - h_star
                if rem > 1e-15:
                    psi = _rk4_step(psi, tau_star, rem, t_rows, t_cols, t_vals, t_w, q)
                jumped = True
        if not jumped:
            psi = psi_full
        tau += h
        # monitored-manifold population (normalized)
        nn = np.real(np.vdot(psi, psi))
        if flag_idx.shape[0] > 0 and nn > 0.0:
            pf = 0.0
            for k in range(flag_idx.shape[0]):
                pf += np.abs(psi[flag_idx[k]]) ** 2
            pf /= nn
            if pf > max_flag:
                max_flag = pf
        step += 1
    nrm = np.sqrt(np.real(np.vdot(psi, psi)))
    psi = psi / nrm
    return psi, jump_times[:n_jumps], jump_channels[:n_jumps], max_flag, tau, overflow


def _flagged_indices(layout: SpaceLayout) -> np.ndarray:
    """Indices of the qutrit-f ⊗ qubit-e manifold, empty when f is absent."""
    if layout.n_factors < 2 or "f" not in layout.labels[0] or "e" not in layout.labels[1]:
        return np.zeros(0, np.int64)
    f = layout.labels[0].index("f")
    e = layout.labels[1].index("e")
    rest = int(np.prod(layout.factor_dims[2:], initial=1))
    base = (f * layout.factor_dims[1] + e) * rest
    return (base + np.arange(rest)).astype(np.int64)


def run_trajectory(problem: EvolutionProblem, seed: int,
                   rng: np.random.Generator | None = None,
                   flag_threshold: float = 0.5) -> TrajectoryRecord:
    """One quantum-jump unraveling of the problem from a pure initial state.

    The record is a pure function of (problem, seed); passing an rng instead
    continues an existing Philox stream (used by chained protocols).
    """
    if problem.initial.kind != "pure":
        raise ValueError("run_trajectory needs a pure initial state")
    pk = _pack(problem)
    own_rng = rng if rng is not None else np.random.Generator(np.random.Philox(key=np.uint64(seed)))

    t0, t1 = problem.t_span
    t_total = t1 - t0
    dt = problem.effective_dt()
    diag = pk["diag"]
    psi0 = problem.initial.data.astype(np.complex128)
    flag_idx = _flagged_indices(problem.initial.layout)

    n_buf = _THRESHOLD_BUFFER
    draws = own_rng.random(2 * n_buf)
    thresholds = draws[:n_buf].copy()
    channel_draws = draws[n_buf:].copy()
    psi, jt, jc, max_flag, tau, overflow = _traj_core(
        psi0, t_total, dt,
        pk["t_rows"], pk["t_cols"], pk["t_vals"], pk["t_w"], pk["q"],
        pk["ch_ptr"], pk["ch_rows"], pk["ch_cols"], pk["ch_vals"], pk["ch_w"],
        thresholds, channel_draws, flag_idx,
    )
    if overflow:
        raise RuntimeError(f"trajectory exceeded {n_buf} jumps; problem is pathological")

    psi_out = np.exp(-1j * diag * tau) * psi  # back to the builder frame
    final = QuantumState(problem.initial.layout, "pure", psi_out, validate_on_init=False)
    jumps = tuple((float(t0 + t), int(c)) for t, c in zip(jt, jc))
    return TrajectoryRecord(
        final_state=final,
        jump_log=jumps,
        escaped=bool(max_flag > flag_threshold),
        seed=int(seed),
        max_flagged_population=float(max_flag),
    )


def ensemble_average(records: list[TrajectoryRecord], layout: SpaceLayout) -> EnsembleAverage:
    """Mixed state 1/M Σ |ψ⟩⟨ψ| with the per-entry standard error.

    Summation runs in the given record order so a fixed seed set reproduces
    bit-exactly regardless of how the records were produced.
    """
    if not records:
        raise ValueError("at least one record required")
    d = layout.dim
    mean = np.zeros((d, d), complex)
    sq = np.zeros((d, d))
    for rec in records:
        if rec.final_state.layout.factor_dims != layout.factor_dims:
            raise ValueError("record layout mismatch")
        p = np.outer(rec.final_state.data, rec.final_state.data.conj())
        mean += p
        sq += np.abs(p) ** 2
    m = len(records)
    mean /= m
    var = np.maximum(sq / m - np.abs(mean) ** 2, 0.0)
    stderr = np.sqrt(var / m)
    return EnsembleAverage(
        state=QuantumState(layout, "mixed", mean, validate_on_init=False),
        stderr=stderr,
        n_records=m,
    )


def escape_detector(record: TrajectoryRecord, detection_fidelity: float,
                    seed: int = 0) -> bool:
    """Detector flag for one record: the true escape flag passed through a
    symmetric binary channel that flips with probability 1 − detection_fidelity."""
    if not 0.5 < detection_fidelity <= 1.0:
        raise ValueError("detection_fidelity must lie in (0.5, 1]")
    if detection_fidelity == 1.0:
        return record.escaped
    key = (np.uint64(seed) << np.uint64(1)) ^ np.uint64(record.seed * 2654435761 % (2**63))
    r = np.random.Generator(np.random.Philox(key=key)).random()
    if r < 1.0 - detection_fidelity:
        return not record.escaped
    return record.escaped
