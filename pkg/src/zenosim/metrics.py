"""State metrics: fidelity, Wootters concurrence, populations, computational projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import QuantumState

__all__ = [
    "ComputationalState",
    "state_fidelity",
    "concurrence",
    "computational_projection",
    "populations",
    "purity",
    "trace_distance",
    "entangling_phase",
    "plus_plus_target",
    "COMP_LABELS",
]

# computational ordering over the qutrit-qubit space (qutrit first, row-major)
COMP_LABELS = ("gg", "ge", "eg", "ee")

_SY_SY = np.kron(
    np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])
)


@dataclass(frozen=True)
class ComputationalState:
    """4×4 density matrix over (gg, ge, eg, ee) plus the weight it captured."""

    matrix: np.ndarray
    subspace_weight: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("computational state must be 4×4")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if not 0.0 <= self.subspace_weight <= 1.0 + 1e-9:
            raise ValueError(f"subspace weight {self.subspace_weight} outside [0, 1]")


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, QuantumState):
        return state.density_matrix()
    if isinstance(state, ComputationalState):
        return state.matrix
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def state_fidelity(rho, target) -> float:
    """⟨target|ρ|target⟩ for a pure target (mixed targets are rejected)."""
    if isinstance(target, QuantumState):
        if target.kind != "pure":
            raise ValueError("mixed targets are not supported (Uhlmann fidelity out of scope)")
        vec = target.data
    else:
        vec = np.asarray(target, dtype=complex)
        if vec.ndim != 1:
            raise ValueError("mixed targets are not supported (Uhlmann fidelity out of scope)")
    m = _as_matrix(rho)
    if m.shape[0] != vec.shape[0]:
        raise ValueError("state and target dimensions differ")
    return float(np.real(vec.conj() @ m @ vec))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    # zero the numerical-noise eigenvalues: sqrt would amplify them to ~1e-8
    w[w < w.max(initial=0.0) * 1e-14] = 0.0
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(comp) -> float:
    """Wootters concurrence of a two-qubit density matrix:
    max(0, λ1−λ2−λ3−λ4), λ the decreasing square roots of the eigenvalues of
    ρ(σy⊗σy)ρ*(σy⊗σy), computed through the Hermitian √ρ ρ̃ √ρ form."""
    rho = _as_matrix(comp)
    if rho.shape != (4, 4):
        raise ValueError("concurrence is defined on 4×4 two-qubit states")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8 or np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-8:
        raise ValueError("invalid density matrix")
    rho_t = _SY_SY @ rho.conj() @ _SY_SY
    s = _psd_sqrt(rho)
    m = s @ rho_t @ s
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    # floor the matmul/eigensolver noise (~1e-18 on this O(1)-normed product)
    # before the square root amplifies it
    w[w < max(1e-18, w.max(initial=0.0) * 1e-15)] = 0.0
    lam = np.sort(np.sqrt(w))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def computational_projection(rho) -> ComputationalState:
    """Project a 6×6 qutrit-qubit state onto the (gg, ge, eg, ee) block,
    renormalize, and report the captured weight."""
    m = _as_matrix(rho)
    if m.shape != (6, 6):
        raise ValueError("expected a 6×6 qutrit-qubit density matrix")
    block = m[:4, :4]
    weight = float(np.trace(block).real)
    if weight <= 1e-12:
        raise ValueError("zero weight in the computational subspace")
    return ComputationalState(block / weight, min(weight, 1.0))


def populations(state) -> dict:
    """Diagonal populations in the labeled basis (sums to the trace)."""
    if isinstance(state, QuantumState):
        labels = state.layout.basis_labels()
        diag = np.real(np.diag(state.density_matrix()))
    else:
        m = _as_matrix(state)
        labels = [str(i) for i in range(m.shape[0])]
        diag = np.real(np.diag(m))
    return {lab: float(p) for lab, p in zip(labels, diag)}


def purity(state) -> float:
    m = _as_matrix(state)
    return float(np.real(np.trace(m @ m)))


def trace_distance(a, b) -> float:
    """½‖a − b‖₁ between density matrices."""
    diff = _as_matrix(a) - _as_matrix(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def entangling_phase(comp) -> float:
    """Conditional (entangling) phase arg(ρ_{gg,ge}) − arg(ρ_{eg,ee}) of a
    computational state: zero for purely local phase accumulation."""
    m = _as_matrix(comp)
    num = m[0, 1] * np.conj(m[2, 3])
    if abs(num) < 1e-15:
        return 0.0
    return float(np.angle(num))


def plus_plus_target(apply_gate: bool = True) -> np.ndarray:
    """|++⟩ on the computational subspace, optionally with 1−2|eg⟩⟨eg| applied
    (the gate's ideal output, the fidelity reference)."""
    v = 0.5 * np.ones(4, dtype=complex)
    if apply_gate:
        v[2] *= -1.0
    return v
