"""Dense complex linear algebra on composite Hilbert spaces.

States and operators carry a :class:`SpaceLayout` describing the tensor
factorization (e.g. qutrit ⊗ qubit ⊗ cavity). Indexing is row-major /
big-endian: the first factor is the most significant, so in a (3, 2) layout
the basis state ("e", "g") sits at index 1*2 + 0 = 2.

Everything here is immutable after construction and safe to share across
worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpaceLayout",
    "Operator",
    "QuantumState",
    "StateDiagnostics",
    "qutrit_qubit_layout",
    "full_layout",
    "tensor_product",
    "partial_trace",
    "basis_state",
    "superposition_state",
    "validate",
    "MAX_TOTAL_DIM",
    "HERM_TOL",
    "TRACE_TOL",
    "EIG_TOL",
]

# Default validity tolerances; overridable per call.
HERM_TOL = 1e-12
TRACE_TOL = 1e-10
EIG_TOL = 1e-10

# Composite dimensions stay small (3*2*N_fock <= ~180); the cap guards
# against runaway tensor products, not memory.
MAX_TOTAL_DIM = 4096

QUTRIT_LEVELS = ("g", "e", "f")
QUBIT_LEVELS = ("g", "e")


@dataclass(frozen=True)
class SpaceLayout:
    """Dimensions and level labels of an ordered tensor factorization."""

    factor_dims: tuple[int, ...]
    labels: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.factor_dims) != len(self.labels):
            raise ValueError("one label tuple per factor required")
        for d, names in zip(self.factor_dims, self.labels):
            if d <= 0:
                raise ValueError(f"factor dimension must be positive, got {d}")
            if len(names) != d:
                raise ValueError(f"{len(names)} labels for dimension-{d} factor")

    @property
    def dim(self) -> int:
        return int(np.prod(self.factor_dims))

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def index_of(self, levels: tuple) -> int:
        """Flat index of a per-factor level tuple (row-major)."""
        if len(levels) != self.n_factors:
            raise ValueError(f"expected {self.n_factors} levels, got {len(levels)}")
        idx = 0
        for d, names, lev in zip(self.factor_dims, self.labels, levels):
            if isinstance(lev, (int, np.integer)):
                k = int(lev)
                if not 0 <= k < d:
                    raise KeyError(f"level index {k} out of range for dim {d}")
            else:
                try:
                    k = names.index(lev)
                except ValueError:
                    raise KeyError(f"unknown level {lev!r}; valid: {names}") from None
            idx = idx * d + k
        return idx

    def basis_labels(self) -> list[str]:
        """Flat basis labels, e.g. 'ge2' for qutrit g, qubit e, n=2."""
        out = [""]
        for names in self.labels:
            out = [s + str(n) for s in out for n in names]
        return out

    def concat(self, other: "SpaceLayout") -> "SpaceLayout":
        return SpaceLayout(self.factor_dims + other.factor_dims, self.labels + other.labels)


def qutrit_qubit_layout() -> SpaceLayout:
    """The gate's 6-dimensional qutrit ⊗ qubit space."""
    return SpaceLayout((3, 2), (QUTRIT_LEVELS, QUBIT_LEVELS))


def full_layout(n_fock: int, qutrit_dim: int = 3, qubit_dim: int = 2) -> SpaceLayout:
    """qutrit ⊗ qubit ⊗ cavity layout with the given Fock truncation.

    qutrit_dim=2 drops the f level, qubit_dim=1 drops the spectator qubit,
    for protocols where those factors provably stay inert (the blocking
    experiment drives only the qutrit g↔e line with the qubit in g).
    """
    if qutrit_dim not in (2, 3):
        raise ValueError("qutrit factor must have 2 or 3 levels")
    if qubit_dim not in (1, 2):
        raise ValueError("qubit factor must have 1 or 2 levels")
    cavity = tuple(str(n) for n in range(n_fock))
    return SpaceLayout(
        (qutrit_dim, qubit_dim, n_fock),
        (QUTRIT_LEVELS[:qutrit_dim], QUBIT_LEVELS[:qubit_dim], cavity),
    )


@dataclass(frozen=True)
class Operator:
    """Dense square operator tied to a layout.

    Hamiltonians are in angular units (rad/µs); hermitian=True asserts
    Hermiticity to within HERM_TOL relative Frobenius norm.
    """

    layout: SpaceLayout
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        d = self.layout.dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match layout dim {d}")
        m.setflags(write=False)
        if self.hermitian:
            defect = np.linalg.norm(m - m.conj().T)
            scale = max(np.linalg.norm(m), 1.0)
            if defect > HERM_TOL * scale:
                raise ValueError(f"operator flagged Hermitian has relative defect {defect / scale:.3e}")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T, self.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.layout != self.layout:
            raise ValueError("layout mismatch")
        return Operator(self.layout, self.matrix @ other.matrix)


@dataclass(frozen=True)
class QuantumState:
    """Pure (vector) or mixed (density matrix) state on a layout."""

    layout: SpaceLayout
    kind: str
    data: np.ndarray
    validate_on_init: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.kind not in ("pure", "mixed"):
            raise ValueError(f"kind must be 'pure' or 'mixed', got {self.kind!r}")
        arr = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", arr)
        d = self.layout.dim
        expected = (d,) if self.kind == "pure" else (d, d)
        if arr.shape != expected:
            raise ValueError(f"data shape {arr.shape}, expected {expected}")
        arr.setflags(write=False)
        if self.validate_on_init:
            diag = validate(self)
            if not diag.ok:
                raise ValueError(f"invalid state: {diag}")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def density_matrix(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_mixed(self) -> "QuantumState":
        if self.kind == "mixed":
            return self
        return QuantumState(self.layout, "mixed", self.density_matrix(), validate_on_init=False)


@dataclass(frozen=True)
class StateDiagnostics:
    """Validity defects of a state; diagnostics only, never raises."""

    norm_defect: float
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    ok: bool

    def __str__(self):
        return (
            f"norm defect {self.norm_defect:.2e}, hermiticity {self.hermiticity_defect:.2e}, "
            f"trace {self.trace_defect:.2e}, min eig {self.min_eigenvalue:.2e}, ok={self.ok}"
        )


def validate(state: QuantumState, herm_tol: float = HERM_TOL, trace_tol: float = TRACE_TOL,
             eig_tol: float = EIG_TOL) -> StateDiagnostics:
    """Hermiticity / trace / positivity defects against the invariant tolerances."""
    if state.kind == "pure":
        nd = abs(np.linalg.norm(state.data) - 1.0)
        return StateDiagnostics(nd, 0.0, 0.0, 0.0, ok=nd <= trace_tol)
    rho = state.data
    hd = float(np.linalg.norm(rho - rho.conj().T))
    td = abs(float(np.trace(rho).real) - 1.0) + abs(float(np.trace(rho).imag))
    me = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    ok = hd <= herm_tol * max(np.linalg.norm(rho), 1.0) and td <= trace_tol and me >= -eig_tol
    return StateDiagnostics(0.0, hd, td, me, ok=ok)


def tensor_product(a, b):
    """Kronecker product of two operators or two states, factor order a-then-b."""
    if isinstance(a, Operator) and isinstance(b, Operator):
        layout = a.layout.concat(b.layout)
        if layout.dim > MAX_TOTAL_DIM:
            raise ValueError(f"total dimension {layout.dim} exceeds cap {MAX_TOTAL_DIM}")
        return Operator(layout, np.kron(a.matrix, b.matrix), a.hermitian and b.hermitian)
    if isinstance(a, QuantumState) and isinstance(b, QuantumState):
        layout = a.layout.concat(b.layout)
        if layout.dim > MAX_TOTAL_DIM:
            raise ValueError(f"total dimension {layout.dim} exceeds cap {MAX_TOTAL_DIM}")
        if a.kind == "pure" and b.kind == "pure":
            return QuantumState(layout, "pure", np.kron(a.data, b.data), validate_on_init=False)
        return QuantumState(
            layout, "mixed", np.kron(a.to_mixed().data, b.to_mixed().data), validate_on_init=False
        )
    raise TypeError("tensor_product needs two Operators or two QuantumStates")


def partial_trace(state: QuantumState, keep) -> QuantumState:
    """Reduced density matrix over the kept factors (pure inputs are promoted)."""
    keep = sorted(set(int(k) for k in keep))
    nf = state.layout.n_factors
    if not keep:
        raise ValueError("keep must be non-empty")
    for k in keep:
        if not 0 <= k < nf:
            raise ValueError(f"invalid factor index {k} for {nf} factors")
    dims = state.layout.factor_dims
    rho = state.density_matrix().reshape(dims + dims)
    traced = [i for i in range(nf) if i not in keep]
    # contract each traced factor's row index with its column index
    for count, i in enumerate(sorted(traced)):
        ax = i - count  # axes shift as we trace
        n_remaining = rho.ndim // 2
        rho = np.trace(rho, axis1=ax, axis2=ax + n_remaining)
    d_keep = int(np.prod([dims[k] for k in keep]))
    rho = rho.reshape(d_keep, d_keep)
    layout = SpaceLayout(
        tuple(dims[k] for k in keep), tuple(state.layout.labels[k] for k in keep)
    )
    return QuantumState(layout, "mixed", rho, validate_on_init=False)


def basis_state(layout: SpaceLayout, levels) -> QuantumState:
    """Unit computational basis vector for the given per-factor levels."""
    vec = np.zeros(layout.dim, dtype=complex)
    vec[layout.index_of(tuple(levels))] = 1.0
    return QuantumState(layout, "pure", vec, validate_on_init=False)


def superposition_state(layout: SpaceLayout, amplitudes: dict) -> QuantumState:
    """Normalized superposition from a {level tuple: amplitude} mapping."""
    vec = np.zeros(layout.dim, dtype=complex)
    for levels, amp in amplitudes.items():
        vec[layout.index_of(tuple(levels))] += amp
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise ValueError("zero amplitude vector")
    return QuantumState(layout, "pure", vec / nrm, validate_on_init=False)
