"""zenosim: simulation toolkit for a measurement-induced (Zeno) entangling gate
between non-interacting superconducting qubits."""

__version__ = "0.1.0"
