"""Statevector emulation of explicit advection steps embedded in Hamiltonian evolution."""

__version__ = "0.1.0"
