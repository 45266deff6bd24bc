"""Fidelity decay of a qubit lattice under time-fluctuating random imperfections."""

__version__ = "0.1.0"
