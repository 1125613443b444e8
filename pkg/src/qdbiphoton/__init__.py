"""Quantum-dot biphoton interferometry: source model, simulation and fringe fitting."""

__version__ = "0.1.0"
