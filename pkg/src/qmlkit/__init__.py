"""Quantum machine learning on a built-in statevector simulator."""

__version__ = "0.1.0"
