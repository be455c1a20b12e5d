"""Parity-encoded quantum annealing with Rydberg-dressed atoms."""
__version__ = "0.1.0"
