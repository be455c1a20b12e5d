"""Classical analysis of the single-plaquette constraint.

Corners are ordered cyclically, so edges are ``(0,1), (1,2), (2,3), (3,0)``
and diagonals ``(0,2), (1,3)``. Energies of the two-body form are in units
of ``gap/2``; the stabilizer form ``(sum + 2*tau)**2`` is dimensionless and
multiplies ``gap/4``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))
DIAGONALS = ((0, 2), (1, 3))

ODD_RIGHT = "odd-right"
ODD_WRONG = "odd-wrong"
POLARIZED = "polarized"
SPIN_ICE = "spin-ice"
LABELS = (ODD_RIGHT, ODD_WRONG, POLARIZED, SPIN_ICE)


@dataclass(frozen=True)
class PlaquetteParams:
    alpha: float
    beta: float
    gap: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite([self.alpha, self.beta, self.gap])):
            raise ValueError("plaquette parameters must be finite")
        if self.gap == 0:
            raise ValueError("gap must be non-zero")

    def to_physical(self, energy: float) -> float:
        """Convert an energy in units of gap/2 to the units of ``gap``."""
        return energy * self.gap / 2


@dataclass(frozen=True, order=True)
class PlaquetteConfig:
    corners: tuple[int, int, int, int]
    ancilla: int

    def __post_init__(self):
        if len(self.corners) != 4:
            raise ValueError("a plaquette has four corners")
        if any(abs(s) != 1 for s in (*self.corners, self.ancilla)):
            raise ValueError("spin values must be +1 or -1")

    @property
    def corner_sum(self) -> int:
        return sum(self.corners)

    @property
    def is_odd(self) -> bool:
        return abs(self.corner_sum) == 2

    def label(self) -> str:
        total = self.corner_sum
        if abs(total) == 2:
            return ODD_RIGHT if self.ancilla == -np.sign(total) else ODD_WRONG
        if abs(total) == 4:
            return POLARIZED
        return SPIN_ICE


def all_configs():
    for bits in itertools.product((1, -1), repeat=5):
        yield PlaquetteConfig(tuple(bits[:4]), bits[4])


def plaquette_energy(cfg: PlaquetteConfig, p: PlaquetteParams) -> float:
    s = cfg.corners
    edges = sum(s[i] * s[j] for i, j in EDGES)
    diag = sum(s[i] * s[j] for i, j in DIAGONALS)
    return edges + p.beta * diag + p.alpha * cfg.ancilla * sum(s)


def stabilizer_energy(cfg: PlaquetteConfig) -> float:
    return float((cfg.corner_sum + 2 * cfg.ancilla) ** 2)


def plaquette_spectrum(p: PlaquetteParams) -> list[tuple[PlaquetteConfig, str, float]]:
    """All 32 configurations with their parity label and energy."""
    return [(c, c.label(), plaquette_energy(c, p)) for c in all_configs()]


def ground_manifold(p: PlaquetteParams, atol: float = 1e-12) -> set[PlaquetteConfig]:
    spectrum = plaquette_spectrum(p)
    e_min = min(e for _, _, e in spectrum)
    return {c for c, _, e in spectrum if e <= e_min + atol}


def odd_ground_states() -> set[PlaquetteConfig]:
    """The eight odd-parity corner states with their compensating ancilla."""
    return {c for c in all_configs() if c.label() == ODD_RIGHT}


def validity_window(alpha: float, beta: float) -> bool:
    """True when the odd-parity states are the unique ground manifold.

    Odd states sit at -2*alpha; the competing branches are the polarized
    states at 4 + 2*beta - 4*alpha and the spin-ice states at -2*beta and
    -4 + 2*beta. Beta is restricted to (0, 1].
    """
    if not 0 < beta <= 1:
        return False
    return 2 - beta < alpha < 2 + beta


def spectrum_rows(alphas, betas):
    """Rows ``(alpha, beta, label, energy)`` over a parameter grid."""
    rows = []
    for a in alphas:
        for b in betas:
            p = PlaquetteParams(float(a), float(b))
            for cfg, label, energy in plaquette_spectrum(p):
                rows.append((float(a), float(b), label, energy))
    return rows
