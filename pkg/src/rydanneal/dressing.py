"""Rydberg-dressed ground-state interactions.

Frequencies (Rabi, detunings, molecular detunings, light shifts) are in MHz
of ordinary frequency; rates are in 1/us. A dressed pair is described by the
ground pair at 0, the singly excited pairs at -Delta_1 and -Delta_2, and
molecular states at delta_mu, with couplings Omega/2 and Omega*c_mu/2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .plaquette import validity_window


class ResonanceError(ValueError):
    """Molecular detuning too small for the dressing picture to hold."""


class CrosstalkError(ValueError):
    def __init__(self, offending):
        self.offending = offending
        super().__init__("cross-talk above threshold at R = " + ", ".join(f"{r:.4g}" for r, _ in offending))


class TrackingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Laser:
    rabi: float
    detuning: float
    target: object = None

    def __post_init__(self):
        if self.detuning == 0:
            raise ValueError("laser detuning must be non-zero")

    @property
    def in_dressing_regime(self) -> bool:
        return abs(self.rabi / self.detuning) < 0.2


def epsilon(rabi: float, detuning: float) -> float:
    if detuning == 0:
        raise ValueError("zero detuning")
    return rabi / (2 * detuning)


def second_order_shift(l1: Laser, l2: Laser) -> float:
    """Sum of the single-atom light shifts of the ground pair."""
    return 0.5 * l1.rabi * epsilon(l1.rabi, l1.detuning) + 0.5 * l2.rabi * epsilon(l2.rabi, l2.detuning)


def epsilon_bar(l1: Laser, l2: Laser, c: float, delta: float) -> float:
    """Ground-to-molecule admixture amplitude of the dominant molecular state."""
    if delta == 0:
        raise ResonanceError("molecular detuning is zero; see resonance_scan")
    return l1.rabi * l2.rabi * c / (4 * delta) * (1 / l1.detuning + 1 / l2.detuning)


def validity_ratio(l1: Laser, l2: Laser, c: float, delta: float) -> float:
    """|delta| over the largest effective second-step coupling eps_l * Omega_l' * c."""
    scale = max(abs(epsilon(l1.rabi, l1.detuning) * l2.rabi * c), abs(epsilon(l2.rabi, l2.detuning) * l1.rabi * c))
    return math.inf if scale == 0 else abs(delta) / scale


def fourth_order_interaction(l1: Laser, l2: Laser, c: float, delta: float, check: bool = True) -> float:
    """Pair light shift from two-photon coupling to one molecular state.

    Equals ``-eps_bar**2 * delta``: a molecular level above the ground pair
    pushes it down. Validity ratio below 3 raises, below 10 warns.
    """
    if check:
        ratio = validity_ratio(l1, l2, c, delta)
        if ratio < 3:
            raise ResonanceError(f"validity ratio {ratio:.3g} < 3; molecular state nearly resonant")
        if ratio < 10:
            warnings.warn(f"validity ratio {ratio:.3g} < 10; perturbative estimate is rough", stacklevel=2)
    if c == 0:
        return 0.0
    return -epsilon_bar(l1, l2, c, delta) ** 2 * delta


def effective_decoherence(l1: Laser, l2: Laser, c: float, delta: float, gamma: float) -> float:
    """Per-particle loss rate from the Rydberg admixtures (1/us)."""
    if gamma is None:
        raise ValueError("decay rate required")
    e1, e2 = epsilon(l1.rabi, l1.detuning), epsilon(l2.rabi, l2.detuning)
    eb = epsilon_bar(l1, l2, c, delta) if c else 0.0
    return 0.5 * (e1**2 + e2**2 + 2 * eb**2) * gamma


def merit(e1: float, e2: float, eb: float, delta: float, gamma: float) -> float:
    """Interaction angular frequency times dressed lifetime from the five defining numbers."""
    rate = 0.5 * (e1**2 + e2**2 + 2 * eb**2) * gamma
    return 2 * math.pi * eb**2 * abs(delta) / rate


def figure_of_merit(l1: Laser, l2: Laser, c: float, delta: float, gamma: float) -> float:
    e4 = fourth_order_interaction(l1, l2, c, delta, check=False)
    return 2 * math.pi * abs(e4) / effective_decoherence(l1, l2, c, delta, gamma)


@dataclass
class DressedPairSystem:
    """The 3 + M level two-photon problem at one distance."""
    l1: Laser
    l2: Laser
    deltas: np.ndarray
    overlaps: np.ndarray

    def __post_init__(self):
        self.deltas = np.atleast_1d(np.asarray(self.deltas, dtype=float))
        self.overlaps = np.atleast_1d(np.asarray(self.overlaps, dtype=complex))
        if self.deltas.shape != self.overlaps.shape:
            raise ValueError("deltas and overlaps must match")

    @property
    def dim(self) -> int:
        return 3 + len(self.deltas)

    def matrix(self, molecular: bool = True) -> np.ndarray:
        o1, o2 = self.l1.rabi, self.l2.rabi
        H = np.zeros((self.dim, self.dim), dtype=complex)
        H[1, 1], H[2, 2] = -self.l1.detuning, -self.l2.detuning
        H[0, 1] = H[1, 0] = o1 / 2
        H[0, 2] = H[2, 0] = o2 / 2
        if molecular:
            for k, (d, c) in enumerate(zip(self.deltas, self.overlaps)):
                H[3 + k, 3 + k] = d
                # |r1 g> -> |mu> drives atom 2, |g r2> -> |mu> drives atom 1
                H[1, 3 + k] = o2 * np.conj(c) / 2
                H[2, 3 + k] = o1 * np.conj(c) / 2
                H[3 + k, 1] = np.conj(H[1, 3 + k])
                H[3 + k, 2] = np.conj(H[2, 3 + k])
        else:
            H[3:, 3:] = np.diag(self.deltas)
        return H

    def ground_energy(self, molecular: bool = True) -> float:
        vals, vecs = np.linalg.eigh(self.matrix(molecular))
        weight = np.abs(vecs[0]) ** 2
        k = int(np.argmax(weight))
        if weight[k] < 0.5:
            raise TrackingError(f"dressed ground state ambiguous (max overlap {weight[k]:.3f})")
        return float(vals[k])

    def interaction(self) -> float:
        """Dressed pair shift minus the shift without molecular couplings."""
        return self.ground_energy(True) - self.ground_energy(False)


def select_states(deltas, overlaps, l1: Laser, l2: Laser, c_min: float = 0.05, window: float = 10.0):
    """Indices of molecular states worth keeping at one distance."""
    om = max(abs(l1.rabi), abs(l2.rabi))
    deltas, overlaps = np.asarray(deltas), np.asarray(overlaps)
    return np.flatnonzero((np.abs(overlaps) > c_min) | (np.abs(deltas) < window * om))


def molecular_detunings(curve_energies, l1: Laser, l2: Laser):
    """delta_mu = E_mu - E_target - Delta_1 - Delta_2 for curve energies relative to the target pair."""
    return np.asarray(curve_energies) - l1.detuning - l2.detuning


def dressed_interaction_full(curve, l1: Laser, l2: Laser, R: float) -> float:
    """U(R) by diagonalizing the dressed pair system at a grid point of ``curve``."""
    i = int(np.argmin(np.abs(curve.r_grid - R)))
    deltas = molecular_detunings(curve.energies[i], l1, l2)
    keep = select_states(deltas, curve.overlaps[i], l1, l2)
    system = DressedPairSystem(l1, l2, deltas[keep], curve.overlaps[i][keep])
    try:
        return system.interaction()
    except TrackingError as exc:
        raise TrackingError(f"{exc} at R={curve.r_grid[i]:.4g} um") from None


def dressed_profile(curve, l1: Laser, l2: Laser) -> np.ndarray:
    return np.array([dressed_interaction_full(curve, l1, l2, R) for R in curve.r_grid])


def dominant_state(curve, l1: Laser, l2: Laser, R: float, override: int | None = None) -> int:
    """Molecular state with the largest |c|^2 weighted by closeness to two-photon resonance."""
    if override is not None:
        return override
    i = int(np.argmin(np.abs(curve.r_grid - R)))
    deltas = molecular_detunings(curve.energies[i], l1, l2)
    om = max(abs(l1.rabi), abs(l2.rabi))
    score = np.abs(curve.overlaps[i]) ** 2 / (1 + (deltas / om) ** 2)
    return int(np.argmax(score))


# interaction table -------------------------------------------------------

@dataclass(frozen=True)
class InteractionTable:
    u_s: float  # U_s(a_L)
    u_s_diag: float  # U_s(sqrt(2) a_L)
    u_a: float  # U_a(a_L / sqrt(2))
    unit: str = "kHz"

    @property
    def alpha(self) -> float:
        return self.u_a / self.u_s

    @property
    def beta(self) -> float:
        return self.u_s_diag / self.u_s

    @property
    def gap(self) -> float:
        return self.u_s / 2

    @property
    def valid(self) -> bool:
        return validity_window(self.alpha, self.beta)

    def to_dict(self) -> dict:
        return {"U_s_aL": self.u_s, "U_s_sqrt2_aL": self.u_s_diag, "U_a_aL_over_sqrt2": self.u_a,
                "unit": self.unit, "alpha": self.alpha, "beta": self.beta, "gap": self.gap, "valid": self.valid}


def interaction_table(u_s: float, u_s_diag: float, u_a: float, unit: str = "kHz") -> InteractionTable:
    if u_s == 0:
        raise ValueError("U_s(a_L) must be non-zero")
    return InteractionTable(u_s, u_s_diag, u_a, unit)


def lattice_shells(a_L: float, kind: str, n_shells: int = 6, z: float = 0.0) -> list[float]:
    """Distinct in-plane distances on the bipartite lattice.

    ``kind='s'`` gives Rb-Rb distances on the square lattice, ``kind='a'``
    Rb-Cs distances from a plaquette centre (optionally raised by ``z``).
    """
    r = set()
    span = n_shells + 2
    for i in range(-span, span + 1):
        for k in range(-span, span + 1):
            if kind == "s":
                if i == k == 0:
                    continue
                d2 = (i * i + k * k) * a_L**2
            elif kind == "a":
                d2 = ((i + 0.5) ** 2 + (k + 0.5) ** 2) * a_L**2
            else:
                raise ValueError(kind)
            r.add(round(math.sqrt(d2 + z * z), 12))
    return sorted(r)[:n_shells]


def extract_interaction_table(u_s_of_r, u_a_of_r, a_L: float, z: float = 0.0, n_shells: int = 6,
                              crosstalk: float = 1e-2, unit: str = "kHz") -> InteractionTable:
    """Evaluate dressed potentials on the lattice and derive (alpha, beta, gap).

    Raises :class:`CrosstalkError` if any other lattice distance carries more
    than ``crosstalk`` times |U_s(a_L)|.
    """
    s_shells = lattice_shells(a_L, "s", n_shells)
    a_shells = lattice_shells(a_L, "a", n_shells, z)
    table = interaction_table(u_s_of_r(s_shells[0]), u_s_of_r(s_shells[1]), u_a_of_r(a_shells[0]), unit)
    bound = crosstalk * abs(table.u_s)
    bad = [(r, u) for r in s_shells[2:] if abs(u := u_s_of_r(r)) > bound]
    bad += [(r, u) for r in a_shells[1:] if abs(u := u_a_of_r(r)) > bound]
    if bad:
        raise CrosstalkError(bad)
    return table


def vertical_offset_solve(r_peak: float, a_L: float) -> float:
    """Height z that places the in-plane distance a_L/sqrt(2) at ``r_peak``."""
    d = a_L / math.sqrt(2)
    if r_peak < d:
        raise ValueError(f"peak at {r_peak} lies inside a_L/sqrt(2) = {d:.6g}; no real offset")
    return math.sqrt(r_peak**2 - d**2)


# reference parameter sets ------------------------------------------------

@dataclass(frozen=True)
class DressingCase:
    name: str
    l1: Laser
    l2: Laser
    delta: float
    c: float
    lifetime: float  # us

    @property
    def gamma(self) -> float:
        return 1 / self.lifetime

    def report(self) -> dict:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            e4 = fourth_order_interaction(self.l1, self.l2, self.c, self.delta)
        return {"case": self.name,
                "epsilon_1": epsilon(self.l1.rabi, self.l1.detuning),
                "epsilon_2": epsilon(self.l2.rabi, self.l2.detuning),
                "epsilon_bar": epsilon_bar(self.l1, self.l2, self.c, self.delta),
                "E2_MHz": second_order_shift(self.l1, self.l2),
                "E4_kHz": 1e3 * e4,
                "gamma_eff_per_us": effective_decoherence(self.l1, self.l2, self.c, self.delta, self.gamma),
                "validity_ratio": validity_ratio(self.l1, self.l2, self.c, self.delta),
                "figure_of_merit": figure_of_merit(self.l1, self.l2, self.c, self.delta, self.gamma)}


RB39 = Laser(35.0, -618.0, "Rb:39P3/2,mj=-1/2")
RB45 = Laser(35.0, -373.0, "Rb:45P3/2,mj=-1/2")
CS33 = Laser(13.0, 83.0, "Cs:33P1/2,mj=-1/2")

DEFAULT_CASES = (
    DressingCase("Rb39-Rb39", RB39, RB39, 2.5, 0.32, 54.0),
    DressingCase("Rb45-Rb45", RB45, RB45, 5.5, 0.28, 75.0),
    DressingCase("Rb45-Cs33", RB45, CS33, 10.6, 0.55, 50.0),
)
