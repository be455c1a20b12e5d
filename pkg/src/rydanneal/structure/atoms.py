"""Single-atom Rydberg levels: quantum defects, Zeeman shifts, radial integrals.

Energies are frequencies in MHz (the project-wide "2 pi MHz" convention),
radial matrix elements are in Bohr radii.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np

CM_TO_MHZ = 29979.2458
MU_B = 1.4  # MHz / G
L_LETTERS = "SPDFGHIK"
SPECIES = ("Rb", "Cs")


class MissingDataError(LookupError):
    """Raised when a level or radial datum is not tabulated."""


def _half(x) -> Fraction:
    f = Fraction(x).limit_denominator(2)
    if abs(float(f) - float(x)) > 1e-9 or f.denominator not in (1, 2):
        raise ValueError(f"{x!r} is not a half-integer")
    return f


@dataclass(frozen=True, order=True)
class RydbergState:
    species: str
    n: int
    l: int
    j: Fraction
    mj: Fraction

    def __post_init__(self):
        object.__setattr__(self, "j", _half(self.j))
        object.__setattr__(self, "mj", _half(self.mj))
        if self.species not in SPECIES:
            raise ValueError(f"unknown species {self.species!r}")
        if not 0 <= self.l < self.n:
            raise ValueError(f"need 0 <= l < n, got n={self.n}, l={self.l}")
        if self.j.denominator != 2 or abs(self.j - self.l) != Fraction(1, 2):
            raise ValueError(f"j={self.j} incompatible with l={self.l}")
        if abs(self.mj) > self.j or (self.j - self.mj).denominator != 1:
            raise ValueError(f"mj={self.mj} incompatible with j={self.j}")

    @property
    def channel(self) -> str:
        return f"{L_LETTERS[self.l]}{self.j.numerator}/2"

    def label(self) -> str:
        return f"{self.species}:{self.n}{self.channel},mj={self.mj}"

    def to_dict(self) -> dict:
        return {"species": self.species, "n": self.n, "l": self.l, "j": str(self.j), "mj": str(self.mj)}

    @classmethod
    def from_dict(cls, d: dict) -> "RydbergState":
        return cls(d["species"], int(d["n"]), int(d["l"]), Fraction(str(d["j"])), Fraction(str(d["mj"])))


def data_path():
    return resources.files("rydanneal.structure") / "data" / "quantum_defects.json"


@lru_cache(maxsize=1)
def load_defect_table() -> dict:
    return json.loads(data_path().read_text())


def data_hash() -> str:
    return hashlib.sha256(data_path().read_bytes()).hexdigest()


def rydberg_constant(species: str) -> float:
    """Reduced-mass Rydberg constant in MHz."""
    return load_defect_table()["species"][species]["rydberg_constant"] * CM_TO_MHZ


def quantum_defect(species: str, n: int, l: int, j) -> float:
    channel = f"{L_LETTERS[l]}{_half(j).numerator}/2" if l < len(L_LETTERS) else None
    try:
        d0, d2 = load_defect_table()["species"][species]["defects"][channel]
    except KeyError:
        raise MissingDataError(f"no quantum defect for {species} {channel or f'l={l}'}") from None
    return d0 + d2 / (n - d0) ** 2


def effective_n(state: RydbergState) -> float:
    return state.n - quantum_defect(state.species, state.n, state.l, state.j)


def ritz_energy(rydberg: float, n: int, d0: float, d2: float = 0.0) -> float:
    """-R / (n - delta)^2 with the two-term Rydberg-Ritz defect."""
    return -rydberg / (n - d0 - d2 / (n - d0) ** 2) ** 2


def defect_energy(state: RydbergState) -> float:
    """Bare level energy -R/(n - delta)^2 in MHz."""
    return -rydberg_constant(state.species) / effective_n(state) ** 2


def lande_g(l: int, j, g_s: float = 2.0) -> float:
    """Fine-structure Lande factor with g_l = 1."""
    jj, ll, ss = float(j) * (float(j) + 1), l * (l + 1), 0.75
    return ((jj + ll - ss) + g_s * (jj - ll + ss)) / (2 * jj)


def zeeman_shift(state: RydbergState, b_field: float) -> float:
    if b_field < 0:
        raise ValueError("B_z must be non-negative")
    return MU_B * lande_g(state.l, state.j) * b_field * float(state.mj)


def level_energy(state: RydbergState, b_field: float = 0.0) -> float:
    return defect_energy(state) + zeeman_shift(state, b_field)


def channels(l_max: int):
    """(l, j) pairs up to ``l_max``."""
    for l in range(l_max + 1):
        for j in ((Fraction(1, 2),) if l == 0 else (Fraction(2 * l - 1, 2), Fraction(2 * l + 1, 2))):
            yield l, j


def has_defect(species: str, l: int, j) -> bool:
    try:
        quantum_defect(species, 50, l, j)
    except MissingDataError:
        return False
    return True


# radial matrix elements --------------------------------------------------

def _numerov_wavefunction(nu: float, l: int, step: float = 0.01):
    """Coulomb-approximation radial function on a sqrt(r) grid.

    Returns ``(x, X)`` with r = x**2 and X = x**1.5 * R(r), normalized so
    ``2 * sum(X**2 * x**2) * step == 1``. Integration runs inward from well
    outside the outer turning point; the divergent piece near the origin
    (present when nu is not an integer) is cut at the first inner minimum.
    """
    # grid points are integer multiples of the step so different states share them
    k_out = math.ceil(math.sqrt(2 * nu * (nu + 15)) / step)
    x = step * np.arange(k_out, 0, -1, dtype=float)
    g = -8.0 + 4.0 * x**2 / nu**2 + (2 * l + 0.5) * (2 * l + 1.5) / x**2
    f = 1 - step**2 * g / 12
    X = np.zeros_like(x)
    X[0], X[1] = 1e-30, 1e-30 * (1 + step * math.sqrt(max(g[0], 0.0)))
    r_inner = max(nu**2 - nu * math.sqrt(max(nu**2 - l * (l + 1), 0.0)), 0.0)
    stop = len(x)
    for i in range(1, len(x) - 1):
        X[i + 1] = ((12 - 10 * f[i]) * X[i] - f[i - 1] * X[i - 1]) / f[i + 1]
        if x[i + 1] ** 2 < r_inner:
            # |u| = |X| * x**0.5 must decay toward the origin; growth means divergence
            if abs(X[i + 1]) * math.sqrt(x[i + 1]) > abs(X[i]) * math.sqrt(x[i]):
                stop = i + 1
                break
    X[stop:] = 0.0
    norm = math.sqrt(2 * np.sum(X**2 * x**2) * step)
    return x, X / norm


class CoulombRadial:
    """Radial integrals from Numerov integration of the Coulomb-approximation
    wavefunctions. Exact for hydrogen (integer effective quantum numbers)."""

    provider_id = "coulomb-numerov-v1"

    def __init__(self, step: float = 0.01):
        self.step = step
        self._cache: dict = {}

    def _wave(self, species, n, l, j):
        key = (species, n, l, j)
        if key not in self._cache:
            nu = n - quantum_defect(species, n, l, j)
            self._cache[key] = _numerov_wavefunction(nu, l, self.step)
        return self._cache[key]

    def wave_nu(self, nu: float, l: int):
        return _numerov_wavefunction(nu, l, self.step)

    def __call__(self, a: RydbergState, b: RydbergState) -> float:
        if a.species != b.species:
            raise ValueError("radial integrals connect states of one atom")
        return overlap_r(self._wave(a.species, a.n, a.l, a.j), self._wave(b.species, b.n, b.l, b.j), self.step)


def overlap_r(wa, wb, step: float) -> float:
    """<a|r|b> for two wavefunctions on the same sqrt(r) step."""
    xa, Xa = wa
    xb, Xb = wb
    # grids start at different outer points; align them on the common offset
    shift = int(round((xa[0] - xb[0]) / step))
    if shift >= 0:
        Xa, xa = Xa[shift:], xa[shift:]
    else:
        Xb = Xb[-shift:]
    m = min(len(Xa), len(Xb))
    return float(2 * np.sum(Xa[:m] * Xb[:m] * xa[:m] ** 4) * step)


class TableRadial:
    """Radial integrals looked up from a JSON table.

    The file holds ``{"provider": id, "elements": [[label_a, label_b, value], ...]}``
    where labels look like ``Rb:39P3/2``. Missing entries raise.
    """

    def __init__(self, table: dict, provider_id: str = "table"):
        self.provider_id = table.get("provider", provider_id)
        self._values = {}
        for a, b, v in table["elements"]:
            self._values[(a, b)] = float(v)
            self._values[(b, a)] = float(v)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls(json.load(fh))

    @staticmethod
    def key(s: RydbergState) -> str:
        return f"{s.species}:{s.n}{s.channel}"

    def __call__(self, a: RydbergState, b: RydbergState) -> float:
        try:
            return self._values[(self.key(a), self.key(b))]
        except KeyError:
            raise MissingDataError(f"no radial element for {self.key(a)} - {self.key(b)}") from None
