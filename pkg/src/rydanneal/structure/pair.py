"""Two-atom Rydberg pair Hamiltonian with dipole-dipole coupling.

H(R) = D + K(theta, phi) / R**3 where D holds the pair energies (defects
plus Zeeman) and K the angular/radial dipole-dipole factors. Energies are
in MHz, distances in micrometres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import constants as sc
from scipy.optimize import linear_sum_assignment

from .angular import clebsch_gordan, wigner_3j, wigner_6j
from .atoms import (CoulombRadial, RydbergState, channels, has_defect, level_energy)

# e^2 a0^2 / (4 pi eps0 h) in MHz um^3
DIPOLE_UNIT = sc.e**2 * sc.physical_constants["Bohr radius"][0] ** 2 / (4 * math.pi * sc.epsilon_0 * sc.h) * 1e18 * 1e-6


def reduced_l(l: int, lp: int) -> float:
    """<l||C1||l'>."""
    return (-1) ** l * math.sqrt((2 * l + 1) * (2 * lp + 1)) * wigner_3j(l, 1, lp, 0, 0, 0)


def reduced_lj(l, j, lp, jp) -> float:
    """<l 1/2 j||C1||l' 1/2 j'> by decoupling the spectator spin."""
    s = Fraction(1, 2)
    phase = (-1) ** int(l + s + jp + 1)
    return phase * math.sqrt((2 * j + 1) * (2 * jp + 1)) * float(wigner_6j(l, j, s, jp, lp, 1)) * reduced_l(l, lp)


def angular_dipole(a: RydbergState, b: RydbergState, q: int) -> float:
    """<a|C1_q|b>, the angular part of the dipole component d_q."""
    if abs(a.l - b.l) != 1 or a.mj != b.mj + q:
        return 0.0
    phase = -1 if int(a.j - a.mj) % 2 else 1
    return phase * wigner_3j(a.j, 1, b.j, -a.mj, q, b.mj) * reduced_lj(a.l, a.j, b.l, b.j)


def dipole_component(a: RydbergState, b: RydbergState, q: int, radial) -> float:
    """<a|d_q|b> in units of e*a0."""
    ang = angular_dipole(a, b, q)
    return 0.0 if ang == 0.0 else ang * radial(a, b)


def y2(m: int, theta: float, phi: float) -> complex:
    """Spherical harmonic Y_2^m (Condon-Shortley phase)."""
    st, ct = math.sin(theta), math.cos(theta)
    c = {0: math.sqrt(5 / (16 * math.pi)) * (3 * ct * ct - 1),
         1: -math.sqrt(15 / (8 * math.pi)) * st * ct,
         2: math.sqrt(15 / (32 * math.pi)) * st * st}[abs(m)]
    val = c * complex(math.cos(abs(m) * phi), math.sin(abs(m) * phi))
    return val if m >= 0 else (-1) ** m * val.conjugate()


def dd_coefficients(theta: float, phi: float) -> np.ndarray:
    """w[mu+1, nu+1] such that V*R^3 = sum w * d1_mu d2_nu."""
    w = np.zeros((3, 3), dtype=complex)
    for mu in (-1, 0, 1):
        for nu in (-1, 0, 1):
            w[mu + 1, nu + 1] = -math.sqrt(24 * math.pi / 5) * clebsch_gordan(1, mu, 1, nu, 2, mu + nu) \
                * y2(mu + nu, theta, phi).conjugate()
    return w


def dipole_dipole_element(bra: tuple, ket: tuple, R: float, theta: float = math.pi / 2, phi: float = 0.0,
                          radial=None) -> complex:
    """<bra|V_dd|ket> in MHz for pair states given as (atom1, atom2) tuples."""
    if R <= 0:
        raise ValueError("R must be positive")
    radial = radial or default_radial()
    w = dd_coefficients(theta, phi)
    total = 0j
    for mu in (-1, 0, 1):
        d1 = angular_dipole(bra[0], ket[0], mu)
        if d1 == 0.0:
            continue
        for nu in (-1, 0, 1):
            d2 = angular_dipole(bra[1], ket[1], nu)
            if d2:
                total += w[mu + 1, nu + 1] * d1 * d2
    if total == 0:
        return 0j
    return total * radial(bra[0], ket[0]) * radial(bra[1], ket[1]) * DIPOLE_UNIT / R**3


_DEFAULT_RADIAL = None


def default_radial():
    global _DEFAULT_RADIAL
    if _DEFAULT_RADIAL is None:
        _DEFAULT_RADIAL = CoulombRadial()
    return _DEFAULT_RADIAL


# basis -------------------------------------------------------------------

@dataclass(frozen=True)
class Cutoffs:
    energy_window: float = 5000.0  # MHz around the target pair
    delta_n: int = 3
    l_max: int = 3
    delta_m: int = 2  # |M - M_target| bound; M classes differ by even steps
    first_shell: bool = False
    shell_factor: float = 2.0

    def __post_init__(self):
        if self.energy_window < 0 or self.delta_n < 0 or self.l_max < 0 or self.delta_m < 0:
            raise ValueError("cutoffs must be non-negative")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("energy_window", "delta_n", "l_max", "delta_m",
                                              "first_shell", "shell_factor")}


@dataclass
class PairBasis:
    states: list
    target: tuple
    cutoffs: Cutoffs
    b_field: float
    energies: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.states)

    @property
    def target_index(self) -> int:
        return self.states.index(self.target)

    @property
    def target_energy(self) -> float:
        return float(sum(level_energy(s, self.b_field) for s in self.target))


def _single_states(species, n_centre, cut: Cutoffs):
    out = []
    for n in range(max(1, n_centre - cut.delta_n), n_centre + cut.delta_n + 1):
        for l, j in channels(cut.l_max):
            if l >= n or not has_defect(species, l, j):
                continue
            for k in range(int(2 * j) + 1):
                out.append(RydbergState(species, n, l, j, -j + k))
    return out


def build_pair_basis(target: tuple, cutoffs: Cutoffs = Cutoffs(), b_field: float = 0.0) -> PairBasis:
    """Ordered pair states within the energy window of ``target``.

    Only pairs whose orbital parities are reachable by repeated dipole-dipole
    coupling and whose total M lies in the target's even-step class are kept.
    The ordering is by (energy, labels) so it is reproducible.
    """
    a0, b0 = target
    e_t = level_energy(a0, b_field) + level_energy(b0, b_field)
    m_t = a0.mj + b0.mj
    p_t = (a0.l % 2, b0.l % 2)
    p_alt = (1 - p_t[0], 1 - p_t[1])
    wide = cutoffs.energy_window * (cutoffs.shell_factor if cutoffs.first_shell else 1.0)
    sa = _single_states(a0.species, a0.n, cutoffs)
    sb = _single_states(b0.species, b0.n, cutoffs)
    ea = np.array([level_energy(s, b_field) for s in sa])
    eb = np.array([level_energy(s, b_field) for s in sb])
    inner, shell = [], []
    for i, s1 in enumerate(sa):
        for k, s2 in enumerate(sb):
            if (s1.l % 2, s2.l % 2) not in (p_t, p_alt):
                continue
            dm = s1.mj + s2.mj - m_t
            if dm.denominator != 1 or int(dm) % 2 or abs(dm) > cutoffs.delta_m:
                continue
            de = abs(ea[i] + eb[k] - e_t)
            if de <= cutoffs.energy_window:
                inner.append(((s1, s2), ea[i] + eb[k]))
            elif de <= wide:
                shell.append(((s1, s2), ea[i] + eb[k]))
    if cutoffs.first_shell and inner:
        inner_set = [p for p, _ in inner]
        keep = []
        for p, e in shell:
            if any(_dipole_allowed(p, q) for q in inner_set):
                keep.append((p, e))
        inner += keep
    if not any(p == target for p, _ in inner):
        inner.append((target, e_t))
    inner.sort(key=lambda t: (round(t[1], 9), t[0][0], t[0][1]))
    states = [p for p, _ in inner]
    if not states:
        raise ValueError("empty pair basis")
    return PairBasis(states, target, cutoffs, b_field, np.array([e for _, e in inner]))


def _dipole_allowed(p, q) -> bool:
    return all(abs(x.l - y.l) == 1 and abs(x.mj - y.mj) <= 1 for x, y in zip(p, q))


# Hamiltonian -------------------------------------------------------------

def _single_dipoles(states, radial):
    """d[q+1][i, k] = <s_i|d_q|s_k> for the distinct single-atom states."""
    n = len(states)
    d = np.zeros((3, n, n))
    for i, a in enumerate(states):
        for k, b in enumerate(states):
            if abs(a.l - b.l) != 1:
                continue
            q = int(a.mj - b.mj)
            if abs(q) <= 1:
                d[q + 1, i, k] = dipole_component(a, b, q, radial)
    return d


def interaction_matrix(basis: PairBasis, theta: float = math.pi / 2, phi: float = 0.0, radial=None) -> np.ndarray:
    """K with H(R) = diag(E) + K / R^3 (MHz um^3)."""
    radial = radial or default_radial()
    singles = [sorted({p[0] for p in basis.states}), sorted({p[1] for p in basis.states})]
    index = [{s: i for i, s in enumerate(x)} for x in singles]
    d1 = _single_dipoles(singles[0], radial)
    d2 = d1 if singles[1] == singles[0] else _single_dipoles(singles[1], radial)
    A = np.array([index[0][p[0]] for p in basis.states])
    B = np.array([index[1][p[1]] for p in basis.states])
    w = dd_coefficients(theta, phi)
    K = np.zeros((len(basis), len(basis)), dtype=complex)
    for mu in range(3):
        blk1 = d1[mu][np.ix_(A, A)]
        for nu in range(3):
            if w[mu, nu] != 0:
                K += w[mu, nu] * blk1 * d2[nu][np.ix_(B, B)]
    return K * DIPOLE_UNIT


def pair_hamiltonian(basis: PairBasis, R: float, K: np.ndarray | None = None, theta=math.pi / 2, phi=0.0,
                     radial=None) -> np.ndarray:
    """Pair Hamiltonian at distance R, relative to the target pair energy."""
    if K is None:
        K = interaction_matrix(basis, theta, phi, radial)
    H = K / R**3
    H[np.diag_indices_from(H)] += basis.energies - basis.target_energy
    return H


@dataclass
class MolecularCurve:
    r_grid: np.ndarray
    energies: np.ndarray  # (n_R, n_states), relative to the target pair
    overlaps: np.ndarray  # (n_R, n_states) complex target amplitude
    theta: float
    phi: float
    b_field: float
    labels: list = field(default_factory=list)

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.overlaps) ** 2

    def csv_rows(self):
        for i, R in enumerate(self.r_grid):
            for mu in range(self.energies.shape[1]):
                yield R, mu, self.energies[i, mu], self.weights[i, mu]


def diagonalize_pair(basis: PairBasis, r_grid, theta: float = math.pi / 2, phi: float = 0.0,
                     radial=None, K: np.ndarray | None = None) -> MolecularCurve:
    """Eigen-decompose H(R) along ``r_grid`` and follow states adiabatically.

    Curves are matched between neighbouring R by maximum eigenvector overlap
    (a linear assignment); near-ties fall back to energy proximity.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if K is None:
        K = interaction_matrix(basis, theta, phi, radial)
    if not np.any(K.imag):
        K = K.real
    t = basis.target_index
    n = len(basis)
    energies = np.empty((len(r_grid), n))
    overlaps = np.empty((len(r_grid), n), dtype=complex)
    prev_vecs = prev_vals = None
    for i, R in enumerate(r_grid):
        try:
            vals, vecs = np.linalg.eigh(pair_hamiltonian(basis, R, K))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"pair diagonalization failed at R={R}") from exc
        if prev_vecs is not None:
            ov = np.abs(prev_vecs.conj().T @ vecs) ** 2
            scale = max(1.0, np.ptp(vals))
            cost = -ov + 1e-9 * np.abs(prev_vals[:, None] - vals[None, :]) / scale
            rows, cols = linear_sum_assignment(cost)
            order = cols[np.argsort(rows)]
            vals, vecs = vals[order], vecs[:, order]
        energies[i] = vals
        overlaps[i] = vecs[t].conj()
        prev_vecs, prev_vals = vecs, vals
    labels = [f"{a.label()}|{b.label()}" for a, b in basis.states]
    return MolecularCurve(r_grid, energies, overlaps, theta, phi, basis.b_field, labels)


@dataclass(frozen=True)
class Resonance:
    state: int
    R: float
    detuning: float
    weight: float


def resonance_scan(curve: MolecularCurve, lattice_distances, detuning_offset: float = 0.0,
                   detuning_threshold: float = 1.0, weight_threshold: float = 0.01,
                   tolerance: float = 0.02) -> list[Resonance]:
    """Molecular states that a laser would hit near a lattice distance.

    ``delta = E_mu(R) - detuning_offset`` where the offset is the two-photon
    detuning of the dressing lasers relative to the target pair. A hit needs
    ``|delta| < detuning_threshold`` and ``|c|^2 > weight_threshold`` at a grid
    point within ``tolerance`` (relative) of a lattice distance.
    """
    hits = []
    w = curve.weights
    for d in lattice_distances:
        near = np.flatnonzero(np.abs(curve.r_grid - d) <= tolerance * d)
        for i in near:
            delta = curve.energies[i] - detuning_offset
            for mu in np.flatnonzero((np.abs(delta) < detuning_threshold) & (w[i] > weight_threshold)):
                hits.append(Resonance(int(mu), float(curve.r_grid[i]), float(delta[mu]), float(w[i, mu])))
    return sorted(hits, key=lambda h: (h.R, h.state))


def find_wells(curve: MolecularCurve, min_weight: float = 0.2):
    """Interior local minima (state, R, energy, |c|^2) with target weight above ``min_weight``."""
    out = []
    E, W = curve.energies, curve.weights
    for mu in range(E.shape[1]):
        e = E[:, mu]
        for i in range(1, len(e) - 1):
            if e[i] < e[i - 1] and e[i] < e[i + 1] and W[i, mu] > min_weight:
                out.append((mu, float(curve.r_grid[i]), float(e[i]), float(W[i, mu])))
    return out
