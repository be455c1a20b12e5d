"""Rydberg pair-state structure: levels, angular algebra, pair Hamiltonians."""
from .angular import clebsch_gordan, wigner_3j, wigner_6j, wigner_symbol
from .atoms import (CoulombRadial, MissingDataError, RydbergState, TableRadial, defect_energy,
                    lande_g, level_energy, zeeman_shift)
from .pair import (Cutoffs, MolecularCurve, PairBasis, build_pair_basis, diagonalize_pair,
                   dipole_dipole_element, find_wells, interaction_matrix, pair_hamiltonian,
                   resonance_scan)

__all__ = [
    "clebsch_gordan", "wigner_3j", "wigner_6j", "wigner_symbol",
    "CoulombRadial", "MissingDataError", "RydbergState", "TableRadial", "defect_energy",
    "lande_g", "level_energy", "zeeman_shift",
    "Cutoffs", "MolecularCurve", "PairBasis", "build_pair_basis", "diagonalize_pair",
    "dipole_dipole_element", "find_wells", "interaction_matrix", "pair_hamiltonian", "resonance_scan",
]
