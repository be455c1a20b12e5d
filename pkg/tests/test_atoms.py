import json
import math
from fractions import Fraction as F

import numpy as np
import pytest

from rydanneal.structure.atoms import (CM_TO_MHZ, CoulombRadial, MissingDataError, RydbergState, TableRadial,
                                       data_path, defect_energy, lande_g, level_energy, overlap_r, quantum_defect,
                                       ritz_energy, rydberg_constant, zeeman_shift)


def rb(n, l, j, mj):
    return RydbergState("Rb", n, l, F(j), F(mj))


def test_state_validation():
    with pytest.raises(ValueError):
        rb(39, 1, "1/2", "3/2")
    with pytest.raises(ValueError):
        rb(39, 1, "5/2", "1/2")
    with pytest.raises(ValueError):
        rb(2, 2, "5/2", "1/2")
    with pytest.raises(ValueError):
        RydbergState("K", 30, 0, F(1, 2), F(1, 2))


def test_hydrogenic_limit():
    assert ritz_energy(1.0, 10, 0.0) == pytest.approx(-1 / 100)


def test_monotone_in_n():
    assert defect_energy(rb(39, 1, "3/2", "1/2")) < defect_energy(rb(45, 1, "3/2", "1/2"))
    energies = [defect_energy(rb(n, 0, "1/2", "1/2")) for n in range(20, 80)]
    assert np.all(np.diff(energies) > 0)


def test_ritz_spacing_from_table():
    table = json.loads(data_path().read_text())["species"]["Rb"]
    d0, d2 = table["defects"]["S1/2"]
    R = table["rydberg_constant"] * CM_TO_MHZ
    for n in (20, 39, 60):
        expected = -R / (n - d0 - d2 / (n - d0) ** 2) ** 2 + R / (n + 1 - d0 - d2 / (n + 1 - d0) ** 2) ** 2
        got = defect_energy(rb(n, 0, "1/2", "1/2")) - defect_energy(rb(n + 1, 0, "1/2", "1/2"))
        assert got == pytest.approx(expected, rel=1e-6)
    assert 3.13 < d0 < 3.14


def test_missing_channel_raises():
    with pytest.raises(MissingDataError):
        defect_energy(RydbergState("Cs", 40, 4, F(9, 2), F(1, 2)))
    with pytest.raises(MissingDataError):
        quantum_defect("Rb", 40, 5, F(11, 2))


def test_zeeman():
    s = rb(39, 1, "3/2", "-1/2")
    assert lande_g(1, F(3, 2)) == pytest.approx(4 / 3)
    assert zeeman_shift(s, 26.0) == pytest.approx(1.4 * (4 / 3) * 26 * (-0.5))
    assert zeeman_shift(s, 26.0) == pytest.approx(-24.266666666666666)
    assert zeeman_shift(s, 0.0) == 0
    assert zeeman_shift(rb(39, 1, "3/2", "1/2"), 13.0) == pytest.approx(-zeeman_shift(s, 13.0))
    assert level_energy(s, 26.0) == pytest.approx(defect_energy(s) + zeeman_shift(s, 26.0))
    with pytest.raises(ValueError):
        zeeman_shift(s, -1.0)


def test_lande_values():
    assert lande_g(0, F(1, 2)) == pytest.approx(2.0)
    assert lande_g(1, F(1, 2)) == pytest.approx(2 / 3)
    assert lande_g(2, F(5, 2)) == pytest.approx(6 / 5)


def test_rydberg_constant_units():
    assert rydberg_constant("Rb") == pytest.approx(109736.605 * 29979.2458)


@pytest.fixture(scope="module")
def coulomb():
    return CoulombRadial()


def hydrogen(c, n, l):
    return c.wave_nu(float(n), l)


def test_hydrogen_radial_exact(coulomb):
    w = lambda n, l: hydrogen(coulomb, n, l)
    assert overlap_r(w(1, 0), w(2, 1), coulomb.step) == pytest.approx(128 * math.sqrt(6) / 243, rel=1e-3)
    for n, l in ((10, 3), (25, 0), (40, 1)):
        assert overlap_r(w(n, l), w(n, l), coulomb.step) == pytest.approx((3 * n * n - l * (l + 1)) / 2, rel=1e-8)
    for n, l in ((3, 1), (12, 5), (30, 2)):
        expected = 1.5 * n * math.sqrt(n * n - l * l)
        assert abs(overlap_r(w(n, l - 1), w(n, l), coulomb.step)) == pytest.approx(expected, rel=1e-6)


def test_radial_normalization(coulomb):
    x, X = coulomb._wave("Rb", 39, 1, F(3, 2))
    assert 2 * np.sum(X**2 * x**2) * coulomb.step == pytest.approx(1.0, abs=1e-12)


def test_rydberg_radial_scale(coulomb):
    # near-diagonal elements of n ~ 40 states sit at ~n^2 Bohr radii
    v = coulomb(rb(39, 1, "3/2", "1/2"), rb(40, 0, "1/2", "1/2"))
    assert 500 < abs(v) < 2500
    assert coulomb(rb(39, 1, "3/2", "1/2"), rb(40, 0, "1/2", "1/2")) == coulomb(rb(40, 0, "1/2", "1/2"),
                                                                                  rb(39, 1, "3/2", "1/2"))


def test_table_radial():
    t = TableRadial({"provider": "test", "elements": [["Rb:39P3/2", "Rb:39S1/2", 1234.5]]})
    a, b = rb(39, 1, "3/2", "1/2"), rb(39, 0, "1/2", "1/2")
    assert t(a, b) == t(b, a) == 1234.5
    with pytest.raises(MissingDataError):
        t(a, rb(40, 0, "1/2", "1/2"))
