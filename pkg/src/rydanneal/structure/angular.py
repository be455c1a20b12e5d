"""Wigner 3j/6j symbols and Clebsch-Gordan coefficients (Racah formulas).

Arguments may be integers or half-integers. Internally everything is
doubled so the sums run over exact Python integers.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache


def _twice(x) -> int:
    d = 2 * Fraction(x).limit_denominator(4) if isinstance(x, float) else 2 * Fraction(x)
    if isinstance(x, float) and abs(float(d) - 2 * x) > 1e-9:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    if d.denominator != 1:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(d)


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _triangle_ok(a2: int, b2: int, c2: int) -> bool:
    return (a2 + b2 + c2) % 2 == 0 and abs(a2 - b2) <= c2 <= a2 + b2


def _delta(a2: int, b2: int, c2: int) -> Fraction:
    return Fraction(_fact((a2 + b2 - c2) // 2) * _fact((a2 - b2 + c2) // 2) * _fact((-a2 + b2 + c2) // 2),
                    _fact((a2 + b2 + c2) // 2 + 1))


@lru_cache(maxsize=200_000)
def _w3j(j1, j2, j3, m1, m2, m3) -> float:
    if m1 + m2 + m3 != 0:
        return 0.0
    if not _triangle_ok(j1, j2, j3):
        return 0.0
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if abs(m) > j or (j - m) % 2:
            return 0.0
    pref = _delta(j1, j2, j3) * (
        _fact((j1 + m1) // 2) * _fact((j1 - m1) // 2) * _fact((j2 + m2) // 2)
        * _fact((j2 - m2) // 2) * _fact((j3 + m3) // 2) * _fact((j3 - m3) // 2))
    kmin = max(0, (j2 - j3 - m1) // 2, (j1 - j3 + m2) // 2)
    kmax = min((j1 + j2 - j3) // 2, (j1 - m1) // 2, (j2 + m2) // 2)
    total = 0
    for k in range(kmin, kmax + 1):
        den = (_fact(k) * _fact((j1 + j2 - j3) // 2 - k) * _fact((j1 - m1) // 2 - k)
               * _fact((j2 + m2) // 2 - k) * _fact((j3 - j2 + m1) // 2 + k) * _fact((j3 - j1 - m2) // 2 + k))
        total += Fraction((-1) ** k, den)
    sign = -1 if ((j1 - j2 - m3) // 2) % 2 else 1
    return _signed_sqrt(pref, total * sign)


def _signed_sqrt(pref: Fraction, factor: Fraction) -> float:
    if factor == 0:
        return 0.0
    return math.copysign(math.sqrt(pref * factor * factor), factor)


@lru_cache(maxsize=200_000)
def _w6j(a, b, c, d, e, f) -> float:
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_triangle_ok(*t) for t in triads):
        return 0.0
    pref = math.prod((_delta(*t) for t in triads), start=Fraction(1))
    sums = [sum(t) // 2 for t in triads]
    quads = ((a + b + d + e) // 2, (a + c + d + f) // 2, (b + c + e + f) // 2)
    total = 0
    for k in range(max(sums), min(quads) + 1):
        den = math.prod(_fact(k - s) for s in sums) * math.prod(_fact(q - k) for q in quads)
        total += Fraction((-1) ** k * _fact(k + 1), den)
    return _signed_sqrt(pref, total)


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """The 3j symbol (j1 j2 j3; m1 m2 m3)."""
    return _w3j(*(_twice(x) for x in (j1, j2, j3, m1, m2, m3)))


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """The 6j symbol {j1 j2 j3; j4 j5 j6}."""
    return _w6j(*(_twice(x) for x in (j1, j2, j3, j4, j5, j6)))


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m> in the Condon-Shortley convention."""
    a2, b2, c2, mm = (_twice(x) for x in (j1, j2, j, m))
    phase = -1 if ((a2 - b2 + mm) // 2) % 2 else 1
    return phase * math.sqrt(c2 + 1) * _w3j(a2, b2, c2, _twice(m1), _twice(m2), -mm)


def wigner_symbol(kind: str, *args) -> float:
    if len(args) != 6:
        raise ValueError("a 3j or 6j symbol takes six arguments")
    if kind == "3j":
        return wigner_3j(*args)
    if kind == "6j":
        return wigner_6j(*args)
    raise ValueError(f"unknown symbol kind {kind!r}")
