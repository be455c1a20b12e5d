"""Compile all-to-all Ising problems into the odd-parity LHZ lattice.

Layout
------
Physical spins are numbered bottom-to-top, left-to-right (0-based here;
physical index ``i`` corresponds to ``J_{i+1}`` in the usual 1-based
pictures). Row 0 holds the ``N-2`` fixed boundary spins. Row ``r >= 1``
holds the ``N-r`` problem spins encoding the logical pairs
``(k, k+r)`` for ``k = 0 .. N-r-1``.

For N=4 this gives::

    row 3:        7            (0,3)
    row 2:      5   6          (0,2) (1,3)
    row 1:    2   3   4        (0,1) (1,2) (2,3)
    row 0:      0   1          fixed

with plaquettes {0,2,3,5}, {1,3,4,6}, {3,5,6,7}.

Parity signs follow ``(-1)**(mu*(nu-mu))`` with 0-based logical
indices. With the boundary spins pinned to ``|+>`` every plaquette then
has odd parity (product of the four sigma_z equal to -1) for every
logical configuration, and for N=4 the only negative sign sits on the
fourth physical spin.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

DEFAULT_FIXED_FIELD = 5.0
BRUTE_FORCE_LIMIT = 24


class DecodeError(ValueError):
    """Raised when a physical configuration does not encode a logical one."""

    def __init__(self, message: str, plaquette: int | None = None, spin: int | None = None):
        super().__init__(message)
        self.plaquette = plaquette
        self.spin = spin


@dataclass(frozen=True)
class LogicalProblem:
    """Infinite-range Ising problem on ``n`` logical spins.

    ``couplings[mu, nu]`` for ``mu < nu`` holds the pair interaction; the
    diagonal and lower triangle must be zero. Energies are in units of the
    plaquette gap.
    """

    n: int
    couplings: np.ndarray
    local_fields: np.ndarray = None
    transverse: np.ndarray = None
    seed: int | None = None

    def __post_init__(self):
        J = np.array(self.couplings, dtype=float)
        if J.shape != (self.n, self.n):
            raise ValueError(f"couplings must be {self.n}x{self.n}, got {J.shape}")
        if np.any(np.tril(J) != 0):
            raise ValueError("couplings must be strictly upper triangular")
        h = np.zeros(self.n) if self.local_fields is None else np.array(self.local_fields, dtype=float)
        a = np.ones(self.n) if self.transverse is None else np.array(self.transverse, dtype=float)
        if h.shape != (self.n,) or a.shape != (self.n,):
            raise ValueError("local_fields and transverse must have length n")
        for arr in (J, h, a):
            if not np.all(np.isfinite(arr)):
                raise ValueError("problem data must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "local_fields", h)
        object.__setattr__(self, "transverse", a)

    @classmethod
    def from_pairs(cls, n, pairs, fields=None, seed=None):
        J = np.zeros((n, n))
        for mu, nu, value in pairs:
            mu, nu = int(mu), int(nu)
            if mu == nu or not (0 <= mu < n and 0 <= nu < n):
                raise ValueError(f"invalid coupling index pair ({mu}, {nu})")
            lo, hi = min(mu, nu), max(mu, nu)
            J[lo, hi] += float(value)
        return cls(n, J, fields, seed=seed)

    @classmethod
    def random(cls, n, rng, low=-0.5, high=0.5):
        J = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        J[iu] = rng.uniform(low, high, size=len(iu[0]))
        return cls(n, J)

    @property
    def has_fields(self) -> bool:
        return bool(np.any(self.local_fields != 0))

    def pairs(self):
        return [(mu, nu, float(self.couplings[mu, nu]))
                for mu, nu in itertools.combinations(range(self.n), 2)]


@dataclass(frozen=True)
class Plaquette:
    corners: tuple[int, int, int, int]  # cyclic: bottom, left, top, right
    ancilla: int

    @property
    def edges(self):
        c = self.corners
        return [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]

    @property
    def diagonals(self):
        c = self.corners
        return [(c[0], c[2]), (c[1], c[3])]


@dataclass(frozen=True)
class LhzEncoding:
    n_logical: int
    n_physical: int
    n_ancilla: int
    fields: np.ndarray
    parity_signs: np.ndarray
    pair_of: tuple
    plaquettes: tuple[Plaquette, ...]
    fixed_spins: tuple[tuple[int, float], ...]
    transverse: np.ndarray
    ancilla_transverse: np.ndarray
    field_spin: bool = False
    rows: tuple = field(default=(), repr=False)

    @property
    def n_spins(self) -> int:
        return self.n_physical + self.n_ancilla

    @property
    def problem_spins(self) -> list[int]:
        return [i for i, p in enumerate(self.pair_of) if p is not None]

    @property
    def n_problem_logical(self) -> int:
        """Logical spins of the original problem (without the field spin)."""
        return self.n_logical - 1 if self.field_spin else self.n_logical

    def index_of(self, mu: int, nu: int) -> int:
        lo, hi = min(mu, nu), max(mu, nu)
        return self.pair_of.index((lo, hi))


def parity_sign(mu: int, nu: int) -> int:
    return -1 if (mu * (nu - mu)) % 2 else 1


def lattice_rows(n: int) -> list[list]:
    """Rows of the layout as lists of logical pairs (``None`` for fixed spins)."""
    rows = [[None] * (n - 2)]
    for r in range(1, n):
        rows.append([(k, k + r) for k in range(n - r)])
    return rows


def _plaquette_corners(rows_idx: list[list[int]]) -> list[tuple[int, int, int, int]]:
    n_rows = len(rows_idx)
    out = []
    for b in range(n_rows - 2):
        # row 0 sits between row-1 neighbours; higher rows are offset by one
        shift = 0 if b == 0 else 1
        for k in range(len(rows_idx[b + 2])):
            bottom = rows_idx[b][k + shift]
            left = rows_idx[b + 1][k]
            right = rows_idx[b + 1][k + 1]
            top = rows_idx[b + 2][k]
            out.append((bottom, left, top, right))
    return out


def encode(problem: LogicalProblem, fixed_field: float = DEFAULT_FIXED_FIELD,
           transverse: float = 1.0, ancilla_transverse: float = 1.0) -> LhzEncoding:
    """Map a logical problem onto the odd-parity LHZ layout.

    Non-zero local fields ``h`` are folded into couplings to an extra
    logical spin appended at index ``n`` whose orientation is gauge-fixed
    to +1 on decoding.
    """
    n = problem.n
    J = np.array(problem.couplings)
    field_spin = problem.has_fields
    if field_spin:
        J = np.pad(J, ((0, 1), (0, 1)))
        J[:n, n] = problem.local_fields
        n += 1
    if n < 3:
        raise ValueError(f"LHZ encoding needs at least 3 logical spins, got {n}")

    rows = lattice_rows(n)
    pair_of, rows_idx = [], []
    for row in rows:
        rows_idx.append(list(range(len(pair_of), len(pair_of) + len(row))))
        pair_of.extend(row)
    n_phys = len(pair_of)

    signs = np.ones(n_phys, dtype=int)
    fields = np.zeros(n_phys)
    fixed = []
    for i, p in enumerate(pair_of):
        if p is None:
            # negative field pins the boundary spin to |+>
            fields[i] = -abs(fixed_field)
            fixed.append((i, abs(fixed_field)))
        else:
            signs[i] = parity_sign(*p)
            fields[i] = signs[i] * J[p]

    corners = _plaquette_corners(rows_idx)
    plaquettes = tuple(Plaquette(c, n_phys + a) for a, c in enumerate(corners))
    tr = np.full(n_phys, float(transverse))
    atr = np.full(len(plaquettes), float(ancilla_transverse))
    for arr in (fields, signs, tr, atr):
        arr.setflags(write=False)
    return LhzEncoding(
        n_logical=n, n_physical=n_phys, n_ancilla=len(plaquettes), fields=fields,
        parity_signs=signs, pair_of=tuple(pair_of), plaquettes=plaquettes,
        fixed_spins=tuple(fixed), transverse=tr, ancilla_transverse=atr,
        field_spin=field_spin, rows=tuple(tuple(r) for r in rows_idx),
    )


def induced_configuration(logical, enc: LhzEncoding) -> np.ndarray:
    """Physical + ancilla configuration representing a logical one.

    Ancillas take the orientation that compensates their plaquette sum.
    """
    s = np.asarray(logical, dtype=int)
    if enc.field_spin:
        if len(s) == enc.n_logical - 1:
            s = np.append(s, 1)
    if len(s) != enc.n_logical:
        raise ValueError(f"expected {enc.n_logical} logical spins, got {len(s)}")
    cfg = np.ones(enc.n_spins, dtype=int)
    for i, p in enumerate(enc.pair_of):
        if p is not None:
            cfg[i] = enc.parity_signs[i] * s[p[0]] * s[p[1]]
    for plaq in enc.plaquettes:
        total = cfg[list(plaq.corners)].sum()
        cfg[plaq.ancilla] = -1 if total > 0 else 1
    return cfg


def decode(config, enc: LhzEncoding) -> np.ndarray:
    """Recover the logical configuration encoded by a physical one.

    The returned vector is gauge-fixed: the first logical spin is +1, or,
    when local fields were folded in, the auxiliary field spin is +1 (and
    dropped from the result).
    """
    cfg = np.asarray(config, dtype=int)
    if len(cfg) not in (enc.n_physical, enc.n_spins):
        raise ValueError(f"configuration length {len(cfg)} does not match encoding")
    if not np.all(np.abs(cfg) == 1):
        raise ValueError("configuration entries must be +1 or -1")
    for i, _ in enc.fixed_spins:
        if cfg[i] != 1:
            raise DecodeError(f"fixed boundary spin {i} is not in its pinned orientation", spin=i)
    for p, plaq in enumerate(enc.plaquettes):
        if np.prod(cfg[list(plaq.corners)]) != -1:
            raise DecodeError(f"plaquette {p} {plaq.corners} violates odd parity", plaquette=p)

    n = enc.n_logical
    s = np.ones(n, dtype=int)
    for k in range(n - 1):
        i = enc.index_of(k, k + 1)
        s[k + 1] = s[k] * enc.parity_signs[i] * cfg[i]
    for i, p in enumerate(enc.pair_of):
        if p is not None and enc.parity_signs[i] * cfg[i] != s[p[0]] * s[p[1]]:
            raise DecodeError(f"physical spin {i} inconsistent with logical pair {p}", spin=i)
    if enc.field_spin:
        s = s * s[-1]
        return s[:-1]
    return s


def logical_energy(s, problem: LogicalProblem) -> float:
    s = np.asarray(s, dtype=float)
    if s.shape != (problem.n,):
        raise ValueError(f"expected {problem.n} spins")
    return float(problem.local_fields @ s + s @ problem.couplings @ s)


def brute_force_optimum(problem: LogicalProblem, chunk_bits: int = 18):
    """Exhaustive search over all 2**n logical configurations.

    Ties are broken towards the lexicographically smallest bit string with
    +1 read as bit 0 and the first spin most significant, so for a
    two-spin antiferromagnet ``(+1, -1)`` wins over ``(-1, +1)``.
    """
    n = problem.n
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    J, h = problem.couplings, problem.local_fields
    scale = 1.0 + np.abs(J).sum() + np.abs(h).sum()
    weights = 1 << np.arange(n - 1, -1, -1)
    best_e, best_k = np.inf, -1
    step = 1 << min(n, chunk_bits)
    for start in range(0, 1 << n, step):
        k = np.arange(start, start + step, dtype=np.int64)
        spins = 1.0 - 2.0 * ((k[:, None] & weights) > 0)
        energy = spins @ h + np.einsum("ij,ij->i", spins @ J, spins)
        idx = int(np.argmin(energy))
        # strict improvement only: earlier chunks hold smaller bit strings
        if energy[idx] < best_e - 1e-12 * scale:
            best_e, best_k = float(energy[idx]), int(k[idx])
    config = np.array([1 if not (best_k >> (n - 1 - j)) & 1 else -1 for j in range(n)])
    return config, logical_energy(config, problem)


def encoded_energy_identity_check(enc: LhzEncoding, problem: LogicalProblem, s) -> tuple[float, float]:
    """Return (physical field energy, logical energy) for a logical configuration."""
    cfg = induced_configuration(s, enc)
    idx = enc.problem_spins
    return float(enc.fields[idx] @ cfg[idx]), logical_energy(s, problem)


def problem_to_dict(problem: LogicalProblem) -> dict:
    out = {
        "n": problem.n,
        "couplings": [[mu, nu, v] for mu, nu, v in problem.pairs() if v != 0.0],
        "fields": [float(x) for x in problem.local_fields],
    }
    if problem.seed is not None:
        out["seed"] = problem.seed
    return out


def problem_from_dict(data: dict) -> LogicalProblem:
    try:
        n = int(data["n"])
        pairs = data.get("couplings", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed problem description: {exc}") from exc
    fields = data.get("fields") or None
    if fields is not None and len(fields) != n:
        raise ValueError("'fields' must have n entries")
    return LogicalProblem.from_pairs(n, pairs, fields, seed=data.get("seed"))


def encoding_to_dict(enc: LhzEncoding) -> dict:
    """Encoding in the problem-file format plus layout metadata.

    ``couplings`` lists the stabilizer constraint expanded into two-body
    terms at unit gap: 0.5 between corners and 1.0 corner-ancilla.
    """
    couplings = []
    for plaq in enc.plaquettes:
        for a, b in itertools.combinations(plaq.corners, 2):
            couplings.append([int(min(a, b)), int(max(a, b)), 0.5])
        for c in plaq.corners:
            couplings.append([int(c), int(plaq.ancilla), 1.0])
    return {
        "n": enc.n_spins,
        "couplings": couplings,
        "fields": [float(x) for x in enc.fields] + [0.0] * enc.n_ancilla,
        "n_logical": enc.n_logical,
        "n_physical": enc.n_physical,
        "n_ancilla": enc.n_ancilla,
        "parity_signs": [int(x) for x in enc.parity_signs],
        "pair_of": [list(p) if p is not None else None for p in enc.pair_of],
        "plaquettes": [{"corners": list(p.corners), "ancilla": p.ancilla} for p in enc.plaquettes],
        "fixed_spins": [[i, m] for i, m in enc.fixed_spins],
        "field_spin": enc.field_spin,
    }
