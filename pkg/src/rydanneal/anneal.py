"""Exact state-vector simulation of the odd-parity LHZ annealer.

Basis convention: bit ``i`` of a basis index is spin ``i`` (physical spins
first, then one ancilla per plaquette); bit value 0 is the sigma_z = +1
state. All energies and times are in units of the plaquette gap ``|gap|``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .krylov import expm_lanczos
from .lhz import LhzEncoding, LogicalProblem, encode
from .plaquette import validity_window

log = logging.getLogger(__name__)

MAX_QUBITS = 24
DENSE_SPECTRUM_QUBITS = 10
STABILIZER = "stabilizer"
TWOBODY = "twobody"


class StiffnessError(RuntimeError):
    pass


def _one_minus(s):
    return 1.0 - s


def _identity(s):
    return s


@dataclass(frozen=True)
class Schedule:
    """Sweep schedule over ``t in [0, total_time]`` with ``s = t / T``.

    ``normalized=False`` multiplies every coefficient by ``T``, giving the
    ``A_t = T - t, B_t = C_t = t`` form.
    """

    total_time: float
    a_form: Callable[[float], float] = _one_minus
    b_form: Callable[[float], float] = _identity
    c_form: Callable[[float], float] = _identity
    normalized: bool = True

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")

    def coefficients(self, s: float) -> np.ndarray:
        scale = 1.0 if self.normalized else self.total_time
        return scale * np.array([self.a_form(s), self.b_form(s), self.c_form(s)], dtype=float)


@dataclass(frozen=True)
class AnnealInstance:
    encoding: LhzEncoding
    constraint_form: str = STABILIZER
    alpha: float = 2.0
    beta: float = 1.0
    gap: float = 1.0
    rng_seed: int | None = None

    def __post_init__(self):
        if self.constraint_form not in (STABILIZER, TWOBODY):
            raise ValueError(f"unknown constraint form {self.constraint_form!r}")
        if self.constraint_form == TWOBODY and not validity_window(self.alpha, self.beta):
            raise ValueError(f"(alpha, beta) = ({self.alpha}, {self.beta}) outside the validity window")
        if self.gap == 0:
            raise ValueError("gap must be non-zero")

    @property
    def n_qubits(self) -> int:
        return self.encoding.n_spins

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def _spin_values(n_qubits: int, i: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    return (1 - 2 * ((idx >> i) & 1)).astype(np.int8)


class LhzHamiltonian:
    """Time-dependent Hamiltonian ``A*H_x + B*H_fields + C*H_constraint``.

    The diagonal parts are tabulated once; the transverse part is applied
    matrix-free by bit flips. A negative gap is handled by following the
    highest-energy state, i.e. by simulating ``-H``.
    """

    def __init__(self, inst: AnnealInstance):
        n = inst.n_qubits
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the state-vector limit of {MAX_QUBITS}")
        self.inst = inst
        self.n = n
        self.dim = 1 << n
        self.orientation = 1.0 if inst.gap > 0 else -1.0
        enc = inst.encoding
        self.x_coeffs = np.concatenate([enc.transverse, enc.ancilla_transverse]).astype(float)

        spins = [_spin_values(n, i) for i in range(n)]
        self.diag_fields = np.zeros(self.dim)
        for i in range(enc.n_physical):
            if enc.fields[i] != 0:
                self.diag_fields += enc.fields[i] * spins[i]
        self.diag_constraint = np.zeros(self.dim)
        for plaq in enc.plaquettes:
            c = [spins[k].astype(np.int16) for k in plaq.corners]
            tau = spins[plaq.ancilla].astype(np.int16)
            if inst.constraint_form == STABILIZER:
                stab = c[0] + c[1] + c[2] + c[3] + 2 * tau
                self.diag_constraint += (inst.gap / 4) * stab.astype(float) ** 2
            else:
                edges = c[0] * c[1] + c[1] * c[2] + c[2] * c[3] + c[3] * c[0]
                diag = c[0] * c[2] + c[1] * c[3]
                e = edges + inst.beta * diag + inst.alpha * tau * (c[0] + c[1] + c[2] + c[3])
                self.diag_constraint += (inst.gap / 2) * e
        self._x_sparse = None

    def diagonal(self, coeffs) -> np.ndarray:
        _, b, c = coeffs
        return self.orientation * (b * self.diag_fields + c * self.diag_constraint)

    def apply_x(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for i, a in enumerate(self.x_coeffs):
            if a != 0:
                out += a * psi.reshape(-1, 2, 1 << i)[:, ::-1, :].reshape(-1)
        return out

    def x_matrix(self) -> sp.csr_matrix:
        if self._x_sparse is None:
            idx = np.arange(self.dim, dtype=np.int64)
            rows, cols, vals = [], [], []
            for i, a in enumerate(self.x_coeffs):
                if a != 0:
                    rows.append(idx)
                    cols.append(idx ^ (1 << i))
                    vals.append(np.full(self.dim, a))
            self._x_sparse = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.dim, self.dim),
            )
        return self._x_sparse

    def apply(self, coeffs, psi: np.ndarray) -> np.ndarray:
        a = coeffs[0]
        return self.orientation * a * self.apply_x(psi) + self.diagonal(coeffs) * psi

    def matrix(self, coeffs) -> sp.csr_matrix:
        a = coeffs[0]
        return (self.orientation * a) * self.x_matrix() + sp.diags(self.diagonal(coeffs))

    def operator(self, coeffs):
        """Fast matvec closure for repeated application at fixed coefficients."""
        d = self.diagonal(coeffs)
        scale = self.orientation * coeffs[0]
        if self.dim <= 1 << 16:
            X = self.x_matrix()
            return lambda v: scale * (X @ v.real + 1j * (X @ v.imag)) + d * v
        return lambda v: scale * self.apply_x(v) + d * v


def apply_hamiltonian(inst: AnnealInstance, s: float, psi: np.ndarray,
                      schedule: Schedule | None = None) -> np.ndarray:
    """``H(s) psi`` for normalized sweep time ``s``."""
    ham = LhzHamiltonian(inst)
    sched = schedule or Schedule(1.0)
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (ham.dim,):
        raise ValueError(f"state has shape {psi.shape}, expected ({ham.dim},)")
    return ham.apply(sched.coefficients(s), psi)


def initial_state(inst: AnnealInstance) -> np.ndarray:
    """Ground state of the transverse term: every spin along -x (or +x)."""
    ham = LhzHamiltonian(inst)
    n = ham.n
    psi = np.ones(1, dtype=complex)
    for i in range(n):
        a = ham.orientation * ham.x_coeffs[i]
        sign = -1.0 if a > 0 else 1.0
        # bit i is the slowest-varying axis after kron with the lower bits
        psi = np.kron(np.array([1.0, sign]) / math.sqrt(2), psi)
    return psi


# fourth-order commutator-free Magnus: two exponentials at Gauss nodes
_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_W_LO = 0.25 - math.sqrt(3) / 6
_W_HI = 0.25 + math.sqrt(3) / 6


@dataclass
class EvolutionResult:
    psi: np.ndarray
    norm_drift: float
    steps: int
    rejected: int
    matvecs: int
    trajectory: list = field(default_factory=list)


def _cf4_step(ham: LhzHamiltonian, schedule: Schedule, psi, t, h, ktol):
    T = schedule.total_time
    c1 = schedule.coefficients((t + _GAUSS[0] * h) / T)
    c2 = schedule.coefficients((t + _GAUSS[1] * h) / T)
    u, n1 = expm_lanczos(ham.operator(_W_HI * c1 + _W_LO * c2), psi, h, ktol)
    u, n2 = expm_lanczos(ham.operator(_W_LO * c1 + _W_HI * c2), u, h, ktol)
    return u, n1 + n2


def evolve(inst: AnnealInstance, schedule: Schedule, dt_max: float = 4.0, tol: float = 1e-4,
           psi0: np.ndarray | None = None, sample_s=None, k_spectrum: int = 0,
           ham: LhzHamiltonian | None = None) -> EvolutionResult:
    """Integrate the Schroedinger equation across the sweep.

    Steps use a fourth-order commutator-free Magnus scheme. The local error
    is estimated by step doubling and each step must satisfy
    ``err <= tol * h / T``, so ``tol`` bounds the accumulated error of the
    final state. No renormalization is applied.

    ``sample_s`` lists normalized times at which the trajectory records
    ``(s, energies, P0)``; the step sequence is forced to hit them.
    """
    ham = ham or LhzHamiltonian(inst)
    T = schedule.total_time
    if psi0 is None:
        psi = initial_state(inst)
    else:
        psi = np.array(psi0, dtype=complex)
        if psi.shape != (ham.dim,):
            raise ValueError(f"initial state has shape {psi.shape}, expected ({ham.dim},)")
        if abs(np.linalg.norm(psi) - 1) > 1e-10:
            raise ValueError("initial state is not normalized")
    stops = sorted({float(s) for s in (sample_s or [])} | {1.0})
    ground_idx = final_ground_indices(inst, ham=ham, schedule=schedule)

    traj = []

    def record(s):
        if sample_s is not None and any(abs(s - x) < 1e-12 for x in sample_s):
            energies = instantaneous_spectrum(inst, s, k_spectrum, schedule=schedule, ham=ham) if k_spectrum else []
            traj.append((s, list(energies), float(np.sum(np.abs(psi[ground_idx]) ** 2))))

    record(0.0)
    t, dt = 0.0, min(dt_max, T)
    steps = rejected = matvecs = 0
    max_drift = 0.0
    for stop in stops:
        t_stop = stop * T
        while t < t_stop - 1e-12 * T:
            h = min(dt, t_stop - t)
            allowed = tol * h / T
            ktol = max(1e-14, min(1e-10, 1e-3 * allowed))
            big, n1 = _cf4_step(ham, schedule, psi, t, h, ktol)
            mid, n2 = _cf4_step(ham, schedule, psi, t, h / 2, ktol)
            fine, n3 = _cf4_step(ham, schedule, mid, t + h / 2, h / 2, ktol)
            matvecs += n1 + n2 + n3
            err = np.linalg.norm(fine - big) / 15
            factor = 0.9 * (allowed / max(err, 1e-300)) ** 0.25
            if err <= allowed:
                t += h
                psi = fine
                steps += 1
                max_drift = max(max_drift, abs(np.linalg.norm(psi) - 1))
                if h == dt:
                    dt = min(dt_max, dt * min(2.0, factor))
            else:
                rejected += 1
                dt = h * max(0.2, factor)
                if dt < 1e-10 * T:
                    raise StiffnessError(f"step size underflow at t={t:.6g} (dt={dt:.3g})")
        t = t_stop
        record(stop)
    return EvolutionResult(psi, max_drift, steps, rejected, matvecs, traj)


def final_ground_indices(inst: AnnealInstance, ham: LhzHamiltonian | None = None,
                         schedule: Schedule | None = None, rtol: float = 1e-9) -> np.ndarray:
    ham = ham or LhzHamiltonian(inst)
    sched = schedule or Schedule(1.0)
    d = ham.diagonal(sched.coefficients(1.0))
    e0 = d.min()
    return np.flatnonzero(d <= e0 + rtol * max(1.0, abs(e0)))


def success_probability(psi: np.ndarray, inst: AnnealInstance, ham: LhzHamiltonian | None = None) -> float:
    """Population of the final (classical) ground manifold."""
    idx = final_ground_indices(inst, ham)
    return float(np.sum(np.abs(psi[idx]) ** 2))


def instantaneous_spectrum(inst: AnnealInstance, s: float, k: int = 2,
                           schedule: Schedule | None = None,
                           ham: LhzHamiltonian | None = None) -> np.ndarray:
    """The ``k`` lowest levels of ``H(s)`` relative to the ground energy."""
    ham = ham or LhzHamiltonian(inst)
    if k < 1 or k > ham.dim:
        raise ValueError(f"k={k} must lie in [1, {ham.dim}]")
    coeffs = (schedule or Schedule(1.0)).coefficients(s)
    if coeffs[0] == 0:
        d = np.sort(ham.diagonal(coeffs))[:k]
    elif ham.n <= DENSE_SPECTRUM_QUBITS or k >= ham.dim - 1:
        d = np.linalg.eigvalsh(ham.matrix(coeffs).toarray())[:k]
    else:
        v0 = np.ones(ham.dim) / math.sqrt(ham.dim)
        vals = eigsh(ham.matrix(coeffs), k=k, which="SA", v0=v0, tol=1e-12,
                     return_eigenvectors=False)
        d = np.sort(vals)
    return d - d[0]


def gap_profile(inst: AnnealInstance, s_grid, schedule: Schedule | None = None,
                ham: LhzHamiltonian | None = None) -> np.ndarray:
    ham = ham or LhzHamiltonian(inst)
    return np.array([instantaneous_spectrum(inst, s, 2, schedule, ham)[1] for s in s_grid])


def minimum_gap(inst: AnnealInstance, n_grid: int = 101, schedule: Schedule | None = None):
    """Locate the minimal first-excitation gap over the sweep.

    Returns ``(s_min, gap_min, gap_final)`` with ``s_min`` refined between
    the neighbours of the coarse-grid minimum.
    """
    from scipy.optimize import minimize_scalar

    ham = LhzHamiltonian(inst)
    grid = np.linspace(0.0, 1.0, n_grid)
    gaps = gap_profile(inst, grid, schedule, ham)
    j = int(np.argmin(gaps))
    s_min, g_min = float(grid[j]), float(gaps[j])
    if 0 < j < n_grid - 1:
        res = minimize_scalar(lambda s: instantaneous_spectrum(inst, s, 2, schedule, ham)[1],
                              bounds=(grid[j - 1], grid[j + 1]), method="bounded",
                              options={"xatol": 1e-6})
        if res.fun < g_min:
            s_min, g_min = float(res.x), float(res.fun)
    return s_min, g_min, float(gaps[-1])


@dataclass(frozen=True)
class EnsembleConfig:
    n_instances: int = 40
    n_logical: int = 4
    field_range: tuple[float, float] = (-0.5, 0.5)
    total_times: tuple[float, ...] = (50.0, 100.0, 150.0)
    seed: int = 0
    transverse: float = 1.0
    ancilla_transverse: float = 1.0
    fixed_field: float = 5.0
    constraint_form: str = STABILIZER
    alpha: float = 2.0
    beta: float = 1.0
    gap: float = 1.0
    dt_max: float = 4.0
    tol: float = 1e-4


@dataclass(frozen=True)
class EnsembleRow:
    total_time: float
    instance_id: int
    p0: float
    norm_drift: float


def ensemble_problems(cfg: EnsembleConfig) -> list[LogicalProblem]:
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.n_instances)
    lo, hi = cfg.field_range
    return [LogicalProblem.random(cfg.n_logical, np.random.default_rng(sq), lo, hi) for sq in seqs]


def ensemble_instance(cfg: EnsembleConfig, problem: LogicalProblem, instance_id: int) -> AnnealInstance:
    enc = encode(problem, cfg.fixed_field, cfg.transverse, cfg.ancilla_transverse)
    return AnnealInstance(enc, cfg.constraint_form, cfg.alpha, cfg.beta, cfg.gap, rng_seed=instance_id)


def _run_one(args):
    cfg, problem, instance_id = args
    inst = ensemble_instance(cfg, problem, instance_id)
    ham = LhzHamiltonian(inst)
    rows = []
    for T in cfg.total_times:
        res = evolve(inst, Schedule(float(T)), cfg.dt_max, cfg.tol, ham=ham)
        rows.append(EnsembleRow(float(T), instance_id, success_probability(res.psi, inst, ham), res.norm_drift))
    return rows


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    rows: list[EnsembleRow]

    def p0(self, total_time: float) -> np.ndarray:
        return np.array([r.p0 for r in self.rows if r.total_time == total_time])

    def stats(self) -> dict[float, dict]:
        out = {}
        for T in self.config.total_times:
            p = self.p0(float(T))
            counts, edges = np.histogram(p, bins=10, range=(0.0, 1.0))
            out[float(T)] = {"mean": float(p.mean()), "std": float(p.std()),
                             "histogram": counts.tolist(), "bin_edges": edges.tolist()}
        return out


def run_ensemble(cfg: EnsembleConfig, workers: int = 1) -> EnsembleResult:
    """Anneal ``cfg.n_instances`` random instances at every sweep time.

    Instances are independent; results are sorted by (T, instance_id) so
    the table does not depend on ``workers``.
    """
    problems = ensemble_problems(cfg)
    jobs = [(cfg, p, i) for i, p in enumerate(problems)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_one, jobs))
    else:
        chunks = [_run_one(j) for j in jobs]
    rows = sorted((r for c in chunks for r in c), key=lambda r: (r.total_time, r.instance_id))
    return EnsembleResult(cfg, rows)


def with_fields(inst: AnnealInstance, fields) -> AnnealInstance:
    enc = inst.encoding
    f = np.array(fields, dtype=float)
    f.setflags(write=False)
    return replace(inst, encoding=replace(enc, fields=f))
