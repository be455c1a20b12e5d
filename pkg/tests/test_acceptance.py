"""End-to-end acceptance criteria, one test per criterion."""
import itertools
import json
import math
import time
import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from rydanneal import cli
from rydanneal.anneal import (AnnealInstance, EnsembleConfig, LhzHamiltonian, Schedule, ensemble_instance,
                              ensemble_problems, final_ground_indices, minimum_gap)
from rydanneal.dressing import (DEFAULT_CASES, DressedPairSystem, Laser, epsilon, figure_of_merit,
                                fourth_order_interaction, interaction_table, validity_ratio)
from rydanneal.lhz import LogicalProblem, brute_force_optimum, decode, encode
from rydanneal.plaquette import (PlaquetteParams, all_configs, ground_manifold, odd_ground_states,
                                 plaquette_energy, stabilizer_energy)
from rydanneal.structure.atoms import RydbergState, level_energy
from rydanneal.structure.pair import Cutoffs, build_pair_basis, diagonalize_pair, find_wells

pytestmark = pytest.mark.acceptance

TOTAL_TIMES = (50.0, 100.0, 150.0)


def run_cli(argv):
    code = cli.main(argv)
    assert code == 0, f"CLI exited with {code}"


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture(scope="module")
def ensemble_run(tmp_path_factory):
    """The 40-instance ensemble through the pipeline, run once for criteria 4 and 5."""
    root = tmp_path_factory.mktemp("ensemble")
    out = root / "out"
    t0 = time.perf_counter()
    run_cli(["ensemble", "--out", str(out), "--threads", "1"])
    elapsed = time.perf_counter() - t0
    rows = (out / "ensemble.csv").read_text().splitlines()[1:]
    p0 = {T: [] for T in TOTAL_TIMES}
    for line in rows:
        T, _, p, _ = line.split(",")
        p0[float(T)].append(float(p))
    summary = json.loads((out / "ensemble_summary.json").read_text())
    return {T: np.array(v) for T, v in p0.items()}, summary["max_norm_drift"], elapsed


def test_criterion_01_plaquette_analytics(verdict):
    t0 = time.perf_counter()
    alphas = [F(4 * k, 20) for k in range(21)]
    betas = [F(3 * k, 40) for k in range(21)]
    odd = odd_ground_states()
    formula_err, mismatches = 0.0, []
    for a, b in itertools.product(alphas, betas):
        p = PlaquetteParams(float(a), float(b))
        af, bf = float(a), float(b)
        for cfg in all_configs():
            e = plaquette_energy(cfg, p)
            total = cfg.corner_sum
            if abs(total) == 2:
                ref = 2 * af if cfg.ancilla == np.sign(total) else -2 * af
            elif abs(total) == 4:
                ref = 4 + 2 * bf + 4 * af * cfg.ancilla * np.sign(total)
            elif cfg.corners[0] == cfg.corners[2]:
                ref = -4 + 2 * bf  # alternating corners around the square
            else:
                ref = -2 * bf
            formula_err = max(formula_err, abs(e - ref))
        claimed = 0 < 2 - b < a < 2 + 2 * b and 0 < b <= 1
        if (ground_manifold(p) == odd) != claimed:
            mismatches.append((float(a), float(b)))
    elapsed = time.perf_counter() - t0
    ok = formula_err <= 1e-12 and not mismatches and elapsed < 1.0
    detail = (f"formula error {formula_err:.1e}, window mismatches {len(mismatches)}/441 "
              f"(e.g. {mismatches[:3]}), {elapsed:.2f} s")
    verdict(1, "plaquette analytics", ok, detail)


def test_criterion_02_stabilizer_equivalence(verdict):
    p = PlaquetteParams(2.0, 1.0)
    worst = 0.0
    for gap in (1.0, -0.02, 3.7):
        for cfg in all_configs():
            lhs = gap / 2 * plaquette_energy(cfg, p)
            rhs = gap / 4 * stabilizer_energy(cfg) - 2 * gap
            worst = max(worst, abs(lhs - rhs))
    verdict(2, "stabilizer equivalence", worst <= 1e-12, f"max deviation {worst:.1e} over 32 configurations")


def test_criterion_03_encoding_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for k in range(100):
        n = int(rng.choice([3, 4, 5]))
        problem = LogicalProblem.random(n, rng)
        inst = AnnealInstance(encode(problem))
        ham = LhzHamiltonian(inst)
        d = ham.diagonal(Schedule(1.0).coefficients(1.0))
        g = int(np.argmin(d))
        spins = np.array([1 - 2 * ((g >> i) & 1) for i in range(ham.n)])
        s = decode(spins[: inst.encoding.n_physical], inst.encoding)
        best, _ = brute_force_optimum(problem)
        failures += not (np.array_equal(s, best) or np.array_equal(s, -best))
    elapsed = time.perf_counter() - t0
    verdict(3, "encoding oracle", failures == 0 and elapsed < 60,
            f"{100 - failures}/100 decode to the brute-force optimum, {elapsed:.1f} s")


def test_criterion_04_annealing_statistics(verdict, ensemble_run):
    p0, drift, elapsed = ensemble_run
    means = [float(p0[T].mean()) for T in TOTAL_TIMES]
    sizes = {len(p0[T]) for T in TOTAL_TIMES}
    checks = {
        "40 instances": sizes == {40},
        "mean(T=50) in [0.60, 0.90]": 0.60 <= means[0] <= 0.90,
        "increasing in T": means[0] < means[1] < means[2],
        "mean(T=150) >= 0.85": means[2] >= 0.85,
        "norm drift < 1e-6": drift < 1e-6,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"means {', '.join(f'{m:.3f}' for m in means)} at T = 50/100/150, drift {drift:.1e}, "
              f"{elapsed:.0f} s" + (f"; failed: {'; '.join(failed)}" if failed else ""))
    verdict(4, "annealing statistics", not failed, detail)


def test_criterion_05_gap_structure(verdict):
    cfg = EnsembleConfig()
    good = 0
    for i, problem in enumerate(ensemble_problems(cfg)):
        s_min, g_min, g_final = minimum_gap(ensemble_instance(cfg, problem, i))
        good += 0 < s_min < 1 and g_min <= g_final / 2
    verdict(5, "spectrum qualitative check", good >= 35,
            f"{good}/40 instances have an interior minimum gap at most half the final gap (need 35)")


def test_criterion_06_dressing_arithmetic(verdict):
    t0 = time.perf_counter()
    fom = [figure_of_merit(c.l1, c.l2, c.c, c.delta, c.gamma) for c in DEFAULT_CASES]
    case1 = DEFAULT_CASES[0]
    e4 = 1e3 * fourth_order_interaction(case1.l1, case1.l2, case1.c, case1.delta, check=False)
    elapsed = time.perf_counter() - t0
    ok = (abs(fom[0] / 8.0e2 - 1) <= 0.1 and abs(fom[1] / 1.9e3 - 1) <= 0.1
          and 0.5 <= fom[2] / 2.1e3 <= 2 and abs(abs(e4) / 40 - 1) <= 0.1 and elapsed < 1)
    verdict(6, "dressing arithmetic", ok,
            f"FoM {fom[0]:.0f} / {fom[1]:.0f} / {fom[2]:.0f}, |E4| case 1 = {abs(e4):.2f} kHz")


def test_criterion_07_table_mapping(verdict):
    t = interaction_table(-40.0, -40.0, -80.0)
    ok = (t.alpha, t.beta, t.gap) == (2.0, 1.0, -20.0) and t.valid
    verdict(7, "interaction-table mapping", ok, f"(alpha, beta, gap) = ({t.alpha}, {t.beta}, {t.gap} kHz)")


def test_criterion_08_perturbative_consistency(verdict):
    rng = np.random.default_rng(8)
    errors = []
    while len(errors) < 200:
        l1 = Laser(rng.uniform(5, 40), rng.choice([-1, 1]) * rng.uniform(200, 900))
        l2 = Laser(rng.uniform(5, 40), rng.choice([-1, 1]) * rng.uniform(200, 900))
        # skip near-cancelling detuning sums, where the two-photon amplitude itself vanishes
        if abs(1 / l1.detuning + 1 / l2.detuning) < 0.5 / min(abs(l1.detuning), abs(l2.detuning)):
            continue
        c = rng.uniform(0.05, 1.0)
        delta = rng.choice([-1, 1]) * rng.uniform(20, 200) / validity_ratio(l1, l2, c, 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            e4 = fourth_order_interaction(l1, l2, c, delta)
        full = DressedPairSystem(l1, l2, [delta], [c]).interaction()
        errors.append(abs(full - e4) / abs(e4))
    errors = np.array(errors)
    bad = int(np.count_nonzero(errors > 0.05))
    verdict(8, "perturbation/diagonalization consistency", bad == 0,
            f"{200 - bad}/200 within 5% (median {np.median(errors):.3f}, worst {errors.max():.2f})")


def well_depth(window):
    target = RydbergState("Rb", 39, 1, F(3, 2), F(-1, 2))
    basis = build_pair_basis((target, target), Cutoffs(energy_window=window, delta_n=3, l_max=3, delta_m=2), 26.0)
    curve = diagonalize_pair(basis, np.linspace(1.0, 2.6, 41))
    wells = find_wells(curve, 0.2)
    if not wells:
        return None, None
    mu, r, e, w = max(wells, key=lambda x: x[3])
    return (mu, r, e, w), curve.energies[-1, mu] - e


def structure_errors():
    """Measured errors of the exact-structure parts: Hermiticity, sparsity, Cartesian and 2x2 oracles."""
    from test_pair import DIPOLE_UNIT, Hydrogenic, cartesian_angular, random_state
    from rydanneal.structure.pair import PairBasis, dipole_dipole_element, interaction_matrix, pair_hamiltonian

    target = RydbergState("Rb", 39, 1, F(3, 2), F(-1, 2))
    basis = build_pair_basis((target, target), Cutoffs(energy_window=6000.0, delta_n=2, delta_m=4), 26.0)
    herm = 0.0
    for theta, phi in ((math.pi / 2, 0.0), (0.7, 1.1), (2.3, 4.0)):
        H = pair_hamiltonian(basis, 1.3, interaction_matrix(basis, theta, phi))
        herm = max(herm, np.max(np.abs(H - H.conj().T)) / np.max(np.abs(H)))
    K = interaction_matrix(basis)
    leaks = 0
    for (i, (a, b)), (k, (c, d)) in itertools.product(enumerate(basis.states), repeat=2):
        allowed = abs(a.l - c.l) == 1 and abs(b.l - d.l) == 1 and (a.mj + b.mj - c.mj - d.mj) in (0, 2, -2)
        leaks += (not allowed) and K[i, k] != 0

    rng = np.random.default_rng(9)
    radial = Hydrogenic()
    cart_err, n = 0.0, 0
    while n < 100:
        a, b, c, d = (random_state(rng) for _ in range(4))
        if abs(a.l - c.l) != 1 or abs(b.l - d.l) != 1:
            continue
        theta, phi, R = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi), rng.uniform(0.5, 5)
        u = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        d1, d2 = cartesian_angular(a, c) * radial(a, c), cartesian_angular(b, d) * radial(b, d)
        ref = (d1 @ d2 - 3 * (d1 @ u) * (d2 @ u)) * DIPOLE_UNIT / R**3
        got = dipole_dipole_element((a, b), (c, d), R, theta, phi, radial)
        if abs(ref) > 1e-12 * DIPOLE_UNIT:
            cart_err = max(cart_err, abs(got - ref) / abs(ref))
            n += 1

    two = PairBasis([(target, target), (target, target)], (target, target), Cutoffs(), 0.0, np.zeros(2))
    two.energies = np.array([two.target_energy, two.target_energy + 6.0])
    r = np.linspace(0.5, 3.0, 11)
    curve = diagonalize_pair(two, r, K=np.array([[0, 7.0], [7.0, 0]]))
    root = np.sqrt(9 + 49 / r**6)
    oracle = max(np.max(np.abs(curve.energies.min(axis=1) - (3 - root))),
                 np.max(np.abs(curve.energies.max(axis=1) - (3 + root))))
    return herm, leaks, cart_err, oracle


def test_criterion_09_pair_structure(verdict):
    herm, leaks, cart_err, oracle = structure_errors()
    (mu, r, e, w), depth = well_depth(40000.0)
    _, depth2 = well_depth(80000.0)
    # S-pair channel with the same total M as the target
    s39, s40 = RydbergState("Rb", 39, 0, F(1, 2), F(-1, 2)), RydbergState("Rb", 40, 0, F(1, 2), F(-1, 2))
    p39 = RydbergState("Rb", 39, 1, F(3, 2), F(-1, 2))
    forster = level_energy(s39, 26.0) + level_energy(s40, 26.0) - 2 * level_energy(p39, 26.0)
    change = abs(depth2 / depth - 1)
    ok = (herm <= 1e-12 and leaks == 0 and cart_err <= 1e-10 and oracle <= 1e-10
          and w > 0.2 and abs(e - forster) < depth and change < 0.05)
    verdict(9, "pair-Hamiltonian structure", ok,
            f"hermiticity {herm:.1e}, forbidden elements {leaks}, Cartesian oracle {cart_err:.1e}, "
            f"2x2 oracle {oracle:.1e}; well at R = {r:.2f} um, E = {e:.1f} MHz (S-pair channel {forster:.1f} MHz), "
            f"|c|^2 = {w:.2f}, depth {depth:.2f} -> {depth2:.2f} MHz on window doubling ({100 * change:.2f}%)")


def test_criterion_10_determinism(verdict, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", {"ensemble": {"n_instances": 6, "total_times": list(TOTAL_TIMES)}})
    blobs = []
    for k, threads in enumerate((1, 1, 8)):
        out = tmp_path / f"run{k}"
        run_cli(["ensemble", "--config", cfg, "--out", str(out), "--threads", str(threads)])
        blobs.append((out / "ensemble.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    verdict(10, "determinism", ok, "ensemble.csv byte-identical across two runs and threads {1, 8} "
            f"({len(blobs[0])} bytes, 6 instances x 3 sweep times)" if ok else "ensemble.csv differs")
