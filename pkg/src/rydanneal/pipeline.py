"""Config-driven pipeline: problem -> encoding -> constraint parameters -> dynamics.

Every stage writes its artifacts into one output directory; the run manifest
is written last with an atomic rename.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .anneal import (STABILIZER, AnnealInstance, EnsembleConfig, LhzHamiltonian, Schedule, evolve,
                     minimum_gap, run_ensemble)
from .dressing import (DEFAULT_CASES, DressingCase, Laser, extract_interaction_table, interaction_table,
                       vertical_offset_solve)
from .lhz import LogicalProblem, encode, encoding_to_dict, problem_from_dict, problem_to_dict
from .plaquette import spectrum_rows, validity_window

log = logging.getLogger(__name__)

STAGES = ("encode", "plaquette", "structure", "dressing", "anneal", "ensemble")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WINDOW = 3
EXIT_RESONANCE = 4
EXIT_NUMERICAL = 5
EXIT_CROSSTALK = 6


class ConfigError(ValueError):
    pass


class WindowError(ValueError):
    pass


FLOAT_FMT = "%.10e"


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % x
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


DEFAULT_CONFIG = {
    "seed": 0,
    "problem": {"n": 4, "random": {"low": -0.5, "high": 0.5}},
    "encoding": {"fixed_field": 5.0, "transverse": 1.0, "ancilla_transverse": 1.0},
    "plaquette": {"alpha": 2.0, "beta": 1.0, "constraint_form": STABILIZER,
                  "alphas": [0.0, 4.0, 21], "betas": [0.0, 1.5, 16]},
    "structure": {"species": "Rb", "n": 39, "l": 1, "j": "3/2", "mj": "-1/2", "b_gauss": 26.0,
                  "cutoffs": {"energy_window": 30000.0, "delta_n": 3, "l_max": 3, "delta_m": 2},
                  "r_grid": [1.0, 2.6, 41]},
    "dressing": {"a_L_um": 0.89, "r_peak_a_um": 0.66,
                 "interactions_kHz": {"U_s_aL": -40.0, "U_s_sqrt2_aL": -40.0, "U_a_aL_over_sqrt2": -80.0}},
    "anneal": {"total_time": 50.0, "samples": 51, "k_spectrum": 4, "tol": 1e-4, "dt_max": 4.0},
    "ensemble": {"n_instances": 40, "total_times": [50.0, 100.0, 150.0], "tol": 1e-4, "dt_max": 4.0},
}


def merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _flat_aliases(user: dict) -> dict:
    """Accept the flat problem-file form: n/couplings/fields plus T, a, constraint_form."""
    user = dict(user)
    problem = {k: user.pop(k) for k in ("n", "couplings", "fields") if k in user}
    if problem:
        user["problem"] = {**user.get("problem", {}), **problem}
    if "T" in user:
        times = user.pop("T")
        times = [times] if isinstance(times, (int, float)) else list(times)
        user.setdefault("ensemble", {})["total_times"] = times
        user.setdefault("anneal", {})["total_time"] = times[0]
    if "a" in user:
        a = user.pop("a")
        user.setdefault("encoding", {}).update(transverse=a, ancilla_transverse=a)
    if "constraint_form" in user:
        user.setdefault("plaquette", {})["constraint_form"] = user.pop("constraint_form")
    return user


def load_config(path: str | os.PathLike | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        with open(path) as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    user = _flat_aliases(user)
    unknown = set(user) - set(DEFAULT_CONFIG) - {"stages"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return merge(DEFAULT_CONFIG, user)


@dataclass
class RunContext:
    config: dict
    out: Path
    threads: int = 1
    cache_dir: Path | None = None
    artifacts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    started: float = field(default_factory=time.time)
    state: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return sha256_bytes(canonical_json(self.config).encode())

    @property
    def run_id(self) -> str:
        return self.config_hash[:16]

    def write(self, name: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
        self.artifacts[name] = sha256_bytes(text.encode())
        return path

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, json.dumps({"run_id": self.run_id, **obj}, indent=2, sort_keys=True) + "\n")


def build_problem(cfg: dict) -> LogicalProblem:
    p = cfg["problem"]
    try:
        if "couplings" in p:
            return problem_from_dict(p)
        n = int(p["n"])
        rnd = p.get("random", {})
        rng = np.random.default_rng(int(cfg["seed"]))
        return LogicalProblem.random(n, rng, float(rnd.get("low", -0.5)), float(rnd.get("high", 0.5)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from None


def stage_encode(ctx: RunContext):
    problem = build_problem(ctx.config)
    e = ctx.config["encoding"]
    try:
        enc = encode(problem, float(e["fixed_field"]), float(e["transverse"]), float(e["ancilla_transverse"]))
    except ValueError as exc:
        raise ConfigError(f"encoding: {exc}") from None
    ctx.state["problem"], ctx.state["encoding"] = problem, enc
    ctx.write_json("problem.json", problem_to_dict(problem))
    ctx.write_json("encoding.json", encoding_to_dict(enc))
    log.info("encode: %d logical -> %d physical + %d ancilla spins", problem.n, enc.n_physical, enc.n_ancilla)


def _grid(bounds):
    lo, hi, num = bounds
    return np.linspace(float(lo), float(hi), int(num))


def constraint_params(ctx: RunContext) -> tuple[float, float]:
    table = ctx.state.get("table")
    if table is not None:
        return table.alpha, table.beta
    p = ctx.config["plaquette"]
    return float(p["alpha"]), float(p["beta"])


def stage_plaquette(ctx: RunContext):
    p = ctx.config["plaquette"]
    rows = spectrum_rows(_grid(p["alphas"]), _grid(p["betas"]))
    ctx.write("plaquette_spectrum.csv", csv_text(["alpha", "beta", "label", "energy", "run_id"],
                                                  [(*r, ctx.run_id) for r in rows]))


def stage_structure(ctx: RunContext):
    from fractions import Fraction

    from .structure.atoms import RydbergState, data_hash
    from .structure.cache import CurveCache
    from .structure.pair import Cutoffs, build_pair_basis, diagonalize_pair, default_radial, find_wells

    s = ctx.config["structure"]
    try:
        state = RydbergState(s["species"], int(s["n"]), int(s["l"]), Fraction(str(s["j"])), Fraction(str(s["mj"])))
        cut = Cutoffs(**s["cutoffs"])
        r_grid = _grid(s["r_grid"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"structure: {exc}") from None
    meta = {"species": state.species, "target": [state.to_dict(), state.to_dict()], "cutoffs": cut.to_dict(),
            "b_gauss": float(s["b_gauss"]), "theta": math.pi / 2, "phi": 0.0,
            "r_grid": [float(x) for x in s["r_grid"]], "provider": default_radial().provider_id,
            "data_sha256": data_hash(), "version": 1}
    cache = CurveCache(ctx.cache_dir)
    curve = cache.load(meta)
    if curve is not None:
        log.info("structure: cache hit; structure stage skipped")
        ctx.notes.append("structure cache hit")
    else:
        basis = build_pair_basis((state, state), cut, float(s["b_gauss"]))
        log.info("structure: %d pair states, %d distances", len(basis), len(r_grid))
        curve = diagonalize_pair(basis, r_grid)
        cache.store(meta, curve)
    ctx.state["curve"] = curve
    ctx.write("curves.csv", csv_text(["R_um", "mu", "E_MHz", "weight", "run_id"],
                                     [(*r, ctx.run_id) for r in curve.csv_rows() if r[3] > 1e-4]))
    wells = find_wells(curve, 0.2)
    ctx.write_json("wells.json", {"wells": [dict(zip(("state", "R_um", "E_MHz", "weight"), w)) for w in wells]})


def stage_dressing(ctx: RunContext):
    d = ctx.config["dressing"]
    cases = DEFAULT_CASES
    if "cases" in d:
        try:
            cases = tuple(DressingCase(c["name"], Laser(**c["laser_1"]), Laser(**c["laser_2"]), float(c["delta_mhz"]),
                                       float(c["c"]), float(c["lifetime_us"])) for c in d["cases"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"dressing.cases: {exc}") from None
    reports = [c.report() for c in cases]
    u = d.get("interactions_kHz")
    a_L = float(d["a_L_um"])
    if u is not None:
        table = interaction_table(float(u["U_s_aL"]), float(u["U_s_sqrt2_aL"]), float(u["U_a_aL_over_sqrt2"]))
    else:
        # perturbative estimates in case order: Rb-Rb at a_L, Rb-Rb at sqrt(2) a_L, Rb-Cs
        e4 = [r["E4_kHz"] for r in reports]
        table = interaction_table(e4[0], e4[1], e4[2])
    if "profile" in d:
        # tabulated U(R) (kHz) for cross-talk checking: {"R_um": [...], "U_s": [...], "U_a": [...]}
        prof = d["profile"]
        r = np.asarray(prof["R_um"], dtype=float)
        us = lambda x: float(np.interp(x, r, prof["U_s"], left=0.0, right=0.0))
        ua = lambda x: float(np.interp(x, r, prof["U_a"], left=0.0, right=0.0))
        z = vertical_offset_solve(float(d.get("r_peak_a_um", a_L / math.sqrt(2))), a_L)
        table = extract_interaction_table(us, ua, a_L, z=z)
    ctx.state["table"] = table
    out = {"table": table.to_dict(), "cases": reports, "a_L_um": a_L}
    if "r_peak_a_um" in d:
        out["vertical_offset_um"] = vertical_offset_solve(float(d["r_peak_a_um"]), a_L)
    ctx.write_json("interaction_table.json", out)
    if not table.valid:
        raise WindowError(f"dressing: (alpha, beta) = ({table.alpha:.6g}, {table.beta:.6g}) outside validity window")


def _check_window(ctx: RunContext):
    alpha, beta = constraint_params(ctx)
    if not validity_window(alpha, beta):
        raise WindowError(f"plaquette: (alpha, beta) = ({alpha:.6g}, {beta:.6g}) outside validity window")
    return alpha, beta


def _instance(ctx: RunContext) -> AnnealInstance:
    if "encoding" not in ctx.state:
        stage_encode(ctx)
    alpha, beta = _check_window(ctx)
    form = ctx.config["plaquette"]["constraint_form"]
    try:
        return AnnealInstance(ctx.state["encoding"], form, alpha, beta, 1.0, rng_seed=int(ctx.config["seed"]))
    except ValueError as exc:
        raise ConfigError(f"anneal: {exc}") from None


def stage_anneal(ctx: RunContext):
    inst = _instance(ctx)
    a = ctx.config["anneal"]
    samples = [float(x) for x in np.linspace(0.0, 1.0, int(a["samples"]))]
    k = int(a["k_spectrum"])
    ham = LhzHamiltonian(inst)
    res = evolve(inst, Schedule(float(a["total_time"])), float(a["dt_max"]), float(a["tol"]),
                 sample_s=samples, k_spectrum=k, ham=ham)
    header = ["s"] + [f"E{i}" for i in range(k)] + ["P0", "run_id"]
    rows = [(s, *energies, p0, ctx.run_id) for s, energies, p0 in res.trajectory]
    ctx.write("trajectory.csv", csv_text(header, rows))
    s_min, g_min, g_fin = minimum_gap(inst)
    ctx.write_json("anneal_summary.json", {"total_time": float(a["total_time"]), "P0": rows[-1][-2],
                                           "norm_drift": res.norm_drift, "steps": res.steps,
                                           "s_min": s_min, "gap_min": g_min, "gap_final": g_fin})


def stage_ensemble(ctx: RunContext):
    alpha, beta = _check_window(ctx)
    e, enc, p = ctx.config["ensemble"], ctx.config["encoding"], ctx.config["plaquette"]
    rnd = ctx.config["problem"].get("random", {})
    try:
        cfg = EnsembleConfig(n_instances=int(e["n_instances"]), n_logical=int(ctx.config["problem"]["n"]),
                             field_range=(float(rnd.get("low", -0.5)), float(rnd.get("high", 0.5))),
                             total_times=tuple(float(t) for t in e["total_times"]), seed=int(ctx.config["seed"]),
                             transverse=float(enc["transverse"]), ancilla_transverse=float(enc["ancilla_transverse"]),
                             fixed_field=float(enc["fixed_field"]), constraint_form=p["constraint_form"],
                             alpha=alpha, beta=beta, dt_max=float(e["dt_max"]), tol=float(e["tol"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"ensemble: {exc}") from None
    result = run_ensemble(cfg, workers=ctx.threads)
    rows = [(r.total_time, r.instance_id, r.p0, ctx.run_id) for r in result.rows]
    ctx.write("ensemble.csv", csv_text(["T", "instance_id", "P0", "run_id"], rows))
    stats = {fmt(T): v for T, v in result.stats().items()}
    ctx.write_json("ensemble_summary.json", {"stats": stats,
                                             "max_norm_drift": max(r.norm_drift for r in result.rows)})


RUNNERS = {"encode": stage_encode, "plaquette": stage_plaquette, "structure": stage_structure,
           "dressing": stage_dressing, "anneal": stage_anneal, "ensemble": stage_ensemble}

DEFAULT_STAGES = ("encode", "plaquette", "dressing", "anneal", "ensemble")


def resolve_stages(stage: str | None, config: dict) -> tuple[str, ...]:
    if stage in (None, "all"):
        chosen = config.get("stages", list(DEFAULT_STAGES))
    else:
        chosen = [stage]
    bad = [s for s in chosen if s not in STAGES]
    if bad:
        raise ConfigError(f"unknown stages {bad}")
    return tuple(s for s in STAGES if s in chosen)


def write_manifest(ctx: RunContext, stages) -> Path:
    from .structure.atoms import data_hash

    manifest = {
        "run_id": ctx.run_id,
        "config_sha256": ctx.config_hash,
        "config": ctx.config,
        "seed": ctx.config["seed"],
        "stages": list(stages),
        "data_sha256": {"quantum_defects.json": data_hash()},
        "versions": {"rydanneal": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(ctx.started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "threads": ctx.threads,
        "outputs": dict(sorted(ctx.artifacts.items())),
        "notes": ctx.notes,
    }
    path = ctx.out / "manifest.json"
    tmp = path.with_name("manifest.json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


def run(config: dict, out: Path, stages, threads: int = 1, cache_dir=None) -> RunContext:
    ctx = RunContext(config, Path(out), threads, Path(cache_dir) if cache_dir else None)
    for name in stages:
        log.info("stage %s", name)
        RUNNERS[name](ctx)
    write_manifest(ctx, stages)
    return ctx
