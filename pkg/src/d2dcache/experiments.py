"""Batch experiment harness: sweeps, baselines, deterministic CSV results.

One cell = (sweep value, seed, algorithm). Cells run independently (serial
or process pool), results are sorted before writing so the output file is
byte-identical across reruns and worker counts. Wall-clock timings are
volatile by nature and therefore live in a ``<out>.timing.csv`` sidecar,
keeping the primary results file reproducible.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import auction, metrics, mobility, mwis, radio, valuation
from .scenario import Scenario, rng_stream, scenario_from_dict, scenario_to_dict, with_overrides

ALGORITHMS = ("moac", "mrac", "random", "greedy_pop", "none", "exact")
SWEEP_VARS = ("M", "N", "alpha", "gamma")

RESULT_COLUMNS = [
    "algorithm", "sweep_var", "sweep_value", "seed", "gamma", "welfare",
    "avg_delay_s", "offloading_self", "offloading_reach", "n_cached",
    "sdp_iterations", "sdp_gap", "exact_fallbacks", "rounds",
    "guard_skipped", "unpriceable", "error",
]


@dataclass
class ExperimentPlan:
    scenario: Scenario
    sweep_var: str
    sweep_values: list
    seeds: list[int]
    algorithms: list[str]
    out_path: Path
    workers: int = 1
    dump_dir: Path | None = None

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARS}")
        if not self.sweep_values:
            raise ValueError("sweep values must be nonempty")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")


def apply_sweep(scenario: Scenario, var: str, value) -> Scenario:
    if var == "M":
        return with_overrides(scenario, content={"chunk_count": int(value)})
    if var == "alpha":
        return with_overrides(scenario, content={"zipf_alpha": float(value)})
    if var == "N":
        mob = scenario.mobility
        per_cluster = mob.cluster_count * mob.uts_per_homepoint
        n = int(value)
        if n % per_cluster:
            raise ValueError(
                f"N={n} not divisible by cluster_count*uts_per_homepoint={per_cluster}")
        return with_overrides(scenario,
                              mobility={"homepoints_per_cluster": n // per_cluster})
    if var == "gamma":
        if isinstance(value, str) and value == "mean":
            return with_overrides(scenario, auction={"gamma_mode": "mean_in_cluster"})
        return with_overrides(scenario, auction={"gamma_mode": "fixed",
                                                 "gamma_fixed": float(value)})
    raise ValueError(f"unknown sweep variable {var!r}")


@dataclass
class World:
    """Everything the placement algorithms and metrics consume for one scenario."""

    scenario: Scenario
    assignment: mobility.HomePointAssignment
    trace: mobility.Trace
    encounters: mobility.EncounterMatrix
    gamma: float
    conflict: mobility.ConflictGraph
    rates: radio.RateTable
    prefs: valuation.PreferenceMatrix
    values: valuation.ValueVector
    popularity: np.ndarray


def resolve_gamma(scenario: Scenario, enc: mobility.EncounterMatrix,
                  assignment: mobility.HomePointAssignment) -> float:
    if scenario.auction.gamma_mode == "fixed":
        return scenario.auction.gamma_fixed
    return mobility.mean_in_cluster_encounter(enc, assignment)


def build_world(scenario: Scenario) -> World:
    seed = scenario.seed
    assignment = mobility.generate_homepoints(scenario.mobility,
                                              rng_stream(seed, "mobility.homepoints"))
    trace = mobility.simulate_trace(scenario, assignment,
                                    rng_stream(seed, "mobility.trace"))
    enc = mobility.encounter_matrix(trace, scenario.radio)
    gamma = resolve_gamma(scenario, enc, assignment)
    conflict = mobility.conflict_matrix(enc, gamma)
    rates = radio.rate_summary_matrix(trace, scenario.radio)
    prefs = valuation.generate_preferences(scenario.content, scenario.mobility.n_uts,
                                           rng_stream(seed, "valuation.preferences"))
    values = valuation.build_value_vector(prefs, rates.mean_bps, enc, conflict,
                                          scenario.content)
    popularity = valuation.local_popularity(prefs)
    return World(scenario, assignment, trace, enc, gamma, conflict, rates,
                 prefs, values, popularity)


def baseline_random(world: World, rng: np.random.Generator) -> auction.Placement:
    """Every UT caches one uniformly random chunk; conflicts are not enforced."""
    n_uts = world.values.n_uts
    n_chunks = world.values.n_chunks
    x = np.zeros((n_uts, n_chunks), dtype=np.int8)
    chunks = rng.integers(0, n_chunks, size=n_uts)
    x[np.arange(n_uts), chunks] = 1
    welfare = float((world.values.revenues * x).sum())
    return auction.Placement(x, welfare)


def baseline_greedy_pop(world: World) -> auction.Placement:
    """Chunks in popularity order greedily claim the best conflict-free uncached UTs."""
    values = world.values
    adj = world.conflict.adjacency.astype(bool)
    order = sorted(range(values.n_chunks), key=lambda m: (-world.popularity[m], m))
    x = np.zeros((values.n_uts, values.n_chunks), dtype=np.int8)
    cached = np.zeros(values.n_uts, dtype=bool)
    welfare = 0.0
    for m in order:
        candidates = [n for n in range(values.n_uts)
                      if not cached[n] and values.revenues[n, m] > 0]
        candidates.sort(key=lambda n: (-values.revenues[n, m], n))
        chosen: list[int] = []
        for n in candidates:
            if not any(adj[n, c] for c in chosen):
                chosen.append(n)
        for n in chosen:
            x[n, m] = 1
            cached[n] = True
            welfare += float(values.revenues[n, m])
    return auction.Placement(x, welfare)


def _run_placement(world: World, algorithm: str, dump_dir: Path | None,
                   cell_tag: str) -> tuple[auction.Placement, dict]:
    params = world.scenario.auction
    if algorithm == "none":
        return auction.empty_placement(world.values.n_uts, world.values.n_chunks), {}
    if algorithm == "random":
        rng = rng_stream(world.scenario.seed, "baseline.random")
        return baseline_random(world, rng), {}
    if algorithm == "greedy_pop":
        return baseline_greedy_pop(world), {}

    expanded = mobility.expand_conflict(world.conflict, world.values.n_chunks)
    if dump_dir is not None and algorithm in ("moac", "exact"):
        instance = mwis.WisInstance(world.values.solver_values, expanded.adjacency)
        dump_dir.mkdir(parents=True, exist_ok=True)
        mwis.dump_instance(instance, dump_dir / f"{cell_tag}.csv")

    if algorithm == "moac":
        outcome = auction.moac(world.values, expanded, world.conflict, params)
        return outcome.placement, _outcome_diag(outcome)
    if algorithm == "mrac":
        outcome = auction.mrac(world.values, world.conflict, world.popularity, params)
        return outcome.placement, _outcome_diag(outcome)
    if algorithm == "exact":
        instance = mwis.WisInstance(world.values.solver_values, expanded.adjacency)
        selection = mwis.solve_exact(instance)
        x = selection.chi.reshape(world.values.n_chunks, world.values.n_uts).T
        placement = auction.Placement(x.astype(np.int8), selection.welfare)
        auction.check_placement(placement, world.conflict)
        return placement, {}
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _outcome_diag(outcome: auction.AuctionOutcome) -> dict:
    d = outcome.diagnostics
    return {
        "sdp_iterations": d.get("sdp_iterations", 0),
        "sdp_gap": d.get("sdp_gap", 0.0),
        "exact_fallbacks": d.get("exact_fallbacks", 0),
        "rounds": d.get("rounds", 0),
        "guard_skipped": d.get("guard_skipped", 0),
        "unpriceable": d.get("unpriceable", 0),
    }


def run_cell(scenario_dict: dict, sweep_var: str, sweep_value, seed: int,
             algorithm: str, dump_dir: str | None = None) -> tuple[dict, float]:
    """One (sweep value, seed, algorithm) pipeline run; returns (row, wall ms)."""
    started = time.perf_counter()
    row = {c: "" for c in RESULT_COLUMNS}
    row.update(algorithm=algorithm, sweep_var=sweep_var, sweep_value=sweep_value,
               seed=seed)
    try:
        base = scenario_from_dict(scenario_dict)
        scenario = apply_sweep(with_overrides(base, seed=seed), sweep_var, sweep_value)
        world = build_world(scenario)
        tag = f"{algorithm}_{sweep_var}-{sweep_value}_seed{seed}"
        placement, diag = _run_placement(
            world, algorithm, Path(dump_dir) if dump_dir else None, tag)
        report = metrics.evaluate(placement, world.trace, world.prefs, scenario.radio,
                                  world.values.revenues, scenario.radio.backhaul_rate_bps,
                                  scenario.content.chunk_size_bits, rates=world.rates)
        row.update(
            gamma=world.gamma,
            welfare=placement.welfare,
            avg_delay_s=report.avg_delay_s,
            offloading_self=report.offloading_self,
            offloading_reach=report.offloading_reach,
            n_cached=placement.n_cached,
            sdp_iterations=diag.get("sdp_iterations", 0),
            sdp_gap=diag.get("sdp_gap", 0.0),
            exact_fallbacks=diag.get("exact_fallbacks", 0),
            rounds=diag.get("rounds", 0),
            guard_skipped=diag.get("guard_skipped", 0),
            unpriceable=diag.get("unpriceable", 0),
        )
    except Exception as exc:  # per-cell failures become rows, the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row, (time.perf_counter() - started) * 1000.0


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_experiment(plan: ExperimentPlan) -> tuple[Path, int]:
    """Run the full sweep; returns (results path, number of errored cells).

    Rows land in a fixed (algorithm, sweep index, seed) order regardless of
    execution order; files are written atomically (write + rename).
    """
    scenario_dict = scenario_to_dict(plan.scenario)
    dump = str(plan.dump_dir) if plan.dump_dir else None
    cells = [(vi, value, seed, algo)
             for algo in plan.algorithms
             for vi, value in enumerate(plan.sweep_values)
             for seed in plan.seeds]
    args = [(scenario_dict, plan.sweep_var, value, seed, algo, dump)
            for _, value, seed, algo in cells]

    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            outputs = list(pool.map(_run_cell_star, args))
    else:
        outputs = [_run_cell_star(a) for a in args]

    keyed = sorted(zip(cells, outputs), key=lambda item: (item[0][3], item[0][0], item[0][2]))
    rows = [row for _, (row, _) in keyed]
    timings = [(cell, ms) for cell, (_, ms) in keyed]

    out = Path(plan.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_suffix(out.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_format(row[c]) for c in RESULT_COLUMNS])
        for line in _summary_lines(rows, plan):
            fh.write(line + "\n")
    os.replace(tmp, out)

    timing_path = out.with_suffix(".timing.csv")
    tmp = timing_path.with_suffix(".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "sweep_var", "sweep_value", "seed", "wall_time_ms"])
        for (vi, value, seed, algo), ms in timings:
            writer.writerow([algo, plan.sweep_var, _format(value), seed, f"{ms:.3f}"])
    os.replace(tmp, timing_path)

    n_errors = sum(1 for row in rows if row["error"])
    return out, n_errors


def _run_cell_star(args) -> tuple[dict, float]:
    return run_cell(*args)


def _summary_lines(rows: list[dict], plan: ExperimentPlan) -> list[str]:
    lines = []
    for algo in plan.algorithms:
        for value in plan.sweep_values:
            group = [r for r in rows
                     if r["algorithm"] == algo and r["sweep_value"] == value
                     and not r["error"]]
            if not group:
                continue
            stats = {}
            for col in ("welfare", "avg_delay_s", "offloading_self", "offloading_reach"):
                data = np.array([float(r[col]) for r in group])
                stats[col] = (float(data.mean()),
                              float(data.std(ddof=1)) if data.size > 1 else 0.0)
            parts = [f"# summary algorithm={algo} sweep_value={value} n={len(group)}"]
            for col, (mean, std) in stats.items():
                parts.append(f"{col}_mean={mean!r} {col}_std={std!r}")
            lines.append(" ".join(parts))
    return lines
