"""Monte Carlo experiment runner, statistics, and CSV emission.

Every drop derives its own seed from (master_seed, sweep index, drop index)
through a stable hash, so results do not depend on execution order and every
scheme at a given (sweep, drop) point sees the identical channel realization.
Outputs are written in a fixed order with repr'd floats, which makes reruns
of the same configuration byte-identical, with or without worker threads.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from d2dgames import auction as auction_mod
from d2dgames import coalition as coalition_mod
from d2dgames import oracle as oracle_mod
from d2dgames import power_control as power_mod
from d2dgames import radio
from d2dgames import stackelberg as stackelberg_mod
from d2dgames.config import ExperimentConfig, dump_config
from d2dgames.seeding import derive_seed

CSV_HEADERS = {
    "sumrate-vs-pairs": (
        "n_pairs", "scheme", "drop_seed", "sum_rate_bps_hz", "rounds", "valuation_calls",
    ),
    "content-distribution": (
        "round", "scheme", "drop_seed", "cumulative_packets", "total_value_bps_hz",
    ),
    "power-control": ("iter", "player", "power_w", "sinr_db"),
    "stackelberg": ("lambda", "p_star_w", "u_leader", "u_follower"),
}

CSV_FILENAMES = {
    "sumrate-vs-pairs": "sumrate.csv",
    "content-distribution": "content.csv",
    "power-control": "power.csv",
    "stackelberg": "stackelberg.csv",
}


@dataclass(frozen=True)
class GroupStats:
    mean: float
    stddev: float
    count: int
    single_sample: bool = False


@dataclass(frozen=True)
class PairedStats:
    mean_diff: float
    wins_a: int
    wins_b: int
    ties: int
    count: int


@dataclass
class RunSummary:
    experiment: str
    header: tuple[str, ...]
    rows: list[tuple]
    groups: dict[tuple, GroupStats] = field(default_factory=dict)
    paired: dict[tuple, PairedStats] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    checks: dict | None = None


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(header: tuple[str, ...], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def summarize(
    rows: list[tuple],
    sweep_col: int = 0,
    scheme_col: int = 1,
    seed_col: int = 2,
    value_col: int = 3,
) -> tuple[dict, dict]:
    """Per-(sweep, scheme) mean/stddev plus paired scheme-vs-scheme differences."""
    by_group: dict[tuple, list[float]] = {}
    by_cell: dict[tuple, dict] = {}
    for row in rows:
        value = float(row[value_col])
        if math.isnan(value):
            continue
        key = (row[sweep_col], row[scheme_col])
        by_group.setdefault(key, []).append(value)
        by_cell.setdefault((row[sweep_col], row[seed_col]), {})[row[scheme_col]] = value
    groups = {}
    for key in sorted(by_group, key=str):
        vals = by_group[key]
        if len(vals) == 1:
            groups[key] = GroupStats(mean=vals[0], stddev=0.0, count=1, single_sample=True)
        else:
            groups[key] = GroupStats(
                mean=float(np.mean(vals)),
                stddev=float(np.std(vals, ddof=1)),
                count=len(vals),
            )
    schemes = sorted({key[1] for key in by_group}, key=str)
    sweeps = sorted({key[0] for key in by_group}, key=str)
    paired = {}
    for sweep in sweeps:
        for i, a in enumerate(schemes):
            for b in schemes[i + 1:]:
                diffs = [
                    cell[a] - cell[b]
                    for (s, _), cell in by_cell.items()
                    if s == sweep and a in cell and b in cell
                ]
                if not diffs:
                    continue
                paired[(sweep, a, b)] = PairedStats(
                    mean_diff=float(np.mean(diffs)),
                    wins_a=sum(1 for d in diffs if d > 0),
                    wins_b=sum(1 for d in diffs if d < 0),
                    ties=sum(1 for d in diffs if d == 0),
                    count=len(diffs),
                )
    return groups, paired


def _sumrate_drop(config: ExperimentConfig, sweep_idx: int, n_pairs: int, drop: int):
    seed_topo = derive_seed(config.master_seed, sweep_idx, drop, 0)
    seed_gain = derive_seed(config.master_seed, sweep_idx, drop, 1)
    seed_rand = derive_seed(config.master_seed, sweep_idx, drop, 2)
    topo = radio.generate_topology(config.radio, config.m_cue, n_pairs, seed_topo)
    gains = radio.draw_gains(topo, config.radio, seed_gain)
    rows, errors = [], []
    for scheme in config.schemes:
        try:
            rounds = 0
            calls = 0
            if scheme == "rica":
                inst = auction_mod.auction_instance_from_radio(
                    topo,
                    gains,
                    config.radio,
                    c0=config.auction.c0,
                    epsilon=config.auction.epsilon,
                    p0=config.auction.p0,
                    exact_cap=config.auction.exact_cap,
                )
                state = auction_mod.run_auction(inst, max_rounds=config.auction.max_rounds)
                if not state.terminated:
                    raise RuntimeError(
                        f"auction hit max_rounds={config.auction.max_rounds} without terminating"
                    )
                alloc = auction_mod.allocation_from_auction(state, topo)
                rounds, calls = state.rounds, state.valuation_calls
            elif scheme == "random":
                alloc = auction_mod.random_allocation(topo, seed_rand)
            elif scheme == "all_cellular":
                alloc = auction_mod.all_cellular_allocation(topo)
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
            value = radio.sum_rate(alloc, gains, config.radio)
            rows.append((n_pairs, scheme, seed_topo, value, rounds, calls))
        except Exception as exc:  # error row, run continues
            rows.append((n_pairs, scheme, seed_topo, float("nan"), 0, 0))
            errors.append(f"sweep={n_pairs} drop={drop} scheme={scheme}: {exc}")
    return rows, errors


def _content_drop(config: ExperimentConfig, drop: int):
    seed = derive_seed(config.master_seed, 0, drop, 0)
    scen = coalition_mod.ContentScenario(
        n_d2d=config.content.n_d2d,
        k_seeds=config.content.k_seeds,
        m_cue=config.content.m_cue,
        file_packets=config.content.file_packets,
        packets_per_rate_unit=config.content.packets_per_rate_unit,
    )
    rows, errors = [], []
    for scheme in config.schemes:
        try:
            curve = coalition_mod.simulate_content_distribution(
                scen,
                config.radio,
                scheme,
                rounds=config.content.rounds,
                rng_seed=seed,
                hotspot_radius_m=config.content.hotspot_radius_m,
            )
            for r, total in enumerate(curve.cumulative):
                value = curve.total_values[r - 1] if r >= 1 else 0.0
                rows.append((r, scheme, seed, total, value))
        except Exception as exc:
            rows.append((0, scheme, seed, -1, float("nan")))
            errors.append(f"drop={drop} scheme={scheme}: {exc}")
    return rows, errors


def _run_drops(config: ExperimentConfig, tasks, worker):
    """Run drop tasks (possibly threaded) and merge results in task order."""
    results = [None] * len(tasks)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(worker, *args): i for i, args in enumerate(tasks)}
            for fut, i in futures.items():
                results[i] = fut.result()
    else:
        for i, args in enumerate(tasks):
            results[i] = worker(*args)
    rows, errors = [], []
    for r, e in results:
        rows.extend(r)
        errors.extend(e)
    return rows, errors


def run_experiment(config: ExperimentConfig) -> RunSummary:
    config.validate()
    started = time.monotonic()
    experiment = config.experiment
    checks = None
    if experiment == "sumrate-vs-pairs":
        tasks = [
            (config, si, n_pairs, drop)
            for si, n_pairs in enumerate(config.sweep)
            for drop in range(config.drops)
        ]
        rows, errors = _run_drops(config, tasks, _sumrate_drop)
        groups, paired = summarize(rows)
    elif experiment == "content-distribution":
        tasks = [(config, drop) for drop in range(config.drops)]
        rows, errors = _run_drops(config, tasks, _content_drop)
        groups, paired = summarize(rows)
    elif experiment == "power-control":
        rows, errors = _power_rows(config)
        groups, paired = {}, {}
    elif experiment == "stackelberg":
        rows, errors = _stackelberg_rows(config)
        groups, paired = {}, {}
    elif experiment == "oracle-check":
        rows, errors = [], []
        groups, paired = {}, {}
        checks = oracle_check(config)
    else:
        raise ValueError(f"unknown experiment {experiment!r}")

    summary = RunSummary(
        experiment=experiment,
        header=CSV_HEADERS.get(experiment, ()),
        rows=rows,
        groups=groups,
        paired=paired,
        errors=errors,
        wall_clock_s=time.monotonic() - started,
        checks=checks,
    )
    if config.output_path:
        write_outputs(config, summary)
    return summary


def _power_rows(config: ExperimentConfig):
    seed = derive_seed(config.master_seed, 0, 0, 0)
    topo = radio.generate_topology(config.radio, config.m_cue, config.power.players, seed)
    gains = radio.draw_gains(topo, config.radio, derive_seed(config.master_seed, 0, 0, 1))
    inst = power_mod.power_game_from_radio(
        topo,
        gains,
        config.radio,
        rb=0,
        pair_indices=list(range(config.power.players)),
        target_db=config.power.sinr_target_db,
    )
    trace = power_mod.run_power_game(
        inst, max_iters=config.power.max_iters, tol=config.power.tol_w
    )
    rows = []
    for it, p in enumerate(trace.iterates):
        sinrs = inst.sinr(p) if inst.n_players else np.zeros(0)
        for player in range(inst.n_players):
            gamma = float(sinrs[player])
            sinr_db = 10.0 * math.log10(gamma) if gamma > 0 else float("-inf")
            rows.append((it, player, float(p[player]), sinr_db))
    return rows, []


def _stackelberg_rows(config: ExperimentConfig):
    seed = derive_seed(config.master_seed, 0, 0, 0)
    n_pairs = max(config.stackelberg.pair + 1, 1)
    topo = radio.generate_topology(config.radio, config.m_cue, n_pairs, seed)
    gains = radio.draw_gains(topo, config.radio, derive_seed(config.master_seed, 0, 0, 1))
    inst = stackelberg_mod.stackelberg_from_radio(
        topo,
        gains,
        config.radio,
        pair=config.stackelberg.pair,
        rb=config.stackelberg.rb,
        lambda_points=config.stackelberg.lambda_points,
    )
    rows = []
    for lam in inst.lambda_grid():
        lam = float(lam)
        p = stackelberg_mod.follower_best_response(inst, lam)
        rows.append(
            (lam, p, inst.leader_utility(lam, p), inst.follower_utility(p, lam))
        )
    return rows, []


def oracle_check(config: ExperimentConfig, budget: oracle_mod.OracleBudget | None = None) -> dict:
    """Cross-validate every engine against its brute-force reference."""
    if budget is None:
        budget = oracle_mod.OracleBudget()
    params = config.radio
    checks: dict[str, bool] = {}

    ok = True
    for seed in range(5):
        topo = radio.generate_topology(params, 3, 3, derive_seed(config.master_seed, 90, seed))
        gains = radio.draw_gains(topo, params, derive_seed(config.master_seed, 91, seed))
        inst = auction_mod.auction_instance_from_radio(topo, gains, params)
        state = auction_mod.run_auction(inst)
        if not state.terminated:
            ok = False
            continue
        got = radio.sum_rate(auction_mod.allocation_from_auction(state, topo), gains, params)
        _, best = oracle_mod.exhaustive_best_allocation(topo, gains, params, budget)
        ok = ok and best >= got - 1e-9
    checks["auction_below_exhaustive_optimum"] = ok

    ok = True
    for seed in range(5):
        scen = coalition_mod.ContentScenario(n_d2d=4, k_seeds=2, m_cue=2)
        inst = coalition_mod.generate_content_instance(
            scen, params, derive_seed(config.master_seed, 92, seed)
        )
        gains = coalition_mod.draw_content_gains(
            inst, params, derive_seed(config.master_seed, 93, seed)
        )
        value_fn = coalition_mod.make_value_fn(inst, gains, params)
        stable = coalition_mod.run_switch_dynamics(
            coalition_mod.initial_partition(inst), value_fn
        )
        for ue in range(scen.n_d2d):
            src = stable.anchor_of(ue)
            for dst in range(scen.m_cue):
                if dst == src:
                    continue
                delta = (
                    value_fn(src, stable.members[src] - {ue})
                    + value_fn(dst, stable.members[dst] | {ue})
                    - value_fn(src, stable.members[src])
                    - value_fn(dst, stable.members[dst])
                )
                ok = ok and delta <= 1e-9
        _, best = oracle_mod.exhaustive_best_partition(inst, gains, params, budget)
        ok = ok and stable.total_value(value_fn) <= best + 1e-9
    checks["switch_stable_and_below_optimum"] = ok

    ok = True
    rng = np.random.default_rng(derive_seed(config.master_seed, 94))
    feasible_seen = 0
    while feasible_seen < 5:
        g = rng.uniform(0.0, 0.15, (3, 3))
        np.fill_diagonal(g, rng.uniform(0.5, 2.0, 3))
        inst = power_mod.PowerGameInstance(
            gains=g,
            targets=rng.uniform(0.5, 3.0, 3),
            noise_w=rng.uniform(0.1, 1.0, 3),
            p_max_w=1e4,
        )
        sol = oracle_mod.solve_min_power(inst)
        if not sol.feasible:
            continue
        feasible_seen += 1
        trace = power_mod.run_power_game(inst, max_iters=10_000, tol=1e-14)
        ok = ok and trace.converged
        ok = ok and bool(np.all(np.abs(trace.final - sol.powers) <= 1e-6 * np.abs(sol.powers)))
    checks["power_iteration_matches_direct_solve"] = ok

    ok = True
    for seed in range(5):
        topo = radio.generate_topology(params, 2, 1, derive_seed(config.master_seed, 95, seed))
        gains = radio.draw_gains(topo, params, derive_seed(config.master_seed, 96, seed))
        s_inst = stackelberg_mod.stackelberg_from_radio(topo, gains, params, lambda_points=500)
        out = stackelberg_mod.leader_optimize(s_inst)
        ok = ok and stackelberg_mod.verify_equilibrium(s_inst, out, eps=1e-9)
    checks["stackelberg_equilibrium_verified"] = ok

    checks["all_passed"] = all(checks.values())
    return checks


def write_outputs(config: ExperimentConfig, summary: RunSummary) -> None:
    os.makedirs(config.output_path, exist_ok=True)
    with open(
        os.path.join(config.output_path, "effective_config.txt"), "w", encoding="utf-8"
    ) as fh:
        fh.write(dump_config(config))
    if summary.experiment == "oracle-check":
        with open(
            os.path.join(config.output_path, "oracle_check.json"), "w", encoding="utf-8"
        ) as fh:
            json.dump(summary.checks, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    filename = CSV_FILENAMES[summary.experiment]
    with open(os.path.join(config.output_path, filename), "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(summary.header, summary.rows))
