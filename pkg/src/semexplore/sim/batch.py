"""Batches of seeded episodes over exploration radii, flattened to CSV rows
and reduced to a per-module success summary."""
from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .episode import EpisodeLog, run_episode
from .scenario import Scenario

PHASE_COLUMNS = ("slam", "exploration", "detection", "approach", "navigation")
CSV_COLUMNS = ("seed", "R_e", *PHASE_COLUMNS, "success", "outcome", "sim_time_s", "wall_time_ms",
               "goal_x", "goal_y", "goal_yaw_deg")
SUMMARY_MODULES = ("exploration", "navigation", "detection", "approach")


def episode_row(log: EpisodeLog, radius: float) -> dict:
    row = {"seed": log.seed, "R_e": radius}
    for name in PHASE_COLUMNS:
        row[name] = int(log.phase(name).status == "SUCCESS")
    goal = log.final_goal or [math.nan, math.nan, math.nan]
    row.update(success=int(log.success), outcome=log.outcome, sim_time_s=log.sim_time_s,
               wall_time_ms=round(log.wall_time_ms, 3), goal_x=goal[0], goal_y=goal[1],
               goal_yaw_deg=math.degrees(goal[2]))
    return row


def _one(args) -> tuple[dict, EpisodeLog]:
    scenario, radius, seed = args
    world = scenario.world_for(seed, radius)
    params = dataclasses.replace(scenario.params,
                                 exploration=dataclasses.replace(scenario.params.exploration, R_e=radius))
    log = run_episode(world, scenario.task, params, seed=seed, vocabulary=scenario.vocabulary)
    return episode_row(log, radius), log


def run_sweep(scenario: Scenario, radii, episodes: int, base_seed: int, workers: int = 1,
              keep_logs: bool = False):
    """Run ``episodes`` seeds (base_seed, base_seed+1, ...) at every radius.

    The same seeds are reused across radii so layouts are paired. Returns
    the CSV rows in (radius, seed) order, plus the logs when ``keep_logs``.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    if episodes < 1:
        raise ValueError("need at least one episode per radius")
    jobs = [(scenario, r, base_seed + i) for r in radii for i in range(episodes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    rows = [r for r, _ in results]
    return (rows, [lg for _, lg in results]) if keep_logs else rows


@dataclass
class RunSummary:
    module_sr: dict[str, float]  # percent
    overall_sr: float
    time_quartiles: dict[str, list[float]]  # R_e -> [q1, median, q3] of sim time
    episodes: int
    seed_range: tuple[int, int]

    def __post_init__(self):
        for v in [*self.module_sr.values(), self.overall_sr]:
            if not 0.0 <= v <= 100.0:
                raise ValueError("success rates must be percentages")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def summarize_rows(rows: list[dict]) -> RunSummary:
    if not rows:
        raise ValueError("no episodes to summarize")
    n = len(rows)
    module_sr = {m: 100.0 * sum(int(r[m]) for r in rows) / n for m in SUMMARY_MODULES}
    overall = 100.0 * sum(int(r["success"]) for r in rows) / n
    by_radius: dict[float, list[float]] = {}
    for r in rows:
        by_radius.setdefault(float(r["R_e"]), []).append(float(r["sim_time_s"]))
    quartiles = {f"{k:g}": [float(q) for q in np.percentile(v, [25, 50, 75])] for k, v in sorted(by_radius.items())}
    seeds = [int(r["seed"]) for r in rows]
    return RunSummary(module_sr, overall, quartiles, n, (min(seeds), max(seeds)))


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)


def read_csv(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
