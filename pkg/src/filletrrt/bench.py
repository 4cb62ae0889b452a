"""Seeded trial campaigns, CSV output and summary statistics."""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .planners import IterationClock, PlannerConfig, PlanResult, plan
from .workspace import World

CONVERGENCE_COLUMNS = ("trial", "seed", "t_seconds", "iteration", "best_cost_m")
PATH_COLUMNS = ("s_m", "x_m", "y_m", "psi_rad", "kappa_inv_m", "direction")
THRESHOLDS = (("5pct", 1.05), ("2pct", 1.02))


@dataclass
class TrialRecord:
    trial: int
    seed: int
    convergence: list[tuple[float, int, float]]
    iterations: int
    elapsed: float
    node_count: int
    best_cost: float
    path: object | None = None

    @property
    def solved(self) -> bool:
        return bool(self.convergence)


@dataclass
class Campaign:
    world: World
    cfg: PlannerConfig
    trials: int = 1
    seed: int = 0
    clock: str = "wall"
    tick: float = 1e-3
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.clock not in ("wall", "steps"):
            raise ValueError(f"unknown clock {self.clock!r}")

    @property
    def budget_seconds(self) -> float | None:
        """Time budget used to censor unsolved runs (the iteration budget in ticks for the steps clock)."""
        if self.cfg.max_seconds is not None:
            return self.cfg.max_seconds
        if self.clock == "steps":
            return self.cfg.max_iterations * self.tick
        return None


def _run_trial(world: World, cfg: PlannerConfig, trial: int, clock: str, tick: float) -> TrialRecord:
    c = IterationClock(tick) if clock == "steps" else time.perf_counter
    r: PlanResult = plan(world, cfg, c)
    return TrialRecord(trial, cfg.seed, list(r.convergence), r.iterations, r.elapsed,
                       r.node_count, r.best_cost, r.best_path)


def run_campaign(camp: Campaign) -> list[TrialRecord]:
    """Run every trial (seed = camp.seed + trial) and return records in trial order."""
    jobs = [(camp.world, replace(camp.cfg, seed=camp.seed + k), k, camp.clock, camp.tick)
            for k in range(camp.trials)]
    if camp.workers <= 1 or camp.trials == 1:
        return [_run_trial(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=camp.workers) as ex:
        futures = [ex.submit(_run_trial, *j) for j in jobs]
        return [f.result() for f in futures]


# -- output -------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_convergence(records: list[TrialRecord], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CONVERGENCE_COLUMNS)
        for rec in records:
            for t, it, c in rec.convergence:
                w.writerow((rec.trial, rec.seed, _fmt(t), it, _fmt(c)))


def read_convergence(path) -> dict[int, list[tuple[float, int, float]]]:
    out: dict[int, list[tuple[float, int, float]]] = {}
    with open(path, newline="") as f:
        r = csv.DictReader(f)
        if tuple(r.fieldnames or ()) != CONVERGENCE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {r.fieldnames}")
        for row in r:
            out.setdefault(int(row["trial"]), []).append(
                (float(row["t_seconds"]), int(row["iteration"]), float(row["best_cost_m"])))
    return out


def write_path(path_obj, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(PATH_COLUMNS)
        if path_obj is None:
            return
        for s, x, y, psi, k, d in zip(path_obj.s, path_obj.x, path_obj.y, path_obj.psi,
                                      path_obj.kappa, path_obj.direction):
            w.writerow((_fmt(s), _fmt(x), _fmt(y), _fmt(psi), _fmt(k), int(d)))


def read_path(path) -> np.ndarray:
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if tuple(header) != PATH_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = [[float(v) for v in row] for row in r]
    return np.array(rows).reshape(-1, len(PATH_COLUMNS))


# -- statistics ---------------------------------------------------------------


def _mean_sd(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def crossing_time(conv, level: float) -> float | None:
    """First timestamp whose best cost is at or below level, or None."""
    for t, _, c in conv:
        if c <= level:
            return t
    return None


def cost_at(conv, t: float) -> float:
    """Best cost of one trial at time t (inf before its first solution)."""
    best = math.inf
    for tc, _, c in conv:
        if tc > t:
            break
        best = c
    return best


def summarize(records: list[TrialRecord], budget: float | None, grid_points: int = 10) -> dict[str, object]:
    """Flat statistics for a campaign.

    Unsolved trials, and trials that never cross a threshold, are censored at
    the time budget (or at their own elapsed time when only an iteration
    budget was given).
    """
    out: dict[str, object] = {"trials": len(records)}
    solved = [r for r in records if r.solved]
    out["solved"] = len(solved)
    first_t = [r.convergence[0][0] for r in solved]
    first_c = [r.convergence[0][2] for r in solved]
    m, s = _mean_sd(first_t)
    out["initial_time_mean_s"], out["initial_time_sd_s"] = m, s
    m, s = _mean_sd(first_c)
    out["initial_length_mean_m"], out["initial_length_sd_m"] = m, s
    best = min((r.convergence[-1][2] for r in solved), default=math.inf)
    out["campaign_best_cost_m"] = best
    final = [r.convergence[-1][2] for r in solved]
    m, s = _mean_sd(final)
    out["final_cost_mean_m"], out["final_cost_sd_m"] = m, s
    for name, factor in THRESHOLDS:
        times = []
        censored = 0
        for r in records:
            t = crossing_time(r.convergence, factor * best) if math.isfinite(best) else None
            if t is None:
                censored += 1
                t = budget if budget is not None else r.elapsed
            times.append(t)
        m, s = _mean_sd(times)
        out[f"threshold_{name}_time_mean_s"] = m
        out[f"threshold_{name}_time_sd_s"] = s
        out[f"threshold_{name}_censored"] = censored
        out[f"threshold_{name}_times_s"] = ",".join(_fmt(t) for t in times)
    horizon = budget if budget is not None else max((r.elapsed for r in records), default=0.0)
    if horizon > 0:
        for t in np.linspace(horizon / grid_points, horizon, grid_points):
            med = float(np.median([cost_at(r.convergence, t) for r in records]))
            out[f"median_cost_at_{t:.6g}s"] = med
    out["unsolved_trials"] = ",".join(str(r.trial) for r in records if not r.solved)
    return out


def format_summary(stats: dict[str, object]) -> str:
    lines = []
    for k, v in stats.items():
        lines.append(f"{k} = {_fmt(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def parse_summary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            k, _, v = line.partition(" = ")
            out[k] = v
    return out


def write_outputs(records: list[TrialRecord], out_dir, budget: float | None,
                  extra: dict[str, object] | None = None) -> dict[str, Path]:
    """Write convergence.csv, path.csv (best trial) and summary.txt into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"convergence": out / "convergence.csv", "path": out / "path.csv",
             "summary": out / "summary.txt"}
    write_convergence(records, files["convergence"])
    solved = [r for r in records if r.solved]
    best = min(solved, key=lambda r: (r.best_cost, r.trial), default=None)
    write_path(best.path if best is not None else None, files["path"])
    stats = dict(extra or {})
    stats.update(summarize(records, budget))
    if best is not None:
        stats["best_trial"] = best.trial
    files["summary"].write_text(format_summary(stats))
    return files
