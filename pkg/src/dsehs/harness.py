"""Experiment orchestration: replicas, sampled CSV rows, summaries and comparisons.

CSV columns, in order (floats use 9 significant digits)::

    slot, replica, avg_buffer, avg_battery, cum_overflows, updates_this_slot,
    grid_points, realized_cost

``slot`` is 1-based, so the row for slot k summarizes slots 1..k. Rows are
taken every ``stride`` slots plus the final slot, and sorted by
(replica, slot). The comparison CSV prepends an ``algorithm`` column and
averages every metric over replicas.

Wall-clock time never goes into the CSV; it lives in the JSON summary next
to it so the CSV stays byte-identical across repeated runs.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentSpec
from .grid import GridLearner
from .learners import PDSLearner, QLearner, VELearner
from .oracle import value_iteration
from .sim import MetricsTrace, PolicyController, run_episode

COLUMNS = ("slot", "replica", "avg_buffer", "avg_battery", "cum_overflows", "updates_this_slot",
           "grid_points", "realized_cost")
COMPARE_COLUMNS = ("algorithm", "slot", "replicas", "avg_buffer", "avg_battery", "cum_overflows",
                   "updates_this_slot", "grid_points", "realized_cost")


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


def optimal_policy(spec: ExperimentSpec) -> np.ndarray:
    params = spec.model
    cfg = spec.algorithm_config
    key = ("policy", cfg.tol, cfg.max_iters)
    if key not in params._cache:
        sol = value_iteration(params, tol=cfg.tol, max_iters=cfg.max_iters)
        if not sol.converged:
            raise RuntimeError(f"value iteration stopped at residual {sol.residual:.3g} "
                               f"after {sol.iterations} sweeps")
        params._cache[key] = sol.policy
    return params._cache[key]


def make_controller(spec: ExperimentSpec, seed: int):
    params, cfg = spec.model, spec.algorithm_config
    if spec.algorithm == "optimal":
        return PolicyController(optimal_policy(spec))
    if spec.algorithm == "q-learning":
        return QLearner(params, cfg, seed=seed)
    if spec.algorithm == "pds":
        return PDSLearner(params, cfg)
    if spec.algorithm == "ve":
        return VELearner(params, cfg)
    return GridLearner(params, cfg)


def sample_slots(horizon: int, stride: int) -> np.ndarray:
    """1-based slots kept in the CSV."""
    slots = list(range(stride, horizon + 1, stride))
    if not slots or slots[-1] != horizon:
        slots.append(horizon)
    return np.asarray(slots)


@dataclass
class ReplicaResult:
    replica: int
    seed: int
    trace: MetricsTrace
    controller: object

    def rows(self, stride: int) -> list[tuple]:
        t = self.trace
        out = []
        for slot in sample_slots(t.horizon, stride):
            k = slot - 1
            out.append((int(slot), self.replica, float(t.avg_buffer[k]), float(t.avg_battery[k]),
                        int(t.cum_overflows[k]), int(t.updates[k]), int(t.grid_points[k]),
                        float(t.avg_cost[k])))
        return out


def run_replica(spec: ExperimentSpec, replica: int, keep_controller: bool = True) -> ReplicaResult:
    seed = spec.sim.seed + replica
    controller = make_controller(spec, seed)
    trace = run_episode(controller, replace(spec.sim, seed=seed), spec.model)
    return ReplicaResult(replica, seed, trace, controller if keep_controller else None)


def _run_replica_remote(spec: ExperimentSpec, replica: int) -> ReplicaResult:
    return run_replica(spec, replica, keep_controller=False)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    replicas: list[ReplicaResult]
    wall_time: float

    def rows(self) -> list[tuple]:
        rows = [row for r in self.replicas for row in r.rows(self.spec.stride)]
        rows.sort(key=lambda row: (row[1], row[0]))
        return rows

    def csv_text(self) -> str:
        return rows_to_csv(COLUMNS, self.rows())

    def summary(self) -> dict:
        finals = [r.trace for r in self.replicas]
        mean = lambda xs: float(np.mean(xs))  # noqa: E731
        return {
            "algorithm": self.spec.algorithm,
            "label": self.spec.label,
            "replicas": len(finals),
            "horizon": self.spec.sim.horizon,
            "seeds": [r.seed for r in self.replicas],
            "final_avg_buffer": mean([t.avg_buffer[-1] for t in finals]),
            "final_avg_battery": mean([t.avg_battery[-1] for t in finals]),
            "final_cum_overflows": mean([t.cum_overflows[-1] for t in finals]),
            "final_realized_cost": mean([t.avg_cost[-1] for t in finals]),
            "final_grid_points": mean([t.grid_points[-1] for t in finals]),
            "total_updates": int(sum(t.total_updates for t in finals)),
            "total_updates_per_replica": [t.total_updates for t in finals],
            "wall_time_s": round(self.wall_time, 3),
        }


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def run_experiment(spec: ExperimentSpec, keep_controllers: bool = True) -> ExperimentResult:
    """Run every replica; replica i uses seed ``sim.seed + i``.

    With ``workers > 1`` replicas run in a process pool. Results are identical
    to sequential execution because each replica owns its RNG streams; the
    controllers are then not returned.
    """
    start = time.perf_counter()
    if spec.algorithm == "optimal":
        optimal_policy(spec)
    if spec.workers > 1 and spec.replicas > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_replica_remote, spec, i) for i in range(spec.replicas)]
            results = [f.result() for f in futures]
    else:
        results = [run_replica(spec, i, keep_controllers) for i in range(spec.replicas)]
    return ExperimentResult(spec, results, time.perf_counter() - start)


def atomic_write(path: Path, text: str) -> None:
    """Write through a temporary file in the same directory; nothing is left on failure."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar(path: Path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + suffix)


def write_outputs(out: Path, csv_text: str, summary: dict, figure=None) -> list[Path]:
    """CSV, ``<stem>.summary.json`` and optionally ``<stem>.png``; removes all of them on failure."""
    out = Path(out)
    targets = [out, sidecar(out, ".summary.json")]
    try:
        atomic_write(targets[0], csv_text)
        atomic_write(targets[1], json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if figure is not None:
            png = sidecar(out, ".png")
            targets.append(png)
            figure(png)
    except BaseException:
        for p in targets:
            if p.exists():
                p.unlink()
        raise
    return targets


# comparisons

def check_comparable(specs: list[ExperimentSpec]) -> None:
    if not specs:
        raise ValueError("nothing to compare")
    first = specs[0]
    for s in specs[1:]:
        if s.model != first.model:
            raise ValueError(f"{s.label}: model parameters differ from {first.label}")
        if s.sim.horizon != first.sim.horizon:
            raise ValueError(f"{s.label}: horizon {s.sim.horizon} differs from {first.sim.horizon}")


def unique_labels(specs: list[ExperimentSpec]) -> list[str]:
    labels, seen = [], {}
    for s in specs:
        label = s.label
        seen[label] = seen.get(label, 0) + 1
        labels.append(label if seen[label] == 1 else f"{label}#{seen[label]}")
    return labels


def mean_rows(label: str, result: ExperimentResult) -> list[tuple]:
    """Average the sampled rows of one experiment over its replicas."""
    rows = np.array([r[:1] + r[2:] for r in result.rows()], dtype=float)
    slots = sample_slots(result.spec.sim.horizon, result.spec.stride)
    n = len(result.replicas)
    stacked = rows.reshape(n, len(slots), -1)
    avg = stacked.mean(axis=0)
    out = []
    for i, slot in enumerate(slots):
        _, buf, bat, ovf, upd, pts, cost = avg[i]
        out.append((label, int(slot), n, buf, bat, ovf, upd, pts, cost))
    return out


def compare(specs: list[ExperimentSpec]) -> tuple[str, list[tuple], list[ExperimentResult]]:
    """Run each spec and join the replica-averaged series into one long-format CSV."""
    check_comparable(specs)
    results = [run_experiment(s, keep_controllers=False) for s in specs]
    rows = []
    for label, res in zip(unique_labels(specs), results):
        rows.extend(mean_rows(label, res))
    return rows_to_csv(COMPARE_COLUMNS, rows), rows, results


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append({k: (v if k == "algorithm" else float(v)) for k, v in rec.items()})
        return out
