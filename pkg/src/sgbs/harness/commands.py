"""Implementations of the ``generate``, ``pretrain``, ``solve``, ``compare`` and ``sweep`` commands.

Every per-instance job gets a seed derived from (global seed, instance, method,
augmentation variant), so results do not depend on how jobs are spread over
worker processes.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..eas import EasConfig
from ..policy import Divergence, Policy, PolicyParams, format_checkpoint
from ..pretrain import pretrain
from ..problems import (
    FfspInstance,
    Solution,
    augment_x8,
    brute_force_optimum,
    format_instance,
    reward,
)
from ..search import run_with_budget
from .config import ConfigError, ExperimentConfig, MethodSpec

log = logging.getLogger(__name__)

WORKERS_ENV = "SGBS_WORKERS"
ORACLE_AUTO_LIMIT = {"TSP": 10, "CVRP": 7, "FFSP": 5}
TRACE_COLUMNS = ("instance", "candidate_count", "incumbent_cost", "wall_nanos", "phase")
GRID_COLUMNS = ("beta", "gamma", "mean_cost", "rollouts", "wall_time")


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def parallel_map(fn, items: list, workers: int | None = None) -> list:
    """Order-preserving map, in-process for one worker."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=1))


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------- per-instance jobs


@dataclass(frozen=True)
class Job:
    index: int
    instance: object
    method: MethodSpec
    params: PolicyParams
    budget: int
    seed: int
    augment: bool = False


@dataclass
class JobResult:
    index: int
    label: str
    solution: Solution | None
    consumed: int
    truncated: bool
    diverged: bool = False
    error: str = ""
    element0_cost: float | None = None
    trace: list = field(default_factory=list)  # (candidate_count, incumbent_cost, wall_nanos, phase)
    wall: float = 0.0

    @property
    def cost(self) -> float | None:
        return None if self.solution is None else -self.solution.reward


def run_job(job: Job) -> JobResult:
    start = time.perf_counter()
    variants = augment_x8(job.instance) if job.augment else [job.instance]
    best, first, consumed, truncated, trace = None, None, 0, False, []
    try:
        for k, inst in enumerate(variants):
            seed = derive_seed(job.seed, k)
            rep = run_with_budget(
                job.method.name, Policy(job.params), inst, job.budget, **job.method.run_kwargs(job.budget, seed)
            )
            # re-score on the original coordinates so every cost replays exactly
            sol = Solution(rep.solution.actions, reward(job.instance, rep.solution.actions))
            consumed += rep.consumed
            truncated |= rep.truncated
            if k == 0:
                first = sol
                trace = [(c, cost, w, p) for c, cost, w, p in rep.trace.rows]
            if best is None or sol.reward > best.reward:
                best = sol
    except Divergence as exc:
        return JobResult(job.index, job.method.label, None, consumed, truncated, True, str(exc),
                         wall=time.perf_counter() - start)
    return JobResult(
        job.index,
        job.method.label,
        best,
        consumed,
        truncated,
        element0_cost=-first.reward,
        trace=trace,
        wall=time.perf_counter() - start,
    )


def make_jobs(cfg: ExperimentConfig, instances, params, methods=None, budget=None, augment=False) -> list[Job]:
    methods = cfg.methods if methods is None else methods
    budget = cfg.budget if budget is None else budget
    return [
        Job(i, inst, m, params, budget, derive_seed(cfg.seed, i, mi), augment)
        for mi, m in enumerate(methods)
        for i, inst in enumerate(instances)
    ]


# ---------------------------------------------------------------- references and reports


def oracle_costs(instances) -> list | None:
    """Exact optimal costs when every instance is small enough, else None."""
    for inst in instances:
        size = inst.num_jobs if isinstance(inst, FfspInstance) else inst.n
        if size > ORACLE_AUTO_LIMIT[inst.kind]:
            return None
    try:
        return [-brute_force_optimum(inst).reward for inst in instances]
    except ValueError:
        return None


def _cached_oracle(cfg: ExperimentConfig) -> list | None:
    if cfg.instance_file is None:
        return None
    path = Path(cfg.instance_file).with_name("oracle.json")
    if not path.is_file():
        return None
    return json.loads(path.read_text())["costs"]


def references(cfg: ExperimentConfig, instances, results: list[JobResult]) -> tuple[list, str]:
    if cfg.reference in ("auto", "oracle"):
        costs = _cached_oracle(cfg) or oracle_costs(instances)
        if costs is not None:
            return costs, "oracle"
        if cfg.reference == "oracle":
            raise ConfigError("no exact oracle for this instance set")
    best = [None] * len(instances)
    for r in results:
        if r.cost is not None and (best[r.index] is None or r.cost < best[r.index]):
            best[r.index] = r.cost
    return best, "run-best"


def gap_report(cfg: ExperimentConfig, instances, results: list[JobResult]) -> dict:
    """Per-instance cost matrix, gaps against the reference, and per-method means.

    Wall times are deliberately left out so that reports are byte-identical
    across runs; they go to ``timing.json``.
    """
    refs, ref_kind = references(cfg, instances, results)
    labels = [m.label for m in cfg.methods]
    rows = [{"index": i, "reference": refs[i], "results": {}} for i in range(len(instances))]
    for r in results:
        entry = {
            "consumed": r.consumed,
            "truncated": r.truncated,
            "diverged": r.diverged,
            "cost": r.cost,
            "actions": None if r.solution is None else list(r.solution.actions),
        }
        if r.diverged:
            entry["error"] = r.error
        else:
            ref = refs[r.index]
            entry["gap_pct"] = 100.0 * (r.cost - ref) / ref if ref else 0.0
            if cfg.augment:
                entry["element0_cost"] = r.element0_cost
        rows[r.index]["results"][r.label] = entry
    summary = {}
    for label in labels:
        ok = [row["results"][label] for row in rows if not row["results"][label]["diverged"]]
        summary[label] = {
            "mean_cost": float(np.mean([e["cost"] for e in ok])) if ok else None,
            "mean_gap_pct": float(np.mean([e["gap_pct"] for e in ok])) if ok else None,
            "mean_consumed": float(np.mean([e["consumed"] for e in ok])) if ok else None,
            "diverged": len(rows) - len(ok),
        }
    config = cfg.to_dict()
    del config["out"]  # the same run written elsewhere must give the same bytes
    return {
        "config": config,
        "methods": labels,
        "reference_kind": ref_kind,
        "instances": rows,
        "summary": summary,
    }


def write_traces(out: Path, results: list[JobResult]) -> None:
    tdir = out / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    by_label: dict[str, list] = {}
    for r in results:
        by_label.setdefault(r.label, []).append(r)
    for label, rs in by_label.items():
        with (tdir / f"{_slug(label)}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in rs:
                for count, cost, wall, phase in r.trace:
                    w.writerow([r.index, count, repr(float(cost)), wall, phase])


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in label).strip("_")


def _timing(results: list[JobResult]) -> dict:
    out: dict[str, float] = {}
    for r in results:
        out[r.label] = out.get(r.label, 0.0) + r.wall
    return out


def diverged_count(report: dict) -> int:
    return sum(s["diverged"] for s in report["summary"].values())


# ---------------------------------------------------------------- commands


def cmd_generate(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.instance_file is not None:
        raise ConfigError("generate builds instances from the generator; drop instance_file")
    instances = cfg.instances()
    (out / "instances.txt").write_text("\n".join(format_instance(x) for x in instances))
    manifest = {
        "kind": cfg.kind,
        "size": cfg.size,
        "seed": cfg.instance_seed,
        "count": len(instances),
        "generator": cfg.generator,
        "file": "instances.txt",
    }
    costs = oracle_costs(instances)
    if costs is not None:
        write_json(out / "oracle.json", {"costs": costs})
        manifest["oracle"] = "oracle.json"
    write_json(out / "manifest.json", manifest)
    return manifest


def _probe_score(args) -> float:
    params, instances, budget, seed = args
    costs = []
    for i, inst in enumerate(instances):
        rep = run_with_budget("sgbs+eas", Policy(params), inst, budget, config=EasConfig(seed=derive_seed(seed, i)))
        costs.append(rep.cost)
    return float(np.mean(costs))


def cmd_pretrain(cfg: ExperimentConfig) -> dict:
    """Train, checkpoint each epoch, then pick the checkpoint with the best SGBS+EAS probe."""
    out = Path(cfg.out)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    pcfg = cfg.pretrain_config()
    res = pretrain(pcfg, cfg.instance_generator(), cfg.policy_params())
    names = []
    for epoch, p in enumerate(res.checkpoints):
        name = f"checkpoints/epoch_{epoch:03d}.txt"
        (out / name).write_text(format_checkpoint(p))
        names.append(name)
    with (out / "curve.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("epoch", "heldout_greedy_reward", "heldout_greedy_cost"))
        for epoch, r in res.curve:
            w.writerow([epoch, repr(r), repr(-r)])
    # validation set disjoint from both training and held-out streams
    vgen = cfg.instance_generator(seed=cfg.instance_seed + 104729)
    validation = [vgen(i) for i in range(cfg.probe_count)]
    probe = parallel_map(
        _probe_score, [(p, validation, cfg.probe_budget, cfg.seed) for p in res.checkpoints]
    )
    best = int(np.argmin(probe))
    (out / "selected.txt").write_text(format_checkpoint(res.checkpoints[best]))
    report = {
        "config": cfg.to_dict(),
        "pretrain": vars(pcfg),
        "curve": [{"epoch": e, "heldout_greedy_cost": -r} for e, r in res.curve],
        "probe": [{"epoch": e, "checkpoint": n, "score": s} for e, (n, s) in enumerate(zip(names, probe))],
        "selected_epoch": best,
        "selected": "selected.txt",
    }
    write_json(out / "report.json", report)
    return report


def cmd_solve(cfg: ExperimentConfig) -> dict:
    if len(cfg.methods) != 1:
        raise ConfigError("solve takes exactly one method")
    if cfg.augment and cfg.kind == "FFSP":
        raise ConfigError("augmentation applies to routing problems only")
    return _run_and_report(cfg, augment=cfg.augment)


def cmd_compare(cfg: ExperimentConfig) -> dict:
    if not cfg.methods:
        raise ConfigError("compare needs at least one method")
    if cfg.augment:
        raise ConfigError("compare runs without augmentation so every method sees the same budget")
    return _run_and_report(cfg, augment=False)


def _run_and_report(cfg: ExperimentConfig, augment: bool) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    instances = cfg.instances()
    params = cfg.policy_params()
    results = parallel_map(run_job, make_jobs(cfg, instances, params, augment=augment))
    report = gap_report(cfg, instances, results)
    write_json(out / "report.json", report)
    write_json(out / "timing.json", _timing(results))
    write_traces(out, results)
    return report


def _sweep_cell(args) -> tuple:
    cfg, beta, gamma, instances, params = args
    extra = {"beta": beta, "gamma": gamma}
    method = MethodSpec(cfg.sweep_method, extra)
    start = time.perf_counter()
    results = [run_job(j) for j in make_jobs(cfg, instances, params, methods=(method,))]
    wall = time.perf_counter() - start
    if any(r.diverged for r in results):
        raise Divergence(f"divergence in sweep cell ({beta},{gamma})")
    return (
        beta,
        gamma,
        float(np.mean([r.cost for r in results])),
        float(np.mean([r.consumed for r in results])),
        wall,
    )


def cmd_sweep(cfg: ExperimentConfig) -> list[tuple]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    instances = cfg.instances()
    params = cfg.policy_params()
    cells = [(cfg, b, g, instances, params) for g in cfg.grid_gamma for b in cfg.grid_beta]
    rows = parallel_map(_sweep_cell, cells)
    write_grid(out / "grid.csv", rows)
    write_json(out / "config.json", cfg.to_dict())
    return rows


def write_grid(path: Path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GRID_COLUMNS)
        for b, g, cost, rollouts, wall in rows:
            w.writerow([b, g, repr(cost), repr(rollouts), repr(wall)])


def read_grid(path) -> list[tuple]:
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != GRID_COLUMNS:
            raise ValueError(f"unexpected grid header {header}")
        return [(int(b), int(g), float(c), float(r), float(w)) for b, g, c, r, w in rd]
