"""Flexible flow shop.

Construction order: stages are scheduled one after another.  Inside a stage
the open machine with the earliest available time (ties: lower index) takes
the next decision.  It either starts a job that is ready (previous-stage
completion <= its available time) or plays the no-op token ``num_jobs``:

* if some event lies in the future (another open machine's available time or
  an unscheduled job's ready time), the machine's clock jumps to the earliest
  such event;
* otherwise the machine is closed for the rest of the stage.

No-op is only legal while an event exists or another machine stays open, so
the stage can always be finished and every construction is finite.  Every
semi-active schedule (any machine assignment and per-machine order, each
operation started as early as possible) is reachable.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .base import NEG_INF, BatchEnv, Solution


@dataclass(frozen=True, eq=False)
class FfspInstance:
    num_jobs: int
    stages: tuple  # one (machines, num_jobs) int array per stage

    kind = "FFSP"

    def __post_init__(self):
        j = int(self.num_jobs)
        if j < 1:
            raise ValueError("num_jobs must be positive")
        stages = []
        for k, st in enumerate(self.stages):
            a = np.array(st, dtype=np.int64)
            if a.ndim != 2 or a.shape[1] != j or a.shape[0] < 1:
                raise ValueError(f"stage {k}: expected (machines, {j}) processing times")
            if np.any(a <= 0):
                raise ValueError(f"stage {k}: processing times must be positive")
            a.setflags(write=False)
            stages.append(a)
        if not stages:
            raise ValueError("at least one stage required")
        object.__setattr__(self, "num_jobs", j)
        object.__setattr__(self, "stages", tuple(stages))
        mmax = max(a.shape[0] for a in stages)
        proc = np.zeros((len(stages), mmax, j))
        exists = np.zeros((len(stages), mmax), dtype=bool)
        for k, a in enumerate(stages):
            proc[k, : a.shape[0]] = a
            exists[k, : a.shape[0]] = True
        # remaining mean work of each job strictly after stage k
        mean_work = np.array([a.mean(axis=0) for a in stages])
        later = np.cumsum(mean_work[::-1], axis=0)[::-1] - mean_work
        horizon = mean_work.sum(axis=0).max()
        for name, arr in (("proc", proc), ("exists", exists), ("later_work", later / horizon)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "max_proc", float(proc.max()))

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    @property
    def noop(self) -> int:
        return self.num_jobs

    def __eq__(self, other):
        return (
            isinstance(other, FfspInstance)
            and self.num_jobs == other.num_jobs
            and len(self.stages) == len(other.stages)
            and all(np.array_equal(a, b) for a, b in zip(self.stages, other.stages))
        )

    def __hash__(self):
        return hash(tuple(a.tobytes() for a in self.stages))


class Dispatcher:
    """Plain scalar implementation of the construction rules.

    Used for reward evaluation and the oracle; the batched env is checked
    against it.
    """

    def __init__(self, instance: FfspInstance):
        self.inst = instance
        self.stage = 0
        self.comp = [[None] * instance.num_jobs for _ in instance.stages]
        self.start = [[None] * instance.num_jobs for _ in instance.stages]
        self.assigned = [[None] * instance.num_jobs for _ in instance.stages]
        self._open_stage()

    def copy(self) -> "Dispatcher":
        new = object.__new__(Dispatcher)
        new.inst = self.inst
        new.stage = self.stage
        new.comp = [list(c) for c in self.comp]
        new.start = [list(c) for c in self.start]
        new.assigned = [list(c) for c in self.assigned]
        new.avail = list(self.avail)
        new.closed = list(self.closed)
        return new

    def _ready(self, j):
        return 0 if self.stage == 0 else self.comp[self.stage - 1][j]

    def _open_stage(self):
        if self.done:
            return
        m = self.inst.stages[self.stage].shape[0]
        t0 = min(self._ready(j) for j in range(self.inst.num_jobs))
        self.avail = [t0] * m
        self.closed = [False] * m

    @property
    def done(self) -> bool:
        return self.stage >= self.inst.num_stages

    def machine(self) -> int:
        best = None
        for m, (t, c) in enumerate(zip(self.avail, self.closed)):
            if not c and (best is None or t < self.avail[best]):
                best = m
        return best

    def _next_event(self, t):
        ev = [a for a, c in zip(self.avail, self.closed) if not c and a > t]
        ev += [
            self._ready(j)
            for j in range(self.inst.num_jobs)
            if self.comp[self.stage][j] is None and self._ready(j) > t
        ]
        return min(ev) if ev else None

    def feasible(self) -> list[int]:
        if self.done:
            raise ValueError("terminal state has no actions")
        m = self.machine()
        t = self.avail[m]
        acts = [
            j
            for j in range(self.inst.num_jobs)
            if self.comp[self.stage][j] is None and self._ready(j) <= t
        ]
        others_open = sum(not c for c in self.closed) > 1
        if others_open or self._next_event(t) is not None:
            acts.append(self.inst.noop)
        return acts

    def apply(self, a: int) -> None:
        if a not in self.feasible():
            raise ValueError(f"infeasible action {a}")
        m = self.machine()
        t = self.avail[m]
        if a == self.inst.noop:
            ev = self._next_event(t)
            if ev is None:
                self.closed[m] = True
            else:
                self.avail[m] = ev
            return
        end = t + int(self.inst.stages[self.stage][m, a])
        self.start[self.stage][a] = t
        self.assigned[self.stage][a] = m
        self.comp[self.stage][a] = end
        self.avail[m] = end
        if all(c is not None for c in self.comp[self.stage]):
            self.stage += 1
            self._open_stage()

    def makespan(self) -> int:
        return max(self.comp[-1])


def makespan(instance: FfspInstance, actions) -> int | None:
    """Replay ``actions``; None if any is infeasible or the schedule is unfinished."""
    d = Dispatcher(instance)
    for a in actions:
        if d.done:
            return None
        try:
            d.apply(int(a))
        except ValueError:
            return None
    return d.makespan() if d.done else None


def reward(instance: FfspInstance, actions) -> float:
    ms = makespan(instance, actions)
    return NEG_INF if ms is None else -float(ms)


class FfspEnv(BatchEnv):
    row_fields = ("stage", "avail", "closed", "comp", "sched")
    n_features = 3

    def __init__(self, instance: FfspInstance, batch: int = 1):
        super().__init__(instance, batch)
        self.proc = instance.proc
        self.exists = instance.exists
        s, mmax, j = instance.proc.shape
        self.stage = np.zeros(batch, dtype=np.int64)
        self.avail = np.zeros((batch, mmax))
        self.closed = np.tile(~instance.exists[0], (batch, 1))
        self.comp = np.zeros((batch, s, j))
        self.sched = np.zeros((batch, s, j), dtype=bool)

    @property
    def n_actions(self) -> int:
        return self.instance.num_jobs + 1

    def done(self):
        return self.stage >= self.instance.num_stages

    def _context(self, rows=None):
        if rows is None:
            rows = np.arange(self.batch)
        k = np.minimum(self.stage[rows], self.instance.num_stages - 1)
        avail = np.where(self.closed[rows], np.inf, self.avail[rows])
        cur = avail.argmin(axis=1)
        t = avail[np.arange(len(rows)), cur]
        prev = self.comp[rows, np.maximum(k - 1, 0)]
        ready = np.where((k > 0)[:, None], prev, 0.0)
        unsched = ~self.sched[rows, k]
        ev_m = np.where(avail > t[:, None], avail, np.inf).min(axis=1)
        ev_j = np.where(unsched & (ready > t[:, None]), ready, np.inf).min(axis=1)
        event = np.minimum(ev_m, ev_j)
        others_open = (~self.closed[rows]).sum(axis=1) > 1
        return k, cur, t, ready, unsched, event, others_open

    def _mask(self):
        k, cur, t, ready, unsched, event, others_open = self._context()
        m = np.zeros((self.batch, self.n_actions), dtype=bool)
        m[:, :-1] = unsched & (ready <= t[:, None])
        m[:, -1] = np.isfinite(event) | others_open
        return m

    def features(self):
        inst = self.instance
        k, cur, t, *_ = self._context()
        feats = np.zeros((self.batch, self.n_actions, 3))
        feats[:, :-1, 0] = self.proc[k, cur] / inst.max_proc
        feats[:, :-1, 1] = inst.later_work[k]
        # The no-op is scored as if it cost the longest operation.
        feats[:, -1, 0] = 1.0
        feats[:, -1, 2] = 1.0
        return feats

    def _apply(self, rows, acts):
        k, cur, t, ready, unsched, event, others_open = self._context(rows)
        noop = acts == self.instance.noop
        wait = noop & np.isfinite(event)
        self.avail[rows[wait], cur[wait]] = event[wait]
        close = noop & ~np.isfinite(event)
        self.closed[rows[close], cur[close]] = True
        job = ~noop
        r, kk, m, j = rows[job], k[job], cur[job], acts[job]
        end = t[job] + self.proc[kk, m, j]
        self.comp[r, kk, j] = end
        self.sched[r, kk, j] = True
        self.avail[r, m] = end
        finished = self.sched[r, kk].all(axis=1)
        if finished.any():
            r, kk = r[finished], kk[finished]
            nk = kk + 1
            self.stage[r] = nk
            live = nk < self.instance.num_stages
            r, kk, nk = r[live], kk[live], nk[live]
            self.avail[r] = self.comp[r, kk].min(axis=1)[:, None]
            self.closed[r] = ~self.exists[nk]

    def final_cost(self):
        return self.comp[:, -1, :].max(axis=1)


# -- exhaustive oracle ------------------------------------------------------


def _stage_options(proc_stage: np.ndarray, ready: tuple) -> set[tuple]:
    """All completion vectors of semi-active schedules for one stage."""
    m, j = proc_stage.shape
    out = set()
    for assign in itertools.product(range(m), repeat=j):
        groups = [[job for job in range(j) if assign[job] == mm] for mm in range(m)]
        per_machine = []
        for mm, g in enumerate(groups):
            seqs = []
            for order in itertools.permutations(g):
                t, ends = 0, {}
                for job in order:
                    t = max(t, ready[job]) + int(proc_stage[mm, job])
                    ends[job] = t
                seqs.append(ends)
            per_machine.append(seqs)
        for combo in itertools.product(*per_machine):
            comp = [0] * j
            for ends in combo:
                for job, e in ends.items():
                    comp[job] = e
            out.add(tuple(comp))
    return out


def _pareto(vectors: set[tuple]) -> list[tuple]:
    vs = sorted(vectors)
    keep = []
    for v in vs:
        if not any(all(a <= b for a, b in zip(w, v)) for w in keep):
            keep.append(v)
    return keep


def optimal_makespan(instance: FfspInstance) -> int:
    """Minimum makespan over all semi-active schedules, by enumeration."""
    fronts = [tuple([0] * instance.num_jobs)]
    for proc_stage in instance.stages:
        nxt = set()
        for ready in fronts:
            nxt |= _stage_options(proc_stage, ready)
        fronts = _pareto(nxt)
    return min(max(v) for v in fronts)


def _lower_bound(d: Dispatcher) -> float:
    inst = d.inst
    min_proc = [a.min(axis=0) for a in inst.stages]
    lb = 0
    for j in range(inst.num_jobs):
        last, rest = 0, 0
        for k in range(inst.num_stages):
            if d.comp[k][j] is not None:
                last = d.comp[k][j]
            else:
                rest += int(min_proc[k][j])
        lb = max(lb, last + rest)
    return lb


def brute_force(instance: FfspInstance, max_jobs: int = 5) -> Solution:
    """Optimal schedule as the lexicographically smallest optimal action tuple."""
    if instance.num_jobs > max_jobs or instance.num_stages > 2 or max(
        a.shape[0] for a in instance.stages
    ) > 2:
        raise ValueError("FFSP oracle limited to <=5 jobs, <=2 stages x <=2 machines")
    target = optimal_makespan(instance)

    def dfs(d: Dispatcher, path: list[int]):
        if d.done:
            return tuple(path) if d.makespan() == target else None
        if _lower_bound(d) > target:
            return None
        for a in d.feasible():
            child = d.copy()
            child.apply(a)
            path.append(a)
            found = dfs(child, path)
            path.pop()
            if found is not None:
                return found
        return None

    found = dfs(Dispatcher(instance), [])
    if found is None:
        raise AssertionError("optimal schedule not reachable by construction")
    return Solution(found, -float(target))


def reference_schedule(instance: FfspInstance, actions) -> dict:
    """Replay ``actions`` and expose the dispatcher's derived data."""
    d = Dispatcher(instance)
    for a in actions:
        d.apply(int(a))
    return {
        "stage": d.stage,
        "comp": [[math.nan if c is None else c for c in row] for row in d.comp],
        "start": [[math.nan if c is None else c for c in row] for row in d.start],
        "machine": [[-1 if c is None else c for c in row] for row in d.assigned],
        "avail": None if d.done else list(d.avail),
        "closed": None if d.done else list(d.closed),
    }
