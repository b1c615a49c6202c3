"""Shared machinery for the problem adapters.

Every problem exposes a batched environment (``BatchEnv`` subclass) whose rows
all refer to the same instance.  Search code drives rows in parallel; the
scalar ``State`` API is a frozen single-row snapshot of such an environment.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

# Most negative finite double; keeps rewards totally ordered.
NEG_INF = -sys.float_info.max


class InfeasibleAction(ValueError):
    pass


@dataclass(frozen=True)
class Solution:
    actions: tuple[int, ...]
    reward: float

    @property
    def cost(self) -> float:
        return -self.reward


class BatchEnv:
    """Batch of partial solutions for a single instance.

    Subclasses list their per-row arrays (batch on axis 0) in ``row_fields`` and
    implement ``_mask``, ``features``, ``_apply`` and ``final_cost``.  The
    ``actions`` array holds the action history, padded with -1 for steps a row
    did not take (it was already terminal).
    """

    row_fields: tuple[str, ...] = ()
    n_features: int = 0

    def __init__(self, instance, batch: int):
        self.instance = instance
        self.batch = batch
        self.actions = np.full((batch, 0), -1, dtype=np.int64)
        self.depth = np.zeros(batch, dtype=np.int64)

    @property
    def n_actions(self) -> int:
        raise NotImplementedError

    def done(self) -> np.ndarray:
        raise NotImplementedError

    def _mask(self) -> np.ndarray:
        raise NotImplementedError

    def features(self) -> np.ndarray:
        raise NotImplementedError

    def _apply(self, rows: np.ndarray, acts: np.ndarray) -> None:
        raise NotImplementedError

    def final_cost(self) -> np.ndarray:
        """Objective value of every row; only meaningful for finished rows."""
        raise NotImplementedError

    def mask(self) -> np.ndarray:
        """(B, A) feasibility mask; finished rows are all False."""
        m = self._mask()
        m[self.done()] = False
        return m

    def step(self, acts) -> None:
        acts = np.asarray(acts, dtype=np.int64)
        live = ~self.done()
        rows = np.flatnonzero(live)
        if rows.size:
            m = self._mask()
            if not m[rows, acts[rows]].all():
                bad = rows[~m[rows, acts[rows]]][0]
                raise InfeasibleAction(f"action {acts[bad]} infeasible in row {bad}")
            self._apply(rows, acts[rows])
        col = np.where(live, acts, -1)
        self.actions = np.concatenate([self.actions, col[:, None]], axis=1)
        self.depth += live

    def rewards(self) -> np.ndarray:
        return -self.final_cost()

    def row_actions(self, r: int) -> tuple[int, ...]:
        a = self.actions[r]
        return tuple(int(x) for x in a[a >= 0])

    def solution(self, r: int) -> Solution:
        return Solution(self.row_actions(r), float(-self.final_cost()[r]))

    def take(self, idx) -> "BatchEnv":
        idx = np.asarray(idx, dtype=np.int64)
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.batch = len(idx)
        for name in self.row_fields + ("actions", "depth"):
            setattr(new, name, getattr(self, name)[idx].copy())
        return new

    @classmethod
    def concat(cls, envs: list["BatchEnv"]) -> "BatchEnv":
        first = envs[0]
        new = object.__new__(type(first))
        new.__dict__.update(first.__dict__)
        new.batch = sum(e.batch for e in envs)
        for name in first.row_fields + ("depth",):
            setattr(new, name, np.concatenate([getattr(e, name) for e in envs]))
        width = max(e.actions.shape[1] for e in envs)
        padded = []
        for e in envs:
            pad = np.full((e.batch, width - e.actions.shape[1]), -1, dtype=np.int64)
            # Padding goes on the right; -1 entries are ignored wherever they sit.
            padded.append(np.concatenate([e.actions, pad], axis=1))
        new.actions = np.concatenate(padded)
        return new

    def compact(self) -> None:
        """Drop history columns that are -1 for every row."""
        keep = (self.actions >= 0).any(axis=0)
        if not keep.all():
            self.actions = self.actions[:, keep]


@dataclass(frozen=True, eq=False)
class State:
    """Immutable partial solution: a single-row environment snapshot."""

    instance: object
    assigned: tuple[int, ...]
    env: BatchEnv = field(repr=False)

    @property
    def depth(self) -> int:
        return len(self.assigned)

    @property
    def is_terminal(self) -> bool:
        return bool(self.env.done()[0])

    def __eq__(self, other):
        return (
            isinstance(other, State)
            and self.instance is other.instance
            and self.assigned == other.assigned
        )

    def __hash__(self):
        return hash((id(self.instance), self.assigned))


def state_from_env(env: BatchEnv, r: int = 0) -> State:
    row = env.take([r])
    row.compact()
    return State(env.instance, row.row_actions(0), row)
