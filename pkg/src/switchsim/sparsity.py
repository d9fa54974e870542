"""Metric-constrained greedy skip-set selection and cross-task alignment.

Each task drops blocks one at a time: a removal is feasible while the
task's score stays at or above ``retention_ratio`` times the full-model
score. Alignment biases later tasks toward blocks already skipped by
earlier ones (the shared pool) so that active sets overlap and task
switches move fewer bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, OracleError

__all__ = [
    "TaskSpec",
    "MetricOracle",
    "AdditiveOracle",
    "TableOracle",
    "SkipSet",
    "SelectionResult",
    "greedy_skip_select",
    "aligned_skip_select",
    "build_all_tasks",
    "jaccard",
]


@dataclass(frozen=True)
class TaskSpec:
    """Per-task selection knobs.

    ``retention_ratio`` is the fraction of the full-model score that must
    be retained; ``max_remove`` caps the number of skipped blocks;
    ``priority_weight`` orders tasks for multi-task processing (higher
    first).
    """

    task_id: str
    retention_ratio: float
    max_remove: int
    priority_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.retention_ratio <= 1.0:
            raise ConfigError(f"{self.task_id}: retention_ratio must be in (0, 1]")
        if self.max_remove < 0:
            raise ConfigError(f"{self.task_id}: max_remove must be >= 0")
        if self.priority_weight < 0:
            raise ConfigError(f"{self.task_id}: priority_weight must be >= 0")


class MetricOracle:
    """Deterministic evaluation contract: active block set -> score in [0, 1]."""

    num_blocks: int

    def score(self, active: frozenset[int]) -> float:
        raise NotImplementedError

    @property
    def full_score(self) -> float:
        return self.score(frozenset(range(self.num_blocks)))


class AdditiveOracle(MetricOracle):
    """Synthetic oracle: score(A) = clamp(sum of active importances / total, 0, 1)."""

    def __init__(self, weights: Sequence[float]):
        if not weights:
            raise OracleError("need at least one block weight")
        if any(w < 0 for w in weights):
            raise OracleError("importance weights must be non-negative")
        self.weights = tuple(float(w) for w in weights)
        self.num_blocks = len(self.weights)
        self._total = sum(self.weights)

    def score(self, active: frozenset[int]) -> float:
        if self._total == 0.0:
            return 1.0
        raw = sum(self.weights[k] for k in active) / self._total
        return min(max(raw, 0.0), 1.0)


class TableOracle(MetricOracle):
    """Oracle backed by explicit (active set -> score) entries.

    Useful for replaying hand-built cases, including non-monotone score
    landscapes that an additive oracle cannot produce. Evaluating a subset
    absent from the table is an error.
    """

    def __init__(self, entries: Mapping[frozenset[int], float], num_blocks: int):
        self._entries = dict(entries)
        self.num_blocks = num_blocks

    def score(self, active: frozenset[int]) -> float:
        try:
            return self._entries[frozenset(active)]
        except KeyError:
            raise OracleError(
                f"no table entry for active set {sorted(active)}") from None

    @classmethod
    def from_json(cls, doc: Sequence[Mapping], num_blocks: int) -> "TableOracle":
        entries = {}
        for row in doc:
            entries[frozenset(int(b) for b in row["active_blocks"])] = float(row["score"])
        return cls(entries, num_blocks)

    @classmethod
    def load(cls, path: Path | str, num_blocks: int) -> "TableOracle":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh), num_blocks)


@dataclass(frozen=True)
class SkipSet:
    """Blocks a task omits at inference; the complement is its active set."""

    task_id: str
    skipped: frozenset[int]

    def active(self, num_blocks: int) -> frozenset[int]:
        return frozenset(range(num_blocks)) - self.skipped


@dataclass(frozen=True)
class SelectionResult:
    """A selected skip set plus the bookkeeping the selector reports."""

    skip: SkipSet
    final_score: float
    oracle_calls: int
    removal_order: tuple[int, ...]

    @property
    def skipped(self) -> frozenset[int]:
        return self.skip.skipped


def _select(task: TaskSpec, oracle: MetricOracle,
            shared_pool: frozenset[int]) -> SelectionResult:
    n = oracle.num_blocks
    calls = 1
    s_full = oracle.full_score
    threshold = task.retention_ratio * s_full
    skipped: set[int] = set()
    order: list[int] = []
    current = s_full
    for _ in range(task.max_remove):
        active = frozenset(range(n)) - skipped
        feasible: list[tuple[int, float]] = []
        for j in sorted(active):
            s_j = oracle.score(active - {j})
            calls += 1
            if s_j >= threshold:
                feasible.append((j, s_j))
        if not feasible:
            break
        pooled = [(j, s) for j, s in feasible if j in shared_pool]
        pick = pooled if pooled else feasible
        # Highest score wins; equal scores resolve to the lowest block id.
        best_j, best_s = max(pick, key=lambda js: (js[1], -js[0]))
        skipped.add(best_j)
        order.append(best_j)
        current = best_s
    return SelectionResult(
        skip=SkipSet(task_id=task.task_id, skipped=frozenset(skipped)),
        final_score=current,
        oracle_calls=calls,
        removal_order=tuple(order),
    )


def greedy_skip_select(task: TaskSpec, oracle: MetricOracle) -> SelectionResult:
    """Greedy removal: repeatedly drop the feasible block with the best score."""
    return _select(task, oracle, frozenset())


def aligned_skip_select(task: TaskSpec, oracle: MetricOracle,
                        shared_pool: frozenset[int]) -> SelectionResult:
    """Greedy removal with shared-pool preference.

    Each step first restricts the feasible candidates to the shared pool;
    only when no pool candidate is feasible does it fall back to the best
    candidate overall. With an empty pool this is exactly
    :func:`greedy_skip_select`.
    """
    return _select(task, oracle, frozenset(shared_pool))


def build_all_tasks(tasks: Sequence[TaskSpec], oracles: Mapping[str, MetricOracle],
                    align: bool = True) -> dict[str, SelectionResult]:
    """Select skip sets for every task, in descending priority order.

    The first task runs plain greedy selection; with ``align`` each
    subsequent task prefers the union of all previously produced skip
    sets. ``align=False`` selects every task independently (the
    per-task-greedy baseline mode).
    """
    if not tasks:
        raise ConfigError("no tasks given")
    missing = [t.task_id for t in tasks if t.task_id not in oracles]
    if missing:
        raise ConfigError(f"no oracle for tasks: {missing}")
    ordered = sorted(tasks, key=lambda t: (-t.priority_weight, t.task_id))
    results: dict[str, SelectionResult] = {}
    pool: frozenset[int] = frozenset()
    for task in ordered:
        if align and pool:
            res = aligned_skip_select(task, oracles[task.task_id], pool)
        else:
            res = greedy_skip_select(task, oracles[task.task_id])
        results[task.task_id] = res
        pool |= res.skipped
    return results


def jaccard(a: SkipSet | Iterable[int], b: SkipSet | Iterable[int]) -> float:
    """Set overlap |a & b| / |a | b|; two empty sets count as identical (1.0)."""
    sa = a.skipped if isinstance(a, SkipSet) else frozenset(a)
    sb = b.skipped if isinstance(b, SkipSet) else frozenset(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def selection_report(results: Mapping[str, SelectionResult]) -> dict:
    """JSON-ready view: task id -> sorted skip list, final score, call count."""
    return {
        task_id: {
            "skipped": sorted(res.skipped),
            "final_score": res.final_score,
            "oracle_calls": res.oracle_calls,
        }
        for task_id, res in results.items()
    }


def load_task_specs(path: Path | str) -> list[TaskSpec]:
    """Read the task file: a JSON array of task objects."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ConfigError(f"{path}: task file must be a JSON array")
    tasks = []
    for row in doc:
        try:
            tasks.append(TaskSpec(
                task_id=row["task_id"],
                retention_ratio=float(row["retention_ratio"]),
                max_remove=int(row["max_remove"]),
                priority_weight=float(row.get("priority_weight", 1.0)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: bad task entry {row!r}: {exc}") from exc
    seen = [t.task_id for t in tasks]
    if len(set(seen)) != len(seen):
        raise ConfigError(f"{path}: duplicate task ids")
    return tasks
