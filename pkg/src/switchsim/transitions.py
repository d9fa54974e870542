"""First-order task-transition statistics and priority-tier assignment.

Counts adjacent task pairs in logged sequences, row-normalizes them into
switch probabilities, extracts the top-K likely successors per task, and
maps blocks into three tiers: device-resident for the running task,
host-staging candidates for its likely successors, and disk for the rest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .block_store import ModelManifest, TierAssignment
from .errors import ConfigError, LogParseError
from .sparsity import SkipSet

__all__ = [
    "TransitionModel",
    "ingest_log",
    "transition_probs",
    "top_k_successors",
    "fit_transition_model",
    "assign_tiers",
    "load_task_log",
]


@dataclass(frozen=True)
class TransitionModel:
    """Pair counts, row-normalized probabilities, and top-K successor lists."""

    counts: Mapping[tuple[str, str], int]
    probs: Mapping[tuple[str, str], float]
    successors: Mapping[str, tuple[str, ...]]
    k: int

    def successor_probs(self, task: str) -> dict[str, float]:
        """Probability of each top-K successor of ``task``."""
        return {t: self.probs[(task, t)] for t in self.successors.get(task, ())}

    def to_json(self) -> dict:
        nested_counts: dict[str, dict[str, int]] = {}
        for (a, b), n in sorted(self.counts.items()):
            nested_counts.setdefault(a, {})[b] = n
        nested_probs: dict[str, dict[str, float]] = {}
        for (a, b), p in sorted(self.probs.items()):
            nested_probs.setdefault(a, {})[b] = p
        return {
            "k": self.k,
            "counts": nested_counts,
            "probs": nested_probs,
            "successors": {t: list(s) for t, s in sorted(self.successors.items())},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "TransitionModel":
        counts = {(a, b): int(n) for a, row in doc["counts"].items()
                  for b, n in row.items()}
        probs = {(a, b): float(p) for a, row in doc["probs"].items()
                 for b, p in row.items()}
        successors = {t: tuple(s) for t, s in doc["successors"].items()}
        return cls(counts=counts, probs=probs, successors=successors, k=int(doc["k"]))


def ingest_log(entries: Sequence[str],
               known_tasks: Iterable[str] | None = None) -> dict[tuple[str, str], int]:
    """Count adjacent task pairs, dropping self-transitions.

    A task continuing is not a switch and loads nothing, so (t, t) pairs
    contribute no counts. Unknown task ids raise with the 0-based log
    position.
    """
    known = frozenset(known_tasks) if known_tasks is not None else None
    if known is not None:
        for i, task in enumerate(entries):
            if task not in known:
                raise LogParseError(f"unknown task id {task!r}", position=i)
    counts: dict[tuple[str, str], int] = {}
    for a, b in zip(entries, entries[1:]):
        if a == b:
            continue
        counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


def transition_probs(counts: Mapping[tuple[str, str], int]
                     ) -> dict[tuple[str, str], float]:
    """Row-normalize counts; tasks with no outgoing counts get no row."""
    row_totals: dict[str, int] = {}
    for (a, _b), n in counts.items():
        row_totals[a] = row_totals.get(a, 0) + n
    return {
        (a, b): n / row_totals[a]
        for (a, b), n in counts.items()
        if row_totals[a] > 0
    }


def top_k_successors(probs: Mapping[tuple[str, str], float], task: str,
                     k: int) -> list[str]:
    """The k most likely successors of ``task``, ties broken lexicographically."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    row = [(b, p) for (a, b), p in probs.items() if a == task]
    row.sort(key=lambda bp: (-bp[1], bp[0]))
    return [b for b, _p in row[:k]]


def fit_transition_model(entries: Sequence[str], k: int = 2,
                         known_tasks: Iterable[str] | None = None) -> TransitionModel:
    """Estimate counts, probabilities, and successor lists from one log."""
    counts = ingest_log(entries, known_tasks=known_tasks)
    probs = transition_probs(counts)
    sources = sorted({a for a, _b in counts})
    successors = {t: tuple(top_k_successors(probs, t, k)) for t in sources}
    return TransitionModel(counts=counts, probs=probs, successors=successors, k=k)


def assign_tiers(current: str, skip_sets: Mapping[str, SkipSet],
                 model: TransitionModel, manifest: ModelManifest) -> TierAssignment:
    """Partition blocks into runtime / pre-load / disk tiers.

    Level 1 is the running task's active set; Level 2 adds the blocks the
    top-K likely successors need beyond that; Level 3 is everything else.
    """
    if current not in skip_sets:
        raise ConfigError(f"no skip set for current task {current!r}")
    n = manifest.num_blocks
    level1 = skip_sets[current].active(n)
    level2: frozenset[int] = frozenset()
    for succ in model.successors.get(current, ()):
        if succ not in skip_sets:
            raise ConfigError(f"no skip set for successor task {succ!r}")
        level2 |= skip_sets[succ].active(n)
    level2 -= level1
    level_of = {}
    for b in range(n):
        level_of[b] = 1 if b in level1 else 2 if b in level2 else 3
    return TierAssignment(level_of=level_of)


def load_task_log(path: Path | str) -> list[str]:
    """Read a task log: newline-delimited ids, or CSV ``timestamp,task_id`` rows."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            entries.append(line.split(",")[-1].strip() if "," in line else line)
    return entries


def dump_model(model: TransitionModel, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
