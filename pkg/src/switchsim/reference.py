"""Independent reference implementations and synthetic instance generation.

The brute-force routines re-derive selection semantics without sharing
code with :mod:`switchsim.sparsity`; they exist to validate the fast path
on small instances. The instance generator produces seeded multi-task
importance landscapes whose cross-task overlap is controlled by a single
correlation knob.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .sparsity import AdditiveOracle, MetricOracle, TaskSpec

__all__ = [
    "SyntheticInstance",
    "gen_instance",
    "brute_force_greedy_replay",
    "brute_force_best_feasible",
    "enumerate_table_entries",
    "gen_markov_log",
]

REPLAY_MAX_BLOCKS = 16
EXHAUSTIVE_MAX_BLOCKS = 12

# Instance-generator shape constants. A fixed fraction of blocks per task
# is near-redundant (tiny importance) and the rest critical (importance
# too large to ever remove under practical retention ratios). Which blocks
# are redundant follows the base/noise blend at full correlation strength;
# the fine ordering inside the redundant cohort decorrelates faster (cubed
# coefficient), because related tasks agree on *what* is redundant far
# more than on exactly *how* redundant.
REDUNDANT_FRACTION = 0.75
RANK_MIX_EXPONENT = 3
REDUNDANT_SCALE = 0.02


@dataclass(frozen=True)
class SyntheticInstance:
    """Seeded multi-task importance landscape for selection experiments."""

    seed: int
    num_blocks: int
    num_tasks: int
    correlation: float
    weights: tuple[tuple[float, ...], ...]
    retention: tuple[float, ...]

    @property
    def task_ids(self) -> tuple[str, ...]:
        return tuple(f"task{i:02d}" for i in range(self.num_tasks))

    def oracle(self, index: int) -> AdditiveOracle:
        return AdditiveOracle(self.weights[index])

    def oracles(self, task_ids: tuple[str, ...] | None = None) -> dict[str, AdditiveOracle]:
        ids = task_ids if task_ids is not None else self.task_ids
        return {tid: self.oracle(i) for i, tid in enumerate(ids)}

    def task_specs(self, max_remove: int | None = None,
                   priority_weights: tuple[float, ...] | None = None,
                   task_ids: tuple[str, ...] | None = None) -> list[TaskSpec]:
        """Materialize task specs; default removal cap is 30% of the blocks."""
        if max_remove is None:
            max_remove = max(1, round(0.3 * self.num_blocks))
        ids = task_ids if task_ids is not None else self.task_ids
        return [
            TaskSpec(
                task_id=tid,
                retention_ratio=self.retention[i],
                max_remove=max_remove,
                priority_weight=(priority_weights[i] if priority_weights is not None
                                 else float(self.num_tasks - i)),
            )
            for i, tid in enumerate(ids)
        ]


def gen_instance(seed: int, num_blocks: int, num_tasks: int,
                 correlation: float, retention_ratio: float = 0.9) -> SyntheticInstance:
    """Draw a seeded instance whose cross-task skip overlap tracks ``correlation``.

    Per task, the ``REDUNDANT_FRACTION`` of blocks ranking lowest under the
    blend ``correlation * base + (1 - correlation) * noise`` get small
    importances (orderable, individually removable); the rest get large
    ones (never feasibly removable at practical retention ratios). At
    correlation 1 every task sees identical importances; at 0 they are
    independent.
    """
    if num_blocks < 1 or num_tasks < 1:
        raise ValueError("num_blocks and num_tasks must be positive")
    if not 0.0 <= correlation <= 1.0:
        raise ValueError("correlation must lie in [0, 1]")
    rng = random.Random(seed)
    base = [rng.random() for _ in range(num_blocks)]
    rank_base = [rng.random() for _ in range(num_blocks)]
    c_rank = correlation ** RANK_MIX_EXPONENT
    n_redundant = round(REDUNDANT_FRACTION * num_blocks)
    weights = []
    for _ in range(num_tasks):
        blend = [correlation * b + (1 - correlation) * rng.random() for b in base]
        rank = [c_rank * p + (1 - c_rank) * rng.random() for p in rank_base]
        by_blend = sorted(range(num_blocks), key=lambda k: (blend[k], k))
        redundant = set(by_blend[:n_redundant])
        weights.append(tuple(
            REDUNDANT_SCALE * rank[k] if k in redundant else 1.5 + 0.5 * blend[k]
            for k in range(num_blocks)
        ))
    return SyntheticInstance(
        seed=seed,
        num_blocks=num_blocks,
        num_tasks=num_tasks,
        correlation=correlation,
        weights=tuple(weights),
        retention=(retention_ratio,) * num_tasks,
    )


def brute_force_greedy_replay(oracle: MetricOracle, retention_ratio: float,
                              max_remove: int,
                              shared_pool: frozenset[int] = frozenset()) -> frozenset[int]:
    """Re-derive the greedy removal semantics by per-step enumeration.

    Deliberately shares no code with the production selector: every step
    rebuilds the full candidate table, sorts it, and applies the pool
    preference and tie-break by explicit ordering. Guarded to small
    instances; this is an equivalence oracle, not an algorithm.
    """
    n = oracle.num_blocks
    if n > REPLAY_MAX_BLOCKS:
        raise ValueError(f"replay oracle limited to {REPLAY_MAX_BLOCKS} blocks, got {n}")
    floor = retention_ratio * oracle.score(frozenset(range(n)))
    removed: list[int] = []
    while len(removed) < max_remove:
        remaining = [k for k in range(n) if k not in removed]
        table = [(j, oracle.score(frozenset(k for k in remaining if k != j)))
                 for j in remaining]
        ok = [row for row in table if row[1] >= floor]
        if not ok:
            break
        preferred = [row for row in ok if row[0] in shared_pool]
        ranked = sorted(preferred if preferred else ok,
                        key=lambda row: (-row[1], row[0]))
        removed.append(ranked[0][0])
    return frozenset(removed)


def brute_force_best_feasible(oracle: MetricOracle, retention_ratio: float,
                              n_remove: int) -> frozenset[int]:
    """Exhaustively find the feasible skip set of size <= n_remove with top score.

    Ties resolve to the lexicographically smallest sorted set. Used to
    measure the greedy optimality gap; greedy equality is never asserted.
    """
    n = oracle.num_blocks
    if n > EXHAUSTIVE_MAX_BLOCKS:
        raise ValueError(
            f"exhaustive search limited to {EXHAUSTIVE_MAX_BLOCKS} blocks, got {n}")
    everything = frozenset(range(n))
    floor = retention_ratio * oracle.score(everything)
    best: tuple[int, ...] | None = None
    best_score = float("-inf")
    for size in range(0, min(n_remove, n) + 1):
        for combo in itertools.combinations(range(n), size):
            s = oracle.score(everything - frozenset(combo))
            if s < floor:
                continue
            if best is None or s > best_score or (s == best_score and combo < best):
                best, best_score = combo, s
    return frozenset(best or ())


def enumerate_table_entries(oracle: MetricOracle, num_blocks: int) -> list[dict]:
    """Serialize an oracle over all subsets into table-oracle JSON rows."""
    if num_blocks > EXHAUSTIVE_MAX_BLOCKS:
        raise ValueError(
            f"table enumeration limited to {EXHAUSTIVE_MAX_BLOCKS} blocks")
    rows = []
    for size in range(num_blocks + 1):
        for combo in itertools.combinations(range(num_blocks), size):
            active = frozenset(combo)
            rows.append({"active_blocks": sorted(active),
                         "score": oracle.score(active)})
    return rows


def gen_markov_log(seed: int, length: int, task_ids: list[str],
                   pair_bias: dict[tuple[str, str], float] | None = None) -> list[str]:
    """Sample a task sequence from a first-order chain with biased pairs.

    Every ordered pair of distinct tasks gets weight 1.0 unless overridden
    in ``pair_bias``; larger weights make that switch proportionally more
    frequent. Deterministic for a given seed.
    """
    if length <= 0:
        return []
    rng = random.Random(seed)
    bias = pair_bias or {}
    current = task_ids[0]
    out = [current]
    for _ in range(length - 1):
        others = [t for t in task_ids if t != current]
        weights = [bias.get((current, t), 1.0) for t in others]
        current = rng.choices(others, weights=weights, k=1)[0]
        out.append(current)
    return out
