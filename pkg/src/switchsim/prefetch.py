"""Correlation-aware staging of likely-next-task blocks into the host cache.

While a task runs, its inference step opens a virtual compute window; the
prefetcher spends that window pulling pre-load-tier blocks from disk into
the host cache, highest switch-probability first, under the host byte
budget. Blocks staged here skip the disk leg at the next switch.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .block_store import CacheState, ModelManifest, TierAssignment, stage_to_cpu
from .sparsity import SkipSet
from .switching import CostModel
from .transitions import TransitionModel

__all__ = ["PlanEntry", "PrefetchPlan", "plan_prefetch", "execute_prefetch",
           "block_usefulness"]


@dataclass(frozen=True)
class PlanEntry:
    block: int
    weight: float
    size_bytes: int


@dataclass(frozen=True)
class PrefetchPlan:
    """Blocks to stage, ordered by descending weight (ties by ascending id)."""

    entries: tuple[PlanEntry, ...]
    total_bytes: int

    @property
    def blocks(self) -> tuple[int, ...]:
        return tuple(e.block for e in self.entries)

    def to_json(self) -> list[dict]:
        return [{"block": e.block, "weight": e.weight, "bytes": e.size_bytes}
                for e in self.entries]


def block_usefulness(current: str, model: TransitionModel,
                     skip_sets: Mapping[str, SkipSet],
                     manifest: ModelManifest) -> dict[int, float]:
    """Per-block priority: the best switch probability among likely successors
    whose active set contains the block."""
    weights: dict[int, float] = {}
    for succ, prob in model.successor_probs(current).items():
        if succ not in skip_sets:
            continue
        for b in skip_sets[succ].active(manifest.num_blocks):
            if prob > weights.get(b, 0.0):
                weights[b] = prob
    return weights


def plan_prefetch(current: str, tiers: TierAssignment, model: TransitionModel,
                  skip_sets: Mapping[str, SkipSet], state: CacheState,
                  manifest: ModelManifest) -> PrefetchPlan:
    """Greedily fill the remaining host budget with pre-load-tier blocks.

    Candidates are Level-2 blocks not already resident on either tier.
    Capacity assumes Level-3 stragglers in the host cache can be evicted;
    Level-1 and Level-2 residents are counted as untouchable. A candidate
    that does not fit is skipped and the scan continues.
    """
    level1 = tiers.level(1)
    level2 = tiers.level(2)
    candidates = level2 - state.cpu_resident - state.gpu_resident
    weights = block_usefulness(current, model, skip_sets, manifest)
    ranked = sorted(candidates, key=lambda b: (-weights.get(b, 0.0), b))
    keep = state.cpu_resident & (level1 | level2)
    capacity = state.cpu_budget_bytes - manifest.bytes_of(keep)
    entries: list[PlanEntry] = []
    used = 0
    for b in ranked:
        size = manifest.block_sizes[b]
        if used + size > capacity:
            continue
        entries.append(PlanEntry(block=b, weight=weights.get(b, 0.0), size_bytes=size))
        used += size
    return PrefetchPlan(entries=tuple(entries), total_bytes=used)


def execute_prefetch(plan: PrefetchPlan, state: CacheState, compute_window_ms: float,
                     cost: CostModel, manifest: ModelManifest,
                     protected: frozenset[int] = frozenset(),
                     next_task_probs: Mapping[int, float] | None = None
                     ) -> tuple[CacheState, frozenset[int], int]:
    """Stage plan blocks in order until the compute window runs out.

    Blocks are staged atomically: one whose transfer would overrun the
    window is not staged and ends the pass, so the staged set is always a
    prefix of the plan. Staged blocks add zero latency to the next switch.
    """
    staged: list[int] = []
    bytes_moved = 0
    elapsed = 0.0
    for entry in plan.entries:
        transfer = cost.disk_ms(entry.size_bytes)
        if elapsed + transfer > compute_window_ms:
            break
        state, moved = stage_to_cpu(
            manifest, state, {entry.block},
            protected=protected | frozenset(plan.blocks),
            next_task_probs=next_task_probs,
        )
        staged.append(entry.block)
        bytes_moved += moved
        elapsed += transfer
    return state, frozenset(staged), bytes_moved
