"""Split-storage layout and tier residency for block-granular weights.

A model backbone is decomposed into per-block shards on disk; at runtime
blocks move disk -> host cache -> device under byte budgets. This module
owns the manifest (block inventory), the cache state for both tiers, and
the residency-changing operations (stage, insert, evict).

All operations are functional: they take a :class:`CacheState` and return
a new one, never mutating the input. On a budget error the caller's state
is therefore unchanged by construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Mapping

from .errors import BudgetExceededError, ManifestError, StagingOrderError, StoreCreationError

__all__ = [
    "ModelManifest",
    "CacheState",
    "TierAssignment",
    "Store",
    "init_store",
    "stage_to_cpu",
    "insert_to_gpu",
    "evict",
]

SHARD_HEADER_BYTES = 8


@dataclass(frozen=True)
class ModelManifest:
    """Block inventory: per-block byte sizes and one shard id per block."""

    model_name: str
    block_sizes: tuple[int, ...]
    shard_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.block_sizes) < 1:
            raise ManifestError("a manifest needs at least one block")
        if any(s <= 0 for s in self.block_sizes):
            raise ManifestError("every block size must be positive")
        if len(self.shard_ids) != len(self.block_sizes):
            raise ManifestError("shard_ids and block_sizes must have equal length")
        if len(set(self.shard_ids)) != len(self.shard_ids):
            raise ManifestError("shard ids must be pairwise distinct")

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def total_bytes(self) -> int:
        return sum(self.block_sizes)

    @property
    def all_blocks(self) -> frozenset[int]:
        return frozenset(range(self.num_blocks))

    def bytes_of(self, blocks: Iterable[int]) -> int:
        """Total size of the given block ids."""
        return sum(self.block_sizes[b] for b in blocks)

    @classmethod
    def uniform(cls, model_name: str, num_blocks: int, block_bytes: int,
                shard_prefix: str = "block_") -> "ModelManifest":
        """Manifest with ``num_blocks`` equal-size blocks."""
        return cls(
            model_name=model_name,
            block_sizes=(block_bytes,) * num_blocks,
            shard_ids=tuple(f"{shard_prefix}{i}.bin" for i in range(num_blocks)),
        )

    @classmethod
    def from_json(cls, doc: Mapping) -> "ModelManifest":
        """Build from the manifest file schema.

        Expected keys: ``model_name``, ``block_sizes_bytes`` (array of ints),
        optional ``shard_prefix``. Shard id i is ``<shard_prefix><i>.bin``.
        """
        try:
            name = doc["model_name"]
            sizes = tuple(int(s) for s in doc["block_sizes_bytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad manifest document: {exc}") from exc
        prefix = doc.get("shard_prefix", "block_")
        return cls(
            model_name=name,
            block_sizes=sizes,
            shard_ids=tuple(f"{prefix}{i}.bin" for i in range(len(sizes))),
        )

    @classmethod
    def load(cls, path: Path | str) -> "ModelManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self, shard_prefix: str = "block_") -> dict:
        return {
            "model_name": self.model_name,
            "block_sizes_bytes": list(self.block_sizes),
            "shard_prefix": shard_prefix,
        }


@dataclass(frozen=True)
class CacheState:
    """Resident sets for the device and host tiers, under byte budgets.

    ``gpu_lru`` / ``cpu_lru`` list the resident blocks from least to most
    recently touched; they always contain exactly the resident blocks.
    Keeping the recency order inside the state makes eviction a pure
    function of (state, arguments).
    """

    gpu_budget_bytes: int
    cpu_budget_bytes: int
    gpu_resident: frozenset[int] = frozenset()
    cpu_resident: frozenset[int] = frozenset()
    gpu_lru: tuple[int, ...] = ()
    cpu_lru: tuple[int, ...] = ()

    def check(self, manifest: ModelManifest) -> None:
        """Raise if any state invariant is violated."""
        for tier, resident, lru, budget in (
            ("gpu", self.gpu_resident, self.gpu_lru, self.gpu_budget_bytes),
            ("cpu", self.cpu_resident, self.cpu_lru, self.cpu_budget_bytes),
        ):
            if not resident <= manifest.all_blocks:
                raise ManifestError(f"{tier} resident set references unknown blocks")
            if frozenset(lru) != resident or len(lru) != len(resident):
                raise ManifestError(f"{tier} recency order out of sync with residency")
            used = manifest.bytes_of(resident)
            if used > budget:
                raise BudgetExceededError(tier, used - budget)


@dataclass(frozen=True)
class TierAssignment:
    """Maps every block id to priority tier 1 (device), 2 (host), or 3 (disk)."""

    level_of: Mapping[int, int]

    def level(self, n: int) -> frozenset[int]:
        return frozenset(b for b, lv in self.level_of.items() if lv == n)


@dataclass(frozen=True)
class Store:
    """Handle over an initialized shard directory."""

    manifest: ModelManifest
    root: Path
    state: CacheState = field(default_factory=lambda: CacheState(0, 0))

    def shard_path(self, block_id: int) -> Path:
        return self.root / self.manifest.shard_ids[block_id]

    def verify_shard(self, block_id: int) -> bool:
        """Size and id-header sanity check for one shard file."""
        path = self.shard_path(block_id)
        expected = self.manifest.block_sizes[block_id]
        if not path.is_file() or path.stat().st_size != expected:
            return False
        header_len = min(SHARD_HEADER_BYTES, expected)
        with open(path, "rb") as fh:
            header = fh.read(header_len)
        return header == block_id.to_bytes(SHARD_HEADER_BYTES, "little")[:header_len]

    def empty_state(self, gpu_budget_bytes: int, cpu_budget_bytes: int) -> CacheState:
        return CacheState(gpu_budget_bytes=gpu_budget_bytes, cpu_budget_bytes=cpu_budget_bytes)


def _shard_payload(block_id: int, size: int) -> bytes:
    # 8-byte little-endian id header, then a one-byte pattern keyed by id.
    header = block_id.to_bytes(SHARD_HEADER_BYTES, "little")[: min(SHARD_HEADER_BYTES, size)]
    filler = bytes([(block_id * 167 + 13) % 251]) * (size - len(header))
    return header + filler


def init_store(manifest: ModelManifest, disk_root: Path | str,
               gpu_budget_bytes: int | None = None,
               cpu_budget_bytes: int | None = None) -> Store:
    """Materialize one shard file per block under ``disk_root``.

    Shard contents are deterministic filler keyed by block id; identity is
    checked by shard id plus size, not by weight values. Budgets default to
    the whole model (both tiers unconstrained).
    """
    root = Path(disk_root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        for block_id, (size, shard_id) in enumerate(
                zip(manifest.block_sizes, manifest.shard_ids)):
            (root / shard_id).write_bytes(_shard_payload(block_id, size))
    except OSError as exc:
        raise StoreCreationError(f"cannot write shards under {root}: {exc}") from exc
    total = manifest.total_bytes
    state = CacheState(
        gpu_budget_bytes=total if gpu_budget_bytes is None else gpu_budget_bytes,
        cpu_budget_bytes=total if cpu_budget_bytes is None else cpu_budget_bytes,
    )
    return Store(manifest=manifest, root=root, state=state)


def _touch(lru: tuple[int, ...], blocks: Iterable[int]) -> tuple[int, ...]:
    # Move the named blocks to the most-recent end, preserving their id order.
    touched = sorted(set(blocks))
    kept = tuple(b for b in lru if b not in touched)
    return kept + tuple(touched)


def evict(manifest: ModelManifest, state: CacheState, tier: Literal["gpu", "cpu"],
          bytes_needed: int, protected: frozenset[int] = frozenset(),
          next_task_probs: Mapping[int, float] | None = None) -> CacheState:
    """Free at least ``bytes_needed`` on ``tier`` by dropping resident blocks.

    Victims are taken in ascending order of next-task usefulness (the given
    probability, 0.0 when absent), ties broken least-recently-used first,
    then by ascending block id. Raises :class:`BudgetExceededError` with the
    remaining shortfall when even evicting every non-protected block is not
    enough.
    """
    if bytes_needed <= 0:
        return state
    probs = next_task_probs or {}
    resident = state.gpu_resident if tier == "gpu" else state.cpu_resident
    lru = state.gpu_lru if tier == "gpu" else state.cpu_lru
    recency = {b: i for i, b in enumerate(lru)}
    candidates = sorted(
        (b for b in resident if b not in protected),
        key=lambda b: (probs.get(b, 0.0), recency[b], b),
    )
    victims: list[int] = []
    freed = 0
    for b in candidates:
        if freed >= bytes_needed:
            break
        victims.append(b)
        freed += manifest.block_sizes[b]
    if freed < bytes_needed:
        raise BudgetExceededError(tier, bytes_needed - freed)
    gone = frozenset(victims)
    new_resident = resident - gone
    new_lru = tuple(b for b in lru if b not in gone)
    if tier == "gpu":
        return replace(state, gpu_resident=new_resident, gpu_lru=new_lru)
    return replace(state, cpu_resident=new_resident, cpu_lru=new_lru)


def _admit(manifest: ModelManifest, state: CacheState, tier: Literal["gpu", "cpu"],
           blocks: frozenset[int], protected: frozenset[int],
           next_task_probs: Mapping[int, float] | None) -> tuple[CacheState, int]:
    resident = state.gpu_resident if tier == "gpu" else state.cpu_resident
    budget = state.gpu_budget_bytes if tier == "gpu" else state.cpu_budget_bytes
    new_blocks = blocks - resident
    bytes_moved = manifest.bytes_of(new_blocks)
    overflow = manifest.bytes_of(resident) + bytes_moved - budget
    if overflow > 0:
        state = evict(manifest, state, tier, overflow,
                      protected=protected | blocks, next_task_probs=next_task_probs)
        resident = state.gpu_resident if tier == "gpu" else state.cpu_resident
    lru = state.gpu_lru if tier == "gpu" else state.cpu_lru
    new_resident = resident | new_blocks
    new_lru = _touch(lru, blocks)
    if tier == "gpu":
        return replace(state, gpu_resident=new_resident, gpu_lru=new_lru), bytes_moved
    return replace(state, cpu_resident=new_resident, cpu_lru=new_lru), bytes_moved


def stage_to_cpu(manifest: ModelManifest, state: CacheState, blocks: Iterable[int],
                 protected: frozenset[int] = frozenset(),
                 next_task_probs: Mapping[int, float] | None = None
                 ) -> tuple[CacheState, int]:
    """Pull blocks from disk into the host cache.

    Already-resident blocks move zero bytes (their recency is refreshed).
    When the budget would overflow, non-protected resident blocks are
    evicted first; an unsatisfiable overflow raises and leaves the input
    state untouched.
    """
    wanted = frozenset(blocks)
    if not wanted <= manifest.all_blocks:
        raise ManifestError(f"unknown block ids: {sorted(wanted - manifest.all_blocks)}")
    return _admit(manifest, state, "cpu", wanted, protected, next_task_probs)


def insert_to_gpu(manifest: ModelManifest, state: CacheState, blocks: Iterable[int],
                  protected: frozenset[int] = frozenset(),
                  next_task_probs: Mapping[int, float] | None = None
                  ) -> tuple[CacheState, int]:
    """Patch host-resident blocks into the device-resident set.

    The device fills only from the host: a block that is neither host- nor
    device-resident raises :class:`StagingOrderError`. Insertion is an
    incremental graph patch, so no full-model reinitialization cost is ever
    attributed here.
    """
    wanted = frozenset(blocks)
    if not wanted <= manifest.all_blocks:
        raise ManifestError(f"unknown block ids: {sorted(wanted - manifest.all_blocks)}")
    unstaged = wanted - state.cpu_resident - state.gpu_resident
    if unstaged:
        raise StagingOrderError(
            f"blocks {sorted(unstaged)} are not host-resident; stage them first")
    return _admit(manifest, state, "gpu", wanted, protected, next_task_probs)
