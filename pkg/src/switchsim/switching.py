"""Task-switch execution under a two-link cost model, in four deploy modes.

A switch moves whatever the incoming task needs over two sequential
links (disk -> host, host -> device). Monolithic-style modes reload a
whole checkpoint and pay a fixed reinitialization cost; split-storage
modes move only the differential set and patch the device incrementally.
After a successful switch the device holds exactly the incoming task's
active set (runtime blocks only); in monolithic mode it holds the whole
model. Dropping a device-resident block is free.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .block_store import CacheState, ModelManifest
from .errors import BudgetExceededError, ConfigError
from .sparsity import SkipSet

__all__ = [
    "DeployMode",
    "CostModel",
    "SwitchReport",
    "diff_set",
    "execute_switch",
    "gpu_utilization",
    "calibrate_uniform_block_bytes",
]


class DeployMode(str, Enum):
    """Which loading strategy a replay exercises."""

    MONOLITHIC = "monolithic"
    SPARSE_NO_SPLIT = "sparse_no_split"
    SPLIT_ONLY = "split_only"
    FULL_METHOD = "full_method"

    @property
    def is_split(self) -> bool:
        return self in (DeployMode.SPLIT_ONLY, DeployMode.FULL_METHOD)


@dataclass(frozen=True)
class CostModel:
    """Link bandwidths plus fixed per-block and reinitialization costs.

    Bandwidths are in MB/s (1 MB = 1e6 bytes); the reinitialization term
    applies only to modes that reload a monolithic checkpoint.
    """

    disk_to_cpu_mbps: float
    cpu_to_gpu_mbps: float
    per_block_fixed_ms: float = 0.0
    monolithic_init_ms: float = 0.0

    def __post_init__(self):
        if self.disk_to_cpu_mbps <= 0 or self.cpu_to_gpu_mbps <= 0:
            raise ConfigError("bandwidths must be positive")
        if self.per_block_fixed_ms < 0 or self.monolithic_init_ms < 0:
            raise ConfigError("fixed costs must be non-negative")

    def disk_ms(self, nbytes: int) -> float:
        """Transfer time for one block of ``nbytes`` over the disk->host link."""
        return nbytes / (self.disk_to_cpu_mbps * 1000.0) + self.per_block_fixed_ms

    def gpu_ms(self, nbytes: int) -> float:
        """Transfer time for one block of ``nbytes`` over the host->device link."""
        return nbytes / (self.cpu_to_gpu_mbps * 1000.0) + self.per_block_fixed_ms

    def link_ms(self, manifest: ModelManifest, blocks: Iterable[int],
                link: str) -> float:
        per_block = self.disk_ms if link == "disk" else self.gpu_ms
        return sum(per_block(manifest.block_sizes[b]) for b in blocks)

    @classmethod
    def from_json(cls, doc: Mapping) -> "CostModel":
        try:
            return cls(
                disk_to_cpu_mbps=float(doc["disk_to_cpu_mbps"]),
                cpu_to_gpu_mbps=float(doc["cpu_to_gpu_mbps"]),
                per_block_fixed_ms=float(doc.get("per_block_fixed_ms", 0.0)),
                monolithic_init_ms=float(doc.get("monolithic_init_ms", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad cost model document: {exc}") from exc

    @classmethod
    def load(cls, path: Path | str) -> "CostModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {
            "disk_to_cpu_mbps": self.disk_to_cpu_mbps,
            "cpu_to_gpu_mbps": self.cpu_to_gpu_mbps,
            "per_block_fixed_ms": self.per_block_fixed_ms,
            "monolithic_init_ms": self.monolithic_init_ms,
        }


@dataclass(frozen=True)
class SwitchReport:
    """Latency breakdown and residency accounting for one task switch."""

    from_task: str
    to_task: str
    mode: str
    latency_ms: float
    bytes_disk_to_cpu: int
    bytes_cpu_to_gpu: int
    blocks_reused: int
    blocks_fetched: int
    blocks_prestaged: int
    gpu_resident_bytes_after: int

    def to_json(self) -> dict:
        return {
            "from_task": self.from_task,
            "to_task": self.to_task,
            "mode": self.mode,
            "latency_ms": round(self.latency_ms, 3),
            "bytes_disk_to_cpu": self.bytes_disk_to_cpu,
            "bytes_cpu_to_gpu": self.bytes_cpu_to_gpu,
            "blocks_reused": self.blocks_reused,
            "blocks_fetched": self.blocks_fetched,
            "blocks_prestaged": self.blocks_prestaged,
            "gpu_resident_bytes_after": self.gpu_resident_bytes_after,
        }


def diff_set(active_from: frozenset[int], active_to: frozenset[int]) -> frozenset[int]:
    """Blocks the incoming task needs that the outgoing one did not use."""
    return active_to - active_from


def _retarget_gpu(state: CacheState, target: frozenset[int]) -> CacheState:
    # Device keeps exactly the target set; retained blocks keep their
    # recency order, newly inserted ones append in id order.
    kept = tuple(b for b in state.gpu_lru if b in target)
    added = tuple(sorted(target - frozenset(kept)))
    return replace(state, gpu_resident=target, gpu_lru=kept + added)


def execute_switch(state: CacheState, from_task: str, to_task: str, mode: DeployMode,
                   skip_sets: Mapping[str, SkipSet], cost: CostModel,
                   manifest: ModelManifest) -> tuple[CacheState, SwitchReport]:
    """Run one task switch and account its cost.

    Mode semantics:

    * ``monolithic``: full-model reload, reinitialization plus all blocks
      over both links, no reuse.
    * ``sparse_no_split``: reloads the incoming task's whole sparse
      checkpoint (reinitialization plus its active set over both links),
      no reuse.
    * ``split_only``: moves only blocks the device is missing, both links,
      no reinitialization, no prestaging credit.
    * ``full_method``: as split_only, but blocks already host-resident
      skip the disk leg.
    """
    mode = DeployMode(mode)
    n = manifest.num_blocks
    if mode is DeployMode.MONOLITHIC:
        target = manifest.all_blocks
    else:
        for task in (from_task, to_task):
            if task not in skip_sets:
                raise ConfigError(f"no skip set for task {task!r}")
        target = skip_sets[to_task].active(n)
    target_bytes = manifest.bytes_of(target)
    if target_bytes > state.gpu_budget_bytes:
        raise BudgetExceededError("gpu", target_bytes - state.gpu_budget_bytes)

    if mode.is_split:
        need = target - state.gpu_resident
        prestaged = need & state.cpu_resident if mode is DeployMode.FULL_METHOD \
            else frozenset()
        disk_leg = need - prestaged
        gpu_leg = need
        reused = len(target & state.gpu_resident)
        init = 0.0
    else:
        disk_leg = gpu_leg = target
        prestaged = frozenset()
        reused = 0
        init = cost.monolithic_init_ms

    latency = (init
               + cost.link_ms(manifest, disk_leg, "disk")
               + cost.link_ms(manifest, gpu_leg, "gpu"))
    new_state = _retarget_gpu(state, target)
    report = SwitchReport(
        from_task=from_task,
        to_task=to_task,
        mode=mode.value,
        latency_ms=latency,
        bytes_disk_to_cpu=manifest.bytes_of(disk_leg),
        bytes_cpu_to_gpu=manifest.bytes_of(gpu_leg),
        blocks_reused=reused,
        blocks_fetched=len(disk_leg) if mode.is_split else len(gpu_leg),
        blocks_prestaged=len(prestaged),
        gpu_resident_bytes_after=manifest.bytes_of(new_state.gpu_resident),
    )
    return new_state, report


def gpu_utilization(state: CacheState, manifest: ModelManifest) -> int:
    """Bytes currently occupied by device-resident blocks."""
    return manifest.bytes_of(state.gpu_resident)


def calibrate_uniform_block_bytes(target_monolithic_ms: float, num_blocks: int,
                                  cost: CostModel) -> int:
    """Solve the uniform block size that makes a full reload hit the target.

    One-point calibration: the same cost model then predicts every other
    mode without further fitting.
    """
    fixed = cost.monolithic_init_ms + 2 * num_blocks * cost.per_block_fixed_ms
    remaining = target_monolithic_ms - fixed
    if remaining <= 0:
        raise ConfigError(
            f"target {target_monolithic_ms} ms is not above the fixed costs ({fixed} ms)")
    per_byte_ms = (1.0 / (cost.disk_to_cpu_mbps * 1000.0)
                   + 1.0 / (cost.cpu_to_gpu_mbps * 1000.0))
    return round(remaining / (num_blocks * per_byte_ms))
