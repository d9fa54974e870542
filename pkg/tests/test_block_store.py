"""Split-storage layout, staging, insertion, and eviction semantics."""
from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchsim.block_store import (CacheState, ModelManifest, evict, init_store,
                                   insert_to_gpu, stage_to_cpu)
from switchsim.errors import BudgetExceededError, ManifestError, StagingOrderError, StoreCreationError

from opharness import run_random_ops

MB = 1_000_000


def uniform_manifest(n: int, size: int = 10 * MB) -> ModelManifest:
    return ModelManifest.uniform(f"m{n}", n, size)


def state_with(manifest: ModelManifest, gpu=(), cpu=(), gpu_budget=None,
               cpu_budget=None) -> CacheState:
    total = manifest.total_bytes
    return CacheState(
        gpu_budget_bytes=total if gpu_budget is None else gpu_budget,
        cpu_budget_bytes=total if cpu_budget is None else cpu_budget,
        gpu_resident=frozenset(gpu),
        cpu_resident=frozenset(cpu),
        gpu_lru=tuple(gpu),
        cpu_lru=tuple(cpu),
    )


class TestManifest:
    def test_rejects_empty(self):
        with pytest.raises(ManifestError):
            ModelManifest("m", (), ())

    def test_rejects_nonpositive_sizes(self):
        with pytest.raises(ManifestError):
            ModelManifest("m", (10, 0), ("a", "b"))

    def test_rejects_duplicate_shard_ids(self):
        with pytest.raises(ManifestError):
            ModelManifest("m", (10, 10), ("same.bin", "same.bin"))

    def test_from_json_builds_shard_ids(self):
        m = ModelManifest.from_json({
            "model_name": "x", "block_sizes_bytes": [5, 6], "shard_prefix": "s_",
        })
        assert m.shard_ids == ("s_0.bin", "s_1.bin")
        assert m.total_bytes == 11


class TestInitStore:
    def test_backbone_with_32_blocks(self, tmp_path):
        # Depth of a 7B-class backbone.
        manifest = uniform_manifest(32, size=64)
        store = init_store(manifest, tmp_path / "shards")
        files = sorted(p.name for p in (tmp_path / "shards").iterdir())
        assert len(files) == 32
        assert all(store.verify_shard(b) for b in range(32))

    def test_single_block_manifest(self, tmp_path):
        store = init_store(uniform_manifest(1, size=32), tmp_path)
        assert store.shard_path(0).stat().st_size == 32
        assert store.state.gpu_resident == frozenset()
        assert store.state.cpu_resident == frozenset()

    def test_28_block_manifest(self, tmp_path):
        # Depth of a 2B-class backbone.
        init_store(uniform_manifest(28, size=16), tmp_path)
        assert len(list(tmp_path.iterdir())) == 28

    def test_shard_header_encodes_block_id(self, tmp_path):
        store = init_store(uniform_manifest(3, size=16), tmp_path)
        raw = store.shard_path(2).read_bytes()
        assert raw[:8] == (2).to_bytes(8, "little")

    def test_io_failure_raises(self, tmp_path):
        blocker = tmp_path / "not_a_dir"
        blocker.write_text("file in the way")
        with pytest.raises(StoreCreationError):
            init_store(uniform_manifest(2, size=8), blocker)


class TestStageToCpu:
    def test_empty_cache_fill(self):
        m = uniform_manifest(8)
        state, moved = stage_to_cpu(m, state_with(m), {3, 4})
        assert state.cpu_resident == {3, 4}
        assert moved == 20 * MB

    def test_idempotent_restage(self):
        m = uniform_manifest(8)
        s0 = state_with(m, cpu=(3,))
        state, moved = stage_to_cpu(m, s0, {3, 4})
        assert state.cpu_resident == {3, 4}
        assert moved == 10 * MB

    def test_budget_exceeded_reports_shortfall(self):
        m = uniform_manifest(8)
        s0 = state_with(m, cpu_budget=15 * MB)
        with pytest.raises(BudgetExceededError) as err:
            stage_to_cpu(m, s0, {3, 4})
        assert err.value.shortfall_bytes == 5 * MB
        assert s0.cpu_resident == frozenset()  # untouched

    def test_unknown_block_rejected(self):
        m = uniform_manifest(4)
        with pytest.raises(ManifestError):
            stage_to_cpu(m, state_with(m), {9})


class TestInsertToGpu:
    def test_host_resident_block_moves(self):
        m = uniform_manifest(8)
        s0 = state_with(m, gpu=(0, 1), cpu=(2,))
        state, moved = insert_to_gpu(m, s0, {2})
        assert state.gpu_resident == {0, 1, 2}
        assert moved == 10 * MB

    def test_empty_insert_is_identity(self):
        m = uniform_manifest(8)
        s0 = state_with(m, gpu=(0, 1))
        state, moved = insert_to_gpu(m, s0, set())
        assert state == s0
        assert moved == 0

    def test_unstaged_block_is_an_error(self):
        m = uniform_manifest(8)
        with pytest.raises(StagingOrderError):
            insert_to_gpu(m, state_with(m, gpu=(0,)), {5})

    def test_already_gpu_resident_needs_no_host_copy(self):
        m = uniform_manifest(8)
        state, moved = insert_to_gpu(m, state_with(m, gpu=(0,)), {0})
        assert moved == 0
        assert state.gpu_resident == {0}


class TestEvict:
    def test_lru_tie_break_hand_trace(self):
        m = uniform_manifest(8)
        s0 = CacheState(
            gpu_budget_bytes=m.total_bytes, cpu_budget_bytes=m.total_bytes,
            gpu_resident=frozenset({0, 1, 2}), gpu_lru=(1, 2, 0),
        )
        state = evict(m, s0, "gpu", 10 * MB, protected=frozenset({0}))
        assert state.gpu_resident == {0, 2}

    def test_zero_bytes_needed_is_identity(self):
        m = uniform_manifest(4)
        s0 = state_with(m, gpu=(0, 1))
        assert evict(m, s0, "gpu", 0) == s0

    def test_all_protected_raises(self):
        m = uniform_manifest(4)
        s0 = state_with(m, gpu=(0, 1))
        with pytest.raises(BudgetExceededError):
            evict(m, s0, "gpu", 1, protected=frozenset({0, 1}))

    def test_lowest_usefulness_goes_first(self):
        m = uniform_manifest(8)
        s0 = state_with(m, cpu=(0, 1, 2))
        state = evict(m, s0, "cpu", 10 * MB,
                      next_task_probs={0: 0.9, 1: 0.5, 2: 0.1})
        assert state.cpu_resident == {0, 1}

    def test_equal_probs_fall_back_to_lru(self):
        m = uniform_manifest(8)
        s0 = CacheState(
            gpu_budget_bytes=m.total_bytes, cpu_budget_bytes=m.total_bytes,
            cpu_resident=frozenset({4, 7}), cpu_lru=(7, 4),
        )
        state = evict(m, s0, "cpu", 10 * MB, next_task_probs={4: 0.2, 7: 0.2})
        # Equal probs: LRU order decides (7 was touched before 4).
        assert state.cpu_resident == {4}


class TestProperties:
    def test_budget_safety_random_sequences(self):
        for seed in range(300):
            run_random_ops(seed)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_budget_safety_hypothesis(self, seed):
        run_random_ops(seed)

    def test_monotone_staging_and_idempotence(self):
        m = uniform_manifest(6)
        state = state_with(m)
        target = {1, 3, 5}
        state, first = stage_to_cpu(m, state, target)
        state, again = stage_to_cpu(m, state, target)
        assert again == 0
        state, inserted = insert_to_gpu(m, state, target)
        assert state.gpu_resident >= target
        state, re_inserted = insert_to_gpu(m, state, target)
        assert re_inserted == 0

    def test_determinism(self):
        m = uniform_manifest(8)
        s0 = CacheState(
            gpu_budget_bytes=35 * MB, cpu_budget_bytes=m.total_bytes,
            gpu_resident=frozenset({0, 1, 2}), gpu_lru=(2, 0, 1),
        )
        runs = [insert_to_gpu(m, stage_to_cpu(m, s0, {5})[0], {5})
                for _ in range(3)]
        assert runs[0] == runs[1] == runs[2]
