"""Differential sets, switch execution across modes, cost accounting."""
from __future__ import annotations

import random

import pytest

from switchsim.block_store import CacheState, ModelManifest
from switchsim.errors import BudgetExceededError, ConfigError
from switchsim.sparsity import SkipSet
from switchsim.switching import (CostModel, DeployMode, calibrate_uniform_block_bytes,
                                 diff_set, execute_switch, gpu_utilization)

MB = 1_000_000

COST = CostModel(disk_to_cpu_mbps=2000.0, cpu_to_gpu_mbps=8000.0,
                 per_block_fixed_ms=1.0, monolithic_init_ms=250.0)


def skips_for(n: int, actives: dict[str, set[int]]) -> dict[str, SkipSet]:
    return {t: SkipSet(t, frozenset(range(n)) - frozenset(a))
            for t, a in actives.items()}


def state_for(manifest: ModelManifest, gpu=(), cpu=()) -> CacheState:
    return CacheState(
        gpu_budget_bytes=manifest.total_bytes,
        cpu_budget_bytes=manifest.total_bytes,
        gpu_resident=frozenset(gpu), gpu_lru=tuple(gpu),
        cpu_resident=frozenset(cpu), cpu_lru=tuple(cpu),
    )


class TestDiffSet:
    def test_plain_difference(self):
        assert diff_set(frozenset(range(6)), frozenset(range(2, 8))) == {6, 7}

    def test_equal_sets_need_nothing(self):
        a = frozenset({1, 2, 3})
        assert diff_set(a, a) == frozenset()

    def test_subset_switch_is_zero_fetch(self):
        # The next task only drops blocks: nothing to load.
        assert diff_set(frozenset({0, 1, 2}), frozenset({1, 2})) == frozenset()


class TestExecuteSwitch:
    def test_monolithic_reload_hits_calibration_target(self):
        block = calibrate_uniform_block_bytes(1566.5, 32, COST)
        manifest = ModelManifest.uniform("m", 32, block)
        skips = skips_for(32, {"a": set(range(16)), "b": set(range(16, 32))})
        _, report = execute_switch(state_for(manifest), "a", "b",
                                   DeployMode.MONOLITHIC, skips, COST, manifest)
        assert report.latency_ms == pytest.approx(1566.5, abs=1e-3)
        assert report.blocks_reused == 0

    def test_sparse_no_split_reloads_whole_active_set(self):
        manifest = ModelManifest.uniform("m", 8, 100 * MB)
        skips = skips_for(8, {"a": {0, 1, 2}, "b": {1, 2, 3}})
        state = state_for(manifest, gpu=(0, 1, 2))
        _, report = execute_switch(state, "a", "b", DeployMode.SPARSE_NO_SPLIT,
                                   skips, COST, manifest)
        # Whole sparse checkpoint: 3 blocks over both links plus reinit.
        expected = 250.0 + 3 * (100 * MB / (2000 * 1000) + 1) \
            + 3 * (100 * MB / (8000 * 1000) + 1)
        assert report.latency_ms == pytest.approx(expected)
        assert report.blocks_reused == 0
        assert report.bytes_disk_to_cpu == 300 * MB

    def test_split_only_moves_only_missing_blocks(self):
        manifest = ModelManifest.uniform("m", 8, 100 * MB)
        skips = skips_for(8, {"a": {0, 1, 2}, "b": {1, 2, 3}})
        state = state_for(manifest, gpu=(0, 1, 2), cpu=(3,))
        new_state, report = execute_switch(state, "a", "b", DeployMode.SPLIT_ONLY,
                                           skips, COST, manifest)
        # No prestaging credit in split_only: block 3 pays both links.
        assert report.bytes_disk_to_cpu == 100 * MB
        assert report.bytes_cpu_to_gpu == 100 * MB
        assert report.blocks_prestaged == 0
        assert report.blocks_reused == 2
        assert new_state.gpu_resident == {1, 2, 3}

    def test_full_method_prestaged_blocks_skip_the_disk_leg(self):
        # Three 100 MB differential blocks, all host-resident.
        manifest = ModelManifest.uniform("m", 8, 100 * MB)
        skips = skips_for(8, {"a": {0, 1}, "b": {0, 5, 6, 7}})
        state = state_for(manifest, gpu=(0, 1), cpu=(5, 6, 7))
        _, report = execute_switch(state, "a", "b", DeployMode.FULL_METHOD,
                                   skips, COST, manifest)
        assert report.blocks_prestaged == 3
        assert report.bytes_disk_to_cpu == 0
        assert report.latency_ms == pytest.approx(3 * (12.5 + 1.0))

    def test_zero_differential_costs_nothing_in_split_modes(self):
        manifest = ModelManifest.uniform("m", 8, 100 * MB)
        skips = skips_for(8, {"a": {0, 1, 2}, "b": {1, 2}})
        state = state_for(manifest, gpu=(0, 1, 2))
        for mode in (DeployMode.SPLIT_ONLY, DeployMode.FULL_METHOD):
            _, report = execute_switch(state, "a", "b", mode, skips, COST, manifest)
            assert report.latency_ms == 0.0
            assert report.bytes_disk_to_cpu == 0
            assert report.bytes_cpu_to_gpu == 0

    def test_active_set_beyond_budget_is_an_error(self):
        manifest = ModelManifest.uniform("m", 4, 100 * MB)
        skips = skips_for(4, {"a": {0}, "b": {0, 1, 2, 3}})
        state = CacheState(gpu_budget_bytes=300 * MB,
                           cpu_budget_bytes=manifest.total_bytes,
                           gpu_resident=frozenset({0}), gpu_lru=(0,))
        with pytest.raises(BudgetExceededError):
            execute_switch(state, "a", "b", DeployMode.SPARSE_NO_SPLIT,
                           skips, COST, manifest)

    def test_missing_skip_set_is_a_config_error(self):
        manifest = ModelManifest.uniform("m", 4, MB)
        with pytest.raises(ConfigError):
            execute_switch(state_for(manifest), "a", "b", DeployMode.SPLIT_ONLY,
                           {}, COST, manifest)

    def test_residency_after_switch_is_the_active_set(self):
        manifest = ModelManifest.uniform("m", 8, MB)
        skips = skips_for(8, {"a": {0, 1, 2}, "b": {2, 3}})
        state = state_for(manifest, gpu=(0, 1, 2), cpu=(3,))
        for mode in DeployMode:
            new_state, _ = execute_switch(state, "a", "b", mode, skips,
                                          COST, manifest)
            active = skips["b"].active(8) if mode is not DeployMode.MONOLITHIC \
                else manifest.all_blocks
            assert new_state.gpu_resident == active


class TestGpuUtilization:
    def test_empty_residency(self):
        manifest = ModelManifest.uniform("m", 4, MB)
        assert gpu_utilization(CacheState(1, 1), manifest) == 0

    def test_full_residency_uniform_blocks(self):
        manifest = ModelManifest.uniform("m", 32, 100 * MB)
        state = state_for(manifest, gpu=tuple(range(32)))
        assert gpu_utilization(state, manifest) == 3200 * MB

    def test_sparse_mode_occupies_less_than_monolithic(self):
        manifest = ModelManifest.uniform("m", 32, 100 * MB)
        skips = skips_for(32, {"a": set(range(20)), "b": set(range(4, 24))})
        state = state_for(manifest, gpu=tuple(range(20)))
        mono_state, _ = execute_switch(state, "a", "b", DeployMode.MONOLITHIC,
                                       skips, COST, manifest)
        full_state, _ = execute_switch(state, "a", "b", DeployMode.FULL_METHOD,
                                       skips, COST, manifest)
        assert gpu_utilization(full_state, manifest) \
            < gpu_utilization(mono_state, manifest)


class TestAccountingIdentity:
    def _recompute(self, report, cost: CostModel) -> float:
        disk = report.bytes_disk_to_cpu / (cost.disk_to_cpu_mbps * 1000.0)
        gpu = report.bytes_cpu_to_gpu / (cost.cpu_to_gpu_mbps * 1000.0)
        if report.mode in ("monolithic", "sparse_no_split"):
            disk_blocks = gpu_blocks = report.blocks_fetched
            init = cost.monolithic_init_ms
        else:
            disk_blocks = report.blocks_fetched
            gpu_blocks = report.blocks_fetched + report.blocks_prestaged
            init = 0.0
        return (init + disk + gpu
                + (disk_blocks + gpu_blocks) * cost.per_block_fixed_ms)

    def test_latency_matches_report_counters(self):
        rng = random.Random(5)
        for _ in range(60):
            n = rng.randrange(2, 12)
            manifest = ModelManifest.uniform("m", n, rng.randrange(1, 40) * MB)
            active_a = set(rng.sample(range(n), rng.randrange(1, n + 1)))
            active_b = set(rng.sample(range(n), rng.randrange(1, n + 1)))
            skips = skips_for(n, {"a": active_a, "b": active_b})
            cpu = tuple(sorted(rng.sample(range(n), rng.randrange(0, n + 1))))
            state = state_for(manifest, gpu=tuple(sorted(active_a)), cpu=cpu)
            for mode in DeployMode:
                _, report = execute_switch(state, "a", "b", mode, skips,
                                           COST, manifest)
                assert report.latency_ms == pytest.approx(
                    self._recompute(report, COST))

    def test_fetched_plus_prestaged_covers_the_missing_differential(self):
        rng = random.Random(9)
        for _ in range(60):
            n = rng.randrange(2, 12)
            manifest = ModelManifest.uniform("m", n, 5 * MB)
            active_a = set(rng.sample(range(n), rng.randrange(1, n + 1)))
            active_b = set(rng.sample(range(n), rng.randrange(1, n + 1)))
            skips = skips_for(n, {"a": active_a, "b": active_b})
            cpu = tuple(sorted(rng.sample(range(n), rng.randrange(0, n + 1))))
            state = state_for(manifest, gpu=tuple(sorted(active_a)), cpu=cpu)
            delta = diff_set(frozenset(active_a), frozenset(active_b))
            for mode in (DeployMode.SPLIT_ONLY, DeployMode.FULL_METHOD):
                _, report = execute_switch(state, "a", "b", mode, skips,
                                           COST, manifest)
                missing = delta - state.gpu_resident
                assert report.blocks_fetched + report.blocks_prestaged \
                    == len(missing)


class TestModeOrdering:
    def test_ordering_on_random_scenarios(self):
        rng = random.Random(123)
        for _ in range(40):
            n = rng.randrange(2, 16)
            manifest = ModelManifest.uniform("m", n, rng.randrange(1, 30) * MB)
            cost = CostModel(
                disk_to_cpu_mbps=rng.uniform(100, 5000),
                cpu_to_gpu_mbps=rng.uniform(1000, 20000),
                per_block_fixed_ms=rng.uniform(0, 3),
                monolithic_init_ms=rng.uniform(0, 500),
            )
            tasks = [f"t{i}" for i in range(rng.randrange(2, 5))]
            skips = skips_for(n, {
                t: set(rng.sample(range(n), rng.randrange(1, n + 1)))
                for t in tasks
            })
            states = {mode: state_for(
                manifest, gpu=tuple(sorted(skips[tasks[0]].active(n)))
                if mode is not DeployMode.MONOLITHIC else tuple(range(n)))
                for mode in DeployMode}
            current = tasks[0]
            for _step in range(12):
                nxt = rng.choice([t for t in tasks if t != current])
                prestage = tuple(sorted(rng.sample(range(n),
                                                   rng.randrange(0, n + 1))))
                latencies = {}
                for mode in DeployMode:
                    st_mode = states[mode]
                    if mode is DeployMode.FULL_METHOD:
                        st_mode = CacheState(
                            gpu_budget_bytes=st_mode.gpu_budget_bytes,
                            cpu_budget_bytes=st_mode.cpu_budget_bytes,
                            gpu_resident=st_mode.gpu_resident,
                            gpu_lru=st_mode.gpu_lru,
                            cpu_resident=frozenset(prestage), cpu_lru=prestage,
                        )
                    states[mode], report = execute_switch(
                        st_mode, current, nxt, mode, skips, cost, manifest)
                    latencies[mode] = report.latency_ms
                assert latencies[DeployMode.MONOLITHIC] \
                    >= latencies[DeployMode.SPARSE_NO_SPLIT] \
                    >= latencies[DeployMode.SPLIT_ONLY] \
                    >= latencies[DeployMode.FULL_METHOD]
                current = nxt


class TestCalibration:
    def test_closed_form_solves_the_target(self):
        block = calibrate_uniform_block_bytes(1566.5, 32, COST)
        assert block == 62_625_000

    def test_unreachable_target_is_rejected(self):
        with pytest.raises(ConfigError):
            calibrate_uniform_block_bytes(100.0, 32, COST)  # below fixed costs
