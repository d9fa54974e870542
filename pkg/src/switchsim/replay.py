"""Scenario loading, trace replay, mode comparison, and report emission.

A scenario bundles a manifest, task specs, an oracle source, a transition
log, a trace to replay, a cost model, and budgets. Replay builds skip
sets (aligned for the full method, independent for the baseline-style
modes), estimates transition statistics, then walks the trace: each step
grants a prefetch window, each task change executes a switch. All
randomness is seeded through the config, so identical configs produce
byte-identical reports.
"""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .block_store import CacheState, ModelManifest
from .errors import BudgetExceededError, ConfigError, ReplayError, SwitchSimError
from .prefetch import block_usefulness, execute_prefetch, plan_prefetch
from .reference import gen_instance
from .sparsity import (MetricOracle, SelectionResult, SkipSet, TableOracle, TaskSpec,
                       build_all_tasks, jaccard, load_task_specs)
from .switching import CostModel, DeployMode, SwitchReport, execute_switch
from .transitions import assign_tiers, fit_transition_model, load_task_log

__all__ = ["ScenarioConfig", "ReplayReport", "run_replay", "compare_modes",
           "emit_reports", "write_compare_csv"]


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one replay needs, as resolved file paths and parameters."""

    manifest_path: Path
    tasks_path: Path
    oracle: Mapping
    log_path: Path
    trace_path: Path
    cost_model_path: Path
    gpu_budget_bytes: int
    cpu_budget_bytes: int
    mode: DeployMode | None = None
    k: int = 2
    compute_window_ms: float = 0.0

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: Path | str = ".") -> "ScenarioConfig":
        base = Path(base_dir)

        def path_of(key: str) -> Path:
            try:
                return (base / doc[key]).resolve()
            except KeyError:
                raise ConfigError(f"config is missing {key!r}") from None

        mode = doc.get("mode")
        try:
            return cls(
                manifest_path=path_of("manifest"),
                tasks_path=path_of("tasks"),
                oracle=dict(doc.get("oracle") or {}),
                log_path=path_of("log"),
                trace_path=path_of("trace"),
                cost_model_path=path_of("cost_model"),
                gpu_budget_bytes=int(doc["gpu_budget_bytes"]),
                cpu_budget_bytes=int(doc["cpu_budget_bytes"]),
                mode=DeployMode(mode) if mode is not None else None,
                k=int(doc.get("k", 2)),
                compute_window_ms=float(doc.get("compute_window_ms", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc

    @classmethod
    def load(cls, path: Path | str) -> "ScenarioConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def echo(self) -> dict:
        return {
            "manifest": str(self.manifest_path),
            "tasks": str(self.tasks_path),
            "oracle": dict(self.oracle),
            "log": str(self.log_path),
            "trace": str(self.trace_path),
            "cost_model": str(self.cost_model_path),
            "gpu_budget_bytes": self.gpu_budget_bytes,
            "cpu_budget_bytes": self.cpu_budget_bytes,
            "mode": self.mode.value if self.mode is not None else None,
            "k": self.k,
            "compute_window_ms": self.compute_window_ms,
        }


@dataclass(frozen=True)
class Scenario:
    """A config with every referenced artifact loaded and validated."""

    config: ScenarioConfig
    manifest: ModelManifest
    tasks: tuple[TaskSpec, ...]
    oracles: Mapping[str, MetricOracle]
    log: tuple[str, ...]
    trace: tuple[str, ...]
    cost: CostModel

    @property
    def task_ids(self) -> tuple[str, ...]:
        return tuple(t.task_id for t in self.tasks)


def _build_oracles(spec: Mapping, manifest: ModelManifest,
                   tasks: Sequence[TaskSpec], base_dir: Path) -> dict[str, MetricOracle]:
    kind = spec.get("kind")
    if kind == "synthetic":
        if "seed" not in spec:
            raise ConfigError("synthetic oracles require a seed")
        instance = gen_instance(
            seed=int(spec["seed"]),
            num_blocks=manifest.num_blocks,
            num_tasks=len(tasks),
            correlation=float(spec.get("correlation", 0.7)),
        )
        return {t.task_id: instance.oracle(i) for i, t in enumerate(tasks)}
    if kind == "table":
        try:
            path = (base_dir / spec["path"]).resolve()
        except KeyError:
            raise ConfigError("table oracles require a path") from None
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        missing = [t.task_id for t in tasks if t.task_id not in doc]
        if missing:
            raise ConfigError(f"table oracle file lacks tasks: {missing}")
        return {t.task_id: TableOracle.from_json(doc[t.task_id], manifest.num_blocks)
                for t in tasks}
    raise ConfigError(f"unknown oracle kind {kind!r}")


def load_scenario(config: ScenarioConfig) -> Scenario:
    try:
        manifest = ModelManifest.load(config.manifest_path)
        tasks = tuple(load_task_specs(config.tasks_path))
        cost = CostModel.load(config.cost_model_path)
        log = tuple(load_task_log(config.log_path))
        trace = tuple(load_task_log(config.trace_path))
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    largest = max(manifest.block_sizes)
    if config.gpu_budget_bytes < largest or config.cpu_budget_bytes < largest:
        raise ConfigError(
            f"budgets must admit the largest block ({largest} bytes)")
    oracles = _build_oracles(config.oracle, manifest, tasks,
                             base_dir=config.manifest_path.parent)
    return Scenario(config=config, manifest=manifest, tasks=tasks, oracles=oracles,
                    log=log, trace=trace, cost=cost)


@dataclass(frozen=True)
class ReplayReport:
    """Aggregated outcome of replaying one trace under one mode."""

    mode: str
    task_ids: tuple[str, ...]
    selections: Mapping[str, SelectionResult]
    switches: tuple[SwitchReport, ...]
    jaccard_matrix: tuple[tuple[float, ...], ...]
    mean_latency_ms: float | None
    median_latency_ms: float | None
    max_latency_ms: float | None
    total_bytes_disk_to_cpu: int
    total_bytes_cpu_to_gpu: int
    mean_gpu_resident_bytes: float | None
    prestage_hits: int
    prestage_misses: int
    prestage_hit_rate: float
    config_echo: dict


def _boot_state(state: CacheState, target: frozenset[int],
                manifest: ModelManifest) -> CacheState:
    # Initial load of the first task; not counted as a switch.
    needed = manifest.bytes_of(target)
    if needed > state.gpu_budget_bytes:
        raise BudgetExceededError("gpu", needed - state.gpu_budget_bytes)
    return replace(state, gpu_resident=target, gpu_lru=tuple(sorted(target)))


def _aggregate(mode: DeployMode, scenario: Scenario,
               selections: Mapping[str, SelectionResult],
               switches: Sequence[SwitchReport]) -> ReplayReport:
    ids = scenario.task_ids
    skips = {tid: selections[tid].skip for tid in ids}
    matrix = tuple(
        tuple(jaccard(skips[a], skips[b]) for b in ids) for a in ids
    )
    latencies = [s.latency_ms for s in switches]
    hits = sum(s.blocks_prestaged for s in switches)
    misses = sum(s.blocks_fetched for s in switches)
    return ReplayReport(
        mode=mode.value,
        task_ids=ids,
        selections=dict(selections),
        switches=tuple(switches),
        jaccard_matrix=matrix,
        mean_latency_ms=statistics.fmean(latencies) if latencies else None,
        median_latency_ms=statistics.median(latencies) if latencies else None,
        max_latency_ms=max(latencies) if latencies else None,
        total_bytes_disk_to_cpu=sum(s.bytes_disk_to_cpu for s in switches),
        total_bytes_cpu_to_gpu=sum(s.bytes_cpu_to_gpu for s in switches),
        mean_gpu_resident_bytes=(statistics.fmean(s.gpu_resident_bytes_after
                                                  for s in switches)
                                 if switches else None),
        prestage_hits=hits,
        prestage_misses=misses,
        prestage_hit_rate=hits / (hits + misses) if hits + misses else 1.0,
        config_echo=scenario.config.echo(),
    )


def _replay(scenario: Scenario, mode: DeployMode) -> ReplayReport:
    config = scenario.config
    manifest = scenario.manifest
    cost = scenario.cost
    align = mode is DeployMode.FULL_METHOD
    selections = build_all_tasks(scenario.tasks, scenario.oracles, align=align)
    skip_sets: dict[str, SkipSet] = {tid: r.skip for tid, r in selections.items()}
    model = fit_transition_model(scenario.log, k=config.k,
                                 known_tasks=scenario.task_ids)
    state = CacheState(gpu_budget_bytes=config.gpu_budget_bytes,
                       cpu_budget_bytes=config.cpu_budget_bytes)
    switches: list[SwitchReport] = []
    trace = scenario.trace
    if trace:
        first = trace[0]
        try:
            if mode is DeployMode.MONOLITHIC:
                target = manifest.all_blocks
            else:
                if first not in skip_sets:
                    raise ConfigError(f"trace task {first!r} has no skip set")
                target = skip_sets[first].active(manifest.num_blocks)
            state = _boot_state(state, target, manifest)
        except SwitchSimError as exc:
            raise ReplayError(str(exc), position=0) from exc
        current = first
        for pos in range(1, len(trace)):
            task = trace[pos]
            try:
                if mode is DeployMode.FULL_METHOD:
                    tiers = assign_tiers(current, skip_sets, model, manifest)
                    plan = plan_prefetch(current, tiers, model, skip_sets, state,
                                         manifest)
                    useful = block_usefulness(current, model, skip_sets, manifest)
                    state, _staged, _moved = execute_prefetch(
                        plan, state, config.compute_window_ms, cost, manifest,
                        protected=tiers.level(1) | tiers.level(2),
                        next_task_probs=useful,
                    )
                if task != current:
                    state, report = execute_switch(
                        state, current, task, mode, skip_sets, cost, manifest)
                    switches.append(report)
                    current = task
            except ReplayError:
                raise
            except SwitchSimError as exc:
                raise ReplayError(str(exc), position=pos) from exc
    return _aggregate(mode, scenario, selections, switches)


def run_replay(config: ScenarioConfig) -> ReplayReport:
    """Load the scenario and replay its trace under the configured mode."""
    if config.mode is None:
        raise ConfigError("replay needs a mode (set it in the config or via --mode)")
    scenario = load_scenario(config)
    return _replay(scenario, config.mode)


def compare_modes(config: ScenarioConfig) -> dict[DeployMode, ReplayReport]:
    """Replay the same scenario under all four modes, identical inputs and seeds."""
    scenario = load_scenario(config)
    return {mode: _replay(scenario, mode) for mode in DeployMode}


def _fmt_ms(value: float) -> str:
    return f"{value:.3f}"


def emit_reports(report: ReplayReport, out_dir: Path | str) -> list[Path]:
    """Write switches.jsonl, summary.csv, jaccard.csv, and config.echo.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    switches_path = out / "switches.jsonl"
    with open(switches_path, "w", encoding="utf-8", newline="\n") as fh:
        for s in report.switches:
            fh.write(json.dumps(s.to_json()) + "\n")
    paths.append(switches_path)

    summary_path = out / "summary.csv"
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value"])
        writer.writerow(["mode", report.mode])
        writer.writerow(["num_switches", len(report.switches)])
        if report.switches:
            writer.writerow(["mean_latency_ms", _fmt_ms(report.mean_latency_ms)])
            writer.writerow(["median_latency_ms", _fmt_ms(report.median_latency_ms)])
            writer.writerow(["max_latency_ms", _fmt_ms(report.max_latency_ms)])
            writer.writerow(["mean_gpu_resident_bytes",
                             _fmt_ms(report.mean_gpu_resident_bytes)])
        writer.writerow(["total_bytes_disk_to_cpu", report.total_bytes_disk_to_cpu])
        writer.writerow(["total_bytes_cpu_to_gpu", report.total_bytes_cpu_to_gpu])
        writer.writerow(["prestage_hit_rate", f"{report.prestage_hit_rate:.6f}"])
    paths.append(summary_path)

    jaccard_path = out / "jaccard.csv"
    with open(jaccard_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task_id", *report.task_ids])
        for tid, row in zip(report.task_ids, report.jaccard_matrix):
            writer.writerow([tid, *(f"{v:.6f}" for v in row)])
    paths.append(jaccard_path)

    echo_path = out / "config.echo.json"
    with open(echo_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.config_echo, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(echo_path)
    return paths


def write_compare_csv(reports: Mapping[DeployMode, ReplayReport],
                      path: Path | str) -> Path:
    """Side-by-side per-pair mean latency across the four modes."""
    path = Path(path)
    ordered_modes = list(DeployMode)
    pair_lat: dict[tuple[str, str], dict[DeployMode, list[float]]] = {}
    for mode in ordered_modes:
        for s in reports[mode].switches:
            pair = (s.from_task, s.to_task)
            pair_lat.setdefault(pair, {m: [] for m in ordered_modes})
            pair_lat[pair][mode].append(s.latency_ms)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["from_task", "to_task", "count",
                         *(f"{m.value}_ms" for m in ordered_modes)])
        for pair in sorted(pair_lat):
            rows = pair_lat[pair]
            count = len(rows[ordered_modes[0]])
            writer.writerow([
                pair[0], pair[1], count,
                *(_fmt_ms(statistics.fmean(rows[m])) if rows[m] else ""
                  for m in ordered_modes),
            ])
        totals = [
            _fmt_ms(reports[m].mean_latency_ms)
            if reports[m].mean_latency_ms is not None else ""
            for m in ordered_modes
        ]
        writer.writerow(["ALL", "ALL",
                         len(reports[ordered_modes[0]].switches), *totals])
    return path
