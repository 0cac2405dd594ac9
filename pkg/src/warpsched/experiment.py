"""Kernels x policies x seeds experiment runner.

This module provides:
- ``resolve_kernels``: kernel references to generated or loaded kernels
- ``RunStats``: the statistics row of one simulated cell
- ``run_cell``: simulate one (kernel, policy, seed) cell
- ``run``: the full matrix, optionally on a process pool

Kernel references:

- ``template:<name>``: a shipped template, regenerated per run seed
- ``suite:<name>``: ``streaming``, ``desk`` or ``templates`` (all shipped
  templates), regenerated per run seed
- ``<path>.yaml``: a template file, regenerated per run seed
- ``<path>.kernel``: a kernel file, identical for every seed

Rows come back ordered by kernel, then policy, then seed, however many
workers ran them.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import logging
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from warpsched import workload
from warpsched.config import ExperimentConfig, GpuConfig
from warpsched.errors import ConfigError
from warpsched.schedulers import make_policy
from warpsched.sim import SimResult, simulate, write_event_log
from warpsched.workload import KernelSpec

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class RunStats:
    """Statistics of one simulated cell.

    ``stalls`` maps stall cause to scheduler-slot cycles; issued slots plus
    stalls equal ``cycles * num_sms * 2``.
    """

    kernel: str
    policy: str
    seed: int
    cycles: int
    instructions: int
    stalls: dict[str, int]
    l1_hit_rate: float
    l2_hit_rate: float
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def ipc(self) -> float:
        return self.instructions / self.cycles if self.cycles else 0.0

    @classmethod
    def from_result(cls, result: SimResult, seed: int) -> RunStats:
        return cls(
            kernel=result.kernel,
            policy=result.policy,
            seed=seed,
            cycles=result.cycles,
            instructions=result.instructions,
            stalls=dict(result.stalls),
            l1_hit_rate=result.l1_hit_rate,
            l2_hit_rate=result.l2_hit_rate,
            extras=dict(result.extras),
        )


def resolve_kernels(ref: str, seed: int) -> list[KernelSpec]:
    """Kernels named by one reference for one run seed.

    Raises:
        ConfigError: On a missing file, unknown template/suite or bad suffix

    """
    if ref.startswith("template:"):
        template = workload.get_template(ref.removeprefix("template:"))
        return [workload.generate(workload.with_seed(template, seed))]
    if ref.startswith("suite:"):
        name = ref.removeprefix("suite:")
        templates = (
            list(workload.template_suite().values())
            if name == "templates"
            else workload.named_suite(name)
        )
        return [workload.generate(workload.with_seed(t, seed)) for t in templates]
    path = Path(ref)
    if not path.exists():
        raise ConfigError(f"kernel file not found: {ref}")
    if path.suffix == ".kernel":
        return [workload.load(path)]
    if path.suffix in (".yaml", ".yml"):
        return [workload.generate(workload.with_seed(workload.load_template(path), seed))]
    raise ConfigError(f"{ref}: expected template:<name>, suite:<name>, a .kernel or a .yaml file")


def _persists(overrides: Mapping[str, Any]) -> bool:
    return bool(overrides.get("persist_theta", False))


@dataclass(slots=True, frozen=True)
class _Task:
    kernels: tuple[tuple[int, KernelSpec], ...]
    policy: str
    seed: int
    gpu: GpuConfig
    overrides: Mapping[str, Any]
    decision_log: Path | None
    event_dir: Path | None
    theta_dir: Path | None


def _run_task(task: _Task) -> list[tuple[int, RunStats]]:
    """Simulate one task's kernels in order with a single policy instance."""
    overrides = dict(task.overrides)
    if task.theta_dir is not None:
        overrides["theta_dir"] = task.theta_dir
    policy = make_policy(task.policy, task.seed, overrides, task.decision_log)
    out = []
    for index, kernel in task.kernels:
        result = simulate(kernel, policy, task.gpu, record_events=task.event_dir is not None)
        if task.event_dir is not None and result.events is not None:
            write_event_log(result.events, task.event_dir / f"{kernel.name}.{task.policy}.s{task.seed}.log")
        out.append((index, RunStats.from_result(result, task.seed)))
    return out


def run_cell(
    kernel: KernelSpec,
    policy: str,
    seed: int,
    gpu: GpuConfig,
    overrides: Mapping[str, Any] | None = None,
    decision_log: str | Path | None = None,
) -> RunStats:
    """Simulate one (kernel, policy, seed) cell."""
    task = _Task(
        ((0, kernel),),
        policy,
        seed,
        gpu,
        dict(overrides or {}),
        Path(decision_log) if decision_log else None,
        None,
        None,
    )
    return _run_task(task)[0][1]


def run(config: ExperimentConfig, out_dir: str | Path | None = None) -> list[RunStats]:
    """Simulate every (kernel, policy, seed) cell of ``config``.

    Learned policies with ``persist_theta`` run all kernels of one seed
    through a single policy instance, in kernel order, so weights carry over.

    Args:
        config: Validated experiment configuration
        out_dir: Directory for decision/event logs and θ snapshots; defaults
            to ``config.output_dir``

    Returns:
        list[RunStats]: Rows ordered by kernel, policy, then seed

    Raises:
        ConfigError: On an unresolvable kernel reference
        SimulationFault: If any cell faults

    """
    out = Path(out_dir or config.output_dir)
    tasks: list[_Task] = []
    for s_idx, seed in enumerate(config.seeds):
        kernels = [k for ref in config.kernels for k in resolve_kernels(ref, seed)]
        indexed = tuple(enumerate(kernels))
        for policy in config.policies:
            overrides = config.overrides.get(policy, {})
            learned = policy in ("rlws", "rlws_ms")
            log_dir = out / "logs" if config.decision_log and learned else None
            theta_dir = out / "theta" / f"{policy}.s{seed}" if config.export_theta and learned else None
            event_dir = out / "events" if config.event_log else None
            groups = [indexed] if _persists(overrides) else [(item,) for item in indexed]
            for group in groups:
                if log_dir is None:
                    log = None
                elif len(group) > 1:
                    log = log_dir / f"{policy}.s{seed}.jsonl"
                else:
                    log = log_dir / f"{group[0][1].name}.{policy}.s{seed}.jsonl"
                tasks.append(_Task(group, policy, seed, config.gpu, overrides, log, event_dir, theta_dir))
        logger.info("seed %d: %d kernels x %d policies", seed, len(kernels), len(config.policies))

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    seed_pos = {s: i for i, s in enumerate(config.seeds)}
    policy_pos = {p: i for i, p in enumerate(config.policies)}
    rows = [
        (k_idx, policy_pos[stats.policy], seed_pos[stats.seed], stats)
        for task_rows in results
        for k_idx, stats in task_rows
    ]
    rows.sort(key=lambda r: r[:3])
    return [r[3] for r in rows]
