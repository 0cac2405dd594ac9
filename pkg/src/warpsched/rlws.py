"""Learned warp schedulers.

This module binds ``SarsaAgent`` to the simulator as a scheduling policy:

- ``PipelineAction`` / ``MetaAction``: the two action sets
- ``feasible_pipeline_actions``: which pipeline actions can be taken now
- ``resolve_warp`` / ``resolve_meta``: map a chosen action to a ready warp
- ``RlwsScheduler``: one agent per SM, shared by the SM's two scheduler
  slots; each slot keeps its own previous state, action and issued warp
- ``RlwsMetaScheduler``: the same learner choosing among scheduling rules
- ``make_rl_policy``: defaults plus overrides for either variant
- ``summarize_decision_log``: read back a JSON-lines decision log

The reward of a decision is ``reward`` if it issued a warp and ``penalty``
otherwise. Updates from the two slots hit the shared weights in slot order.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import json
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import IO, TYPE_CHECKING, Any

from warpsched.agent import SarsaAgent, rate_schedule
from warpsched.attributes import bucketize_state, extract_attributes, slot_bucket_specs
from warpsched.config import RlwsConfig, meta_rlws_config, validate_config
from warpsched.errors import ConfigError, SimulationFault
from warpsched.schedulers import SchedulerPolicy, gto_pick, lrr_pick
from warpsched.workload import InstrKind

if TYPE_CHECKING:
    from warpsched.sim import Gpu, ReadyWarp, SchedulerView

logger = logging.getLogger(__name__)


class PipelineAction(IntEnum):
    NO_INSTR = 0
    SP_INSTR = 1
    SFU_INSTR = 2
    GMEM_INSTR = 3
    STCMEM_INSTR = 4


class MetaAction(IntEnum):
    GTO = 0
    YOUNGEST = 1
    LRR = 2
    YOUNGEST_BARRIER = 3
    YOUNGEST_FINISH = 4


# barriers issue through the SP pipeline
ACTION_OF_KIND = {
    InstrKind.SP: PipelineAction.SP_INSTR,
    InstrKind.BARRIER: PipelineAction.SP_INSTR,
    InstrKind.SFU: PipelineAction.SFU_INSTR,
    InstrKind.GLOBAL_MEM: PipelineAction.GMEM_INSTR,
    InstrKind.STC_MEM: PipelineAction.STCMEM_INSTR,
}


def feasible_pipeline_actions(
    ready: Sequence[ReadyWarp], last_action: int | None
) -> list[PipelineAction]:
    """Feasible pipeline actions, sorted by index.

    An instruction action is feasible when a ready warp's next instruction
    targets that pipeline (the ready set already excludes exhausted budgets).
    NO_INSTR is always feasible unless it was the previous action and
    something else is feasible now.

    Example:
        >>> from warpsched.sim import ReadyWarp
        >>> feasible_pipeline_actions([ReadyWarp(0, InstrKind.SP)], PipelineAction.NO_INSTR)
        [<PipelineAction.SP_INSTR: 1>]

    """
    actions = sorted({ACTION_OF_KIND[r.kind] for r in ready})
    if last_action != PipelineAction.NO_INSTR or not actions:
        actions.insert(0, PipelineAction.NO_INSTR)
    return actions


def resolve_warp(
    action: int,
    ready: Sequence[ReadyWarp],
    last_issued: int | None,
    age_of: Callable[[int], tuple[int, int]],
) -> int | None:
    """Warp issued for a pipeline action.

    The warp issued last by this slot if it matches, otherwise the oldest
    matching ready warp.

    Raises:
        SimulationFault: If no ready warp matches an instruction action

    """
    if action == PipelineAction.NO_INSTR:
        return None
    matching = [r.warp_id for r in ready if ACTION_OF_KIND[r.kind] == action]
    if not matching:
        raise SimulationFault(
            f"infeasible action {PipelineAction(action).name}",
            {"ready": [(r.warp_id, str(r.kind)) for r in ready]},
        )
    if last_issued in matching:
        return last_issued
    return min(matching, key=age_of)


@dataclass(slots=True)
class SlotState:
    """Per-slot learning state inside an SM's agent context."""

    last_buckets: tuple[int, ...] | None = None
    last_action: int | None = None
    applied_action: int | None = None
    last_issued: int | None = None
    greedy: int | None = None
    reward_sum: float = 0.0
    reward_n: int = 0
    step: int = 0


@dataclass(slots=True)
class AgentContext:
    """Learning state of one SM."""

    agent: SarsaAgent
    slots: list[SlotState] = field(default_factory=lambda: [SlotState(), SlotState()])
    phase: int = 1
    phase1_steps: int = 0


def resolve_meta(action: int, view: SchedulerView, state: SlotState) -> int | None:
    """Warp issued for a meta action.

    YOUNGEST_BARRIER and YOUNGEST_FINISH fall back to GTO when no ready warp's
    thread block qualifies. Age ties cannot occur (warp ids are unique).
    """
    ready = [r.warp_id for r in view.ready]
    if not ready:
        return None
    tbs = view.sm.tbs
    eligible: list[int] | None = None
    if action == MetaAction.LRR:
        return lrr_pick(ready, state.last_issued)
    if action == MetaAction.YOUNGEST:
        return max(ready, key=view.age)
    if action == MetaAction.YOUNGEST_BARRIER:
        eligible = [w for w in ready if tbs[view.warp(w).tb_id].barrier_count > 0]
    elif action == MetaAction.YOUNGEST_FINISH:
        eligible = [w for w in ready if tbs[view.warp(w).tb_id].finished_count > 0]
    if eligible:
        return max(eligible, key=view.age)
    wid = gto_pick(ready, state.greedy, view.age)
    state.greedy = wid
    return wid


class RlwsScheduler(SchedulerPolicy):
    """Learned scheduler choosing a pipeline each cycle.

    Args:
        config: Learning parameters, attributes and bucket encoding
        seed: Base seed; each SM's agent draws from ``(seed, sm_id)``
        decision_log: Optional JSON-lines file receiving one record per pick
        theta_dir: Optional directory receiving θ snapshots after each kernel

    """

    key = "rlws"
    actions: type[IntEnum] = PipelineAction

    def __init__(
        self,
        config: RlwsConfig | None = None,
        seed: int = 0,
        decision_log: str | Path | None = None,
        theta_dir: str | Path | None = None,
    ) -> None:
        self.config = config or RlwsConfig()
        self.seed = seed
        self.decision_log = Path(decision_log) if decision_log else None
        self.theta_dir = Path(theta_dir) if theta_dir else None
        self.contexts: list[AgentContext] = []
        self.kernels_run = 0
        self._log: IO[str] | None = None
        self._kernel = ""

    # -- kernel lifecycle ------------------------------------------------------

    def begin_kernel(self, gpu: Gpu) -> None:
        self._specs = slot_bucket_specs(self.config.bucket_specs(), gpu.config.warps_per_slot)
        self._names = [s.attribute for s in self._specs]
        keep = self.config.persist_theta and len(self.contexts) == gpu.config.num_sms
        agents = (
            [c.agent for c in self.contexts]
            if keep
            else [
                SarsaAgent(self.config.params, len(self._specs), len(self.actions), [self.seed, i])
                for i in range(gpu.config.num_sms)
            ]
        )
        for agent in agents:
            agent.decisions = agent.explored = agent.updates = 0
        self.contexts = [AgentContext(agent) for agent in agents]
        self._kernel = gpu.kernel.name
        if self.decision_log is not None:
            self.decision_log.parent.mkdir(parents=True, exist_ok=True)
            self._log = self.decision_log.open("a" if self.kernels_run else "w", encoding="utf-8")
        logger.debug(
            "%s: %d SM agents, %d state variables, theta %s",
            self.key,
            len(agents),
            len(self._specs),
            "persisted" if keep else "fresh",
        )

    def end_kernel(self, gpu: Gpu) -> None:
        if self._log is not None:
            self._log.close()
            self._log = None
        if self.theta_dir is not None:
            for i, ctx in enumerate(self.contexts):
                ctx.agent.export_theta(self.theta_dir / f"{self._kernel}.sm{i}.theta")
        self.kernels_run += 1

    def extras(self) -> dict[str, float]:
        decisions = sum(c.agent.decisions for c in self.contexts)
        explored = sum(c.agent.explored for c in self.contexts)
        return {
            "decisions": float(decisions),
            "updates": float(sum(c.agent.updates for c in self.contexts)),
            "exploration_fraction": explored / decisions if decisions else 0.0,
        }

    # -- action set ----------------------------------------------------------

    def feasible(self, view: SchedulerView, state: SlotState) -> list[int]:
        return feasible_pipeline_actions(view.ready, state.applied_action)

    def resolve(self, action: int, view: SchedulerView, state: SlotState) -> int | None:
        return resolve_warp(action, view.ready, state.last_issued, view.age)

    # -- decision ----------------------------------------------------------------

    def pick(self, view: SchedulerView) -> int | None:
        ctx = self.contexts[view.sm.sm_id]
        st = ctx.slots[view.slot]
        agent = ctx.agent
        params = self.config.params
        phase = 1 if view.gpu.tbs_waiting else 2
        if phase != ctx.phase:
            logger.debug("SM %d: phase %d -> %d at cycle %d", view.sm.sm_id, ctx.phase, phase, view.cycle)
            ctx.phase = phase

        feasible = self.feasible(view, st)
        deciding = st.step % self.config.decision_interval == 0
        st.step += 1
        buckets: tuple[int, ...] | None = None
        explored = False
        reward_prev: float | None = None
        if deciding:
            buckets = bucketize_state(extract_attributes(view, self._names), self._specs)
            alpha, epsilon = rate_schedule(phase, ctx.phase1_steps, params)
            action, explored, q = agent.select(buckets, feasible, epsilon)
            if st.last_action is not None:
                reward_prev = st.reward_sum / st.reward_n
                agent.update(st.last_buckets, st.last_action, reward_prev, float(q[action]), alpha)
            st.last_buckets, st.last_action = buckets, action
            st.reward_sum, st.reward_n = 0.0, 0
            if phase == 1:
                ctx.phase1_steps += 1
        elif st.last_action in feasible:
            action = st.last_action
        else:
            buckets = bucketize_state(extract_attributes(view, self._names), self._specs)
            action = agent.greedy(buckets, feasible)

        warp = self.resolve(action, view, st)
        st.reward_sum += params.reward if warp is not None else params.penalty
        st.reward_n += 1
        st.applied_action = action
        if warp is not None:
            st.last_issued = warp
        if self._log is not None:
            self._write_record(view, phase, buckets, feasible, action, deciding, explored, warp, reward_prev)
        return warp

    def _write_record(
        self,
        view: SchedulerView,
        phase: int,
        buckets: tuple[int, ...] | None,
        feasible: Sequence[int],
        action: int,
        decided: bool,
        explored: bool,
        warp: int | None,
        reward: float | None,
    ) -> None:
        record = {
            "kernel": self._kernel,
            "cycle": view.cycle,
            "sm": view.sm.sm_id,
            "slot": view.slot,
            "phase": phase,
            "state": list(buckets) if buckets is not None else None,
            "feasible": [self.actions(a).name for a in feasible],
            "action": self.actions(action).name,
            "decided": decided,
            "explored": explored,
            "warp": warp,
            "reward": reward,
        }
        self._log.write(json.dumps(record) + "\n")


class RlwsMetaScheduler(RlwsScheduler):
    """Learned scheduler choosing among scheduling rules each cycle."""

    key = "rlws_ms"
    actions = MetaAction

    def feasible(self, view: SchedulerView, state: SlotState) -> list[int]:
        return list(MetaAction)

    def resolve(self, action: int, view: SchedulerView, state: SlotState) -> int | None:
        return resolve_meta(action, view, state)


def merged_rl_config(base: RlwsConfig, overrides: Mapping[str, Any], source: str) -> RlwsConfig:
    """Overlay ``overrides`` on ``base``; ``params`` merges key by key."""
    data = base.model_dump()
    for key, value in overrides.items():
        if key == "params" and isinstance(value, Mapping):
            data["params"] = {**data["params"], **value}
        else:
            data[key] = value
    return validate_config(data, RlwsConfig, source=source)


def make_rl_policy(
    key: str,
    seed: int = 0,
    overrides: Mapping[str, Any] | None = None,
    decision_log: str | Path | None = None,
) -> RlwsScheduler:
    """Learned policy ``rlws`` or ``rlws_ms`` with its default configuration.

    ``theta_dir`` in ``overrides`` requests θ snapshots after each kernel.
    """
    overrides = dict(overrides or {})
    theta_dir = overrides.pop("theta_dir", None)
    if key == "rlws_ms":
        config = merged_rl_config(meta_rlws_config(), overrides, "rlws_ms overrides")
        return RlwsMetaScheduler(config, seed, decision_log, theta_dir)
    config = merged_rl_config(RlwsConfig(), overrides, "rlws overrides")
    return RlwsScheduler(config, seed, decision_log, theta_dir)


@dataclass(slots=True)
class DecisionLogSummary:
    records: int = 0
    decisions: int = 0
    explored: int = 0
    actions: dict[str, int] = field(default_factory=dict)
    phases: dict[int, int] = field(default_factory=dict)
    no_instr_violations: int = 0

    @property
    def exploration_fraction(self) -> float:
        return self.explored / self.decisions if self.decisions else 0.0


def summarize_decision_log(path: str | Path) -> DecisionLogSummary:
    """Action histogram, exploration and rule checks of a decision log.

    A NO_INSTR violation is a NO_INSTR following a NO_INSTR in the same
    (kernel, SM, slot) while another action was feasible.

    Raises:
        ConfigError: If the file is missing or a line is not a JSON record

    """
    p = Path(path)
    summary = DecisionLogSummary()
    previous: dict[tuple[str, int, int], str] = {}
    try:
        fh = p.open(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"{p}: file not found") from e
    with fh:
        for no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["kernel"], rec["sm"], rec["slot"])
                action = rec["action"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ConfigError(f"{p}: line {no}: not a decision record") from e
            summary.records += 1
            summary.decisions += bool(rec.get("decided"))
            summary.explored += bool(rec.get("explored"))
            summary.actions[action] = summary.actions.get(action, 0) + 1
            summary.phases[rec["phase"]] = summary.phases.get(rec["phase"], 0) + 1
            no_instr = PipelineAction.NO_INSTR.name
            if (
                action == no_instr
                and previous.get(key) == no_instr
                and any(a != no_instr for a in rec["feasible"])
            ):
                summary.no_instr_violations += 1
            previous[key] = action
    return summary
