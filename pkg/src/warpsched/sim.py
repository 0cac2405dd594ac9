"""Cycle-level model of a GPU running one kernel.

This module provides the deterministic simulator the schedulers are plugged
into:

- ``Gpu``: SMs, the queue of unassigned thread blocks, the shared memory
  hierarchy, GPU-wide counters and the cycle loop
- ``SmState``: resident thread blocks and warps, the two scheduler slots,
  per-cycle issue budgets, in-flight completions and stall counters
- ``SchedulerView``: what one scheduler slot observes in one cycle
- ``allocate_tbs`` / ``step_cycle`` / ``ready_set`` / ``mem_access``
- ``skip_quiet_cycles``: jump over cycles in which nothing can issue
- ``simulate``: run a kernel to completion and return a ``SimResult``

Pipelines are issue budgets plus fixed execution latencies: per cycle an SM
issues at most one memory and one SFU instruction, and each scheduler slot at
most one SP instruction. Barrier instructions issue through the SP pipeline.
Even warp ids belong to slot 0, odd ones to slot 1. A warp's age is
``(TB arrival order on its SM, warp_id)``.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import heapq
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

from warpsched.cache import Cache, MemoryHierarchy, synthetic_address
from warpsched.config import GpuConfig
from warpsched.errors import SimulationFault, UnschedulableKernelError
from warpsched.workload import (
    MEMORY_KINDS,
    InstrKind,
    Instruction,
    KernelSpec,
    LocalityTag,
    Pattern,
    TbResources,
    ThreadBlockSpec,
)

if TYPE_CHECKING:
    from warpsched.schedulers import SchedulerPolicy

logger = logging.getLogger(__name__)

NUM_SLOTS = 2


class WarpStatus(StrEnum):
    READY = "READY"
    WAITING_OPERANDS = "WAITING_OPERANDS"
    AT_BARRIER = "AT_BARRIER"
    FINISHED = "FINISHED"
    IDLE = "IDLE"


class StallCause(StrEnum):
    STRUCTURAL = "structural"
    DATA = "data"
    BARRIER = "barrier"
    IDLE = "idle"
    NO_ISSUE = "no_issue"


class Pipeline(StrEnum):
    SP = "sp"
    SFU = "sfu"
    MEM = "mem"


PIPELINE_OF = {
    InstrKind.SP: Pipeline.SP,
    InstrKind.BARRIER: Pipeline.SP,
    InstrKind.SFU: Pipeline.SFU,
    InstrKind.GLOBAL_MEM: Pipeline.MEM,
    InstrKind.STC_MEM: Pipeline.MEM,
}


@dataclass(slots=True, eq=False)
class Warp:
    warp_id: int
    tb_id: int
    program: tuple[Instruction, ...]
    kernel_pos: int
    age: tuple[int, int]
    pc: int = 0
    scoreboard: set[int] = field(default_factory=set)
    status: WarpStatus = WarpStatus.READY
    split: bool = False
    issue_count: int = 0
    pending: int = 0
    mem_seq: int = 0
    last_mem_latency: int = 0
    last_l1_miss: bool = False

    @property
    def slot(self) -> int:
        return self.warp_id % NUM_SLOTS

    @property
    def next_instr(self) -> Instruction | None:
        return self.program[self.pc] if self.pc < len(self.program) else None

    @property
    def done_issuing(self) -> bool:
        return self.pc >= len(self.program)


@dataclass(slots=True, eq=False)
class ThreadBlock:
    tb_id: int
    warps: list[int]
    arrival: int
    resources: TbResources
    barrier_count: int = 0
    finished_count: int = 0

    @property
    def live_warps(self) -> int:
        return len(self.warps) - self.finished_count

    @property
    def finished(self) -> bool:
        return self.finished_count == len(self.warps)


class ReadyWarp(NamedTuple):
    warp_id: int
    kind: InstrKind


class IssueEvent(NamedTuple):
    """One scheduler slot's outcome in one cycle: an issue or a stall."""

    cycle: int
    sm: int
    slot: int
    warp: int | None
    tb: int | None
    pc: int | None
    kind: InstrKind | None
    stall: StallCause | None = None

    def to_line(self) -> str:
        if self.stall is not None:
            return f"{self.cycle} {self.sm} {self.slot} - - - STALL {self.stall}"
        return f"{self.cycle} {self.sm} {self.slot} {self.warp} {self.tb} {self.pc} {self.kind}"


@dataclass(slots=True, eq=False)
class SchedulerView:
    """Observation of one scheduler slot at decision time.

    Attributes:
        ready: Warps that can issue now, sorted by warp id
        blocked: Operand-ready warps whose pipeline budget is used up
        waiting: Warp ids waiting on operands
        at_barrier: Number of slot warps waiting at a barrier
        idle: Free warp slots plus finished and draining warps

    """

    gpu: Gpu
    sm: SmState
    slot: int
    cycle: int
    warps: list[Warp]
    ready: list[ReadyWarp]
    blocked: list[ReadyWarp]
    waiting: list[int]
    at_barrier: int
    idle: int

    def warp(self, warp_id: int) -> Warp:
        return self.sm.warps[warp_id]

    def age(self, warp_id: int) -> tuple[int, int]:
        return self.sm.warps[warp_id].age

    def stall_cause(self) -> StallCause:
        """Cause charged when this slot issues nothing."""
        if self.ready:
            return StallCause.NO_ISSUE
        if self.blocked:
            return StallCause.STRUCTURAL
        if self.waiting:
            return StallCause.DATA
        if self.at_barrier:
            return StallCause.BARRIER
        return StallCause.IDLE


def operands_pending(warp: Warp) -> bool:
    """Whether the next instruction of ``warp`` reads or writes a pending register."""
    sb = warp.scoreboard
    if not sb:
        return False
    ins = warp.program[warp.pc]
    return (ins.dest is not None and ins.dest in sb) or any(s in sb for s in ins.srcs)


class SmState:
    """One streaming multiprocessor."""

    def __init__(self, sm_id: int, config: GpuConfig, l1: Cache) -> None:
        self.sm_id = sm_id
        self.config = config
        self.l1 = l1
        self.tbs: dict[int, ThreadBlock] = {}
        self.warps: dict[int, Warp] = {}
        self.slot_warps: list[list[int]] = [[] for _ in range(NUM_SLOTS)]
        self._free_ids = list(range(config.max_warps_per_sm))
        self.registers_used = 0
        self.shared_mem_used = 0
        self.cycle = 0
        self._pending: list[tuple[int, int, int, int | None, InstrKind | None, int]] = []
        self._seq = 0
        self.num_in_flight_mem = 0
        self.budget: dict[Pipeline | int, int] = {}
        self.stall_counters: Counter[StallCause] = Counter()
        self.slot_issued = [0] * NUM_SLOTS
        self.issued = 0
        self.alu_issued = 0
        self.mem_issued = 0
        self.tb_arrivals = 0
        self.tbs_finished = 0
        self.last_mem_tb: int | None = None
        self._done_tbs: list[int] = []

    # -- residency ---------------------------------------------------------

    def can_fit(self, tb: ThreadBlockSpec, resources: TbResources) -> bool:
        c = self.config
        return (
            len(self.tbs) < c.max_tbs_per_sm
            and len(self._free_ids) >= len(tb.warps)
            and self.registers_used + resources.registers <= c.registers_per_sm
            and self.shared_mem_used + resources.shared_mem <= c.shared_mem_per_sm
        )

    def assign(self, tb: ThreadBlockSpec, resources: TbResources) -> ThreadBlock:
        arrival = self.tb_arrivals
        self.tb_arrivals += 1
        ids = self._free_ids[: len(tb.warps)]
        del self._free_ids[: len(tb.warps)]
        block = ThreadBlock(tb.tb_id, ids, arrival, resources)
        for idx, (wid, program) in enumerate(zip(ids, tb.warps, strict=True)):
            self.warps[wid] = Warp(
                warp_id=wid,
                tb_id=tb.tb_id,
                program=program,
                kernel_pos=tb.tb_id * len(tb.warps) + idx,
                age=(arrival, wid),
            )
            self.slot_warps[wid % NUM_SLOTS].append(wid)
        for lst in self.slot_warps:
            lst.sort()
        self.tbs[tb.tb_id] = block
        self.registers_used += resources.registers
        self.shared_mem_used += resources.shared_mem
        logger.debug("SM %d: assigned TB %d (warps %s)", self.sm_id, tb.tb_id, ids)
        for wid in ids:
            if not self.warps[wid].program:
                self._finish_warp(self.warps[wid])
        return block

    def _retire(self, tb_id: int) -> None:
        block = self.tbs.pop(tb_id)
        for wid in block.warps:
            del self.warps[wid]
            self.slot_warps[wid % NUM_SLOTS].remove(wid)
        self._free_ids = sorted(self._free_ids + block.warps)
        self.registers_used -= block.resources.registers
        self.shared_mem_used -= block.resources.shared_mem
        self.tbs_finished += 1

    def retire_finished(self) -> int:
        """Free the resources of thread blocks that finished this cycle."""
        done, self._done_tbs = self._done_tbs, []
        for tb_id in done:
            self._retire(tb_id)
        return len(done)

    # -- per-cycle mechanics ------------------------------------------------

    def reset_budget(self) -> None:
        c = self.config
        self.budget = {
            Pipeline.MEM: c.mem_issue_per_cycle,
            Pipeline.SFU: c.sfu_issue_per_cycle,
            0: c.sp_issue_per_scheduler,
            1: c.sp_issue_per_scheduler,
        }

    def has_budget(self, pipe: Pipeline, slot: int) -> bool:
        return self.budget[slot if pipe is Pipeline.SP else pipe] > 0

    def apply_completions(self, cycle: int, gpu: Gpu) -> None:
        """Retire every execution whose completion cycle is ``cycle``."""
        self.cycle = cycle
        pending = self._pending
        while pending and pending[0][0] <= cycle:
            _, _, wid, tag, mem_kind, latency = heapq.heappop(pending)
            warp = self.warps[wid]
            if tag is not None:
                warp.scoreboard.discard(tag)
            warp.pending -= 1
            if mem_kind is not None:
                self.num_in_flight_mem -= 1
                gpu.num_in_flight_mem -= 1
                if mem_kind is InstrKind.GLOBAL_MEM:
                    gpu.record_global_latency(latency)
            if warp.done_issuing and warp.pending == 0 and warp.status is not WarpStatus.AT_BARRIER:
                self._finish_warp(warp)

    def schedule(self, cycle: int, warp: Warp, tag: int | None, mem_kind: InstrKind | None, latency: int) -> None:
        self._seq += 1
        warp.pending += 1
        if tag is not None:
            warp.scoreboard.add(tag)
        heapq.heappush(self._pending, (cycle + latency, self._seq, warp.warp_id, tag, mem_kind, latency))

    @property
    def in_flight_mem(self) -> list[tuple[int, int]]:
        """(warp_id, completion_cycle) of every memory instruction in flight."""
        return sorted((e[2], e[0]) for e in self._pending if e[4] is not None)

    @property
    def next_completion(self) -> int | None:
        return self._pending[0][0] if self._pending else None

    def quiet_stall(self, slot: int) -> StallCause | None:
        """Stall cause of ``slot`` while none of its warps is operand-ready.

        Returns ``None`` as soon as one warp could issue given a budget.
        """
        waiting = at_barrier = False
        for wid in self.slot_warps[slot]:
            warp = self.warps[wid]
            status = warp.status
            if status is WarpStatus.FINISHED or status is WarpStatus.IDLE:
                continue
            if status is WarpStatus.AT_BARRIER:
                at_barrier = True
            elif operands_pending(warp):
                waiting = True
            else:
                return None
        if waiting:
            return StallCause.DATA
        return StallCause.BARRIER if at_barrier else StallCause.IDLE

    def scan(self, slot: int, gpu: Gpu) -> SchedulerView:
        """Classify the slot's warps and build its scheduler view."""
        ready: list[ReadyWarp] = []
        blocked: list[ReadyWarp] = []
        waiting: list[int] = []
        at_barrier = 0
        idle = self.config.warps_per_slot - len(self.slot_warps[slot])
        warps = []
        for wid in self.slot_warps[slot]:
            warp = self.warps[wid]
            warps.append(warp)
            status = warp.status
            if status is WarpStatus.FINISHED or status is WarpStatus.IDLE:
                idle += 1
                continue
            if status is WarpStatus.AT_BARRIER:
                at_barrier += 1
                continue
            if operands_pending(warp):
                warp.status = WarpStatus.WAITING_OPERANDS
                waiting.append(wid)
                continue
            warp.status = WarpStatus.READY
            kind = warp.program[warp.pc].kind
            entry = ReadyWarp(wid, kind)
            if self.has_budget(PIPELINE_OF[kind], slot):
                ready.append(entry)
            else:
                blocked.append(entry)
        return SchedulerView(gpu, self, slot, self.cycle, warps, ready, blocked, waiting, at_barrier, idle)

    def issue(self, view: SchedulerView, warp_id: int) -> IssueEvent:
        """Issue the next instruction of ``warp_id`` from ``view.slot``."""
        warp = self.warps[warp_id]
        ins = warp.program[warp.pc]
        pipe = PIPELINE_OF[ins.kind]
        self.budget[view.slot if pipe is Pipeline.SP else pipe] -= 1
        event = IssueEvent(self.cycle, self.sm_id, view.slot, warp_id, warp.tb_id, warp.pc, ins.kind)
        warp.pc += 1
        warp.issue_count += 1
        self.issued += 1
        self.slot_issued[view.slot] += 1
        gpu = view.gpu

        if ins.kind is InstrKind.BARRIER:
            block = self.tbs[warp.tb_id]
            warp.status = WarpStatus.AT_BARRIER
            block.barrier_count += 1
            self._maybe_release(block)
            return event

        if ins.kind in MEMORY_KINDS:
            self.mem_issued += 1
            self.last_mem_tb = warp.tb_id
            mem_access(self, warp, ins, gpu)
        else:
            self.alu_issued += 1
            latency = self.config.latency_of(ins.latency_class)
            if ins.divergent:
                warp.split = True
                latency *= self.config.divergence_factor
            self.schedule(self.cycle, warp, ins.dest, None, latency)

        if warp.done_issuing:
            if warp.pending == 0:
                self._finish_warp(warp)
            else:
                warp.status = WarpStatus.IDLE
        return event

    # -- barriers and completion ---------------------------------------------

    def _maybe_release(self, block: ThreadBlock) -> None:
        if block.barrier_count == 0 or block.barrier_count < block.live_warps:
            return
        block.barrier_count = 0
        for wid in block.warps:
            warp = self.warps[wid]
            if warp.status is not WarpStatus.AT_BARRIER:
                continue
            warp.split = False
            if warp.done_issuing:
                if warp.pending == 0:
                    self._finish_warp(warp)
                else:
                    warp.status = WarpStatus.IDLE
            else:
                warp.status = WarpStatus.READY

    def _finish_warp(self, warp: Warp) -> None:
        warp.status = WarpStatus.FINISHED
        block = self.tbs[warp.tb_id]
        block.finished_count += 1
        if block.finished:
            self._done_tbs.append(block.tb_id)
        else:
            self._maybe_release(block)


def mem_access(sm: SmState, warp: Warp, instruction: Instruction, gpu: Gpu) -> int:
    """Perform a memory access and start its in-flight entry.

    STC accesses take their fixed class latency. Global accesses generate a
    synthetic address from the locality tag and walk L1 -> L2 -> DRAM, summing
    the latency of each level consulted.

    Returns:
        int: Completion latency in cycles

    """
    if instruction.kind is InstrKind.GLOBAL_MEM:
        line = sm.config.l1.line
        tag = instruction.locality or LocalityTag(Pattern.STREAM, line)
        address = synthetic_address(tag, warp.kernel_pos, warp.mem_seq, line)
        warp.mem_seq += 1
        latency = gpu.memory.access(sm.sm_id, address)
        warp.last_l1_miss = latency > sm.config.l1.latency
    else:
        latency = sm.config.latency_of(instruction.latency_class)
    if instruction.divergent:
        warp.split = True
        latency *= sm.config.divergence_factor
    warp.last_mem_latency = latency
    sm.num_in_flight_mem += 1
    gpu.num_in_flight_mem += 1
    sm.schedule(sm.cycle, warp, instruction.dest, instruction.kind, latency)
    return latency


class Gpu:
    """A GPU executing one kernel.

    Args:
        config: Hardware configuration
        kernel: Kernel to run; its TBs are queued in launch order
        record_events: Keep every cycle's issue/stall events in ``events``

    """

    def __init__(self, config: GpuConfig, kernel: KernelSpec, record_events: bool = False) -> None:
        self.config = config
        self.kernel = kernel
        self.memory = MemoryHierarchy(config)
        self.sms = [SmState(i, config, self.memory.l1[i]) for i in range(config.num_sms)]
        self.queue: deque[ThreadBlockSpec] = deque(kernel.tbs)
        self.cycle = 0
        self.num_in_flight_mem = 0
        self.global_latency_sum = 0
        self.global_latency_count = 0
        self.events: list[IssueEvent] | None = [] if record_events else None

    @property
    def tbs_waiting(self) -> bool:
        return bool(self.queue)

    @property
    def done(self) -> bool:
        return not self.queue and all(not sm.tbs for sm in self.sms)

    @property
    def average_global_latency(self) -> float:
        if not self.global_latency_count:
            return 0.0
        return self.global_latency_sum / self.global_latency_count

    def record_global_latency(self, latency: int) -> None:
        self.global_latency_sum += latency
        self.global_latency_count += 1

    def refill(self, sm: SmState) -> int:
        """Assign queued TBs to ``sm`` in launch order while they fit."""
        n = 0
        while self.queue and sm.can_fit(self.queue[0], self.kernel.resources):
            sm.assign(self.queue.popleft(), self.kernel.resources)
            n += 1
        return n


def allocate_tbs(gpu: Gpu) -> int:
    """Fill every SM with as many TBs as its resource limits allow.

    TBs are dealt round-robin over the SMs in launch order; the rest stay
    queued and are handed out as resident TBs finish.

    Returns:
        int: Number of resident TBs after allocation

    Raises:
        UnschedulableKernelError: If one TB exceeds an empty SM's capacity

    Example:
        >>> # 257 TBs with a demand allowing 6 TBs/SM on 15 SMs -> 90 resident
        >>> allocate_tbs(gpu)  # doctest: +SKIP
        90

    """
    c, kernel = gpu.config, gpu.kernel
    res = kernel.resources
    if kernel.tbs and (
        res.registers > c.registers_per_sm
        or res.shared_mem > c.shared_mem_per_sm
        or kernel.warps_per_tb > c.max_warps_per_sm
    ):
        raise UnschedulableKernelError(
            f"kernel {kernel.name}: TB demand (registers={res.registers}, "
            f"shared_mem={res.shared_mem}, warps={kernel.warps_per_tb}) exceeds one SM "
            f"(registers={c.registers_per_sm}, shared_mem={c.shared_mem_per_sm}, "
            f"warps={c.max_warps_per_sm})"
        )
    progress = True
    while gpu.queue and progress:
        progress = False
        for sm in gpu.sms:
            if gpu.queue and sm.can_fit(gpu.queue[0], res):
                sm.assign(gpu.queue.popleft(), res)
                progress = True
    resident = sum(len(sm.tbs) for sm in gpu.sms)
    logger.info(
        "kernel %s: %d of %d TBs resident, %d queued",
        kernel.name,
        resident,
        kernel.num_tbs,
        len(gpu.queue),
    )
    return resident


def ready_set(sm: SmState, slot: int, gpu: Gpu) -> list[tuple[int, InstrKind]]:
    """Warps of ``slot`` that can issue this cycle, with their next kind."""
    return [(r.warp_id, r.kind) for r in sm.scan(slot, gpu).ready]


def step_cycle(gpu: Gpu, policy: SchedulerPolicy) -> list[IssueEvent]:
    """Advance the GPU by one cycle.

    Completions due this cycle are applied first; then each SM's two
    scheduler slots are queried in order (0, then 1) against the remaining
    issue budgets; finished TBs are retired and replaced from the queue.

    Returns:
        list[IssueEvent]: One event per SM and slot

    Raises:
        SimulationFault: If the policy returns a warp outside the ready set

    """
    cycle = gpu.cycle
    events: list[IssueEvent] = []
    for sm in gpu.sms:
        sm.apply_completions(cycle, gpu)
    for sm in gpu.sms:
        sm.reset_budget()
        if not sm.tbs:
            for slot in range(NUM_SLOTS):
                sm.stall_counters[StallCause.IDLE] += 1
                events.append(IssueEvent(cycle, sm.sm_id, slot, None, None, None, None, StallCause.IDLE))
            continue
        for slot in range(NUM_SLOTS):
            view = sm.scan(slot, gpu)
            choice = policy.pick(view)
            if choice is None:
                cause = view.stall_cause()
                sm.stall_counters[cause] += 1
                events.append(IssueEvent(cycle, sm.sm_id, slot, None, None, None, None, cause))
                continue
            if all(r.warp_id != choice for r in view.ready):
                raise SimulationFault(
                    f"policy {policy.key} picked warp {choice} outside the ready set",
                    {
                        "cycle": cycle,
                        "sm": sm.sm_id,
                        "slot": slot,
                        "ready": [r.warp_id for r in view.ready],
                    },
                )
            events.append(sm.issue(view, choice))
    for sm in gpu.sms:
        if sm.retire_finished():
            gpu.refill(sm)
    gpu.cycle += 1
    if gpu.events is not None:
        gpu.events.extend(events)
    return events


def skip_quiet_cycles(gpu: Gpu) -> int:
    """Jump to the next completion while no slot on any SM can issue.

    Without an operand-ready warp nothing changes until an in-flight
    instruction completes, so every cycle up to that completion charges each
    slot the same stall cause. The cycles are charged in bulk, and recorded as
    STALL events when the GPU keeps them. The jump stops at
    ``config.max_cycles``.

    Returns:
        int: Number of cycles skipped

    """
    limit = gpu.config.max_cycles
    target = min((c for sm in gpu.sms if (c := sm.next_completion) is not None), default=limit)
    target = min(target, limit)
    if target <= gpu.cycle:
        return 0
    causes: list[list[StallCause]] = []
    for sm in gpu.sms:
        per_slot = []
        for slot in range(NUM_SLOTS):
            cause = sm.quiet_stall(slot)
            if cause is None:
                return 0
            per_slot.append(cause)
        causes.append(per_slot)
    skipped = target - gpu.cycle
    for sm, per_slot in zip(gpu.sms, causes, strict=True):
        for cause in per_slot:
            sm.stall_counters[cause] += skipped
    if gpu.events is not None:
        for cycle in range(gpu.cycle, target):
            for sm, per_slot in zip(gpu.sms, causes, strict=True):
                for slot, cause in enumerate(per_slot):
                    gpu.events.append(IssueEvent(cycle, sm.sm_id, slot, None, None, None, None, cause))
    gpu.cycle = target
    return skipped


@dataclass(slots=True)
class SimResult:
    kernel: str
    policy: str
    cycles: int
    instructions: int
    stalls: dict[str, int]
    issue_slots: int
    l1_hit_rate: float
    l2_hit_rate: float
    extras: dict[str, float]
    events: list[IssueEvent] | None = None

    @property
    def ipc(self) -> float:
        return self.instructions / self.cycles if self.cycles else 0.0


def simulate(
    kernel: KernelSpec,
    policy: SchedulerPolicy,
    config: GpuConfig,
    record_events: bool = False,
) -> SimResult:
    """Run ``kernel`` to completion under ``policy``.

    Policies with ``fast_forward`` set never see cycles in which no slot can
    issue; those cycles are skipped by ``skip_quiet_cycles`` with identical
    cycle counts, stall counters and events.

    Raises:
        UnschedulableKernelError: If a TB cannot fit on an SM
        SimulationFault: On a policy contract violation or when
            ``config.max_cycles`` is exceeded

    """
    gpu = Gpu(config, kernel, record_events=record_events)
    allocate_tbs(gpu)
    policy.begin_kernel(gpu)
    while not gpu.done:
        if gpu.cycle >= config.max_cycles:
            raise SimulationFault(
                f"kernel {kernel.name} exceeded max_cycles={config.max_cycles} under {policy.key}",
                {"cycle": gpu.cycle, "queued_tbs": len(gpu.queue)},
            )
        step_cycle(gpu, policy)
        if policy.fast_forward and not gpu.done:
            skip_quiet_cycles(gpu)
    policy.end_kernel(gpu)

    stalls: Counter[StallCause] = Counter()
    l1_hits = l1_accesses = 0
    for sm in gpu.sms:
        stalls.update(sm.stall_counters)
        l1_hits += sm.l1.hits
        l1_accesses += sm.l1.accesses
    instructions = sum(sm.issued for sm in gpu.sms)
    result = SimResult(
        kernel=kernel.name,
        policy=policy.key,
        cycles=gpu.cycle,
        instructions=instructions,
        stalls={cause.value: stalls.get(cause, 0) for cause in StallCause},
        issue_slots=gpu.cycle * config.num_sms * NUM_SLOTS,
        l1_hit_rate=l1_hits / l1_accesses if l1_accesses else 0.0,
        l2_hit_rate=gpu.memory.l2.hit_rate,
        extras=policy.extras(),
        events=gpu.events,
    )
    logger.info(
        "kernel %s under %s: %d cycles, IPC %.3f",
        kernel.name,
        policy.key,
        result.cycles,
        result.ipc,
    )
    return result


def write_event_log(events: list[IssueEvent], path: str | Path) -> Path:
    """Write an issue-event log, one line per slot and cycle."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        fh.write("# cycle sm slot warp tb pc KIND | cycle sm slot - - - STALL cause\n")
        for e in events:
            fh.write(e.to_line() + "\n")
    return p
