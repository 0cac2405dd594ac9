"""Raw state attributes observed by the learned schedulers.

``extract_attributes`` computes attributes of ``ATTRIBUTES`` from the
simulator counters visible to one scheduler slot. Only the requested names are
evaluated; quantities shared by several attributes are computed once per call.
AGML, GNMIE, L2MP and TBW read GPU-wide counters; the others are per SM or per
slot. Values are clamped to each attribute's range. There is no instruction
cache model, so ICMP is always 0.

Pipeline-stall counts (NPS and its per-pipeline variants) count operand-ready
warps whose target pipeline has no issue budget left this cycle.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from collections.abc import Callable, Iterable
from functools import cached_property
from typing import TYPE_CHECKING

from warpsched.buckets import ATTRIBUTES, BucketSpec
from warpsched.workload import MEMORY_KINDS, InstrKind

if TYPE_CHECKING:
    from warpsched.sim import SchedulerView

ALU_KINDS = frozenset({InstrKind.SP, InstrKind.SFU, InstrKind.BARRIER})
SP_KINDS = frozenset({InstrKind.SP, InstrKind.BARRIER})
GMEM_KINDS = frozenset({InstrKind.GLOBAL_MEM})
STC_KINDS = frozenset({InstrKind.STC_MEM})
SFU_KINDS = frozenset({InstrKind.SFU})


class SlotCounters:
    """Lazily computed quantities of one scheduler view."""

    def __init__(self, view: SchedulerView) -> None:
        self.view = view
        self.sm = view.sm
        self.gpu = view.gpu

    @cached_property
    def ready_kinds(self) -> list[InstrKind]:
        return [r.kind for r in self.view.ready]

    @cached_property
    def blocked_kinds(self) -> list[InstrKind]:
        return [r.kind for r in self.view.blocked]

    @cached_property
    def next_kinds(self) -> tuple[int, int, int]:
        """(next SFU, next memory, split) counts over the slot's issuing warps."""
        next_sfu = next_mem = split = 0
        for warp in self.view.warps:
            ins = warp.next_instr
            if ins is None:
                continue
            if warp.split:
                split += 1
            if ins.kind is InstrKind.SFU:
                next_sfu += 1
            elif ins.kind in MEMORY_KINDS:
                next_mem += 1
        return next_sfu, next_mem, split

    def ready(self, kinds: frozenset[InstrKind]) -> int:
        return sum(1 for k in self.ready_kinds if k in kinds)

    def blocked(self, kinds: frozenset[InstrKind]) -> int:
        return sum(1 for k in self.blocked_kinds if k in kinds)

    def long_mem(self) -> bool:
        warps = self.sm.warps
        return any(
            r.kind is InstrKind.GLOBAL_MEM and warps[r.warp_id].last_l1_miss for r in self.view.ready
        )

    def same_tb_mem(self) -> int:
        warps, tb = self.sm.warps, self.sm.last_mem_tb
        return sum(1 for r in self.view.ready if r.kind in MEMORY_KINDS and warps[r.warp_id].tb_id == tb)


EXTRACTORS: dict[str, Callable[[SlotCounters], float]] = {
    "ATBWB": lambda c: any(tb.barrier_count > 0 for tb in c.sm.tbs.values()),
    "ATBWF": lambda c: any(tb.finished_count > 0 for tb in c.sm.tbs.values()),
    "TBW": lambda c: c.gpu.tbs_waiting,
    "RLMI": SlotCounters.long_mem,
    "RGMI": lambda c: c.ready(GMEM_KINDS) > 0,
    "RSTCMI": lambda c: c.ready(STC_KINDS) > 0,
    "RSFI": lambda c: c.ready(SFU_KINDS) > 0,
    "RSPI": lambda c: c.ready(SP_KINDS) > 0,
    "NTF": lambda c: c.sm.tbs_finished == 0,
    "NIW": lambda c: c.view.idle,
    "NSW": lambda c: c.next_kinds[2],
    "NFSFI": lambda c: c.next_kinds[0],
    "NFMI": lambda c: c.next_kinds[1],
    "NRSPI": lambda c: c.ready(SP_KINDS),
    "NRGMI": lambda c: c.ready(GMEM_KINDS),
    "NRSTCMI": lambda c: c.ready(STC_KINDS),
    "NRSFI": lambda c: c.ready(SFU_KINDS),
    "NWI": lambda c: len(c.view.waiting),
    "NPS": lambda c: len(c.view.blocked),
    "NMPS": lambda c: c.blocked(MEMORY_KINDS),
    "NSFPS": lambda c: c.blocked(SFU_KINDS),
    "NSPPS": lambda c: c.blocked(SP_KINDS),
    "NAIPMI": lambda c: c.sm.alu_issued / max(1, c.sm.mem_issued),
    "NRI": lambda c: len(c.view.ready),
    "NWS": lambda c: len(c.view.ready) + len(c.view.blocked),
    "NRAI": lambda c: c.ready(ALU_KINDS),
    "STBRMI": SlotCounters.same_tb_mem,
    "SMNMIE": lambda c: c.sm.num_in_flight_mem,
    "ICMP": lambda c: 0.0,
    "L1MP": lambda c: c.sm.l1.miss_percent,
    "L2MP": lambda c: c.gpu.memory.l2.miss_percent,
    "NIPL1M": lambda c: c.sm.issued / max(1, c.sm.l1.misses),
    "AGML": lambda c: c.gpu.average_global_latency,
    "GNMIE": lambda c: c.gpu.num_in_flight_mem,
}


def extract_attributes(view: SchedulerView, names: Iterable[str] | None = None) -> dict[str, float]:
    """Raw values of ``names`` (all attributes by default) for one slot.

    Example:
        >>> attrs = extract_attributes(view)  # doctest: +SKIP
        >>> attrs["GNMIE"], attrs["SMNMIE"]
        (0.0, 0.0)

    """
    counters = SlotCounters(view)
    selected = ATTRIBUTES if names is None else names
    return {
        n: min(max(float(EXTRACTORS[n](counters)), 0.0), ATTRIBUTES[n].max_value) for n in selected
    }


def slot_bucket_specs(specs: Iterable[BucketSpec], warps_per_slot: int) -> list[BucketSpec]:
    """Rescale per-slot warp counts to the configured per-scheduler bound."""
    return [
        s.rescaled(warps_per_slot) if ATTRIBUTES[s.attribute].per_slot_count else s for s in specs
    ]


def bucketize_state(attrs: dict[str, float], specs: Iterable[BucketSpec]) -> tuple[int, ...]:
    """Bucket indices of the active attributes, in spec order."""
    return tuple(s.bucketize(attrs[s.attribute]) for s in specs)
