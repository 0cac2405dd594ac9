"""Warp scheduling policies.

This module provides the scheduler interface used by the simulator and the
baseline policies it is compared against:

- ``SchedulerPolicy``: abstract per-run policy queried once per scheduler slot
  and cycle
- ``lrr_pick`` / ``gto_pick`` / ``tl_pick`` / ``random_pick``: the pure
  decision rules
- ``LrrPolicy`` / ``GtoPolicy`` / ``TlPolicy`` / ``RandomPolicy``: the
  stateful wrappers, one state per (SM, slot)
- ``make_policy``: registry lookup by policy key

Ready sets handed to the decision rules are sorted by warp id.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, ClassVar

import numpy as np

from warpsched.config import TlConfig, validate_config
from warpsched.errors import ConfigError

if TYPE_CHECKING:
    from warpsched.sim import Gpu, SchedulerView

logger = logging.getLogger(__name__)

POLICY_KEYS = ("lrr", "gto", "tl", "random", "rlws", "rlws_ms")


class SchedulerPolicy(ABC):
    """A warp scheduling policy.

    ``pick`` must return a warp id from ``view.ready`` or ``None``. Policies
    whose ``pick`` has no side effect on an empty ready set enable
    ``fast_forward``, letting the simulator skip cycles in which nothing can
    issue. Learned policies keep it off: every stalled pick is a decision.
    """

    key: ClassVar[str]
    fast_forward: ClassVar[bool] = False

    def begin_kernel(self, gpu: Gpu) -> None:  # noqa: B027
        """Reset per-kernel state before the first cycle."""

    @abstractmethod
    def pick(self, view: SchedulerView) -> int | None: ...

    def end_kernel(self, gpu: Gpu) -> None:  # noqa: B027
        """Called once after the kernel's last cycle."""

    def extras(self) -> dict[str, float]:
        return {}


def lrr_pick(ready: Sequence[int], last_issued: int | None) -> int | None:
    """First ready warp strictly after ``last_issued`` in cyclic warp-id order.

    Example:
        >>> lrr_pick([0, 2, 4], 0)
        2
        >>> lrr_pick([0], 0)
        0

    """
    if not ready:
        return None
    if last_issued is not None:
        for wid in ready:
            if wid > last_issued:
                return wid
    return ready[0]


def gto_pick(
    ready: Sequence[int],
    greedy: int | None,
    age_of: Callable[[int], tuple[int, int]],
) -> int | None:
    """The greedy warp if it is ready, otherwise the oldest ready warp.

    The caller makes the returned warp the new greedy warp.
    """
    if not ready:
        return None
    if greedy is not None and greedy in ready:
        return greedy
    return min(ready, key=age_of)


@dataclass(slots=True)
class TlState:
    """Fetch-group bookkeeping of one scheduler slot.

    Warps are grouped by their index within the slot, so group ``g`` holds
    slot-local indices ``g * fetch_group_size .. (g + 1) * fetch_group_size - 1``.
    """

    fetch_group_size: int = 8
    num_groups: int = 3
    active_group: int = 0
    last_issued: dict[int, int] = field(default_factory=dict)
    switches: int = 0

    def group_of(self, warp_id: int) -> int:
        return (warp_id // 2) // self.fetch_group_size


def tl_pick(ready: Sequence[int], state: TlState) -> int | None:
    """Round-robin inside the active fetch group.

    When the active group has no ready warp, the next group (cyclically) with a
    ready warp becomes active and the pick is made there.
    """
    if not ready:
        return None
    by_group: dict[int, list[int]] = {}
    for wid in ready:
        by_group.setdefault(state.group_of(wid), []).append(wid)
    group = state.active_group
    if group not in by_group:
        for step in range(1, state.num_groups + 1):
            candidate = (state.active_group + step) % state.num_groups
            if candidate in by_group:
                group = candidate
                break
        else:
            group = min(by_group)
        state.active_group = group
        state.switches += 1
    wid = lrr_pick(by_group[group], state.last_issued.get(group))
    state.last_issued[group] = wid
    return wid


def random_pick(ready: Sequence[int], rng: np.random.Generator) -> int | None:
    """Uniform draw from the ready set."""
    if not ready:
        return None
    return ready[int(rng.integers(len(ready)))]


def _ids(view: SchedulerView) -> list[int]:
    return [r.warp_id for r in view.ready]


class LrrPolicy(SchedulerPolicy):
    """Loose round robin: equal priority to every warp."""

    key = "lrr"
    fast_forward = True

    def __init__(self) -> None:
        self._last: dict[tuple[int, int], int | None] = {}

    def begin_kernel(self, gpu: Gpu) -> None:
        self._last = {}

    def pick(self, view: SchedulerView) -> int | None:
        slot = (view.sm.sm_id, view.slot)
        wid = lrr_pick(_ids(view), self._last.get(slot))
        if wid is not None:
            self._last[slot] = wid
        return wid


class GtoPolicy(SchedulerPolicy):
    """Greedy-then-oldest: stay on one warp until it stalls."""

    key = "gto"
    fast_forward = True

    def __init__(self) -> None:
        self._greedy: dict[tuple[int, int], int | None] = {}

    def begin_kernel(self, gpu: Gpu) -> None:
        self._greedy = {}

    def pick(self, view: SchedulerView) -> int | None:
        slot = (view.sm.sm_id, view.slot)
        wid = gto_pick(_ids(view), self._greedy.get(slot), view.age)
        if wid is not None:
            self._greedy[slot] = wid
        return wid


class TlPolicy(SchedulerPolicy):
    """Two-level round robin over fetch groups."""

    key = "tl"
    fast_forward = True

    def __init__(self, config: TlConfig | None = None) -> None:
        self.config = config or TlConfig()
        self._states: dict[tuple[int, int], TlState] = {}

    def begin_kernel(self, gpu: Gpu) -> None:
        size = self.config.fetch_group_size
        groups = -(-gpu.config.warps_per_slot // size)
        self._states = {
            (sm.sm_id, slot): TlState(fetch_group_size=size, num_groups=groups)
            for sm in gpu.sms
            for slot in range(2)
        }

    def pick(self, view: SchedulerView) -> int | None:
        return tl_pick(_ids(view), self._states[(view.sm.sm_id, view.slot)])

    def extras(self) -> dict[str, float]:
        return {"group_switches": float(sum(s.switches for s in self._states.values()))}


class RandomPolicy(SchedulerPolicy):
    """Uniform random choice among ready warps."""

    key = "random"
    fast_forward = True

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def begin_kernel(self, gpu: Gpu) -> None:
        self._rng = np.random.default_rng(self.seed)

    def pick(self, view: SchedulerView) -> int | None:
        return random_pick(_ids(view), self._rng)


def make_policy(
    key: str,
    seed: int = 0,
    overrides: Mapping[str, Any] | None = None,
    decision_log: str | Path | None = None,
) -> SchedulerPolicy:
    """Build a policy from its key.

    Args:
        key: One of ``POLICY_KEYS``
        seed: Seed of the policy's random source
        overrides: Policy-specific settings merged over the defaults
        decision_log: JSON-lines decision log path (learned policies only)

    Returns:
        SchedulerPolicy: A fresh policy instance

    Raises:
        ConfigError: On an unknown key or invalid overrides

    Example:
        >>> make_policy("tl", overrides={"fetch_group_size": 4}).config.fetch_group_size
        4

    """
    overrides = dict(overrides or {})
    if key == "lrr":
        return LrrPolicy()
    if key == "gto":
        return GtoPolicy()
    if key == "tl":
        return TlPolicy(validate_config(overrides, TlConfig, source="tl overrides"))
    if key == "random":
        return RandomPolicy(seed)
    if key in ("rlws", "rlws_ms"):
        from warpsched import rlws

        return rlws.make_rl_policy(key, seed, overrides, decision_log)
    raise ConfigError(f"invalid policy key {key!r}; valid keys: {', '.join(POLICY_KEYS)}")
