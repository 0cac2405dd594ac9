"""Set-associative LRU caches and the simplified memory hierarchy.

This module provides:
- ``Cache``: one set-associative cache level with LRU replacement and
  hit/miss counters
- ``MemoryHierarchy``: a private L1 per SM in front of one shared L2, with
  DRAM behind it; returns the cumulative latency of a global access
- ``synthetic_address``: addresses derived from a locality tag, the warp's
  position in the kernel and its running access index
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from collections import OrderedDict

from warpsched.config import CacheGeometry, GpuConfig
from warpsched.workload import LocalityTag, Pattern

# private address region of each warp for stream/reuse patterns
WARP_REGION = 1 << 24
RANDOM_POOL_BASE = 1 << 44


class Cache:
    """One set-associative cache level with LRU replacement.

    Args:
        geometry: Size, associativity, line size and lookup latency
        name: Label used in diagnostics

    Example:
        >>> c = Cache(CacheGeometry(size=1024, assoc=2, line=128, latency=30))
        >>> c.access(0), c.access(0)
        (False, True)

    """

    def __init__(self, geometry: CacheGeometry, name: str = "cache") -> None:
        self.geometry = geometry
        self.name = name
        self._sets: list[OrderedDict[int, None]] = [OrderedDict() for _ in range(geometry.num_sets)]
        self.hits = 0
        self.misses = 0

    def access(self, address: int) -> bool:
        """Look up ``address``; on a miss the line is filled, evicting the LRU way.

        Returns:
            bool: True on a hit

        """
        line = address // self.geometry.line
        ways = self._sets[line % self.geometry.num_sets]
        if line in ways:
            ways.move_to_end(line)
            self.hits += 1
            return True
        self.misses += 1
        if len(ways) >= self.geometry.assoc:
            ways.popitem(last=False)
        ways[line] = None
        return False

    @property
    def accesses(self) -> int:
        return self.hits + self.misses

    @property
    def miss_percent(self) -> float:
        return 100.0 * self.misses / self.accesses if self.accesses else 0.0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.accesses if self.accesses else 0.0


class MemoryHierarchy:
    """Per-SM L1 caches sharing one L2 and DRAM."""

    def __init__(self, config: GpuConfig) -> None:
        self.config = config
        self.l1 = [Cache(config.l1, name=f"L1[{i}]") for i in range(config.num_sms)]
        self.l2 = Cache(config.l2, name="L2")

    def access(self, sm_id: int, address: int) -> int:
        """Latency of a global access: levels are summed up to the hit level."""
        l1_lat, l2_lat, dram_lat = self.config.global_hit_latencies
        if self.l1[sm_id].access(address):
            return l1_lat
        if self.l2.access(address):
            return l2_lat
        return dram_lat


def synthetic_address(tag: LocalityTag, warp_pos: int, seq: int, line: int) -> int:
    """Address of a warp's ``seq``-th memory access under ``tag``.

    ``stream`` and ``reuse`` addresses live in a region private to the warp;
    ``random`` addresses are hashed into a pool shared by the whole kernel.
    """
    if tag.pattern is Pattern.STREAM:
        return warp_pos * WARP_REGION + (seq * tag.param) % WARP_REGION
    if tag.pattern is Pattern.REUSE:
        return warp_pos * WARP_REGION + (seq % tag.param) * line
    h = (warp_pos * 2654435761 + seq * 40503 + 12345) & 0xFFFFFFFF
    h ^= h >> 15
    h = (h * 2246822519) & 0xFFFFFFFF
    h ^= h >> 13
    return RANDOM_POOL_BASE + (h % tag.param) * line
