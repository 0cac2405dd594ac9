"""State attribute table and bucket encoding.

This module holds the 34 hardware-state attributes a learned scheduler can
observe and the rules that turn a raw attribute value into a small bucket
index:

- ``ATTRIBUTES``: symbol -> range, scope and bucketing direction
- ``BucketSpec``: validated list of bucket starts on a 0-100 % scale
- ``bucketize``: value -> bucket index
- ``default_bucket_spec``: generated boundaries for a bucket count

Boundaries are stored as bucket *starts* in percent of the attribute range.
Bucket ``i`` covers ``[starts[i], starts[i + 1])`` and the last bucket extends
to 100 %. A decreasing-width 3-bucket spec is ``[0, 51, 81]`` (0-50, 51-80,
81-100); an increasing-width 4-bucket spec is ``[0, 10, 30, 60]``.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from bisect import bisect_right
from dataclasses import dataclass, replace
from enum import StrEnum


class Direction(StrEnum):
    BOOLEAN = "boolean"
    INCREASING = "increasing"
    DECREASING = "decreasing"


class Scope(StrEnum):
    SLOT = "slot"
    SM = "sm"
    GPU = "gpu"


@dataclass(frozen=True, slots=True)
class AttributeDef:
    """One observable attribute.

    ``per_slot_count`` marks 0-24 warp counts, which are bucketized on the
    fraction of the configured per-scheduler warp bound.
    """

    name: str
    description: str
    max_value: float
    direction: Direction
    scope: Scope
    per_slot_count: bool = False


def _bool(name: str, description: str, scope: Scope) -> AttributeDef:
    return AttributeDef(name, description, 1, Direction.BOOLEAN, scope)


def _count(name: str, description: str) -> AttributeDef:
    return AttributeDef(name, description, 24, Direction.INCREASING, Scope.SLOT, True)


ATTRIBUTES: dict[str, AttributeDef] = {
    a.name: a
    for a in (
        _bool("ATBWB", "Any TB with warps at barrier", Scope.SM),
        _bool("ATBWF", "Any TB with warps finished", Scope.SM),
        _bool("TBW", "TBs waiting to be assigned to SMs", Scope.GPU),
        _bool("RLMI", "Any warp with ready long latency memory instr", Scope.SLOT),
        _bool("RGMI", "Any warp with ready global memory instr", Scope.SLOT),
        _bool("RSTCMI", "Any warp with ready STC memory instr", Scope.SLOT),
        _bool("RSFI", "Any warp with ready SFU instr", Scope.SLOT),
        _bool("RSPI", "Any warp with ready SP unit instr", Scope.SLOT),
        _bool("NTF", "No TB finished", Scope.SM),
        _count("NIW", "Number of idle warps"),
        _count("NSW", "Number of split (diverged) warps"),
        _count("NFSFI", "Number of warps with next instr as SFU instr"),
        _count("NFMI", "Number of warps with next instr as a memory instr"),
        _count("NRSPI", "Number of warps with ready SP instr"),
        _count("NRGMI", "Number of warps with ready global memory instr"),
        _count("NRSTCMI", "Number of warps with ready STC memory instr"),
        _count("NRSFI", "Number of warps with ready SFU instr"),
        _count("NWI", "Number of warps waiting as operands not ready"),
        _count("NPS", "Number of warps stalled as pipelines are full"),
        _count("NMPS", "Number of warps stalled due to busy MEM pipeline"),
        _count("NSFPS", "Number of warps stalled due to busy SFU pipeline"),
        _count("NSPPS", "Number of warps stalled due to busy SP pipeline"),
        AttributeDef(
            "NAIPMI",
            "Number of ALU instrs issued per memory instr",
            24,
            Direction.INCREASING,
            Scope.SM,
        ),
        _count("NRI", "Number of warps with ready instr"),
        _count("NWS", "Number of schedulable warps"),
        _count("NRAI", "Number of warps with ready ALU instr"),
        _count("STBRMI", "Warps with ready memory instr in the TB of the last memory instr"),
        AttributeDef(
            "SMNMIE", "Number of memory instrs executing on SM", 40, Direction.INCREASING, Scope.SM
        ),
        AttributeDef(
            "ICMP", "Instr cache miss percentage", 100, Direction.DECREASING, Scope.SM
        ),
        AttributeDef(
            "L1MP", "L1-D cache miss percentage", 100, Direction.DECREASING, Scope.SM
        ),
        AttributeDef("L2MP", "L2 cache miss percentage", 100, Direction.DECREASING, Scope.GPU),
        AttributeDef(
            "NIPL1M", "Number of instrs issued per L1-D miss", 100, Direction.INCREASING, Scope.SM
        ),
        AttributeDef(
            "AGML", "Average global memory latency", 800, Direction.DECREASING, Scope.GPU
        ),
        AttributeDef(
            "GNMIE", "Number of memory instrs executing on GPU", 600, Direction.INCREASING, Scope.GPU
        ),
    )
}

BOOLEAN_ATTRIBUTES = tuple(n for n, a in ATTRIBUTES.items() if a.direction is Direction.BOOLEAN)
RANGED_ATTRIBUTES = tuple(n for n, a in ATTRIBUTES.items() if a.direction is not Direction.BOOLEAN)
BUCKET_COUNTS = (2, 4, 8)


@dataclass(frozen=True, slots=True)
class BucketSpec:
    """Bucket boundaries of one attribute.

    Attributes:
        attribute: Attribute symbol
        starts: Bucket start points in percent of ``max_value``; ``starts[0] == 0``
        max_value: Raw value mapped to 100 %

    """

    attribute: str
    starts: tuple[float, ...]
    max_value: float

    @classmethod
    def from_starts(cls, attribute: str, starts: list[float] | tuple[float, ...]) -> BucketSpec:
        """Build a spec from explicit starts, rejecting gaps and overlaps.

        Raises:
            ValueError: If the starts do not begin at 0, are not strictly
                increasing, or leave the top of the range uncovered

        """
        if attribute not in ATTRIBUTES:
            raise ValueError(f"unknown attribute {attribute!r}")
        starts = tuple(float(s) for s in starts)
        if len(starts) < 2:
            raise ValueError(f"{attribute}: need at least 2 buckets")
        if starts[0] != 0.0:
            raise ValueError(f"{attribute}: first bucket must start at 0 (gap below)")
        if any(b <= a for a, b in zip(starts, starts[1:], strict=False)):
            raise ValueError(f"{attribute}: bucket starts must be strictly increasing")
        if starts[-1] >= 100.0:
            raise ValueError(f"{attribute}: last bucket must start below 100%")
        if ATTRIBUTES[attribute].direction is Direction.BOOLEAN and len(starts) != 2:
            raise ValueError(f"{attribute}: boolean attributes use exactly 2 buckets")
        return cls(attribute, starts, ATTRIBUTES[attribute].max_value)

    @property
    def count(self) -> int:
        return len(self.starts)

    def rescaled(self, max_value: float) -> BucketSpec:
        """Same boundaries over a different raw range (per-slot warp bound)."""
        return replace(self, max_value=max_value)

    def bucketize(self, value: float) -> int:
        return bucketize(value, self)


def bucketize(value: float, spec: BucketSpec) -> int:
    """Map a raw attribute value to its bucket index.

    Values outside ``[0, max_value]`` are clamped first, so the function is
    total over any input.

    Args:
        value: Raw attribute value
        spec: Bucket spec of the attribute

    Returns:
        int: Index of the covering bucket, in ``0 .. spec.count - 1``

    Example:
        >>> bucketize(55, BucketSpec.from_starts("L1MP", [0, 51, 81]))
        1
        >>> bucketize(35, BucketSpec.from_starts("L1MP", [0, 10, 30, 60]))
        2

    """
    clamped = min(max(value, 0.0), spec.max_value)
    pct = 100.0 * clamped / spec.max_value
    return bisect_right(spec.starts, pct) - 1


def decreasing_starts(count: int) -> tuple[float, ...]:
    """Bucket starts with shrinking widths: 0-50, 51-80, then equal splits of the top."""
    if count == 2:
        return (0.0, 51.0)
    if count == 3:
        return (0.0, 51.0, 81.0)
    top = 100.0 - 81.0 + 1.0
    parts = count - 2
    return (0.0, 51.0, *(round(81.0 + k * top / parts, 2) for k in range(parts)))


def increasing_starts(count: int) -> tuple[float, ...]:
    """Bucket starts with growing widths.

    Up to 4 buckets the spans grow linearly (10/20/30/40 % at 4); beyond that
    each span doubles the previous one.
    """
    spans = list(range(1, count + 1)) if count <= 4 else [2**k for k in range(count)]
    total = sum(spans)
    starts, acc = [], 0
    for span in spans:
        starts.append(round(100.0 * acc / total, 2))
        acc += span
    return tuple(starts)


def default_bucket_spec(attribute: str, count: int) -> BucketSpec:
    """Generated boundaries for ``attribute`` split into ``count`` buckets.

    Raises:
        ValueError: On an unknown attribute or an unsupported count

    """
    try:
        attr = ATTRIBUTES[attribute]
    except KeyError as e:
        raise ValueError(f"unknown attribute {attribute!r}") from e
    if attr.direction is Direction.BOOLEAN:
        if count != 2:
            raise ValueError(f"{attribute}: boolean attributes use exactly 2 buckets")
        return BucketSpec(attribute, (0.0, 50.0), attr.max_value)
    if not 2 <= count <= 8:
        raise ValueError(f"{attribute}: bucket count must be in 2..8, got {count}")
    if attr.direction is Direction.DECREASING:
        return BucketSpec(attribute, decreasing_starts(count), attr.max_value)
    return BucketSpec(attribute, increasing_starts(count), attr.max_value)
