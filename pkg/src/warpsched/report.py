"""Speedup tables, rank tables and report files.

This module provides:
- ``geomean``: geometric mean of positive ratios
- ``compare``: per-kernel speedups over a baseline plus a geomean row
- ``rank_histogram`` / ``rank_table``: how often each policy places first,
  second, ... and how a focus policy fares per rank
- ``emit``: ``stats.csv`` always; ``speedup.csv``, ``ranks.csv``,
  ``rank_histogram.csv`` and the gnuplot-ready ``speedup.dat`` when a
  baseline is given
- ``read_stats``: load a ``stats.csv`` back into ``RunStats`` rows

Speedup is ``cycles(baseline) / cycles(policy)`` per (kernel, seed),
averaged over seeds with a geometric mean.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import csv
import logging
import statistics
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from warpsched.errors import ConfigError
from warpsched.experiment import RunStats
from warpsched.sim import StallCause

logger = logging.getLogger(__name__)

STATS_COLUMNS = (
    "kernel",
    "policy",
    "seed",
    "cycles",
    "instructions",
    "ipc",
    *(f"stall_{cause}" for cause in StallCause),
    "l1_hit_rate",
    "l2_hit_rate",
    "exploration_fraction",
    "group_switches",
)
GEOMEAN = "GEOMEAN"


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def geomean(values: Iterable[float]) -> float:
    """Geometric mean of positive values.

    Example:
        >>> geomean([2.0, 0.5])
        1.0

    """
    values = list(values)
    if not values:
        raise ValueError("geomean of an empty sequence")
    return statistics.geometric_mean(values)


@dataclass(slots=True)
class SpeedupTable:
    """Speedups over ``baseline``: ``speedups[kernel][policy]``."""

    baseline: str
    kernels: list[str]
    policies: list[str]
    speedups: dict[str, dict[str, float]]
    geomeans: dict[str, float]


def compare(stats: Sequence[RunStats], baseline: str) -> SpeedupTable:
    """Speedup of every policy over ``baseline``.

    Raises:
        ConfigError: If ``baseline`` has no rows, or a (kernel, seed) lacks
            its baseline run

    """
    kernels = list(dict.fromkeys(s.kernel for s in stats))
    policies = list(dict.fromkeys(s.policy for s in stats))
    if baseline not in policies:
        raise ConfigError(f"baseline {baseline!r} not in stats (policies: {', '.join(policies)})")
    base = {(s.kernel, s.seed): s.cycles for s in stats if s.policy == baseline}
    ratios: dict[str, dict[str, list[float]]] = {k: {p: [] for p in policies} for k in kernels}
    for s in stats:
        try:
            ratios[s.kernel][s.policy].append(base[(s.kernel, s.seed)] / s.cycles)
        except KeyError as e:
            raise ConfigError(f"no {baseline} run for kernel {s.kernel} seed {s.seed}") from e
    speedups = {k: {p: geomean(r) for p, r in row.items() if r} for k, row in ratios.items()}
    geomeans = {
        p: geomean(speedups[k][p] for k in kernels if p in speedups[k])
        for p in policies
    }
    return SpeedupTable(baseline, kernels, policies, speedups, geomeans)


def kernel_ranks(table: SpeedupTable) -> dict[str, dict[str, int]]:
    """Rank (1 = fastest) of each policy on each kernel; ties keep policy order."""
    ranks = {}
    for kernel in table.kernels:
        row = table.speedups[kernel]
        order = sorted(row, key=lambda p: (-row[p], table.policies.index(p)))
        ranks[kernel] = {p: i + 1 for i, p in enumerate(order)}
    return ranks


def rank_histogram(table: SpeedupTable) -> dict[str, list[int]]:
    """Per policy, the number of kernels at rank 1, 2, ..."""
    n = len(table.policies)
    hist = {p: [0] * n for p in table.policies}
    for per_kernel in kernel_ranks(table).values():
        for policy, rank in per_kernel.items():
            hist[policy][rank - 1] += 1
    return hist


@dataclass(slots=True)
class RankRow:
    rank: int
    kernels: int
    versus: dict[str, float]


def rank_table(table: SpeedupTable, focus: str) -> list[RankRow]:
    """Per rank of ``focus``: kernel count and geomean speedup over each other policy."""
    if focus not in table.policies:
        raise ConfigError(f"focus policy {focus!r} not in stats")
    ranks = kernel_ranks(table)
    others = [p for p in table.policies if p != focus]
    rows = []
    for rank in range(1, len(table.policies) + 1):
        kernels = [k for k in table.kernels if ranks[k][focus] == rank]
        versus = {}
        for other in others:
            ratios = [table.speedups[k][focus] / table.speedups[k][other] for k in kernels]
            versus[other] = geomean(ratios) if ratios else float("nan")
        rows.append(RankRow(rank, len(kernels), versus))
    return rows


def default_focus(policies: Sequence[str], baseline: str) -> str | None:
    """The learned policy if one ran, else the last non-baseline policy."""
    for key in ("rlws", "rlws_ms"):
        if key in policies:
            return key
    rest = [p for p in policies if p != baseline]
    return rest[-1] if rest else None


def stats_row(s: RunStats) -> list[str]:
    extras = s.extras
    return [
        s.kernel,
        s.policy,
        str(s.seed),
        str(s.cycles),
        str(s.instructions),
        _fmt(s.ipc),
        *(str(s.stalls.get(cause.value, 0)) for cause in StallCause),
        _fmt(s.l1_hit_rate),
        _fmt(s.l2_hit_rate),
        _fmt(extras["exploration_fraction"]) if "exploration_fraction" in extras else "",
        str(int(extras["group_switches"])) if "group_switches" in extras else "",
    ]


def write_stats(stats: Sequence[RunStats], path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_COLUMNS)
        writer.writerows(stats_row(s) for s in stats)
    return path


def read_stats(path: str | Path) -> list[RunStats]:
    """Load rows written by ``emit``.

    Raises:
        ConfigError: If the file is missing or its header differs

    """
    p = Path(path)
    try:
        fh = p.open(newline="", encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"{p}: file not found") from e
    with fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != STATS_COLUMNS:
            raise ConfigError(f"{p}: unexpected header {reader.fieldnames}")
        rows = []
        for rec in reader:
            extras = {}
            if rec["exploration_fraction"]:
                extras["exploration_fraction"] = float(rec["exploration_fraction"])
            if rec["group_switches"]:
                extras["group_switches"] = float(rec["group_switches"])
            rows.append(
                RunStats(
                    kernel=rec["kernel"],
                    policy=rec["policy"],
                    seed=int(rec["seed"]),
                    cycles=int(rec["cycles"]),
                    instructions=int(rec["instructions"]),
                    stalls={c.value: int(rec[f"stall_{c}"]) for c in StallCause},
                    l1_hit_rate=float(rec["l1_hit_rate"]),
                    l2_hit_rate=float(rec["l2_hit_rate"]),
                    extras=extras,
                )
            )
    return rows


def write_speedups(table: SpeedupTable, out_dir: Path) -> list[Path]:
    """``speedup.csv`` and its gnuplot twin ``speedup.dat``."""
    csv_path = out_dir / "speedup.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kernel", *table.policies])
        for k in table.kernels:
            writer.writerow([k, *(_fmt(table.speedups[k][p]) for p in table.policies)])
        writer.writerow([GEOMEAN, *(_fmt(table.geomeans[p]) for p in table.policies)])

    dat_path = out_dir / "speedup.dat"
    with dat_path.open("w", encoding="utf-8") as fh:
        fh.write(f"# speedup over {table.baseline}; plot with: using 2:xtic(1), ...\n")
        fh.write("# kernel " + " ".join(table.policies) + "\n")
        for k in table.kernels:
            fh.write(k + " " + " ".join(_fmt(table.speedups[k][p]) for p in table.policies) + "\n")
        fh.write(GEOMEAN + " " + " ".join(_fmt(table.geomeans[p]) for p in table.policies) + "\n")
    return [csv_path, dat_path]


def write_ranks(table: SpeedupTable, out_dir: Path, focus: str | None) -> list[Path]:
    paths = []
    hist_path = out_dir / "rank_histogram.csv"
    n = len(table.policies)
    with hist_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["policy", *(f"rank_{i}" for i in range(1, n + 1))])
        for policy, counts in rank_histogram(table).items():
            writer.writerow([policy, *counts])
    paths.append(hist_path)
    if focus is not None:
        rows = rank_table(table, focus)
        others = [p for p in table.policies if p != focus]
        ranks_path = out_dir / "ranks.csv"
        with ranks_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"{focus}_rank", "kernels", *(f"vs_{p}" for p in others)])
            for row in rows:
                writer.writerow([row.rank, row.kernels, *(_fmt(row.versus[p]) for p in others)])
        paths.append(ranks_path)
    return paths


def emit(
    stats: Sequence[RunStats],
    out_dir: str | Path,
    baseline: str | None = None,
    focus: str | None = None,
) -> list[Path]:
    """Write the report files of an experiment.

    Args:
        stats: Rows from ``run`` or ``read_stats``
        out_dir: Target directory, created if needed
        baseline: Policy the speedups are relative to; no speedup or rank
            files without it
        focus: Policy of the rank table; defaults to the learned policy

    Returns:
        list[Path]: Files written

    Raises:
        ConfigError: If the output directory cannot be created

    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}") from e
    paths = [write_stats(stats, out / "stats.csv")]
    if baseline is not None and stats:
        table = compare(stats, baseline)
        paths += write_speedups(table, out)
        paths += write_ranks(table, out, focus or default_focus(table.policies, baseline))
    logger.info("wrote %s", ", ".join(p.name for p in paths))
    return paths
