"""Test the learned scheduler at experiment scale on the default GPU.

These runs take minutes; they are marked ``slow`` and deselected by default
(``pytest -m slow`` runs them).
"""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path

import pytest

from warpsched.config import ExperimentConfig, GpuConfig, validate_config
from warpsched.experiment import RunStats, resolve_kernels, run, run_cell
from warpsched.report import geomean
from warpsched.rlws import summarize_decision_log
from warpsched.workload import generate, get_template

pytestmark = pytest.mark.slow


def _cycles_by_kernel(stats: Sequence[RunStats]) -> dict[str, dict[str, float]]:
    """kernel -> policy -> geomean cycles over seeds."""
    runs: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for s in stats:
        runs[s.kernel][s.policy].append(s.cycles)
    return {k: {p: geomean(c) for p, c in row.items()} for k, row in runs.items()}


def test_rlws_beats_random_on_streaming_suite(tmp_path: Path):
    """Test that RLWS beats random picks by 5% and stays near the best baseline per kernel."""
    config = validate_config(
        {
            "kernels": ["suite:streaming"],
            "policies": ["lrr", "gto", "tl", "random", "rlws"],
            "seeds": [0, 1, 2, 3, 4],
            "workers": 4,
        },
        ExperimentConfig,
    )
    cycles = _cycles_by_kernel(run(config, tmp_path / "out"))
    assert len(cycles) == 8

    rlws = geomean(row["rlws"] for row in cycles.values())
    rand = geomean(row["random"] for row in cycles.values())
    assert rlws <= 0.95 * rand

    for kernel, row in cycles.items():
        best = min(row["lrr"], row["gto"], row["tl"])
        assert 0.90 <= row["rlws"] / best <= 1.15, kernel


def test_decision_interval_barely_moves_cycles():
    """Test that deciding every 2 to 16 picks stays within 3% of deciding every pick."""
    gpu = GpuConfig()
    totals: dict[int, list[float]] = defaultdict(list)
    for seed in (0, 1, 2):
        for kernel in resolve_kernels("suite:desk", seed):
            for interval in (1, 2, 4, 8, 16):
                stats = run_cell(kernel, "rlws", seed, gpu, {"decision_interval": interval})
                totals[interval].append(stats.cycles)
    reference = geomean(totals[1])
    for interval in (2, 4, 8, 16):
        assert abs(geomean(totals[interval]) / reference - 1.0) <= 0.03, interval


def test_no_repeated_no_instr_over_a_million_decisions(tmp_path: Path):
    """Test that no NO_INSTR follows a NO_INSTR while another action was feasible."""
    template = get_template("mem_stream").model_copy(update={"instr_count": 1200})
    log = tmp_path / "long.jsonl"
    stats = run_cell(generate(template), "rlws", 0, GpuConfig(), decision_log=log)
    summary = summarize_decision_log(log)
    assert summary.decisions >= 1_000_000
    assert summary.decisions == stats.extras["decisions"]
    assert summary.no_instr_violations == 0
