"""Test the learned schedulers: action sets, warp resolution and decision logs."""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import json
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest
from builders import small_kernel, sp, tiny_gpu, uniform_kernel

from warpsched.errors import ConfigError, SimulationFault
from warpsched.rlws import (
    ACTION_OF_KIND,
    MetaAction,
    PipelineAction,
    RlwsMetaScheduler,
    RlwsScheduler,
    SlotState,
    feasible_pipeline_actions,
    make_rl_policy,
    resolve_meta,
    resolve_warp,
    summarize_decision_log,
)
from warpsched.sim import Gpu, ReadyWarp, allocate_tbs, simulate
from warpsched.workload import InstrKind

SP = InstrKind.SP
GMEM = InstrKind.GLOBAL_MEM


def _records(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_feasible_pipeline_actions():
    """Test feasibility from ready kinds and the NO_INSTR repetition rule."""
    ready = [ReadyWarp(0, SP), ReadyWarp(2, GMEM), ReadyWarp(4, InstrKind.BARRIER)]
    assert feasible_pipeline_actions(ready, None) == [
        PipelineAction.NO_INSTR,
        PipelineAction.SP_INSTR,
        PipelineAction.GMEM_INSTR,
    ]
    assert feasible_pipeline_actions(ready, PipelineAction.NO_INSTR) == [
        PipelineAction.SP_INSTR,
        PipelineAction.GMEM_INSTR,
    ]
    assert feasible_pipeline_actions([], PipelineAction.NO_INSTR) == [PipelineAction.NO_INSTR]


def test_resolve_warp():
    """Test that the slot's last warp wins, then the oldest matching warp."""
    ready = [ReadyWarp(0, SP), ReadyWarp(2, SP), ReadyWarp(4, GMEM)]
    ages = {0: (1, 0), 2: (0, 2), 4: (0, 4)}.__getitem__
    assert resolve_warp(PipelineAction.SP_INSTR, ready, 0, ages) == 0
    assert resolve_warp(PipelineAction.SP_INSTR, ready, 4, ages) == 2
    assert resolve_warp(PipelineAction.GMEM_INSTR, ready, None, ages) == 4
    assert resolve_warp(PipelineAction.NO_INSTR, ready, 0, ages) is None
    with pytest.raises(SimulationFault, match="infeasible action SFU_INSTR"):
        resolve_warp(PipelineAction.SFU_INSTR, ready, None, ages)


def test_resolve_warp_random_scenarios():
    """Test warp resolution against a direct scan over random three-warp ready sets."""
    rng = np.random.default_rng(7)
    kinds = [SP, InstrKind.SFU, GMEM, InstrKind.STC_MEM, InstrKind.BARRIER]
    for _ in range(100):
        ids = [int(w) for w in rng.choice(12, size=3, replace=False)]
        ready = [ReadyWarp(w, kinds[int(rng.integers(len(kinds)))]) for w in ids]
        age = {w: (int(rng.integers(4)), w) for w in ids}
        last = None if rng.random() < 0.2 else int(rng.integers(12))
        action = ACTION_OF_KIND[ready[int(rng.integers(3))].kind]
        matching = [r.warp_id for r in ready if ACTION_OF_KIND[r.kind] == action]
        expected = last if last in matching else sorted(matching, key=age.__getitem__)[0]
        assert resolve_warp(action, ready, last, age.__getitem__) == expected


def test_resolve_meta():
    """Test the youngest, LRR and GTO rules and the barrier/finish fallbacks."""
    gpu = Gpu(tiny_gpu(), uniform_kernel(2, 4, [sp(), sp()]))
    allocate_tbs(gpu)
    sm = gpu.sms[0]
    sm.reset_budget()
    view = sm.scan(0, gpu)
    state = SlotState()
    assert [r.warp_id for r in view.ready] == [0, 2, 4, 6]
    assert resolve_meta(MetaAction.YOUNGEST, view, state) == 6
    assert resolve_meta(MetaAction.YOUNGEST_BARRIER, view, state) == 0
    assert state.greedy == 0
    assert resolve_meta(MetaAction.YOUNGEST_FINISH, view, state) == 0
    sm.tbs[0].barrier_count = 1
    assert resolve_meta(MetaAction.YOUNGEST_BARRIER, view, state) == 2
    sm.tbs[1].finished_count = 1
    assert resolve_meta(MetaAction.YOUNGEST_FINISH, view, state) == 6
    state.last_issued = 2
    assert resolve_meta(MetaAction.LRR, view, state) == 4
    assert resolve_meta(MetaAction.GTO, view, state) == 0


def test_learned_policy_runs_kernel_and_logs(tmp_path: Path):
    """Test a full run: every instruction issues and the log obeys the action rules."""
    k = small_kernel(num_tbs=8, seed=1)
    log = tmp_path / "logs" / "k.jsonl"
    policy = make_rl_policy("rlws", seed=0, decision_log=log)
    result = simulate(k, policy, tiny_gpu(num_sms=2))
    assert result.instructions == k.total_instructions

    records = _records(log)
    summary = summarize_decision_log(log)
    assert summary.records == len(records)
    assert summary.decisions == len(records)
    assert summary.no_instr_violations == 0
    assert result.extras["decisions"] == len(records)
    assert 0.0 <= result.extras["exploration_fraction"] <= 1.0
    for rec in records:
        assert rec["action"] in rec["feasible"]
        assert (rec["warp"] is None) == (rec["action"] == "NO_INSTR")
        assert len(rec["state"]) == 8
    phase1 = [r["cycle"] for r in records if r["phase"] == 1]
    phase2 = [r["cycle"] for r in records if r["phase"] == 2]
    assert phase1 and phase2
    assert max(phase1) < min(phase2)


def test_decision_interval_averages_rewards(tmp_path: Path):
    """Test that decisions happen every k picks and are credited the interval's mean reward."""
    log = tmp_path / "k.jsonl"
    policy = make_rl_policy("rlws", seed=2, overrides={"decision_interval": 2}, decision_log=log)
    simulate(small_kernel(seed=4), policy, tiny_gpu(num_sms=2))

    per_slot = defaultdict(list)
    for rec in _records(log):
        per_slot[(rec["sm"], rec["slot"])].append(rec)
    for records in per_slot.values():
        window: list[float] = []
        for i, rec in enumerate(records):
            assert rec["decided"] == (i % 2 == 0)
            if rec["decided"]:
                if i == 0:
                    assert rec["reward"] is None
                else:
                    assert rec["reward"] == pytest.approx(sum(window) / len(window))
                window = []
            else:
                assert rec["state"] is None or rec["action"] != records[i - 1]["action"]
            window.append(1.0 if rec["warp"] is not None else 0.0)


def test_persisted_weights_carry_over():
    """Test that persist_theta keeps each SM's agent across kernels."""
    config = tiny_gpu(num_sms=2)
    kept = make_rl_policy("rlws", overrides={"persist_theta": True})
    simulate(small_kernel("a", seed=1), kept, config)
    agents = [c.agent for c in kept.contexts]
    theta = agents[0].theta.copy()
    simulate(small_kernel("b", seed=2), kept, config)
    assert [c.agent for c in kept.contexts] == agents
    assert kept.extras()["decisions"] == sum(a.decisions for a in agents)
    assert (agents[0].theta != theta).any()

    fresh = make_rl_policy("rlws")
    simulate(small_kernel("a", seed=1), fresh, config)
    first = fresh.contexts[0].agent
    simulate(small_kernel("b", seed=2), fresh, config)
    assert fresh.contexts[0].agent is not first


def test_theta_snapshots(tmp_path: Path):
    """Test that theta_dir receives one A x N matrix per SM after a kernel."""
    policy = make_rl_policy("rlws", overrides={"theta_dir": str(tmp_path / "theta")})
    simulate(small_kernel("snap", seed=3), policy, tiny_gpu(num_sms=2))
    files = sorted(p.name for p in (tmp_path / "theta").iterdir())
    assert files == ["snap.sm0.theta", "snap.sm1.theta"]
    rows = (tmp_path / "theta" / "snap.sm0.theta").read_text().splitlines()
    assert len(rows) == 5
    assert all(len(r.split()) == 8 for r in rows)


def test_meta_scheduler_runs_kernel(tmp_path: Path):
    """Test that the meta-action scheduler completes a kernel with all actions feasible."""
    k = small_kernel(seed=6)
    log = tmp_path / "ms.jsonl"
    policy = make_rl_policy("rlws_ms", seed=1, decision_log=log)
    assert isinstance(policy, RlwsMetaScheduler)
    result = simulate(k, policy, tiny_gpu(num_sms=2))
    assert result.instructions == k.total_instructions
    records = _records(log)
    assert all(rec["feasible"] == [a.name for a in MetaAction] for rec in records)
    assert all(len(rec["state"]) == 7 for rec in records)


def test_make_rl_policy_overrides():
    """Test parameter merging and rejected overrides."""
    policy = make_rl_policy("rlws", overrides={"params": {"alpha": 0.2}})
    assert isinstance(policy, RlwsScheduler)
    assert policy.config.params.alpha == 0.2
    assert policy.config.params.epsilon == 0.04
    assert make_rl_policy("rlws_ms").config.params.gamma == 0.999
    with pytest.raises(ConfigError, match="decision_interval"):
        make_rl_policy("rlws", overrides={"decision_interval": 3})
    with pytest.raises(ConfigError):
        make_rl_policy("rlws", overrides={"attributes": {}})


def test_summary_counts_no_instr_violations(tmp_path: Path):
    """Test that a repeated NO_INSTR with another action feasible is flagged."""
    base = {"kernel": "k", "sm": 0, "slot": 0, "phase": 1, "decided": True, "explored": False}
    lines = [
        base | {"action": "NO_INSTR", "feasible": ["NO_INSTR", "SP_INSTR"]},
        base | {"action": "NO_INSTR", "feasible": ["NO_INSTR", "SP_INSTR"]},
        base | {"action": "NO_INSTR", "feasible": ["NO_INSTR"]},
        base | {"slot": 1, "action": "NO_INSTR", "feasible": ["NO_INSTR", "SP_INSTR"]},
    ]
    path = tmp_path / "log.jsonl"
    path.write_text("".join(json.dumps(rec) + "\n" for rec in lines))
    summary = summarize_decision_log(path)
    assert summary.no_instr_violations == 1
    assert summary.actions == {"NO_INSTR": 4}
    assert summary.phases == {1: 4}

    path.write_text("not json\n")
    with pytest.raises(ConfigError, match="line 1"):
        summarize_decision_log(path)
