"""Test the heuristic warp scheduling policies."""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import math
from collections import Counter

import numpy as np
import pytest
from builders import small_kernel, sp, tiny_gpu, uniform_kernel

from warpsched.config import TlConfig
from warpsched.errors import ConfigError
from warpsched.schedulers import (
    GtoPolicy,
    LrrPolicy,
    TlPolicy,
    TlState,
    gto_pick,
    lrr_pick,
    make_policy,
    random_pick,
    tl_pick,
)
from warpsched.sim import Gpu, allocate_tbs, simulate, step_cycle


def test_lrr_pick():
    """Test cyclic order after the last issued warp."""
    assert lrr_pick([0, 2, 4], 0) == 2
    assert lrr_pick([0, 2, 4], 4) == 0
    assert lrr_pick([0, 2, 4], None) == 0
    assert lrr_pick([0], 0) == 0
    assert lrr_pick([], 2) is None


def test_gto_pick():
    """Test that the greedy warp wins while ready and the oldest otherwise."""
    ages = {3: (0, 3), 5: (1, 5), 7: (0, 7)}
    assert gto_pick([3, 5], 5, ages.__getitem__) == 5
    assert gto_pick([3, 5], None, ages.__getitem__) == 3
    assert gto_pick([5, 7], 3, ages.__getitem__) == 7
    assert gto_pick([], 3, ages.__getitem__) is None


def test_tl_pick_stays_in_active_group():
    """Test round robin inside the active fetch group and switching when it empties."""
    state = TlState(fetch_group_size=2, num_groups=2)
    # slot 0 warps 0, 2 form group 0; warps 4, 6 form group 1
    assert tl_pick([0, 4], state) == 0
    assert tl_pick([0, 2, 4], state) == 2
    assert state.switches == 0
    assert tl_pick([4, 6], state) == 4
    assert state.active_group == 1
    assert state.switches == 1
    assert tl_pick([0, 6], state) == 6
    assert tl_pick([], state) is None


def test_random_pick_frequencies():
    """Test that random picks are uniform over the ready set."""
    rng = np.random.default_rng(0)
    n = 100_000
    counts = Counter(random_pick([0, 1, 2, 3], rng) for _ in range(n))
    sigma = math.sqrt(0.25 * 0.75 / n)
    for wid in range(4):
        assert abs(counts[wid] / n - 0.25) < 4 * sigma


def test_lrr_keeps_homogeneous_warps_in_step():
    """Test that LRR issue counts of identical warps never differ by more than one."""
    k = uniform_kernel(1, 8, [sp()] * 40)
    gpu = Gpu(tiny_gpu(), k)
    allocate_tbs(gpu)
    policy = LrrPolicy()
    counts = Counter()
    while not gpu.done:
        for e in step_cycle(gpu, policy):
            if e.warp is not None:
                counts[e.warp] += 1
        assert max(counts.values()) - min(counts[w] for w in range(8)) <= 1


def test_gto_runs_one_warp_ahead():
    """Test that GTO lets the greedy warp run far ahead of its slot peers."""

    def spread(policy):
        result = simulate(uniform_kernel(1, 8, [sp()] * 20), policy, tiny_gpu(), record_events=True)
        counts = Counter()
        worst = 0
        for e in result.events:
            if e.warp is not None:
                counts[e.warp] += 1
                worst = max(worst, max(counts.values()) - min(counts[w] for w in range(8)))
        return worst

    assert spread(GtoPolicy()) == 20
    assert spread(LrrPolicy()) <= 1


@pytest.mark.parametrize("seed", range(10))
def test_gto_issues_greedy_warp_whenever_ready(seed: int):
    """Test that GTO never leaves its greedy warp while that warp can issue."""

    class CheckedGto(GtoPolicy):
        def pick(self, view):
            key = (view.sm.sm_id, view.slot)
            greedy = self._greedy.get(key)
            wid = super().pick(view)
            if greedy is not None and any(r.warp_id == greedy for r in view.ready):
                assert wid == greedy
            return wid

    simulate(small_kernel(seed=seed), CheckedGto(), tiny_gpu(num_sms=2))


@pytest.mark.parametrize("seed", range(10))
def test_tl_with_one_group_matches_lrr(seed: int):
    """Test that a fetch group covering the whole slot reproduces LRR."""
    k = small_kernel(seed=seed)
    config = tiny_gpu(num_sms=2)
    tl = simulate(k, TlPolicy(TlConfig(fetch_group_size=24)), config, record_events=True)
    lrr = simulate(k, LrrPolicy(), config, record_events=True)
    assert tl.events == lrr.events
    assert tl.extras == {"group_switches": 0.0}


def test_make_policy():
    """Test registry lookup, overrides and the invalid-key error."""
    assert make_policy("lrr").key == "lrr"
    assert make_policy("tl", overrides={"fetch_group_size": 4}).config.fetch_group_size == 4
    assert make_policy("rlws_ms", seed=3).key == "rlws_ms"
    with pytest.raises(ConfigError, match="valid keys: lrr, gto, tl, random, rlws, rlws_ms"):
        make_policy("fifo")
    with pytest.raises(ConfigError):
        make_policy("tl", overrides={"fetch_group_size": 0})
