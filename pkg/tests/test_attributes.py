"""Test raw attribute extraction from scheduler views."""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from builders import gmem, ins, kernel, sp, tiny_gpu

from warpsched.attributes import (
    EXTRACTORS,
    bucketize_state,
    extract_attributes,
    slot_bucket_specs,
)
from warpsched.buckets import ATTRIBUTES, default_bucket_spec
from warpsched.sim import Gpu, allocate_tbs
from warpsched.workload import InstrKind


def _gpu():
    k = kernel([[[gmem(), sp()], [sp(), sp()], [gmem(), sp()], [ins(InstrKind.SFU), sp()]]])
    gpu = Gpu(tiny_gpu(), k)
    allocate_tbs(gpu)
    sm = gpu.sms[0]
    sm.reset_budget()
    return gpu, sm


def test_attributes_before_issue():
    """Test ready, idle and next-kind counts of a fresh slot."""
    gpu, sm = _gpu()
    attrs = extract_attributes(sm.scan(0, gpu))
    assert set(attrs) == set(ATTRIBUTES)
    assert attrs["NRGMI"] == 2
    assert attrs["NRI"] == attrs["NWS"] == 2
    assert attrs["NFMI"] == 2
    assert attrs["NIW"] == 2
    assert attrs["RGMI"] == 1.0
    assert attrs["RSPI"] == 0.0
    assert attrs["RLMI"] == 0.0
    assert attrs["NTF"] == 1.0
    assert attrs["TBW"] == 0.0
    assert attrs["ICMP"] == 0.0

    other = extract_attributes(sm.scan(1, gpu), ["RSFI", "NRSFI", "NRAI", "NFSFI"])
    assert other == {"RSFI": 1.0, "NRSFI": 1.0, "NRAI": 2.0, "NFSFI": 1.0}


def test_attributes_after_memory_issue():
    """Test pipeline stalls and memory counters once the MEM budget is spent."""
    gpu, sm = _gpu()
    sm.issue(sm.scan(0, gpu), 0)
    attrs = extract_attributes(sm.scan(0, gpu))
    assert attrs["NPS"] == attrs["NMPS"] == 1
    assert attrs["NSPPS"] == 0
    assert attrs["NRI"] == 1
    assert attrs["NWS"] == 2
    assert attrs["NRSPI"] == 1
    assert attrs["SMNMIE"] == attrs["GNMIE"] == 1
    assert attrs["L1MP"] == 100.0
    assert attrs["NIPL1M"] == 1.0
    assert attrs["NAIPMI"] == 0.0
    assert attrs["STBRMI"] == 0


def test_attributes_are_clamped():
    """Test that values beyond an attribute's range are clamped."""
    gpu, sm = _gpu()
    gpu.num_in_flight_mem = 10_000
    assert extract_attributes(sm.scan(0, gpu), ["GNMIE"]) == {"GNMIE": 600.0}


def test_per_slot_counts_use_slot_bound():
    """Test that warp counts are bucketized against the per-slot warp bound."""
    specs = slot_bucket_specs([default_bucket_spec("NRGMI", 4), default_bucket_spec("L1MP", 4)], 4)
    assert specs[0].max_value == 4
    assert specs[1].max_value == 100
    # 2 of 4 warps is 50 %, inside the 30-60 % bucket
    assert bucketize_state({"NRGMI": 2, "L1MP": 100.0}, specs) == (2, 3)


def test_subset_matches_full_extraction():
    """Test that a requested subset equals the same keys of a full extraction."""
    gpu, sm = _gpu()
    sm.issue(sm.scan(0, gpu), 0)
    view = sm.scan(1, gpu)
    full = extract_attributes(view)
    names = ["NSW", "NMPS", "STBRMI", "AGML", "ATBWB"]
    assert extract_attributes(view, names) == {n: full[n] for n in names}
    assert list(extract_attributes(view, names)) == names
    assert set(EXTRACTORS) == set(ATTRIBUTES)
