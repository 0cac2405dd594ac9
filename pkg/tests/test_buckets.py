"""Test the attribute table and bucket encoding."""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import pytest

from warpsched.buckets import (
    ATTRIBUTES,
    BOOLEAN_ATTRIBUTES,
    BucketSpec,
    Direction,
    bucketize,
    default_bucket_spec,
)
from warpsched.config import RlwsConfig, validate_config
from warpsched.errors import ConfigError


def test_attribute_table():
    """Test that the table holds 34 attributes, 9 of them boolean."""
    assert len(ATTRIBUTES) == 34
    assert len(BOOLEAN_ATTRIBUTES) == 9
    assert ATTRIBUTES["GNMIE"].max_value == 600
    assert ATTRIBUTES["AGML"].direction is Direction.DECREASING
    assert ATTRIBUTES["NRGMI"].per_slot_count


def test_worked_examples():
    """Test the decreasing and increasing width examples."""
    assert bucketize(55, BucketSpec.from_starts("L1MP", [0, 51, 81])) == 1
    assert bucketize(35, BucketSpec.from_starts("L1MP", [0, 10, 30, 60])) == 2
    assert bucketize(35, BucketSpec.from_starts("NRGMI", [0, 10, 30, 60]).rescaled(100)) == 2


def test_generated_boundaries():
    """Test the generated starts for the common bucket counts."""
    assert default_bucket_spec("NFMI", 4).starts == (0.0, 10.0, 30.0, 60.0)
    assert default_bucket_spec("L2MP", 3).starts == (0.0, 51.0, 81.0)
    assert default_bucket_spec("L2MP", 2).starts == (0.0, 51.0)
    assert default_bucket_spec("RSPI", 2).starts == (0.0, 50.0)


@pytest.mark.parametrize("count", [2, 4, 8])
def test_generated_boundaries_are_valid(count: int):
    """Test that every generated spec passes the gap and overlap checks."""
    for name in ATTRIBUTES:
        if name in BOOLEAN_ATTRIBUTES and count != 2:
            continue
        spec = default_bucket_spec(name, count)
        assert BucketSpec.from_starts(name, spec.starts).starts == spec.starts


def test_zero_and_out_of_range_values():
    """Test that 0 is bucket 0 and out-of-range values clamp to the end buckets."""
    for name in ATTRIBUTES:
        for count in (2,) if name in BOOLEAN_ATTRIBUTES else (2, 4, 8):
            spec = default_bucket_spec(name, count)
            assert bucketize(0, spec) == 0
            assert bucketize(-5, spec) == 0
            assert bucketize(1e9, spec) == count - 1


def test_boolean_buckets():
    """Test that booleans map false to 0 and true to 1."""
    spec = default_bucket_spec("TBW", 2)
    assert [bucketize(0.0, spec), bucketize(1.0, spec)] == [0, 1]


@pytest.mark.parametrize(
    ("name", "starts", "message"),
    [
        ("L1MP", [5, 50], "start at 0"),
        ("L1MP", [0, 50, 50], "strictly increasing"),
        ("L1MP", [0, 60, 40], "strictly increasing"),
        ("L1MP", [0, 100], "below 100"),
        ("TBW", [0, 30, 60], "exactly 2"),
        ("NOPE", [0, 50], "unknown attribute"),
    ],
)
def test_invalid_starts(name: str, starts: list[float], message: str):
    """Test that gaps, overlaps and bad counts are rejected."""
    with pytest.raises(ValueError, match=message):
        BucketSpec.from_starts(name, starts)


def test_unsupported_counts():
    """Test that counts outside 2..8 and non-binary booleans are rejected."""
    with pytest.raises(ValueError):
        default_bucket_spec("NFMI", 9)
    with pytest.raises(ValueError):
        default_bucket_spec("RSPI", 4)


def test_config_rejects_bad_bucket_table():
    """Test that an invalid boundary override surfaces as a configuration error."""
    with pytest.raises(ConfigError, match="strictly increasing"):
        validate_config({"boundaries": {"L1MP": [0, 60, 40]}}, RlwsConfig)
    with pytest.raises(ConfigError, match="unknown attribute"):
        validate_config({"attributes": {"XYZ": 4}}, RlwsConfig)


def test_boundary_override_replaces_generated_starts():
    """Test that configured boundaries win over generated ones."""
    cfg = validate_config({"boundaries": {"L1MP": [0, 20, 40, 70]}}, RlwsConfig)
    spec = next(s for s in cfg.bucket_specs() if s.attribute == "L1MP")
    assert spec.starts == (0.0, 20.0, 40.0, 70.0)
    assert [s.attribute for s in cfg.bucket_specs()] == [
        "NFMI",
        "NRAI",
        "SMNMIE",
        "L1MP",
        "L2MP",
        "NIPL1M",
        "AGML",
        "GNMIE",
    ]
