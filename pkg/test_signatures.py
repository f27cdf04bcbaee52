#!/usr/bin/env python3
"""Tests for BCH signature columns and Zadoff-Chu sequences."""

import math
from itertools import combinations

import numpy as np
import pytest

from engine.errors import InvalidCapability, InvalidZcParams, LengthMismatch, MessageOutOfRange
from engine.galois import build_field
from engine.signatures import (
    ZcParams,
    build_signature_code,
    correlation_profile,
    message_to_signature,
    periodic_correlation,
    syndrome_of,
    zc_generate,
    zc_report,
)

GF16 = build_field(4)
CODE_4_2 = build_signature_code(GF16, 2)


def test_code_dimensions():
    assert CODE_4_2.columns.shape == (15, 8)
    assert CODE_4_2.n == 15
    assert CODE_4_2.seq_len == 8
    code63 = build_signature_code(build_field(6), 4)
    assert code63.columns.shape == (63, 24)


def test_columns_hold_odd_powers():
    # message 1 -> alpha^0 in both blocks
    assert list(message_to_signature(CODE_4_2, 1)) == [1, 0, 0, 0, 1, 0, 0, 0]
    # message 2 -> alpha^1 = x and alpha^3 = x^3
    assert list(message_to_signature(CODE_4_2, 2)) == [0, 1, 0, 0, 0, 0, 0, 1]


def test_columns_are_read_only():
    with pytest.raises(ValueError):
        CODE_4_2.columns[0, 0] = 1


def test_small_subset_sums_are_distinct():
    sums = set()
    for t in range(3):
        for subset in combinations(range(1, 16), t):
            sums.add(syndrome_of(CODE_4_2, subset).tobytes())
    assert len(sums) == 121


def test_any_2t_columns_are_independent():
    for size in range(1, 2 * CODE_4_2.T + 1):
        for subset in combinations(range(1, 16), size):
            assert syndrome_of(CODE_4_2, subset).any(), subset


def test_capability_limits():
    with pytest.raises(InvalidCapability):
        build_signature_code(GF16, 0)
    with pytest.raises(InvalidCapability):
        build_signature_code(GF16, 8)
    assert build_signature_code(GF16, 7).seq_len == 28


def test_message_range():
    with pytest.raises(MessageOutOfRange):
        message_to_signature(CODE_4_2, 0)
    with pytest.raises(MessageOutOfRange):
        message_to_signature(CODE_4_2, 16)


def test_syndrome_of_repeated_message_cancels():
    assert not syndrome_of(CODE_4_2, [5, 5]).any()


@pytest.mark.parametrize("q", [7, 839])
def test_zc_unit_modulus_and_ideal_autocorrelation(q):
    x = zc_generate(ZcParams(1, q))
    assert np.max(np.abs(np.abs(x) - 1.0)) < 1e-12
    profile = correlation_profile(x, x)
    assert abs(profile[0] - q) < 1e-9
    assert np.max(profile[1:]) < 1e-9


@pytest.mark.parametrize("q", [7, 839])
def test_zc_cross_correlation_is_flat(q):
    x = zc_generate(ZcParams(1, q))
    y = zc_generate(ZcParams(2, q))
    profile = correlation_profile(x, y)
    assert np.all(np.abs(profile - math.sqrt(q)) < 1e-9)


def test_zc_parameter_validation():
    with pytest.raises(InvalidZcParams):
        zc_generate(ZcParams(1, 8))
    with pytest.raises(InvalidZcParams):
        zc_generate(ZcParams(0, 7))
    with pytest.raises(InvalidZcParams):
        zc_generate(ZcParams(7, 7))
    with pytest.raises(InvalidZcParams):
        zc_generate(ZcParams(3, 9))


def test_correlation_length_mismatch():
    with pytest.raises(LengthMismatch):
        periodic_correlation(np.ones(7), np.ones(5), 0)


def test_zc_report_fields():
    report = zc_report(13, 1, 3)
    assert report["autocorrelation peak"] == pytest.approx(13.0)
    assert report["max off-peak autocorrelation"] < 1e-9
    assert report["min cross-correlation"] == pytest.approx(math.sqrt(13), abs=1e-9)
    assert report["max cross-correlation"] == pytest.approx(math.sqrt(13), abs=1e-9)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
