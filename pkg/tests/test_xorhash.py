"""Hash family statistics and representation checks.

Membership in the statistical tests is computed arithmetically in the test
(parity of selected bits) rather than through the package's
cell_membership, so the sampled-distribution checks have an independent
evaluation path.
"""

import math
import random

import pytest

from tiltcount import (
    Assignment,
    HashConstraintSet,
    XorConstraint,
    cell_membership,
    sample_hash,
    serialize_xor_lines,
)


def independent_member(rows, bits):
    """Parity check straight from the definition; bits[v] is var v's value."""
    for row in rows:
        acc = 0
        for v in row.vars:
            acc ^= bits[v]
        if acc != (1 if row.parity else 0):
            return False
    return True


def test_determinism_and_restriction():
    support = {2, 3, 5, 8}
    a = sample_hash(support, 4, random.Random(99))
    b = sample_hash(support, 4, random.Random(99))
    assert a == b
    c = sample_hash(support, 4, random.Random(100))
    assert a != c  # overwhelmingly likely and fixed by the seeds
    assert a.m == 4
    for row in a.rows:
        assert set(row.vars) <= support


def test_cell_membership_examples():
    sigma = Assignment([True, False])
    empty = HashConstraintSet(())
    assert cell_membership(empty, sigma)
    one = HashConstraintSet((XorConstraint((1, 2), True),))
    assert cell_membership(one, sigma)  # 1 xor 0 = 1
    empty_row = HashConstraintSet((XorConstraint((), True),))
    assert not cell_membership(empty_row, sigma)  # empty xor is 0
    vacuous = HashConstraintSet((XorConstraint((), False),))
    assert cell_membership(vacuous, sigma)


def test_single_variable_uniformity():
    # Pr[h(y) = alpha] = 1/2 for m = 1
    rng = random.Random(1)
    bits = {1: 1}
    hits = sum(
        independent_member(sample_hash({1}, 1, rng).rows, bits)
        for _ in range(100_000)
    )
    assert abs(hits / 100_000 - 0.5) < 0.01


@pytest.mark.parametrize("m", [1, 2, 3, 6, 10])
def test_uniformity_across_depths(m):
    rng = random.Random(10 + m)
    support = set(range(1, 11))
    bits = {v: v % 2 for v in support}
    trials = 100_000
    hits = 0
    for _ in range(trials):
        hits += independent_member(sample_hash(support, m, rng).rows, bits)
    p = 2.0**-m
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) <= 4 * sigma


def test_pairwise_independence():
    rng = random.Random(77)
    support = {1, 2, 3}
    y1 = {1: 1, 2: 0, 3: 0}
    y2 = {1: 0, 2: 1, 3: 1}
    trials = 100_000
    both = 0
    for _ in range(trials):
        rows = sample_hash(support, 2, rng).rows
        if independent_member(rows, y1) and independent_member(rows, y2):
            both += 1
    p = 2.0**-4
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(both / trials - p) <= 4 * sigma


def test_three_wise_independence():
    rng = random.Random(78)
    support = set(range(1, 9))
    ys = [
        {v: (v >> k) & 1 for v in support}
        for k in range(3)
    ]
    m = 2
    trials = 100_000
    hits = 0
    for _ in range(trials):
        rows = sample_hash(support, m, rng).rows
        if all(independent_member(rows, y) for y in ys):
            hits += 1
    p = 2.0 ** (-3 * m)
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) <= 4 * sigma


def test_expected_row_size_half_support():
    rng = random.Random(3)
    support = set(range(1, 17))
    rows = 100_000
    total = 0
    for _ in range(rows // 16):
        hs = sample_hash(support, 16, rng)
        total += sum(len(r.vars) for r in hs.rows)
    mean = total / rows
    assert abs(mean - 8.0) / 8.0 < 0.02

    # the two-variable figure quoted for the sampler: |S|/2 = 1.0 +- 0.02
    total = sum(
        len(r.vars) for _ in range(10_000) for r in sample_hash({1, 2}, 10, rng).rows
    )
    assert abs(total / 100_000 - 1.0) < 0.02


def test_sampling_validation():
    with pytest.raises(ValueError):
        sample_hash(set(), 1, random.Random(0))
    with pytest.raises(ValueError):
        sample_hash({1}, 0, random.Random(0))


def test_serialization_convention():
    rows = [
        XorConstraint((1, 4, 7), True),
        XorConstraint((2, 3), False),
        XorConstraint((), True),
        XorConstraint((), False),
    ]
    text = serialize_xor_lines(rows)
    lines = text.splitlines()
    assert lines[0] == "x 1 4 7 0"
    assert lines[1] == "x -2 3 0"
    assert lines[2] == "x 0"
    assert lines[3].startswith("c ")


def test_member_agrees_with_cell_membership():
    rng = random.Random(12)
    support = set(range(1, 9))
    for trial in range(300):
        hs = sample_hash(support, rng.randint(1, 4), rng)
        vals = [rng.random() < 0.5 for _ in range(8)]
        sigma = Assignment(vals)
        bits = {v: int(vals[v - 1]) for v in support}
        assert cell_membership(hs, sigma) == independent_member(hs.rows, bits)
