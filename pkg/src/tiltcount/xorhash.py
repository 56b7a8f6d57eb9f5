"""Random parity-constraint hashing over the independent support.

A hash with m rows partitions assignments into 2^m cells.  Each row xors a
random half of the support variables against a random target bit, so the
constraint value of each row is a fair coin for any fixed assignment, and
distinct assignments collide 3-wise independently.  The random cell choice
is folded into each row's parity bit at sampling time; callers only ever
need the conjunction "hash value equals chosen cell".
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .formula import Assignment

__all__ = [
    "XorConstraint",
    "HashConstraintSet",
    "sample_hash",
    "cell_membership",
    "serialize_xor_lines",
]


@dataclass(frozen=True)
class XorConstraint:
    """XOR of the listed variables must equal `parity`."""

    vars: tuple[int, ...]  # sorted, distinct, 1-based
    parity: bool

    def __post_init__(self) -> None:
        if list(self.vars) != sorted(set(self.vars)):
            object.__setattr__(self, "vars", tuple(sorted(set(self.vars))))
        if self.vars and self.vars[0] < 1:
            raise ValueError("variable indices must be >= 1")

    def satisfied_by(self, sigma: Assignment) -> bool:
        acc = False
        for v in self.vars:
            acc ^= sigma.value(v)
        return acc == self.parity


@dataclass(frozen=True)
class HashConstraintSet:
    """m independent parity rows over a common support."""

    rows: tuple[XorConstraint, ...]

    @property
    def m(self) -> int:
        return len(self.rows)


def sample_hash(
    support: Iterable[int], m: int, rng: random.Random
) -> HashConstraintSet:
    """Draw m parity rows; each includes each support variable w.p. 1/2.

    Row parities absorb both the random affine bit of the hash function and
    the random cell choice, which are jointly one fair bit per row.
    """
    svars = sorted(support)
    if not svars:
        raise ValueError("support must be non-empty")
    if m < 1:
        raise ValueError(f"row count must be >= 1, got {m}")
    k = len(svars)
    rows = []
    for _ in range(m):
        bits = rng.getrandbits(k)
        chosen = tuple(v for j, v in enumerate(svars) if (bits >> j) & 1)
        parity = bool(rng.getrandbits(1))
        rows.append(XorConstraint(chosen, parity))
    return HashConstraintSet(tuple(rows))


def cell_membership(hs: HashConstraintSet, sigma: Assignment) -> bool:
    """True iff sigma lies in the cell carved out by every row."""
    return all(row.satisfied_by(sigma) for row in hs.rows)


def serialize_xor_lines(rows: HashConstraintSet | Sequence[XorConstraint]) -> str:
    """Debug dump as ``x`` lines; a negated first literal flips the parity.

    ``x 1 2 0`` states x1 xor x2 = 1, ``x -1 2 0`` states x1 xor x2 = 0.
    An empty row with parity 1 is the unsatisfiable ``x 0``; an empty row
    with parity 0 is vacuous and dumped as a comment so external tools
    (which would ignore it) keep identical semantics.
    """
    seq = rows.rows if isinstance(rows, HashConstraintSet) else rows
    lines = []
    for row in seq:
        if not row.vars:
            lines.append("x 0" if row.parity else "c x-row vacuous (parity 0)")
            continue
        lits = [str(v) for v in row.vars]
        if not row.parity:
            lits[0] = "-" + lits[0]
        lines.append("x " + " ".join(lits) + " 0")
    return "\n".join(lines) + ("\n" if lines else "")
