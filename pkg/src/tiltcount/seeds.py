"""Deterministic seed derivation for parallel and nested randomized stages.

Python's built-in hash() is salted per process, so stream seeds are derived
from SHA-256 instead: the same master seed and labels always produce the same
child seed, on any machine and in any process of a worker pool.
"""

from __future__ import annotations

import hashlib
import random

__all__ = ["derive_seed", "derive_rng"]


def derive_seed(*parts: object) -> int:
    """Derive a 63-bit child seed from a master seed and a label path."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def derive_rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))
