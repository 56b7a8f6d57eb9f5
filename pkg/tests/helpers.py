"""Shared test machinery.

`brute_force_models` is the independent ground truth used throughout the
suite: it evaluates all 2^n assignments through truth-table bitmask
arithmetic, touching none of the package's solver or enumeration code.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

from tiltcount import Assignment, CnfFormula, LiteralProductWeights, UniformWeights

JOBS = 2  # sized for the CI box


@lru_cache(maxsize=None)
def _var_mask(v: int, n: int) -> int:
    """Truth-table bitmask: bit a is set iff assignment a has variable v true."""
    half = 1 << (v - 1)
    mask = ((1 << half) - 1) << half  # 2^(v-1) zeros then 2^(v-1) ones
    width = 1 << v
    total = 1 << n
    while width < total:  # tile by doubling
        mask |= mask << width
        width <<= 1
    return mask


def brute_force_models(
    n: int,
    clauses,
    xor_rows=(),
    model=None,
    window=None,
) -> list[Assignment]:
    """All satisfying assignments of clauses + xor rows (+ weight window)."""
    full = (1 << (1 << n)) - 1
    sat = full
    for cl in clauses:
        cm = 0
        for lit in cl:
            vm = _var_mask(abs(lit), n)
            cm |= vm if lit > 0 else (full & ~vm)
        sat &= cm
        if not sat:
            break
    for vars_, parity in xor_rows:
        xm = 0
        for v in vars_:
            xm ^= _var_mask(v, n)
        sat &= xm if parity else (full & ~xm)
    out = []
    rest = sat
    while rest:
        low = rest & -rest
        idx = low.bit_length() - 1
        rest ^= low
        y = Assignment(((idx >> (v - 1)) & 1 == 1 for v in range(1, n + 1)))
        if window is not None:
            w = model.weight(y)
            if not window.low < w <= window.high:
                continue
        out.append(y)
    return out


def brute_force_weighted_count(n, clauses, model) -> float:
    return sum(model.weight(y) for y in brute_force_models(n, clauses))


def brute_force_model_count(n, clauses) -> int:
    """Count-only variant; popcount of the satisfying truth table."""
    full = (1 << (1 << n)) - 1
    sat = full
    for cl in clauses:
        cm = 0
        for lit in cl:
            vm = _var_mask(abs(lit), n)
            cm |= vm if lit > 0 else (full & ~vm)
        sat &= cm
        if not sat:
            return 0
    return sat.bit_count()


def random_3cnf(rng: random.Random, n: int, n_clauses: int) -> CnfFormula:
    clauses = []
    for _ in range(n_clauses):
        vs = rng.sample(range(1, n + 1), min(3, n))
        clauses.append([v if rng.random() < 0.5 else -v for v in vs])
    return CnfFormula.build(n, clauses)


def random_weights(rng: random.Random, n: int, max_vars: int = 6) -> LiteralProductWeights:
    pairs = {}
    for v in rng.sample(range(1, n + 1), min(max_vars, n)):
        p = rng.uniform(0.2, 0.8)
        pairs[v] = (p, 1.0 - p)
    return LiteralProductWeights(pairs)


import math


def cnf_with_solution_count(
    rng: random.Random, n: int, lo: int, hi: int, max_tries: int = 600
) -> CnfFormula:
    """Random 3-CNF whose model count lies in [lo, hi] (by brute force)."""
    # a random 3-clause keeps 7/8 of assignments in expectation
    target = math.sqrt(lo * hi) / 2.0**n
    m0 = max(1, round(math.log(target) / math.log(7 / 8)))
    for _ in range(max_tries):
        m = max(1, m0 + rng.randint(-max(2, m0 // 3), max(2, m0 // 3)))
        f = random_3cnf(rng, n, m)
        count = brute_force_model_count(n, f.clause_ints())
        if lo <= count <= hi:
            return f
    raise RuntimeError(f"no {n}-var instance with {lo}..{hi} solutions found")


def run_parallel(fn, tasks, jobs: int = JOBS) -> list:
    """Order-preserving parallel map over picklable tasks."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def uniform() -> UniformWeights:
    return UniformWeights()
