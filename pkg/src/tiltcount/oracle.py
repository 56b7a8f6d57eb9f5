"""Ground truth at desk scale: exact counts, ideal sampling, distances.

Exact counting enumerates witnesses through the solver with blocking
clauses over the independent support, so sparse solution sets on large
variable counts stay cheap; there is no 2^n sweep here.  The ideal sampler
draws from the exact distribution and is the reference for distribution
tests.
"""

from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .counting import WeightAccumulator
from .formula import Assignment, CnfFormula, WeightModel, project, projection_key
from .satengine import SolveStatus, SolverInstance
from .seeds import derive_rng

__all__ = [
    "OracleError",
    "OracleCapExceeded",
    "IndependentSupportError",
    "ExactResult",
    "EmpiricalDistribution",
    "exact_count",
    "ideal_sample",
    "exact_distribution",
    "l1_distance",
]

Key = tuple[int, ...]


class OracleError(RuntimeError):
    """Oracle cannot produce a result for this input."""


class OracleCapExceeded(OracleError):
    """The instance has more witnesses than the enumeration cap."""


class IndependentSupportError(OracleError):
    """Two witnesses share a support projection; the declared support is wrong."""


@dataclass(frozen=True)
class ExactResult:
    exact_count: float
    log_count: float  # natural-log form, -inf for UNSAT
    wmin: float | None
    wmax: float | None
    tilt: float | None
    solutions: tuple[tuple[Assignment, float], ...] | None
    n_solutions: int


def exact_count(
    formula: CnfFormula,
    model: WeightModel,
    support: Iterable[int] | None = None,
    *,
    max_solutions: int = 2**22,
    store_cap: int = 2**16,
    verify_support: bool = True,
    seed: int = 0,
) -> ExactResult:
    """Exact weighted model count by solver enumeration over the support.

    When the support is a proper subset of the variables, each witness is
    checked to be the unique completion of its projection; a second
    completion raises IndependentSupportError.
    """
    sup = frozenset(support) if support is not None else formula.independent_support
    instance = SolverInstance.from_formula(
        formula, model=model, rng=derive_rng(seed, "oracle"), support=sup
    )
    full = formula.variables()
    check_support = verify_support and sup != full

    acc = WeightAccumulator()
    stored: list[tuple[Assignment, float]] | None = []
    n_solutions = 0
    wmin = math.inf
    wmax = 0.0
    while True:
        res = instance.solve()
        if res.status is SolveStatus.UNSAT:
            break
        y = res.assignment
        assert y is not None
        n_solutions += 1
        if n_solutions > max_solutions:
            raise OracleCapExceeded(
                f"more than {max_solutions} witnesses; too large for the oracle"
            )
        if check_support:
            cp = instance.checkpoint()
            for v in sorted(sup):
                instance.add_clause([v if y.value(v) else -v])
            instance.add_clause(
                [-v if y.value(v) else v for v in range(1, formula.num_vars + 1)]
            )
            second = instance.solve()
            instance.pop_to(cp)
            if second.status is SolveStatus.SAT:
                raise IndependentSupportError(
                    f"projection {projection_key(y, sup)} has two completions; "
                    "the declared independent support does not determine the formula"
                )
        w = model.weight(y)
        acc.add(w, model.log_weight(y))
        if w < wmin:
            wmin = w
        if w > wmax:
            wmax = w
        if stored is not None:
            if n_solutions <= store_cap:
                stored.append((y, w))
            else:
                stored = None
        instance.add_blocking_clause(project(y, sup))

    if n_solutions == 0:
        return ExactResult(0.0, -math.inf, None, None, None, (), 0)
    return ExactResult(
        exact_count=acc.total,
        log_count=acc.log_total,
        wmin=wmin,
        wmax=wmax,
        tilt=wmax / wmin,
        solutions=tuple(stored) if stored is not None else None,
        n_solutions=n_solutions,
    )


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Draw counts per support projection."""

    counts: Mapping[Key, int]
    draws: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.draws:
            raise ValueError("counts do not sum to the number of draws")

    def frequency(self, key: Key) -> float:
        return self.counts.get(key, 0) / self.draws

    def frequencies(self) -> dict[Key, float]:
        return {k: c / self.draws for k, c in self.counts.items()}

    def to_text(self) -> str:
        lines = [f"total {self.draws}"]
        for key in sorted(self.counts):
            lines.append(f"{self.counts[key]} " + " ".join(str(l) for l in key))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EmpiricalDistribution":
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines or not lines[0].startswith("total "):
            raise ValueError("missing 'total' header line")
        draws = int(lines[0].split()[1])
        counts: dict[Key, int] = {}
        for line in lines[1:]:
            toks = line.split()
            counts[tuple(int(t) for t in toks[1:])] = int(toks[0])
        return cls(counts, draws)


def ideal_sample(
    formula: CnfFormula,
    model: WeightModel,
    rng: random.Random | int,
    n_draws: int,
    support: Iterable[int] | None = None,
    *,
    max_solutions: int = 2**22,
    seed: int = 0,
) -> EmpiricalDistribution:
    """n_draws independent draws with Pr[y] = w(y) / w(R_F)."""
    if n_draws < 1:
        raise ValueError("need at least one draw")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    sup = frozenset(support) if support is not None else formula.independent_support
    result = exact_count(
        formula, model, sup, max_solutions=max_solutions, store_cap=max_solutions, seed=seed
    )
    if result.n_solutions == 0:
        raise OracleError("formula is unsatisfiable; nothing to sample")
    assert result.solutions is not None
    keys = [projection_key(y, sup) for y, _ in result.solutions]
    cumulative = list(itertools.accumulate(w for _, w in result.solutions))
    total = cumulative[-1]
    counts: dict[Key, int] = {}
    for _ in range(n_draws):
        idx = bisect.bisect_right(cumulative, rng.random() * total)
        if idx >= len(keys):
            idx = len(keys) - 1
        key = keys[idx]
        counts[key] = counts.get(key, 0) + 1
    return EmpiricalDistribution(counts, n_draws)


def exact_distribution(
    result: ExactResult, support: Iterable[int]
) -> dict[Key, float]:
    """Ideal per-projection probabilities from a stored exact enumeration."""
    if result.solutions is None:
        raise OracleError("exact result did not store its solutions")
    if result.n_solutions == 0:
        raise OracleError("formula is unsatisfiable")
    return {
        projection_key(y, support): w / result.exact_count
        for y, w in result.solutions
    }


def l1_distance(
    a: "EmpiricalDistribution | Mapping[Key, float]",
    b: "EmpiricalDistribution | Mapping[Key, float]",
) -> float:
    """Sum over the union of keys of |p_a - p_b| (2 x total variation)."""

    def probs(d) -> Mapping[Key, float]:
        return d.frequencies() if isinstance(d, EmpiricalDistribution) else d

    pa, pb = probs(a), probs(b)
    return math.fsum(
        abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in set(pa) | set(pb)
    )
