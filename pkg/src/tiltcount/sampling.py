"""Approximately weighted-uniform sampling of satisfying assignments.

A sample is drawn by carving the witness space into random parity cells
sized so that a cell's scaled weight lands between ``loThresh`` and
``hiThresh`` with good probability, then drawing weighted-uniformly within
the accepted cell.  When the whole formula already fits under ``hiThresh``
the draw is exact.  Cell sizing needs one approximate count, which can be
computed once and reused across samples via ``make_sampler_state``.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

from .counting import (
    CountParams,
    ParameterError,
    SolveBudgetError,
    _bws_on_instance,
    weightmc,
)
from .formula import Assignment, CnfFormula, WeightModel
from .satengine import SolverInstance
from .seeds import derive_seed
from .xorhash import sample_hash

__all__ = [
    "KappaPivot",
    "SamplerState",
    "SampleOutcome",
    "SamplerStateMismatch",
    "compute_kappa_pivot",
    "make_sampler_state",
    "weightgen",
]

# (1+k)(2.36 + 0.51/(1-k)^2) - 1 at k = 0; tolerances at or below this have
# no root in [0,1).
MIN_EPSILON = 1.87


class SamplerStateMismatch(ValueError):
    """Cached sampler state was built for different inputs."""


@dataclass(frozen=True)
class KappaPivot:
    kappa: float
    pivot: int


def _kappa_equation(kappa: float) -> float:
    return (1.0 + kappa) * (2.36 + 0.51 / (1.0 - kappa) ** 2) - 1.0


def compute_kappa_pivot(epsilon: float) -> KappaPivot:
    """Solve epsilon = (1+k)(2.36 + 0.51/(1-k)^2) - 1 for k in (0,1).

    The right-hand side is strictly increasing on [0,1), so bisection finds
    the unique root; its value at k=0 is 1.87, below which no root exists
    (and k=0 itself would make the pivot diverge).
    """
    if not math.isfinite(epsilon) or epsilon <= MIN_EPSILON:
        raise ParameterError(
            f"sampling tolerance must exceed {MIN_EPSILON} (got {epsilon})"
        )
    lo, hi = 0.0, 1.0 - 1e-15
    while hi - lo > 1e-12:
        mid = (lo + hi) / 2.0
        if _kappa_equation(mid) < epsilon:
            lo = mid
        else:
            hi = mid
    kappa = (lo + hi) / 2.0
    pivot = math.ceil(math.exp(1.5) * (1.0 + 1.0 / kappa) ** 2)
    return KappaPivot(kappa, pivot)


@dataclass(frozen=True)
class SamplerState:
    """Frozen cell-sizing data reused across samples of one formula."""

    formula: CnfFormula
    model: WeightModel
    epsilon: float
    r: float
    support: frozenset[int]
    kappa: float
    pivot: int
    hi_thresh: float
    lo_thresh: float
    count: float
    wmax: float
    q: int | None  # None when the count is 0 (never consulted then)
    solver_calls: int

    def matches(
        self,
        formula: CnfFormula,
        model: WeightModel,
        epsilon: float,
        r: float,
        support: frozenset[int],
    ) -> bool:
        return (
            self.formula == formula
            and self.model == model
            and self.epsilon == epsilon
            and self.r == r
            and self.support == support
        )


@dataclass(frozen=True)
class SampleOutcome:
    """A witness or a failure, plus how the sampler got there."""

    witness: Assignment | None
    perfect_path: bool
    i_reached: int
    cell_scaled_weight: float
    used_cached_count: bool
    solver_calls: int
    failure_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.witness is not None


def _thresholds(kp: KappaPivot) -> tuple[float, float]:
    hi = 1.0 + (1.0 + kp.kappa) * kp.pivot
    lo = kp.pivot / (1.0 + kp.kappa)
    return hi, lo


def make_sampler_state(
    formula: CnfFormula,
    model: WeightModel,
    epsilon: float,
    r: float,
    support: Iterable[int] | None = None,
    *,
    seed: int = 0,
    jobs: int = 1,
    budget_seconds: float | None = None,
    budget_steps: int | None = None,
    retry_cap: int = 3,
    deadline: float | None = None,
) -> SamplerState:
    """Run the one-time approximate count and freeze the derived cell range."""
    kp = compute_kappa_pivot(epsilon)
    hi, lo = _thresholds(kp)
    sup = frozenset(support) if support is not None else formula.independent_support
    params = CountParams(
        0.8,
        0.2,
        r,
        seed=derive_seed(seed, "sampler-count"),
        budget_seconds=budget_seconds,
        budget_steps=budget_steps,
        retry_cap=retry_cap,
        jobs=jobs,
    )
    res = weightmc(formula, model, params, sup, deadline=deadline)
    if res.value > 0.0:
        q = math.ceil(
            math.log2(res.value)
            - math.log2(res.wmax)
            + math.log2(1.8)
            - math.log2(kp.pivot)
        )
    else:
        q = None
    return SamplerState(
        formula=formula,
        model=model,
        epsilon=epsilon,
        r=r,
        support=sup,
        kappa=kp.kappa,
        pivot=kp.pivot,
        hi_thresh=hi,
        lo_thresh=lo,
        count=res.value,
        wmax=res.wmax,
        q=q,
        solver_calls=res.solver_calls,
    )


def _weighted_draw(
    witnesses: Sequence[Assignment], model: WeightModel, rng: random.Random
) -> Assignment:
    """Inverse-CDF draw with probability w(y) / w(Y)."""
    weights = [model.weight(y) for y in witnesses]
    x = rng.random() * math.fsum(weights)
    acc = 0.0
    for y, w in zip(witnesses, weights):
        acc += w
        if x < acc:
            return y
    return witnesses[-1]


def weightgen(
    formula: CnfFormula,
    model: WeightModel,
    epsilon: float,
    r: float,
    support: Iterable[int] | None = None,
    *,
    rng: random.Random | int = 0,
    state: SamplerState | None = None,
    jobs: int = 1,
    budget_seconds: float | None = None,
    budget_steps: int | None = None,
    retry_cap: int = 3,
    deadline: float | None = None,
) -> SampleOutcome:
    """Draw one witness with probability within (1+epsilon) of w(y)/w(R_F).

    Succeeds with probability at least 0.62; a failed draw returns a
    SampleOutcome with ``witness=None``.  Passing a ``state`` built by
    `make_sampler_state` skips the internal counting call.
    """
    if r < 1.0:
        raise ParameterError(f"tilt bound must be >= 1, got {r}")
    kp = compute_kappa_pivot(epsilon)
    hi_thresh, lo_thresh = _thresholds(kp)
    sup = frozenset(support) if support is not None else formula.independent_support
    if state is not None and not state.matches(formula, model, epsilon, r, sup):
        raise SamplerStateMismatch(
            "sampler state was built for a different (formula, weights, epsilon, r, support)"
        )
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)

    instance = SolverInstance.from_formula(formula, model=model, rng=rng, support=sup)
    calls_before = instance.solver_calls
    extra_calls = 0

    def run(wmax_in: float):
        bws_deadline = time.monotonic() + budget_seconds if budget_seconds else None
        return _bws_on_instance(
            instance, model, hi_thresh, r, wmax_in, budget_steps, bws_deadline
        )

    def outcome(
        witness: Assignment | None,
        perfect: bool,
        i: int,
        w_scaled: float,
        cached: bool,
        reason: str | None = None,
    ) -> SampleOutcome:
        return SampleOutcome(
            witness=witness,
            perfect_path=perfect,
            i_reached=i,
            cell_scaled_weight=w_scaled,
            used_cached_count=cached,
            solver_calls=instance.solver_calls - calls_before + extra_calls,
            failure_reason=reason,
        )

    wmax = 1.0
    attempts = 0
    while True:
        try:
            enum = run(wmax)
            break
        except SolveBudgetError:
            attempts += 1
            if attempts > retry_cap:
                return outcome(None, True, 0, 0.0, False, "budget exhausted")
    wmax = enum.new_wmax
    w_scaled = enum.w_total / wmax
    if w_scaled <= hi_thresh:
        if not enum.witnesses:
            return outcome(None, True, 0, 0.0, False, "formula is unsatisfiable")
        return outcome(_weighted_draw(enum.witnesses, model, rng), True, 0, w_scaled, False)

    used_cache = state is not None
    if state is None:
        state = make_sampler_state(
            formula,
            model,
            epsilon,
            r,
            sup,
            seed=rng.getrandbits(60),
            jobs=jobs,
            budget_seconds=budget_seconds,
            budget_steps=budget_steps,
            retry_cap=retry_cap,
            deadline=deadline,
        )
        extra_calls += state.solver_calls
    if state.q is None:
        return outcome(None, False, 0, w_scaled, used_cache, "cached count is zero")
    wmax = state.wmax
    q = state.q
    q_eff = max(q, 1)
    i = q - 4 if q - 3 >= 1 else 0

    while True:
        if deadline is not None and time.monotonic() > deadline:
            return outcome(None, False, i, w_scaled, used_cache, "overall deadline expired")
        i += 1
        attempts = 0
        while True:
            hs = sample_hash(sup, i, rng)
            cp = instance.push_constraints(hs)
            try:
                enum = run(wmax)
            except SolveBudgetError:
                instance.pop_to(cp)
                attempts += 1
                if attempts > retry_cap:
                    return outcome(None, False, i, 0.0, used_cache, "budget exhausted")
                continue  # fresh hash at the same depth
            instance.pop_to(cp)
            break
        wmax = enum.new_wmax
        w_scaled = enum.w_total / wmax
        if lo_thresh <= w_scaled <= hi_thresh or i >= q_eff:
            break

    if w_scaled > hi_thresh or w_scaled < lo_thresh:
        return outcome(None, False, i, w_scaled, used_cache, "no cell in range")
    return outcome(_weighted_draw(enum.witnesses, model, rng), False, i, w_scaled, used_cache)
