"""The weighted-counting stack.

Three layers, bottom up:

* ``bounded_weight_sat`` enumerates witnesses (blocking each one on the
  independent support) until the formula runs dry or the accumulated scaled
  weight crosses the pivot, threading a running upper bound ``wmax`` on the
  maximum witness weight.
* ``weightmc_core`` produces one randomized estimate: if the unhashed
  enumeration already fits under the pivot it is exact, otherwise parity
  constraints are conjoined one row at a time until a cell of scaled weight
  in (0, pivot] is found, whose weight is scaled back up by the cell count
  2^i.
* ``weightmc`` amplifies confidence by running the core t times and taking
  the median of the non-failed estimates.

``partitioned_weightmc`` sums ``weightmc`` over dyadic weight windows so the
per-call tilt bound is 2 regardless of the overall tilt; it requires a
literal-product (white-box) weight model for the window constraint.

The t core iterations are split into ``WMAX_CHAINS`` fixed chains; ``wmax``
threads through each chain sequentially and the chains can run on worker
processes.  Because the chain layout does not depend on the worker count,
results are bit-identical for any ``jobs`` setting.
"""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .formula import (
    Assignment,
    BlackBoxWeights,
    CnfFormula,
    LiteralProductWeights,
    WeightModel,
    project,
)
from .satengine import Budget, SolveStatus, SolverInstance, WeightWindow
from .seeds import derive_rng, derive_seed
from .xorhash import HashConstraintSet, sample_hash

__all__ = [
    "ParameterError",
    "CountFailure",
    "SolveBudgetError",
    "OverallTimeout",
    "CountParams",
    "BoundedEnumeration",
    "CountEstimate",
    "WeightMcResult",
    "WindowReport",
    "PartitionedCount",
    "compute_pivot",
    "compute_iterations",
    "bounded_weight_sat",
    "weightmc_core",
    "weightmc",
    "partitioned_weightmc",
    "WMAX_CHAINS",
]


class ParameterError(ValueError):
    """A parameter is outside the range the guarantees require."""


class CountFailure(RuntimeError):
    """Every core iteration failed; no estimate is available."""


class SolveBudgetError(RuntimeError):
    """A bounded enumeration ran out of its per-call budget."""


class OverallTimeout(RuntimeError):
    """The overall deadline expired between core iterations."""


# Fixed number of wmax-threading chains.  The estimate-bound wmax threads
# sequentially within a chain; chains are merged by a final min.  Keeping the
# chain count independent of the worker count makes results identical for
# any --jobs value.
WMAX_CHAINS = 8


def compute_pivot(epsilon: float) -> int:
    """Cell-size target for the counting core: 2 * ceil(e^1.5 (1+1/eps)^2)."""
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must be in (0,1), got {epsilon}")
    return 2 * math.ceil(math.exp(1.5) * (1.0 + 1.0 / epsilon) ** 2)


def compute_iterations(delta: float) -> int:
    """Number of median-amplification rounds: ceil(35 log2(3/delta))."""
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must be in (0,1), got {delta}")
    return math.ceil(35.0 * math.log2(3.0 / delta))


@dataclass(frozen=True)
class CountParams:
    """Knobs for `weightmc`."""

    epsilon: float
    delta: float
    tilt_bound: float
    seed: int = 0
    budget_seconds: float | None = None  # per bounded-enumeration call
    budget_steps: int | None = None  # per solver call
    retry_cap: int = 3
    jobs: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must be in (0,1), got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must be in (0,1), got {self.delta}")
        if not (math.isfinite(self.tilt_bound) and self.tilt_bound >= 1.0):
            raise ParameterError(f"tilt bound must be >= 1, got {self.tilt_bound}")
        if self.retry_cap < 0:
            raise ParameterError("retry_cap must be >= 0")
        if self.jobs < 1:
            raise ParameterError("jobs must be >= 1")


class WeightAccumulator:
    """Weight sum in compensated linear space with a log-sum-exp shadow.

    The linear Kahan sum is returned while the weight spread stays under
    1e6; beyond that (or after underflow) the log-space value takes over.
    """

    __slots__ = ("_sum", "_comp", "_lse_max", "_lse_acc", "_min_w", "_max_w", "count")

    def __init__(self) -> None:
        self._sum = 0.0
        self._comp = 0.0
        self._lse_max = -math.inf
        self._lse_acc = 0.0
        self._min_w = math.inf
        self._max_w = 0.0
        self.count = 0

    def add(self, w: float, log_w: float) -> None:
        y = w - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t
        if log_w > self._lse_max:
            self._lse_acc = self._lse_acc * math.exp(self._lse_max - log_w) + 1.0
            self._lse_max = log_w
        else:
            self._lse_acc += math.exp(log_w - self._lse_max)
        if w < self._min_w:
            self._min_w = w
        if w > self._max_w:
            self._max_w = w
        self.count += 1

    @property
    def log_total(self) -> float:
        if self.count == 0:
            return -math.inf
        return self._lse_max + math.log(self._lse_acc)

    @property
    def total(self) -> float:
        if self.count == 0:
            return 0.0
        if self._min_w > 0.0 and self._max_w / self._min_w <= 1e6 and self._sum > 0.0:
            return self._sum
        return math.exp(self.log_total)


@dataclass(frozen=True)
class BoundedEnumeration:
    """Outcome of one bounded enumeration.

    ``saturated`` is set when the loop stopped because the accumulated
    scaled weight crossed the pivot rather than because the instance ran
    out of witnesses; ``new_wmax`` is the refreshed upper bound
    (min weight seen, seeded with wmax/r, times r).
    """

    witnesses: tuple[Assignment, ...]
    w_total: float
    log_w_total: float
    new_wmax: float
    saturated: bool
    solver_calls: int


@dataclass(frozen=True)
class CountEstimate:
    """One core estimate; ``value`` is scaled by 1/wmax_used (None = failed)."""

    value: float | None
    wmax_used: float
    cells: int  # the 2^i multiplier applied (1 on the unhashed path, 0 if failed)
    iterations: int
    solver_calls: int


@dataclass(frozen=True)
class WeightMcResult:
    value: float
    wmax: float
    t: int
    pivot: int
    failed_cores: int
    solver_calls: int

    def __float__(self) -> float:
        return self.value


def _bws_on_instance(
    instance: SolverInstance,
    model: WeightModel,
    pivot: float,
    r: float,
    wmax: float,
    budget_steps: int | None,
    deadline: float | None,
) -> BoundedEnumeration:
    """Enumerate-and-block until UNSAT or w_total/(w_min*r) > pivot.

    Blocking clauses are scoped to this call and popped before returning,
    even on budget exhaustion.
    """
    cp = instance.checkpoint()
    calls_before = instance.solver_calls
    budget = None
    if budget_steps is not None or deadline is not None:
        budget = Budget(max_steps=budget_steps, deadline=deadline)
    try:
        w_min = wmax / r
        acc = WeightAccumulator()
        witnesses: list[Assignment] = []
        saturated = False
        while True:
            res = instance.solve(budget)
            if res.status is SolveStatus.BUDGET_EXCEEDED:
                raise SolveBudgetError("bounded enumeration ran out of budget")
            if res.status is SolveStatus.UNSAT:
                break
            y = res.assignment
            assert y is not None
            witnesses.append(y)
            instance.add_blocking_clause(project(y, instance.support))
            w = model.weight(y)
            acc.add(w, model.log_weight(y))
            if w < w_min:
                w_min = w
            if acc.total / (w_min * r) > pivot:
                saturated = True
                break
    finally:
        instance.pop_to(cp)
    return BoundedEnumeration(
        witnesses=tuple(witnesses),
        w_total=acc.total,
        log_w_total=acc.log_total,
        new_wmax=w_min * r,
        saturated=saturated,
        solver_calls=instance.solver_calls - calls_before,
    )


def bounded_weight_sat(
    formula: CnfFormula,
    model: WeightModel,
    hash_set: HashConstraintSet | None,
    pivot: float,
    r: float,
    wmax: float,
    support: Iterable[int] | None = None,
    *,
    window: WeightWindow | None = None,
    seed: int = 0,
    budget_seconds: float | None = None,
    budget_steps: int | None = None,
) -> BoundedEnumeration:
    """Standalone bounded enumeration of ``formula`` (optionally hashed)."""
    if pivot <= 0:
        raise ParameterError("pivot must be positive")
    if r < 1.0:
        raise ParameterError("tilt bound must be >= 1")
    if not 0.0 < wmax <= 1.0:
        raise ParameterError("wmax must be in (0,1]")
    instance = SolverInstance.from_formula(
        formula, model=model, window=window, rng=derive_rng(seed, "bws"), support=support
    )
    if hash_set is not None:
        instance.push_constraints(hash_set)
    deadline = time.monotonic() + budget_seconds if budget_seconds else None
    return _bws_on_instance(instance, model, pivot, r, wmax, budget_steps, deadline)


def _core_on_instance(
    instance: SolverInstance,
    model: WeightModel,
    pivot: float,
    r: float,
    wmax: float,
    rng,
    budget_seconds: float | None,
    budget_steps: int | None,
    retry_cap: int,
) -> tuple[CountEstimate, float]:
    """One randomized counting round on a prepared instance."""
    support = instance.support
    n_rows_max = len(support)
    calls_before = instance.solver_calls

    def run(w: float) -> BoundedEnumeration:
        deadline = time.monotonic() + budget_seconds if budget_seconds else None
        return _bws_on_instance(instance, model, pivot, r, w, budget_steps, deadline)

    def failed(iterations: int) -> tuple[CountEstimate, float]:
        calls = instance.solver_calls - calls_before
        return CountEstimate(None, wmax, 0, iterations, calls), wmax

    attempts = 0
    while True:
        try:
            enum = run(wmax)
            break
        except SolveBudgetError:
            attempts += 1
            if attempts > retry_cap:
                return failed(0)
    wmax = enum.new_wmax
    scaled = enum.w_total / wmax
    if scaled <= pivot:
        calls = instance.solver_calls - calls_before
        return CountEstimate(scaled, wmax, 1, 0, calls), wmax

    i = 0
    while True:
        i += 1
        attempts = 0
        while True:
            hs = sample_hash(support, i, rng)
            cp = instance.push_constraints(hs)
            try:
                enum = run(wmax)
            except SolveBudgetError:
                instance.pop_to(cp)
                attempts += 1
                if attempts > retry_cap:
                    return failed(i)
                continue  # retry at the same depth with a fresh hash
            instance.pop_to(cp)
            break
        wmax = enum.new_wmax
        scaled = enum.w_total / wmax
        if 0.0 < scaled <= pivot or i == n_rows_max:
            break
    calls = instance.solver_calls - calls_before
    if scaled > pivot or enum.w_total == 0.0:
        return CountEstimate(None, wmax, 0, i, calls), wmax
    # Scale the cell weight back up by the number of cells, 2^i.  The halved
    # variant sometimes quoted alongside a doubled pivot is a transcription
    # slip: the doubled pivot exists so that expected cell weight stays above
    # the concentration threshold pivot/2 for every i <= m, and only the 2^i
    # scaling makes the estimator unbiased (cell weight ~ w(R_F)/2^i).
    return CountEstimate(scaled * 2.0**i, wmax, 2**i, i, calls), wmax


def weightmc_core(
    formula: CnfFormula,
    model: WeightModel,
    support: Iterable[int] | None,
    pivot: float,
    r: float,
    wmax: float,
    rng,
    *,
    window: WeightWindow | None = None,
    budget_seconds: float | None = None,
    budget_steps: int | None = None,
    retry_cap: int = 3,
) -> tuple[CountEstimate, float]:
    """One counting round: (scaled estimate or None, refreshed wmax)."""
    if not 0.0 < wmax <= 1.0:
        raise ParameterError("wmax must be in (0,1]")
    instance = SolverInstance.from_formula(
        formula, model=model, window=window, rng=rng, support=support
    )
    return _core_on_instance(
        instance, model, pivot, r, wmax, rng, budget_seconds, budget_steps, retry_cap
    )


def _chain_layout(t: int, chains: int) -> list[range]:
    """Contiguous split of range(t) into at most `chains` non-empty blocks."""
    chains = min(chains, t)
    base, extra = divmod(t, chains)
    out = []
    start = 0
    for k in range(chains):
        size = base + (1 if k < extra else 0)
        out.append(range(start, start + size))
        start += size
    return out


def _run_chain(args) -> tuple[list[tuple[int, float | None, float]], float, int]:
    (
        num_vars,
        clause_ints,
        support,
        model,
        window,
        pivot,
        r,
        indices,
        seed,
        budget_seconds,
        budget_steps,
        retry_cap,
        deadline,
    ) = args
    wmax = 1.0
    results: list[tuple[int, float | None, float]] = []
    calls = 0
    for idx in indices:
        if deadline is not None and time.monotonic() > deadline:
            raise OverallTimeout("overall deadline expired during counting")
        rng = derive_rng(seed, "wmc-core", idx)
        instance = SolverInstance(
            num_vars, clause_ints, support, model=model, window=window, rng=rng
        )
        est, wmax = _core_on_instance(
            instance, model, pivot, r, wmax, rng, budget_seconds, budget_steps, retry_cap
        )
        calls += est.solver_calls
        results.append((idx, est.value, est.wmax_used))
    return results, wmax, calls


def weightmc(
    formula: CnfFormula,
    model: WeightModel,
    params: CountParams,
    support: Iterable[int] | None = None,
    *,
    window: WeightWindow | None = None,
    deadline: float | None = None,
) -> WeightMcResult:
    """Median-of-cores approximate weighted model count.

    Returns a value within a factor (1+epsilon) of the true weighted count
    with probability at least 1-delta, provided ``params.tilt_bound`` really
    bounds the tilt (the algorithm cannot verify that).  Raises
    ``CountFailure`` if every core iteration fails.
    """
    sup = frozenset(support) if support is not None else formula.independent_support
    pivot = compute_pivot(params.epsilon)
    t = compute_iterations(params.delta)
    if params.jobs > 1 and isinstance(model, BlackBoxWeights):
        raise ParameterError("black-box weight models must run with jobs=1")

    clause_ints = formula.clause_ints()
    chain_args = [
        (
            formula.num_vars,
            clause_ints,
            tuple(sorted(sup)),
            model,
            window,
            pivot,
            params.tilt_bound,
            tuple(indices),
            params.seed,
            params.budget_seconds,
            params.budget_steps,
            params.retry_cap,
            deadline,
        )
        for indices in _chain_layout(t, WMAX_CHAINS)
    ]

    if params.jobs > 1 and len(chain_args) > 1:
        with ProcessPoolExecutor(max_workers=min(params.jobs, len(chain_args))) as pool:
            chain_results = list(pool.map(_run_chain, chain_args))
    else:
        chain_results = [_run_chain(a) for a in chain_args]

    by_index: list[tuple[int, float | None, float]] = []
    final_wmax = 1.0
    solver_calls = 0
    for results, chain_wmax, calls in chain_results:
        by_index.extend(results)
        final_wmax = min(final_wmax, chain_wmax)
        solver_calls += calls
    by_index.sort(key=lambda item: item[0])
    estimates = [value * wmax_used for _, value, wmax_used in by_index if value is not None]
    if not estimates:
        raise CountFailure("all core iterations returned no estimate")
    value = statistics.median_low(estimates)
    return WeightMcResult(
        value=value,
        wmax=final_wmax,
        t=t,
        pivot=pivot,
        failed_cores=t - len(estimates),
        solver_calls=solver_calls,
    )


@dataclass(frozen=True)
class WindowReport:
    index: int
    low: float
    high: float
    estimate: float | None
    delta_prime: float
    solver_calls: int


@dataclass(frozen=True)
class PartitionedCount:
    value: float | None  # None when any window failed
    windows: tuple[WindowReport, ...]
    n_windows: int
    delta_prime: float


def window_bounds(high: float, m: int) -> tuple[float, float]:
    """The m-th dyadic window (high/2^m, high/2^(m-1)]."""
    return high / 2.0**m, high / 2.0 ** (m - 1)


def partitioned_weightmc(
    formula: CnfFormula,
    model: WeightModel,
    epsilon: float,
    delta: float,
    support: Iterable[int] | None = None,
    low: float = 0.0,
    high: float = 1.0,
    *,
    seed: int = 0,
    jobs: int = 1,
    budget_seconds: float | None = None,
    budget_steps: int | None = None,
    retry_cap: int = 3,
    deadline: float | None = None,
) -> PartitionedCount:
    """Sum of per-window counts over a dyadic partition of (low, high].

    Every window is counted with tilt bound 2, so the runtime depends on
    log(high/low) rather than the tilt itself.  Requires a literal-product
    weight model (the window constraint must evaluate partial assignments)
    and bounds with 0 < low <= w_min and w_max <= high.
    """
    if not isinstance(model, LiteralProductWeights):
        raise ParameterError(
            "partitioned counting requires white-box (literal-product) weights"
        )
    if not (0.0 < low < high):
        raise ParameterError(f"need 0 < L < H, got L={low}, H={high}")
    n_windows = math.ceil(math.log2(high / low)) + 1
    delta_prime = delta / n_windows

    windows: list[WindowReport] = []
    total = 0.0
    for m in range(1, n_windows + 1):
        w_low, w_high = window_bounds(high, m)
        params = CountParams(
            epsilon,
            delta_prime,
            2.0,
            seed=derive_seed(seed, "pwindow", m),
            budget_seconds=budget_seconds,
            budget_steps=budget_steps,
            retry_cap=retry_cap,
            jobs=jobs,
        )
        try:
            res = weightmc(
                formula,
                model,
                params,
                support,
                window=WeightWindow(w_low, w_high),
                deadline=deadline,
            )
        except CountFailure:
            windows.append(WindowReport(m, w_low, w_high, None, delta_prime, 0))
            return PartitionedCount(None, tuple(windows), n_windows, delta_prime)
        windows.append(
            WindowReport(m, w_low, w_high, res.value, delta_prime, res.solver_calls)
        )
        total += res.value
    return PartitionedCount(total, tuple(windows), n_windows, delta_prime)
