"""Bounded enumeration, hashed counting core, median counting, windows."""

import math
import random
import statistics

import pytest

from helpers import (
    brute_force_models,
    brute_force_weighted_count,
    cnf_with_solution_count,
    random_3cnf,
)
from tiltcount import (
    CnfFormula,
    CountFailure,
    CountParams,
    LiteralProductWeights,
    ParameterError,
    SolveBudgetError,
    SolverInstance,
    UniformWeights,
    bounded_weight_sat,
    exact_count,
    partitioned_weightmc,
    weightmc,
    weightmc_core,
)
from tiltcount.counting import WeightAccumulator, window_bounds

THREE_SOL = CnfFormula.build(2, [[1, 2]])
THREE_SOL_W = LiteralProductWeights({1: (0.6, 0.4), 2: (0.5, 0.5)})
UNSAT = CnfFormula.build(1, [[1], [-1]])


class TestAccumulator:
    def test_linear_small(self):
        acc = WeightAccumulator()
        for w in (0.1, 0.2, 0.3):
            acc.add(w, math.log(w))
        assert acc.total == pytest.approx(0.6)
        assert acc.log_total == pytest.approx(math.log(0.6))

    def test_log_space_across_huge_range(self):
        acc = WeightAccumulator()
        acc.add(1e-300, math.log(1e-300))
        acc.add(0.5, math.log(0.5))
        assert acc.total == pytest.approx(0.5)
        # and a pure-log case linear arithmetic cannot represent
        acc2 = WeightAccumulator()
        for _ in range(4):
            acc2.add(0.0, -800.0)  # linear underflow, log form carried
        assert acc2.log_total == pytest.approx(-800.0 + math.log(4))


class TestBoundedWeightSat:
    def test_enumerates_all_below_pivot(self):
        enum = bounded_weight_sat(
            THREE_SOL, THREE_SOL_W, None, pivot=46, r=1.5, wmax=0.3
        )
        assert len(enum.witnesses) == 3
        assert enum.w_total == pytest.approx(0.8)
        assert not enum.saturated
        # w_min seeded at 0.3/1.5 = 0.2, the true minimum; new bound 0.2*1.5
        assert enum.new_wmax == pytest.approx(0.3)

    def test_unsat_breaks_immediately(self):
        enum = bounded_weight_sat(UNSAT, UniformWeights(), None, 46, 2.0, 0.7)
        assert enum.witnesses == ()
        assert enum.w_total == 0.0
        assert not enum.saturated
        assert enum.new_wmax == pytest.approx(0.7)

    def test_saturation_exit(self):
        # uniform, r=1, wmax=1: after k witnesses the guard value is k
        f = CnfFormula.build(3, [])  # 8 models
        enum = bounded_weight_sat(f, UniformWeights(), None, pivot=2, r=1.0, wmax=1.0)
        assert enum.saturated
        assert len(enum.witnesses) == 3
        assert enum.w_total == pytest.approx(3.0)

    def test_distinct_projections(self):
        f = CnfFormula.build(4, [[1, 2]], support=[1, 2])
        # proper independent support fails here (free vars 3,4) -- but the
        # enumeration contract is one witness per support projection
        enum = bounded_weight_sat(f, UniformWeights(), None, 100, 1.0, 1.0, support=[1, 2])
        keys = {(y.value(1), y.value(2)) for y in enum.witnesses}
        assert len(keys) == len(enum.witnesses) == 3

    def test_budget_raises_distinct_outcome(self):
        f = CnfFormula.build(10, [])
        with pytest.raises(SolveBudgetError):
            bounded_weight_sat(
                f, UniformWeights(), None, 1e9, 1.0, 1.0, budget_steps=2
            )

    def test_blocking_scoped_to_call(self):
        inst_formula = CnfFormula.build(3, [[1, 2, 3]])
        model = UniformWeights()
        inst = SolverInstance.from_formula(inst_formula, model=model, rng=0)
        before = inst.dump_dimacs()
        from tiltcount.counting import _bws_on_instance

        _bws_on_instance(inst, model, 100.0, 1.0, 1.0, None, None)
        assert inst.dump_dimacs() == before

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            bounded_weight_sat(THREE_SOL, THREE_SOL_W, None, 0, 1.0, 1.0)
        with pytest.raises(ParameterError):
            bounded_weight_sat(THREE_SOL, THREE_SOL_W, None, 10, 0.5, 1.0)
        with pytest.raises(ParameterError):
            bounded_weight_sat(THREE_SOL, THREE_SOL_W, None, 10, 1.0, 0.0)


class TestCore:
    def test_fast_path_exact(self):
        # 3 uniform models, scaled total 3 <= pivot: exact scaled count
        f = CnfFormula.build(2, [[1, 2]])
        est, wmax = weightmc_core(
            f, UniformWeights(), None, 46, 1.0, 1.0, random.Random(0)
        )
        assert est.value == pytest.approx(3.0)
        assert est.iterations == 0
        assert est.cells == 1
        assert wmax == 1.0

    def test_unsat_returns_zero(self):
        est, wmax = weightmc_core(
            UNSAT, UniformWeights(), None, 46, 1.0, 1.0, random.Random(0)
        )
        assert est.value == 0.0
        assert wmax == 1.0

    def test_hashed_median_near_truth(self):
        # 2^10 models on the support; exact scaled count 1024
        f = CnfFormula.build(10, [])
        vals = []
        for s in range(200):
            est, _ = weightmc_core(
                f, UniformWeights(), None, 46, 1.0, 1.0, random.Random(4000 + s)
            )
            if est.value is not None:
                vals.append(est.value)
        assert len(vals) >= 150
        med = statistics.median_low(vals)
        assert 1024 / 1.8 <= med <= 1024 * 1.8

    def test_wmax_never_increases(self):
        rng = random.Random(3)
        f = cnf_with_solution_count(rng, 10, 80, 300)
        m = LiteralProductWeights({1: (0.7, 0.3), 2: (0.6, 0.4)})
        # tilt of this model is (0.7*0.6)/(0.3*0.4) = 3.5; r must dominate it
        r = 4.0
        ws = [m.weight(y) for y in brute_force_models(10, f.clause_ints())]
        wmax = 1.0
        for k in range(12):
            est, new_wmax = weightmc_core(f, m, None, 46, r, wmax, random.Random(k))
            assert new_wmax <= wmax * (1 + 1e-12)
            assert new_wmax >= max(ws) - 1e-12
            wmax = new_wmax

    def test_budget_exhaustion_returns_bot(self):
        f = CnfFormula.build(10, [])
        est, _ = weightmc_core(
            f,
            UniformWeights(),
            None,
            46,
            1.0,
            1.0,
            random.Random(0),
            budget_steps=2,
            retry_cap=1,
        )
        assert est.value is None


class TestWeightMc:
    def test_exact_fast_path_instance(self):
        res = weightmc(THREE_SOL, THREE_SOL_W, CountParams(0.8, 0.2, 1.5, seed=9))
        assert res.value == pytest.approx(0.8)
        assert res.t == 137
        assert res.pivot == 46
        assert res.failed_cores == 0

    def test_unsat_counts_zero(self):
        res = weightmc(UNSAT, UniformWeights(), CountParams(0.8, 0.2, 1.0, seed=1))
        assert res.value == 0.0

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            CountParams(1.5, 0.2, 3.0)
        with pytest.raises(ParameterError):
            CountParams(0.8, 0.0, 3.0)
        with pytest.raises(ParameterError):
            CountParams(0.8, 0.2, 0.9)

    def test_all_cores_failing_is_loud(self):
        f = CnfFormula.build(12, [])
        params = CountParams(
            0.8, 0.5, 1.0, seed=2, budget_steps=2, retry_cap=0
        )
        with pytest.raises(CountFailure):
            weightmc(f, UniformWeights(), params)

    def test_seeded_determinism_and_jobs_invariance(self):
        rng = random.Random(8)
        f = cnf_with_solution_count(rng, 11, 120, 400)
        m = UniformWeights()
        a = weightmc(f, m, CountParams(0.8, 0.4, 1.0, seed=5, jobs=1))
        b = weightmc(f, m, CountParams(0.8, 0.4, 1.0, seed=5, jobs=1))
        c = weightmc(f, m, CountParams(0.8, 0.4, 1.0, seed=5, jobs=2))
        assert a == b == c
        d = weightmc(f, m, CountParams(0.8, 0.4, 1.0, seed=6))
        assert d.value > 0

    def test_single_instance_coverage(self):
        rng = random.Random(12)
        f = cnf_with_solution_count(rng, 11, 120, 400)
        m = UniformWeights()
        truth = len(brute_force_models(11, f.clause_ints()))
        hits = 0
        runs = 25
        for s in range(runs):
            res = weightmc(f, m, CountParams(0.8, 0.2, 1.0, seed=100 + s))
            if truth / 1.8 <= res.value <= truth * 1.8:
                hits += 1
        assert hits >= 0.8 * runs


class TestPartitioned:
    def test_window_bounds_are_dyadic(self):
        low, high = window_bounds(1.0, 1)
        assert (low, high) == (0.5, 1.0)
        low, high = window_bounds(1.0, 3)
        assert (low, high) == (0.125, 0.25)

    def test_partition_covers_each_solution_once(self):
        rng = random.Random(5)
        f = cnf_with_solution_count(rng, 9, 40, 200)
        m = LiteralProductWeights(
            {v: (p, 1 - p) for v, p in ((1, 0.8), (2, 0.65), (3, 0.3), (4, 0.55))}
        )
        models = brute_force_models(9, f.clause_ints())
        ws = [m.weight(y) for y in models]
        high = max(ws)
        low = min(ws) * 0.999
        n_windows = math.ceil(math.log2(high / low)) + 1
        for w in ws:
            containing = [
                mth
                for mth in range(1, n_windows + 1)
                if window_bounds(high, mth)[0] < w <= window_bounds(high, mth)[1]
            ]
            assert len(containing) == 1

    def test_two_window_case(self):
        # H = 2L gives N = 2 windows (H/2, H] and (H/4, H/2]
        f = CnfFormula.build(2, [[1, 2]])
        res = partitioned_weightmc(
            THREE_SOL, THREE_SOL_W, 0.8, 0.2, low=0.15, high=0.3, seed=3
        )
        assert res.n_windows == 2
        assert res.windows[0].low == pytest.approx(0.15)
        assert res.windows[0].high == pytest.approx(0.3)
        # exact weighted count of the instance is 0.8
        assert res.value == pytest.approx(0.8, rel=0.8)

    def test_requires_white_box(self):
        with pytest.raises(ParameterError, match="white-box"):
            partitioned_weightmc(
                THREE_SOL, UniformWeights(), 0.8, 0.2, low=0.1, high=1.0
            )

    def test_bad_bounds(self):
        with pytest.raises(ParameterError):
            partitioned_weightmc(
                THREE_SOL, THREE_SOL_W, 0.8, 0.2, low=1.0, high=0.5
            )
        with pytest.raises(ParameterError):
            partitioned_weightmc(
                THREE_SOL, THREE_SOL_W, 0.8, 0.2, low=0.0, high=0.5
            )

    def test_matches_exact_count(self):
        rng = random.Random(23)
        f = cnf_with_solution_count(rng, 9, 60, 250)
        m = LiteralProductWeights({1: (0.75, 0.25), 2: (0.7, 0.3), 3: (0.6, 0.4)})
        truth = brute_force_weighted_count(9, f.clause_ints(), m)
        res = partitioned_weightmc(
            f, m, 0.8, 0.2, low=2**-6, high=1.0, seed=77
        )
        assert res.value is not None
        assert truth / 1.8 <= res.value <= truth * 1.8
        assert res.n_windows == 7
        # window estimates sum to the total
        est_sum = sum(w.estimate for w in res.windows)
        assert est_sum == pytest.approx(res.value)


class TestSupportEquivalence:
    def test_proper_support_matches_full_support(self):
        # x3 defined by x1 xor x2 through CNF clauses; S = {1,2}
        clauses = [
            [-1, -2, -3],
            [1, 2, -3],
            [1, -2, 3],
            [-1, 2, 3],
            [1, 2],  # keep it nontrivial
        ]
        f_s = CnfFormula.build(3, clauses, support=[1, 2])
        f_x = CnfFormula.build(3, clauses)
        m = LiteralProductWeights({1: (0.7, 0.3), 3: (0.6, 0.4)})
        truth = brute_force_weighted_count(3, f_s.clause_ints(), m)
        for seed in range(5):
            a = weightmc(f_s, m, CountParams(0.8, 0.3, 3.0, seed=seed))
            b = weightmc(f_x, m, CountParams(0.8, 0.3, 3.0, seed=seed))
            assert a.value == pytest.approx(truth, rel=0.8)
            assert b.value == pytest.approx(truth, rel=0.8)
