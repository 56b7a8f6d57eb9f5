"""Command-line front end: count, sample, pcount, genbench, exact.

Results go to stdout and are byte-identical for a fixed --seed regardless
of --jobs; wall-clock timing goes to stderr unless --timing asks for it in
the result payload.  Exit codes: 0 ok, 2 input parse error, 3 bad
parameters, 4 failure (no estimate / failed verification / oracle cap),
5 overall timeout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .counting import (
    CountFailure,
    CountParams,
    OverallTimeout,
    ParameterError,
    partitioned_weightmc,
    weightmc,
)
from .formula import (
    CnfFormula,
    FormulaError,
    LiteralProductWeights,
    UniformWeights,
    WeightModel,
    evaluate,
    parse_weighted_dimacs,
    projection_key,
    serialize_weighted_dimacs,
)
from .oracle import OracleError, exact_count
from .sampling import SamplerState, make_sampler_state, weightgen
from .satengine import SolverError
from .seeds import derive_rng, derive_seed

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PARAMS = 3
EXIT_FAILURE = 4
EXIT_TIMEOUT = 5


def _read_input(path: str) -> tuple[CnfFormula, WeightModel]:
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise FormulaError(f"cannot read {path}: {exc}") from exc
    return parse_weighted_dimacs(text)


def _read_support_override(path: str, formula: CnfFormula) -> frozenset[int]:
    try:
        tokens = Path(path).read_text().split()
    except OSError as exc:
        raise FormulaError(f"cannot read support file {path}: {exc}") from exc
    vals = []
    for tok in tokens:
        if tok in ("c", "ind"):
            continue
        try:
            v = int(tok)
        except ValueError as exc:
            raise FormulaError(f"bad token {tok!r} in support file") from exc
        if v != 0:
            vals.append(v)
    support = frozenset(vals)
    if not support:
        raise FormulaError("support override file names no variables")
    bad = [v for v in support if not 1 <= v <= formula.num_vars]
    if bad:
        raise FormulaError(f"support override variables out of range: {sorted(bad)}")
    return support


def _fmt(x: float | None) -> str:
    if x is None:
        return "-inf"
    return repr(x)


def _log2_or_none(x: float) -> float | None:
    return math.log2(x) if x > 0 else None


def _emit(payload: dict, human_lines: list[str], args) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _deadline(args) -> float | None:
    if args.timeout is None:
        return None
    return time.monotonic() + args.timeout


# ---------------------------------------------------------------------------
# count


def cmd_count(args) -> int:
    formula, model = _read_input(args.file)
    support = (
        _read_support_override(args.support, formula) if args.support else None
    )
    params = CountParams(
        epsilon=args.epsilon,
        delta=args.delta,
        tilt_bound=args.tilt,
        seed=args.seed,
        budget_seconds=args.budget_seconds,
        budget_steps=args.budget_steps,
        jobs=args.jobs,
    )
    start = time.monotonic()
    result = weightmc(formula, model, params, support, deadline=_deadline(args))
    wall = time.monotonic() - start
    payload = {
        "command": "count",
        "file": args.file,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "r": args.tilt,
        "seed": args.seed,
        "count": result.value,
        "count_log2": _log2_or_none(result.value),
        "wmax": result.wmax,
        "pivot": result.pivot,
        "t": result.t,
        "failed_cores": result.failed_cores,
        "solver_calls": result.solver_calls,
    }
    lines = [
        f"count: {_fmt(result.value)}",
        f"count_log2: {_fmt(_log2_or_none(result.value))}",
        f"wmax: {_fmt(result.wmax)}",
        f"pivot: {result.pivot}",
        f"t: {result.t}",
        f"failed_cores: {result.failed_cores}",
        f"solver_calls: {result.solver_calls}",
    ]
    if args.timing:
        payload["wall_time_s"] = wall
        lines.append(f"wall_time_s: {wall!r}")
    else:
        print(f"wall time: {wall:.3f}s", file=sys.stderr)
    _emit(payload, lines, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample


def _sample_worker(work) -> tuple[int, tuple[int, ...] | None]:
    state, seed, index, budget_seconds, budget_steps = work
    outcome = weightgen(
        state.formula,
        state.model,
        state.epsilon,
        state.r,
        state.support,
        rng=derive_rng(seed, "sample", index),
        state=state,
        budget_seconds=budget_seconds,
        budget_steps=budget_steps,
    )
    if outcome.witness is None:
        return index, None
    return index, outcome.witness.to_ints()


def cmd_sample(args) -> int:
    if args.samples < 1:
        raise ParameterError("--samples must be >= 1")
    formula, model = _read_input(args.file)
    support = (
        _read_support_override(args.support, formula) if args.support else None
    )
    deadline = _deadline(args)
    start = time.monotonic()
    state = make_sampler_state(
        formula,
        model,
        args.epsilon,
        args.tilt,
        support,
        seed=args.seed,
        jobs=args.jobs,
        budget_seconds=args.budget_seconds,
        budget_steps=args.budget_steps,
        deadline=deadline,
    )
    work = [
        (state, args.seed, i, args.budget_seconds, args.budget_steps)
        for i in range(args.samples)
    ]
    results: list[tuple[int, tuple[int, ...] | None]] = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for item in pool.map(_sample_worker, work):
                results.append(item)
                if deadline is not None and time.monotonic() > deadline:
                    raise OverallTimeout("overall deadline expired while sampling")
    else:
        for w in work:
            if deadline is not None and time.monotonic() > deadline:
                raise OverallTimeout("overall deadline expired while sampling")
            results.append(_sample_worker(w))
    results.sort(key=lambda kv: kv[0])
    wall = time.monotonic() - start

    successes = sum(1 for _, lits in results if lits is not None)
    payload = {
        "command": "sample",
        "file": args.file,
        "epsilon": args.epsilon,
        "r": args.tilt,
        "seed": args.seed,
        "samples": [list(lits) if lits is not None else None for _, lits in results],
        "successes": successes,
        "requested": args.samples,
        "count_estimate": state.count,
        "wmax": state.wmax,
        "q": state.q,
    }
    lines = []
    for index, lits in results:
        if lits is None:
            lines.append(f"c sample {index} failed")
        else:
            lines.append(" ".join(str(l) for l in lits) + " 0")
    lines.append(f"c successes {successes}/{args.samples}")
    if args.timing:
        payload["wall_time_s"] = wall
        lines.append(f"c wall_time_s {wall!r}")
    else:
        print(f"wall time: {wall:.3f}s", file=sys.stderr)
    _emit(payload, lines, args)
    return EXIT_OK if successes > 0 else EXIT_FAILURE


# ---------------------------------------------------------------------------
# pcount


def cmd_pcount(args) -> int:
    formula, model = _read_input(args.file)
    support = (
        _read_support_override(args.support, formula) if args.support else None
    )
    start = time.monotonic()
    result = partitioned_weightmc(
        formula,
        model,
        args.epsilon,
        args.delta,
        support,
        low=args.low,
        high=args.high,
        seed=args.seed,
        jobs=args.jobs,
        budget_seconds=args.budget_seconds,
        budget_steps=args.budget_steps,
        deadline=_deadline(args),
    )
    wall = time.monotonic() - start
    payload = {
        "command": "pcount",
        "file": args.file,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "low": args.low,
        "high": args.high,
        "seed": args.seed,
        "windows": result.n_windows,
        "delta_prime": result.delta_prime,
        "count": result.value,
        "count_log2": _log2_or_none(result.value) if result.value else None,
        "window_reports": [
            {
                "m": w.index,
                "low": w.low,
                "high": w.high,
                "estimate": w.estimate,
                "solver_calls": w.solver_calls,
            }
            for w in result.windows
        ],
    }
    lines = [
        f"windows: {result.n_windows}",
        f"delta_prime: {result.delta_prime!r}",
    ]
    for w in result.windows:
        est = "FAILED" if w.estimate is None else repr(w.estimate)
        lines.append(f"window {w.index}: ({w.low!r}, {w.high!r}] estimate: {est}")
    lines.append(f"count: {_fmt(result.value)}")
    lines.append(
        f"count_log2: {_fmt(_log2_or_none(result.value) if result.value else None)}"
    )
    if args.timing:
        payload["wall_time_s"] = wall
        lines.append(f"wall_time_s: {wall!r}")
    else:
        print(f"wall time: {wall:.3f}s", file=sys.stderr)
    _emit(payload, lines, args)
    return EXIT_OK if result.value is not None else EXIT_FAILURE


# ---------------------------------------------------------------------------
# genbench


def benchmark_weights(num_vars: int, r: float, rng) -> LiteralProductWeights:
    """Weight max(15, ceil(n/100)) random variables so the tilt is at most r.

    Each chosen variable gets positive-literal weight w with
    (w/(1-w))^m = r, its negation 1-w; all other literals weigh 1.  The
    count of weighted variables is clamped to n for tiny formulas.
    """
    if r < 1.0:
        raise ParameterError(f"tilt target must be >= 1, got {r}")
    m = min(num_vars, max(15, math.ceil(num_vars / 100)))
    chosen = sorted(rng.sample(range(1, num_vars + 1), m))
    root = r ** (1.0 / m)
    p = root / (1.0 + root)
    return LiteralProductWeights({v: (p, 1.0 - p) for v in chosen})


def cmd_genbench(args) -> int:
    formula, model = _read_input(args.file)
    if not isinstance(model, UniformWeights):
        print("c input already carries weights; they are replaced", file=sys.stderr)
    rng = derive_rng(args.seed, "genbench")
    weights = benchmark_weights(formula.num_vars, args.tilt, rng)
    text = serialize_weighted_dimacs(formula, weights)
    if args.output:
        Path(args.output).write_text(text)
    first_var = sorted(weights.pairs)[0]
    payload = {
        "command": "genbench",
        "file": args.file,
        "r": args.tilt,
        "seed": args.seed,
        "m": len(weights.pairs),
        "p": weights.pairs[first_var][0],
        "weighted_vars": sorted(weights.pairs),
        "dimacs": text,
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif not args.output:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# exact


def _verify_witness_file(path: str, formula: CnfFormula) -> tuple[int, str | None]:
    """Check every model line; returns (count, error message or None)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormulaError(f"cannot read witness file {path}: {exc}") from exc
    from .formula import Assignment

    n_checked = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        toks = line.split()
        try:
            lits = [int(t) for t in toks]
        except ValueError:
            return n_checked, f"line {lineno}: non-integer token"
        if lits and lits[-1] == 0:
            lits = lits[:-1]
        try:
            sigma = Assignment.from_ints(formula.num_vars, lits)
        except FormulaError as exc:
            return n_checked, f"line {lineno}: {exc}"
        for ci, clause in enumerate(formula.clauses, 1):
            if not clause.satisfied_by(sigma):
                lits_str = " ".join(str(l) for l in clause.to_ints())
                return (
                    n_checked,
                    f"line {lineno}: clause {ci} ({lits_str}) is not satisfied",
                )
        n_checked += 1
    return n_checked, None


def cmd_exact(args) -> int:
    formula, model = _read_input(args.file)
    support = (
        _read_support_override(args.support, formula) if args.support else None
    )
    if args.verify:
        n_checked, err = _verify_witness_file(args.verify, formula)
        if err is not None:
            print(f"verification failed: {err}")
            return EXIT_FAILURE
        print(f"verified {n_checked} witnesses")
        return EXIT_OK
    start = time.monotonic()
    result = exact_count(
        formula,
        model,
        support,
        max_solutions=args.max_solutions,
        seed=args.seed,
    )
    wall = time.monotonic() - start
    sup = support if support is not None else formula.independent_support
    payload = {
        "command": "exact",
        "file": args.file,
        "count": result.exact_count,
        "count_log2": _log2_or_none(result.exact_count),
        "wmin": result.wmin,
        "wmax": result.wmax,
        "tilt": result.tilt,
        "solutions": result.n_solutions,
    }
    lines = [
        f"count: {_fmt(result.exact_count)}",
        f"count_log2: {_fmt(_log2_or_none(result.exact_count))}",
        f"wmin: {_fmt(result.wmin)}",
        f"wmax: {_fmt(result.wmax)}",
        f"tilt: {_fmt(result.tilt)}",
        f"solutions: {result.n_solutions}",
    ]
    if args.dump_solutions:
        if result.solutions is None:
            raise OracleError("solution list exceeds the storage cap")
        dump = []
        for y, w in result.solutions:
            key = " ".join(str(l) for l in projection_key(y, sup))
            dump.append(f"{key} 0 weight {w!r}")
        payload["solution_dump"] = dump
        lines.extend(dump)
    if args.timing:
        payload["wall_time_s"] = wall
        lines.append(f"wall_time_s: {wall!r}")
    else:
        print(f"wall time: {wall:.3f}s", file=sys.stderr)
    _emit(payload, lines, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltcount",
        description=(
            "Approximate weighted model counting and weighted sampling of CNF "
            "formulas via random parity-constraint hashing."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="master random seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument(
        "--timing", action="store_true", help="include wall time in the result payload"
    )
    common.add_argument(
        "--budget-seconds",
        type=float,
        default=2500.0,
        help="per-enumeration solver budget in seconds",
    )
    common.add_argument(
        "--budget-steps", type=int, default=None, help="per-solve propagation budget"
    )
    common.add_argument(
        "--timeout", type=float, default=72000.0, help="overall timeout in seconds"
    )
    common.add_argument(
        "-S", "--support", metavar="FILE", help="independent-support override file"
    )

    p = sub.add_parser("count", parents=[common], help="approximate weighted count")
    p.add_argument("-e", "--epsilon", type=float, default=0.8)
    p.add_argument("-d", "--delta", type=float, default=0.2)
    p.add_argument("-r", "--tilt", type=float, default=3.0, help="tilt upper bound")
    p.add_argument("file")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("sample", parents=[common], help="weighted-uniform samples")
    p.add_argument("-e", "--epsilon", type=float, default=5.0)
    p.add_argument("-r", "--tilt", type=float, default=3.0, help="tilt upper bound")
    p.add_argument("-n", "--samples", type=int, default=1)
    p.add_argument("file")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser(
        "pcount", parents=[common], help="partitioned count for large tilt"
    )
    p.add_argument("-e", "--epsilon", type=float, default=0.8)
    p.add_argument("-d", "--delta", type=float, default=0.2)
    p.add_argument("-L", "--low", type=float, required=True, help="weight lower bound")
    p.add_argument("-H", "--high", type=float, required=True, help="weight upper bound")
    p.add_argument("file")
    p.set_defaults(func=cmd_pcount)

    p = sub.add_parser(
        "genbench", parents=[common], help="attach benchmark weights to a CNF"
    )
    p.add_argument("-r", "--tilt", type=float, default=3.0, help="tilt target")
    p.add_argument("-o", "--output", help="write the weighted file here")
    p.add_argument("file")
    p.set_defaults(func=cmd_genbench)

    p = sub.add_parser("exact", parents=[common], help="exact count by enumeration")
    p.add_argument("--dump-solutions", action="store_true")
    p.add_argument("--verify", metavar="WITNESS_FILE", help="check witnesses against F")
    p.add_argument(
        "--max-solutions", type=int, default=2**22, help="oracle enumeration cap"
    )
    p.add_argument("file")
    p.set_defaults(func=cmd_exact)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormulaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ParameterError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except OverallTimeout as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (CountFailure, OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
