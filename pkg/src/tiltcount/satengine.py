"""CNF+XOR satisfiability with blocking clauses and weight windows.

The engine is a chronological DPLL: watched-literal unit propagation on the
CNF part, parity propagation on XOR rows kept in reduced row-echelon form
(rows are bitmasks, so elimination is integer xor), and optional
branch-and-bound pruning against a weight window for literal-product weight
models.  Branching picks the lowest-index unassigned variable with a random
polarity from the instance's seeded stream, so runs are reproducible.

Constraints can be pushed and popped in LIFO scopes; blocking clauses added
inside a scope disappear when it is popped.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .formula import (
    Assignment,
    CnfFormula,
    LiteralProductWeights,
    WeightModel,
)
from .xorhash import HashConstraintSet, XorConstraint

__all__ = [
    "SolverError",
    "SolveStatus",
    "SolveResult",
    "WeightWindow",
    "Budget",
    "Checkpoint",
    "SolverInstance",
]

# Relative slack for window comparisons in log space; keeps the half-open
# dyadic windows an exact partition despite float rounding of weight sums.
WINDOW_LOG_EPS = 1e-12


class SolverError(RuntimeError):
    """Misuse of the solver API (bad clause, stale checkpoint, ...)."""


class SolveStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    BUDGET_EXCEEDED = "budget-exceeded"


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    assignment: Assignment | None = None

    @property
    def is_sat(self) -> bool:
        return self.status is SolveStatus.SAT


@dataclass(frozen=True)
class WeightWindow:
    """Half-open weight interval (low, high]; low exclusive, high inclusive."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.low < self.high):
            raise SolverError(f"invalid weight window ({self.low}, {self.high}]")

    def contains(self, w: float) -> bool:
        log_w = math.log(w)
        log_low = math.log(self.low) if self.low > 0 else -math.inf
        return log_low + WINDOW_LOG_EPS < log_w <= math.log(self.high) + WINDOW_LOG_EPS


@dataclass(frozen=True)
class Budget:
    """Per-solve limits; `deadline` is an absolute time.monotonic() value."""

    max_steps: int | None = None
    deadline: float | None = None

    @classmethod
    def of(
        cls, seconds: float | None = None, steps: int | None = None
    ) -> "Budget | None":
        if seconds is None and steps is None:
            return None
        deadline = time.monotonic() + seconds if seconds is not None else None
        return cls(max_steps=steps, deadline=deadline)


@dataclass(frozen=True)
class Checkpoint:
    owner_id: int
    serial: int
    n_clauses: int
    n_rows: int
    n_blocked: int


class SolverInstance:
    """Mutable solver state for one CNF(+XOR)(+window) instance.

    Not thread-safe; clone per worker for concurrent use.
    """

    def __init__(
        self,
        num_vars: int,
        clause_ints: Iterable[Sequence[int]] = (),
        support: Iterable[int] | None = None,
        model: WeightModel | None = None,
        window: WeightWindow | None = None,
        rng: random.Random | int = 0,
    ):
        if num_vars < 1:
            raise SolverError("instance needs at least one variable")
        self.n = num_vars
        self.support = (
            frozenset(support) if support is not None else frozenset(range(1, num_vars + 1))
        )
        if not self.support or not all(1 <= v <= num_vars for v in self.support):
            raise SolverError("support must be a non-empty subset of 1..n")
        self._support_sorted = tuple(sorted(self.support))
        self.model = model
        self.window = window
        self._rng = rng if isinstance(rng, random.Random) else random.Random(rng)

        self._clauses: list[list[int]] = []
        self._watches: list[list[int]] = [[] for _ in range(2 * num_vars + 2)]
        self._units: list[tuple[int, int]] = []  # (clause index, literal)
        for c in clause_ints:
            self.add_clause(c)

        # Blocked support projections, as true-variable bitmasks.  A blocking
        # clause spans the whole support and can only bite at a leaf of the
        # search, so a hash-set check there replaces an O(|S|) clause in the
        # propagation hot path; behavior is identical to conjoining the
        # clause of falsified literals.
        self._smask = 0
        for v in self.support:
            self._smask |= 1 << v
        self._blocked_list: list[int] = []
        self._blocked: set[int] = set()

        self._xor_rows: list[tuple[int, int]] = []  # (var bitmask, parity bit)
        self._elim_rows: list[tuple[int, int]] = []
        self._xor_unsat = False
        self._dirty = False

        self._stack: list[Checkpoint] = []
        self._serial = 0
        self.solver_calls = 0
        self.propagation_steps = 0

        if window is not None:
            if not isinstance(model, LiteralProductWeights):
                raise SolverError(
                    "weight windows require a literal-product weight model"
                )
            self._init_window(model, window)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_formula(
        cls,
        formula: CnfFormula,
        model: WeightModel | None = None,
        window: WeightWindow | None = None,
        rng: random.Random | int = 0,
        support: Iterable[int] | None = None,
    ) -> "SolverInstance":
        return cls(
            formula.num_vars,
            formula.clause_ints(),
            support if support is not None else formula.independent_support,
            model=model,
            window=window,
            rng=rng,
        )

    def _init_window(self, model: LiteralProductWeights, window: WeightWindow) -> None:
        n = self.n
        logp = [0.0] * (n + 1)
        logn = [0.0] * (n + 1)
        maxlog = [0.0] * (n + 1)
        minlog = [0.0] * (n + 1)
        wmask = 0
        tot_opt = 0.0
        tot_pes = 0.0
        for v, (p, q) in model.pairs.items():
            if v > n:
                raise SolverError(f"weighted variable {v} out of range")
            lp, ln = math.log(p), math.log(q)
            logp[v], logn[v] = lp, ln
            maxlog[v] = lp if lp > ln else ln
            minlog[v] = ln if lp > ln else lp
            tot_opt += maxlog[v]
            tot_pes += minlog[v]
            wmask |= 1 << v
        self._logp, self._logn = logp, logn
        self._maxlog, self._minlog = maxlog, minlog
        self._wmask = wmask
        self._tot_opt, self._tot_pes = tot_opt, tot_pes
        self._log_low_eps = (
            math.log(window.low) + WINDOW_LOG_EPS if window.low > 0 else -math.inf
        )
        self._log_high_eps = math.log(window.high) + WINDOW_LOG_EPS

    # -- constraint management ----------------------------------------------

    def add_clause(self, lits: Sequence[int]) -> None:
        # Literals are ordered by descending variable index so the watched
        # slots hold the variables branched on last; under lowest-index-first
        # branching this keeps long blocking clauses out of the propagation
        # hot path until the bottom of the tree.
        lits = sorted(lits, key=lambda l: -abs(l))
        if not lits:
            raise SolverError("empty clause")
        seen = set()
        for l in lits:
            v = abs(l)
            if not 1 <= v <= self.n:
                raise SolverError(f"literal {l} out of range (n={self.n})")
            if v in seen:
                raise SolverError(f"variable {v} repeated in clause")
            seen.add(v)
        ci = len(self._clauses)
        self._clauses.append(lits)
        if len(lits) == 1:
            self._units.append((ci, lits[0]))
        else:
            self._watches[self._code(lits[0])].append(ci)
            self._watches[self._code(lits[1])].append(ci)

    @staticmethod
    def _code(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def add_blocking_clause(self, sigma_s: Mapping[int, bool]) -> None:
        """Exclude every future witness agreeing with sigma_s on the support."""
        if set(sigma_s) != self.support:
            raise SolverError("blocking assignment must cover the support exactly")
        mask = 0
        for v, val in sigma_s.items():
            if val:
                mask |= 1 << v
        self._blocked_list.append(mask)
        self._blocked.add(mask)

    def add_xor_row(self, vars: Iterable[int], parity: bool) -> None:
        mask = 0
        for v in vars:
            if v not in self.support:
                raise SolverError(f"xor row variable {v} outside the support")
            mask |= 1 << v
        self._xor_rows.append((mask, 1 if parity else 0))
        self._dirty = True

    def checkpoint(self) -> Checkpoint:
        self._serial += 1
        cp = Checkpoint(
            id(self),
            self._serial,
            len(self._clauses),
            len(self._xor_rows),
            len(self._blocked_list),
        )
        self._stack.append(cp)
        return cp

    def push_constraints(
        self, hs: HashConstraintSet | Sequence[XorConstraint]
    ) -> Checkpoint:
        cp = self.checkpoint()
        rows = hs.rows if isinstance(hs, HashConstraintSet) else hs
        for row in rows:
            self.add_xor_row(row.vars, row.parity)
        return cp

    def pop_to(self, cp: Checkpoint) -> None:
        if cp.owner_id != id(self):
            raise SolverError("checkpoint belongs to a different instance")
        idx = None
        for i, open_cp in enumerate(self._stack):
            if open_cp.serial == cp.serial:
                idx = i
                break
        if idx is None:
            raise SolverError("stale checkpoint (already popped)")
        keep = cp.n_clauses
        if len(self._clauses) > keep:
            del self._clauses[keep:]
            for wl in self._watches:
                wl[:] = [ci for ci in wl if ci < keep]
            self._units = [(ci, l) for ci, l in self._units if ci < keep]
        if len(self._blocked_list) > cp.n_blocked:
            del self._blocked_list[cp.n_blocked:]
            self._blocked = set(self._blocked_list)
        if len(self._xor_rows) > cp.n_rows:
            del self._xor_rows[cp.n_rows:]
            self._dirty = True
        del self._stack[idx:]

    def clone(self, rng: random.Random | int | None = None) -> "SolverInstance":
        """Copy of the current constraint state with its own search stream."""
        if rng is None:
            rng = random.Random()
            rng.setstate(self._rng.getstate())
        inst = SolverInstance(
            self.n,
            [list(c) for c in self._clauses],
            self.support,
            model=self.model,
            window=self.window,
            rng=rng,
        )
        inst._xor_rows = list(self._xor_rows)
        inst._dirty = bool(self._xor_rows)
        inst._blocked_list = list(self._blocked_list)
        inst._blocked = set(self._blocked)
        return inst

    # -- xor elimination -----------------------------------------------------

    def _eliminate(self) -> None:
        """Reduce xor rows to RREF; detects 0 = 1 contradictions."""
        elim: list[list[int]] = []
        unsat = False
        for mask, par in self._xor_rows:
            m, p = mask, par
            for row in elim:
                if m & (row[0] & -row[0]):
                    m ^= row[0]
                    p ^= row[1]
            if m == 0:
                if p:
                    unsat = True
                    break
                continue
            pivot = m & -m
            for row in elim:
                if row[0] & pivot:
                    row[0] ^= m
                    row[1] ^= p
            elim.append([m, p])
        self._elim_rows = [(m, p) for m, p in elim]
        self._xor_unsat = unsat
        self._dirty = False

    def eliminated_rows(self) -> tuple[tuple[int, int], ...]:
        if self._dirty:
            self._eliminate()
        return tuple(self._elim_rows)

    # -- solving ---------------------------------------------------------------

    def solve(self, budget: Budget | None = None) -> SolveResult:
        """Find a witness satisfying clauses, xor rows and the window."""
        self.solver_calls += 1
        if self._dirty:
            self._eliminate()
        if self._xor_unsat:
            return SolveResult(SolveStatus.UNSAT)
        status, model_bits = self._search(budget)
        if status is SolveStatus.SAT:
            return SolveResult(status, Assignment(model_bits))
        return SolveResult(status)

    def _search(self, budget: Budget | None):
        # Hot loop.  Truth values are indexed by signed literal (negative
        # indices wrap to the upper half of the array), so satisfied /
        # falsified / unassigned tests are a single subscript.  Variable
        # bitmasks are maintained only when xor rows are present.
        n = self.n
        clauses = self._clauses
        watches = self._watches
        rows = self._elim_rows
        getrandbits = self._rng.getrandbits
        max_steps = budget.max_steps if budget is not None else None
        deadline = budget.deadline if budget is not None else None
        tick = 2048  # deadline poll interval in steps

        tv = [0] * (2 * n + 2)  # tv[lit]: 1 true, -1 false, 0 unassigned
        trail: list[int] = []
        trail_append = trail.append
        qhead = 0
        nt = 0  # len(trail)
        dec_pos: list[int] = []
        dec_lit: list[int] = []
        dec_flipped: list[bool] = []
        track = bool(rows)  # bitmask upkeep needed for parity propagation
        assigned_mask = 0
        true_mask = 0
        steps = 0
        smask = self._smask
        blocked = self._blocked
        support_sorted = self._support_sorted

        has_window = self.window is not None
        if has_window:
            wmask = self._wmask
            logp, logn = self._logp, self._logn
            maxlog, minlog = self._maxlog, self._minlog
            llow, lhigh = self._log_low_eps, self._log_high_eps
            cur = 0.0
            rem_opt, rem_pes = self._tot_opt, self._tot_pes
            wstack: list[tuple[float, float, float]] = []
        else:
            wmask = 0

        # root units
        for _, lit in self._units:
            val = tv[lit]
            if val == 0:
                tv[lit] = 1
                tv[-lit] = -1
                trail_append(lit)
                nt += 1
                v = lit if lit > 0 else -lit
                if track:
                    bit = 1 << v
                    assigned_mask |= bit
                    if lit > 0:
                        true_mask |= bit
                if (wmask >> v) & 1:
                    wstack.append((cur, rem_opt, rem_pes))
                    cur += logp[v] if lit > 0 else logn[v]
                    rem_opt -= maxlog[v]
                    rem_pes -= minlog[v]
            elif val < 0:
                self.propagation_steps += steps
                return SolveStatus.UNSAT, None

        while True:
            # propagate to fixpoint
            conflict = False
            while True:
                while qhead < nt:
                    lit = trail[qhead]
                    qhead += 1
                    steps += 1
                    if max_steps is not None and steps > max_steps:
                        self.propagation_steps += steps
                        return SolveStatus.BUDGET_EXCEEDED, None
                    if deadline is not None:
                        tick -= 1
                        if tick <= 0:
                            tick = 2048
                            if time.monotonic() > deadline:
                                self.propagation_steps += steps
                                return SolveStatus.BUDGET_EXCEEDED, None
                    flit = -lit
                    wl = watches[2 * lit + 1 if lit > 0 else -2 * lit]
                    j = 0
                    wn = len(wl)
                    while j < wn:
                        ci = wl[j]
                        cl = clauses[ci]
                        c0 = cl[0]
                        if c0 == flit:
                            c0 = cl[1]
                            cl[0] = c0
                            cl[1] = flit
                        val0 = tv[c0]
                        if val0 > 0:
                            j += 1
                            continue
                        moved = False
                        for k in range(2, len(cl)):
                            lk = cl[k]
                            if tv[lk] >= 0:
                                cl[1] = lk
                                cl[k] = flit
                                watches[2 * lk if lk > 0 else 1 - 2 * lk].append(ci)
                                last = wl.pop()
                                wn -= 1
                                if j < wn:
                                    wl[j] = last
                                moved = True
                                break
                        if moved:
                            continue
                        if val0 == 0:
                            tv[c0] = 1
                            tv[-c0] = -1
                            trail_append(c0)
                            nt += 1
                            vv = c0 if c0 > 0 else -c0
                            if track:
                                bit = 1 << vv
                                assigned_mask |= bit
                                if c0 > 0:
                                    true_mask |= bit
                            if (wmask >> vv) & 1:
                                wstack.append((cur, rem_opt, rem_pes))
                                cur += logp[vv] if c0 > 0 else logn[vv]
                                rem_opt -= maxlog[vv]
                                rem_pes -= minlog[vv]
                            j += 1
                        else:
                            conflict = True
                            break
                    if conflict:
                        break
                if conflict:
                    break
                # parity propagation over eliminated rows
                if rows:
                    implied = False
                    for mask, par in rows:
                        rem = mask & ~assigned_mask
                        if rem == 0:
                            if ((mask & true_mask).bit_count() & 1) != par:
                                conflict = True
                                break
                        elif rem & (rem - 1) == 0:
                            v0 = rem.bit_length() - 1
                            need = par ^ ((mask & true_mask).bit_count() & 1)
                            lit0 = v0 if need else -v0
                            tv[lit0] = 1
                            tv[-lit0] = -1
                            trail_append(lit0)
                            nt += 1
                            assigned_mask |= rem
                            if need:
                                true_mask |= rem
                            if (wmask >> v0) & 1:
                                wstack.append((cur, rem_opt, rem_pes))
                                cur += logp[v0] if need else logn[v0]
                                rem_opt -= maxlog[v0]
                                rem_pes -= minlog[v0]
                            implied = True
                            break
                    if conflict:
                        break
                    if implied:
                        continue
                if has_window and (cur + rem_opt <= llow or cur + rem_pes > lhigh):
                    conflict = True
                elif blocked:
                    # once every support variable is assigned the projection
                    # is fixed; a blocked projection fails the subtree
                    if track:
                        if (assigned_mask & smask) == smask and (
                            true_mask & smask
                        ) in blocked:
                            conflict = True
                    elif nt == n:
                        key = 0
                        for v in support_sorted:
                            if tv[v] > 0:
                                key |= 1 << v
                        if key in blocked:
                            conflict = True
                break

            if conflict:
                backtracked = False
                while dec_pos:
                    pos = dec_pos[-1]
                    for j in range(nt - 1, pos - 1, -1):
                        l = trail[j]
                        tv[l] = 0
                        tv[-l] = 0
                        vv = l if l > 0 else -l
                        if track:
                            bit = 1 << vv
                            assigned_mask &= ~bit
                            true_mask &= ~bit
                        if (wmask >> vv) & 1:
                            cur, rem_opt, rem_pes = wstack.pop()
                    del trail[pos:]
                    nt = pos
                    qhead = pos
                    if dec_flipped[-1]:
                        dec_pos.pop()
                        dec_lit.pop()
                        dec_flipped.pop()
                        continue
                    nl = -dec_lit[-1]
                    dec_lit[-1] = nl
                    dec_flipped[-1] = True
                    tv[nl] = 1
                    tv[-nl] = -1
                    trail_append(nl)
                    nt += 1
                    vv = nl if nl > 0 else -nl
                    if track:
                        bit = 1 << vv
                        assigned_mask |= bit
                        if nl > 0:
                            true_mask |= bit
                    if (wmask >> vv) & 1:
                        wstack.append((cur, rem_opt, rem_pes))
                        cur += logp[vv] if nl > 0 else logn[vv]
                        rem_opt -= maxlog[vv]
                        rem_pes -= minlog[vv]
                    backtracked = True
                    break
                if not backtracked:
                    self.propagation_steps += steps
                    return SolveStatus.UNSAT, None
                continue

            if nt == n:
                self.propagation_steps += steps
                return SolveStatus.SAT, tuple(tv[v] > 0 for v in range(1, n + 1))

            # decide: lowest-index unassigned variable, random polarity
            steps += 1
            if max_steps is not None and steps > max_steps:
                self.propagation_steps += steps
                return SolveStatus.BUDGET_EXCEEDED, None
            v = 1
            while tv[v] != 0:
                v += 1
            lit = v if getrandbits(1) else -v
            dec_pos.append(nt)
            dec_lit.append(lit)
            dec_flipped.append(False)
            tv[lit] = 1
            tv[-lit] = -1
            trail_append(lit)
            nt += 1
            if track:
                bit = 1 << v
                assigned_mask |= bit
                if lit > 0:
                    true_mask |= bit
            if (wmask >> v) & 1:
                wstack.append((cur, rem_opt, rem_pes))
                cur += logp[v] if lit > 0 else logn[v]
                rem_opt -= maxlog[v]
                rem_pes -= minlog[v]

    # -- debug dump ------------------------------------------------------------

    def dump_dimacs(self) -> str:
        """Current clauses, blocking clauses and xor rows, DIMACS + x lines."""
        n_clauses = len(self._clauses) + len(self._blocked_list)
        lines = [f"p cnf {self.n} {n_clauses}"]
        if self.window is not None:
            lines.append(f"c window ({self.window.low}, {self.window.high}]")
        for cl in self._clauses:
            lines.append(" ".join(str(l) for l in sorted(cl, key=abs)) + " 0")
        for mask in self._blocked_list:
            lits = [-v if (mask >> v) & 1 else v for v in self._support_sorted]
            lines.append(" ".join(str(l) for l in lits) + " 0")
        for mask, par in self._xor_rows:
            vs = [str(v) for v in range(1, self.n + 1) if (mask >> v) & 1]
            if not vs:
                lines.append("x 0" if par else "c x-row vacuous (parity 0)")
                continue
            if not par:
                vs[0] = "-" + vs[0]
            lines.append("x " + " ".join(vs) + " 0")
        return "\n".join(lines) + "\n"
