"""Weighted CNF formulas: representation, DIMACS parsing, weight models.

The input format is standard DIMACS CNF extended with two line forms:

* ``w <var> <p>`` assigns literal weights ``(p, 1-p)`` to a variable,
  requiring ``0 < p < 1``.  A second form ``w -<var> <q>`` overrides the
  negative-literal weight independently (``0 < q <= 1``).
* ``c ind <v1> <v2> ... 0`` declares part of the independent support;
  multiple lines union together.

If any ``w`` line is present the file describes a literal-product weight
function, otherwise every assignment has weight 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

__all__ = [
    "FormulaError",
    "Literal",
    "Clause",
    "CnfFormula",
    "Assignment",
    "WeightModel",
    "UniformWeights",
    "LiteralProductWeights",
    "BlackBoxWeights",
    "TiltBound",
    "parse_weighted_dimacs",
    "serialize_weighted_dimacs",
    "evaluate",
    "weight",
    "project",
    "projection_key",
]


class FormulaError(ValueError):
    """Malformed formula text, out-of-range index, or invalid weight."""


@dataclass(frozen=True)
class Literal:
    """A possibly negated propositional variable, indexed from 1."""

    var: int
    negated: bool = False

    def __post_init__(self) -> None:
        if self.var < 1:
            raise FormulaError(f"variable index must be >= 1, got {self.var}")

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        if lit == 0:
            raise FormulaError("0 is not a literal")
        return cls(abs(lit), lit < 0)

    def to_int(self) -> int:
        return -self.var if self.negated else self.var

    def __invert__(self) -> "Literal":
        return Literal(self.var, not self.negated)


@dataclass(frozen=True)
class Clause:
    """A disjunction of literals over distinct variables."""

    literals: tuple[Literal, ...]

    def __post_init__(self) -> None:
        if not self.literals:
            raise FormulaError("empty clause")
        seen = set()
        for lit in self.literals:
            if lit.var in seen:
                raise FormulaError(f"variable {lit.var} appears twice in clause")
            seen.add(lit.var)

    @classmethod
    def of(cls, *lits: int) -> "Clause":
        return cls(tuple(Literal.from_int(l) for l in lits))

    def to_ints(self) -> tuple[int, ...]:
        return tuple(lit.to_int() for lit in self.literals)

    def satisfied_by(self, sigma: "Assignment") -> bool:
        return any(sigma.value(lit.var) != lit.negated for lit in self.literals)


def _normalize_clause(ints: Iterable[int]) -> tuple[int, ...] | None:
    """Deduplicate literals; return None for a tautologous clause."""
    signs: dict[int, bool] = {}
    out: list[int] = []
    for lit in ints:
        v = abs(lit)
        positive = lit > 0
        if v in signs:
            if signs[v] != positive:
                return None
            continue
        signs[v] = positive
        out.append(lit)
    return tuple(out)


@dataclass(frozen=True)
class CnfFormula:
    """A CNF formula with a declared independent support.

    ``independent_support`` defaults to the full variable range; when a
    proper subset is declared, the values of those variables determine every
    satisfying assignment.
    """

    num_vars: int
    clauses: tuple[Clause, ...]
    independent_support: frozenset[int]
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.num_vars < 1:
            raise FormulaError("formula must have at least one variable")
        for clause in self.clauses:
            for lit in clause.literals:
                if lit.var > self.num_vars:
                    raise FormulaError(
                        f"literal index {lit.var} out of range (n={self.num_vars})"
                    )
        s = self.independent_support
        if not s:
            raise FormulaError("independent support must be non-empty")
        if not all(1 <= v <= self.num_vars for v in s):
            raise FormulaError("independent support mentions unknown variables")

    @classmethod
    def build(
        cls,
        num_vars: int,
        clause_ints: Iterable[Iterable[int]],
        support: Iterable[int] | None = None,
    ) -> "CnfFormula":
        """Construct from signed-integer clauses, dropping tautologies."""
        clauses = []
        warnings = []
        for idx, ints in enumerate(clause_ints, 1):
            norm = _normalize_clause(ints)
            if norm is None:
                warnings.append(f"clause {idx} is tautologous, dropped")
                continue
            if not norm:
                raise FormulaError(f"clause {idx} is empty")
            clauses.append(Clause(tuple(Literal.from_int(l) for l in norm)))
        if support is None:
            sup = frozenset(range(1, num_vars + 1))
        else:
            sup = frozenset(support)
        return cls(num_vars, tuple(clauses), sup, tuple(warnings))

    def variables(self) -> frozenset[int]:
        return frozenset(range(1, self.num_vars + 1))

    def clause_ints(self) -> tuple[tuple[int, ...], ...]:
        """Signed-integer view of the clauses (solver input form)."""
        return tuple(c.to_ints() for c in self.clauses)


class Assignment:
    """A total truth assignment over variables 1..n.  Immutable."""

    __slots__ = ("values",)

    def __init__(self, values: Iterable[bool]):
        object.__setattr__(self, "values", tuple(bool(v) for v in values))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Assignment is immutable")

    @classmethod
    def from_ints(cls, num_vars: int, lits: Iterable[int]) -> "Assignment":
        vals: list[bool | None] = [None] * num_vars
        for lit in lits:
            v = abs(lit)
            if not 1 <= v <= num_vars:
                raise FormulaError(f"literal {lit} out of range (n={num_vars})")
            if vals[v - 1] is not None:
                raise FormulaError(f"variable {v} assigned twice")
            vals[v - 1] = lit > 0
        if any(v is None for v in vals):
            missing = [i + 1 for i, v in enumerate(vals) if v is None]
            raise FormulaError(f"assignment not total, missing {missing}")
        return cls(vals)  # type: ignore[arg-type]

    def __len__(self) -> int:
        return len(self.values)

    def value(self, var: int) -> bool:
        return self.values[var - 1]

    def to_ints(self) -> tuple[int, ...]:
        return tuple(v if b else -v for v, b in enumerate(self.values, 1))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Assignment) and self.values == other.values

    def __hash__(self) -> int:
        return hash(self.values)

    def __repr__(self) -> str:
        return f"Assignment({''.join('1' if v else '0' for v in self.values)})"


def project(sigma: Assignment, variables: Iterable[int]) -> dict[int, bool]:
    """Restrict a total assignment to the given variables."""
    return {v: sigma.value(v) for v in variables}


def projection_key(sigma: Assignment, variables: Iterable[int]) -> tuple[int, ...]:
    """Canonical hashable key of a projection: signed literals, sorted by var."""
    return tuple(v if sigma.value(v) else -v for v in sorted(variables))


class WeightModel:
    """Maps every total assignment to a weight in (0, 1]."""

    def weight(self, sigma: Assignment) -> float:
        raise NotImplementedError

    def log_weight(self, sigma: Assignment) -> float:
        return math.log(self.weight(sigma))


class UniformWeights(WeightModel):
    """Every assignment has weight 1."""

    def weight(self, sigma: Assignment) -> float:
        return 1.0

    def log_weight(self, sigma: Assignment) -> float:
        return 0.0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UniformWeights)

    def __hash__(self) -> int:
        return hash(UniformWeights)

    def __repr__(self) -> str:
        return "UniformWeights()"


class LiteralProductWeights(WeightModel):
    """w(sigma) is the product over variables of the matching literal weight.

    Variables without an explicit pair default to (1, 1) and drop out of the
    product.  Products and derived quantities are computed in log space so
    instances with thousands of weighted variables do not underflow; the
    public `weight` value is still linear-space.
    """

    def __init__(self, pairs: Mapping[int, tuple[float, float]]):
        cleaned: dict[int, tuple[float, float]] = {}
        for var, (w_pos, w_neg) in pairs.items():
            if var < 1:
                raise FormulaError(f"variable index must be >= 1, got {var}")
            for w in (w_pos, w_neg):
                if not (isinstance(w, (int, float)) and math.isfinite(w)):
                    raise FormulaError(f"literal weight for {var} is not finite")
                if not 0.0 < w <= 1.0:
                    raise FormulaError(
                        f"literal weight {w} for variable {var} outside (0, 1]"
                    )
            if w_pos == 1.0 and w_neg == 1.0:
                continue
            cleaned[var] = (float(w_pos), float(w_neg))
        self.pairs: dict[int, tuple[float, float]] = cleaned
        self._log_pairs = {
            v: (math.log(p), math.log(n)) for v, (p, n) in cleaned.items()
        }

    def factor(self, var: int, value: bool) -> float:
        pair = self.pairs.get(var)
        if pair is None:
            return 1.0
        return pair[0] if value else pair[1]

    def weight(self, sigma: Assignment) -> float:
        return math.prod(
            (p if sigma.value(v) else n) for v, (p, n) in self.pairs.items()
        )

    def log_weight(self, sigma: Assignment) -> float:
        return sum(
            (lp if sigma.value(v) else ln) for v, (lp, ln) in self._log_pairs.items()
        )

    def log_tilt_bound(self) -> float:
        """log of the product of per-variable max/min factor ratios."""
        return sum(
            abs(lp - ln) for lp, ln in self._log_pairs.values()
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LiteralProductWeights) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.pairs.items())))

    def __repr__(self) -> str:
        return f"LiteralProductWeights({self.pairs!r})"


class BlackBoxWeights(WeightModel):
    """Opaque weight callback.  Results are validated, never clamped."""

    def __init__(self, fn: Callable[[Assignment], float], thread_safe: bool = False):
        self.fn = fn
        self.thread_safe = thread_safe

    def weight(self, sigma: Assignment) -> float:
        w = self.fn(sigma)
        if not (isinstance(w, (int, float)) and math.isfinite(w)):
            raise FormulaError(f"black-box weight {w!r} is not a finite number")
        if not 0.0 < w <= 1.0:
            raise FormulaError(f"black-box weight {w} outside (0, 1]")
        return float(w)

    def __eq__(self, other: object) -> bool:
        return self is other

    def __hash__(self) -> int:
        return id(self)


@dataclass(frozen=True)
class TiltBound:
    """User-supplied upper bound on max/min satisfying-assignment weight."""

    r: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r >= 1.0):
            raise FormulaError(f"tilt bound must be >= 1, got {self.r}")


def evaluate(formula: CnfFormula, sigma: Assignment) -> bool:
    """True iff every clause has a satisfied literal under sigma."""
    if len(sigma) != formula.num_vars:
        raise FormulaError("assignment size does not match formula")
    return all(c.satisfied_by(sigma) for c in formula.clauses)


def weight(model: WeightModel, sigma: Assignment) -> float:
    return model.weight(sigma)


# ---------------------------------------------------------------------------
# DIMACS parsing / serialization


def parse_weighted_dimacs(text: str | bytes) -> tuple[CnfFormula, WeightModel]:
    """Parse weighted DIMACS text into a formula and a weight model."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")

    num_vars: int | None = None
    declared_clauses: int | None = None
    pending: list[int] = []
    raw_clauses: list[tuple[int, ...]] = []
    warnings: list[str] = []
    ind: set[int] = set()
    saw_ind = False
    pos_w: dict[int, float] = {}
    neg_w: dict[int, float] = {}
    clause_no = 0

    def finish_clause(lineno: int) -> None:
        nonlocal clause_no
        clause_no += 1
        if not pending:
            raise FormulaError(f"line {lineno}: empty clause")
        norm = _normalize_clause(pending)
        pending.clear()
        if norm is None:
            warnings.append(f"clause {clause_no} is tautologous, dropped")
            return
        raw_clauses.append(norm)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        tag = fields[0]
        if tag == "c":
            if len(fields) >= 2 and fields[1] == "ind":
                try:
                    vals = [int(tok) for tok in fields[2:]]
                except ValueError as exc:
                    raise FormulaError(f"line {lineno}: bad 'c ind' line") from exc
                if not vals or vals[-1] != 0:
                    raise FormulaError(f"line {lineno}: 'c ind' line must end with 0")
                saw_ind = True
                ind.update(vals[:-1])
            continue
        if tag == "p":
            if num_vars is not None:
                raise FormulaError(f"line {lineno}: duplicate header")
            if len(fields) != 4 or fields[1] != "cnf":
                raise FormulaError(f"line {lineno}: malformed header {line!r}")
            try:
                num_vars = int(fields[2])
                declared_clauses = int(fields[3])
            except ValueError as exc:
                raise FormulaError(f"line {lineno}: malformed header {line!r}") from exc
            if num_vars < 1:
                raise FormulaError(f"line {lineno}: formula must have >= 1 variable")
            continue
        if tag == "w":
            if len(fields) != 3:
                raise FormulaError(f"line {lineno}: malformed weight line {line!r}")
            try:
                svar = int(fields[1])
                p = float(fields[2])
            except ValueError as exc:
                raise FormulaError(f"line {lineno}: malformed weight line") from exc
            if svar == 0:
                raise FormulaError(f"line {lineno}: weight line names variable 0")
            if not math.isfinite(p):
                raise FormulaError(f"line {lineno}: weight {fields[2]} is not finite")
            if svar > 0:
                if not 0.0 < p < 1.0:
                    raise FormulaError(f"line {lineno}: weight {p} outside (0,1)")
                if svar in pos_w:
                    raise FormulaError(
                        f"line {lineno}: duplicate weight for variable {svar}"
                    )
                pos_w[svar] = p
            else:
                if not 0.0 < p <= 1.0:
                    raise FormulaError(f"line {lineno}: weight {p} outside (0,1]")
                if -svar in neg_w:
                    raise FormulaError(
                        f"line {lineno}: duplicate weight for literal {svar}"
                    )
                neg_w[-svar] = p
            continue
        if tag == "x" or tag.startswith("x"):
            raise FormulaError(
                f"line {lineno}: xor lines are not accepted in input files"
            )
        for tok in fields:
            try:
                lit = int(tok)
            except ValueError as exc:
                raise FormulaError(f"line {lineno}: bad token {tok!r}") from exc
            if lit == 0:
                finish_clause(lineno)
            else:
                pending.append(lit)

    if pending:
        raise FormulaError("unterminated clause at end of file")
    if num_vars is None:
        raise FormulaError("missing 'p cnf' header")
    if declared_clauses is not None and declared_clauses != clause_no:
        warnings.append(
            f"header declares {declared_clauses} clauses, file has {clause_no}"
        )
    for var in list(pos_w) + list(neg_w):
        if var > num_vars:
            raise FormulaError(f"weight line variable {var} out of range (n={num_vars})")
    if saw_ind:
        if not ind:
            raise FormulaError("declared independent support is empty")
        bad = [v for v in ind if not 1 <= v <= num_vars]
        if bad:
            raise FormulaError(f"independent support variables out of range: {bad}")
        support: frozenset[int] = frozenset(ind)
    else:
        support = frozenset(range(1, num_vars + 1))

    clauses = tuple(
        Clause(tuple(Literal.from_int(l) for l in ints)) for ints in raw_clauses
    )
    for clause in clauses:
        for lit in clause.literals:
            if lit.var > num_vars:
                raise FormulaError(
                    f"literal index {lit.var} out of range (n={num_vars})"
                )
    formula = CnfFormula(num_vars, clauses, support, tuple(warnings))

    model: WeightModel
    if pos_w or neg_w:
        pairs: dict[int, tuple[float, float]] = {}
        for var in sorted(set(pos_w) | set(neg_w)):
            w_pos = pos_w.get(var, 1.0)
            w_neg = neg_w.get(var, 1.0 - pos_w[var] if var in pos_w else 1.0)
            pairs[var] = (w_pos, w_neg)
        model = LiteralProductWeights(pairs)
    else:
        model = UniformWeights()
    return formula, model


def serialize_weighted_dimacs(formula: CnfFormula, model: WeightModel) -> str:
    """Emit header, 'c ind', 'w' lines and clauses, in that order."""
    lines = [f"p cnf {formula.num_vars} {len(formula.clauses)}"]
    full = formula.variables()
    if formula.independent_support != full:
        vars_str = " ".join(str(v) for v in sorted(formula.independent_support))
        lines.append(f"c ind {vars_str} 0")
    if isinstance(model, LiteralProductWeights):
        for var in sorted(model.pairs):
            w_pos, w_neg = model.pairs[var]
            if 0.0 < w_pos < 1.0:
                lines.append(f"w {var} {w_pos!r}")
                if w_neg != 1.0 - w_pos:
                    lines.append(f"w -{var} {w_neg!r}")
            else:
                # w_pos == 1.0; the pair is non-default so w_neg < 1
                lines.append(f"w -{var} {w_neg!r}")
    elif isinstance(model, BlackBoxWeights):
        raise FormulaError("black-box weight models are not serializable")
    for clause in formula.clauses:
        lines.append(" ".join(str(l) for l in clause.to_ints()) + " 0")
    return "\n".join(lines) + "\n"
