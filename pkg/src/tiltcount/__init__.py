"""Approximate weighted model counting and weighted-uniform sampling.

The toolkit computes (epsilon, delta) multiplicative approximations of
weighted model counts of CNF formulas and draws approximately
weighted-uniform satisfying assignments, using random parity-constraint
hashing over the independent support and a built-in CNF+XOR solver.  An
exact enumeration oracle provides ground truth at desk scale.
"""

from .counting import (
    BoundedEnumeration,
    CountEstimate,
    CountFailure,
    CountParams,
    OverallTimeout,
    ParameterError,
    PartitionedCount,
    SolveBudgetError,
    WeightMcResult,
    bounded_weight_sat,
    compute_iterations,
    compute_pivot,
    partitioned_weightmc,
    weightmc,
    weightmc_core,
)
from .formula import (
    Assignment,
    BlackBoxWeights,
    Clause,
    CnfFormula,
    FormulaError,
    Literal,
    LiteralProductWeights,
    TiltBound,
    UniformWeights,
    WeightModel,
    evaluate,
    parse_weighted_dimacs,
    project,
    projection_key,
    serialize_weighted_dimacs,
    weight,
)
from .oracle import (
    EmpiricalDistribution,
    ExactResult,
    IndependentSupportError,
    OracleCapExceeded,
    OracleError,
    exact_count,
    exact_distribution,
    ideal_sample,
    l1_distance,
)
from .sampling import (
    KappaPivot,
    SampleOutcome,
    SamplerState,
    SamplerStateMismatch,
    compute_kappa_pivot,
    make_sampler_state,
    weightgen,
)
from .satengine import (
    Budget,
    Checkpoint,
    SolveResult,
    SolveStatus,
    SolverError,
    SolverInstance,
    WeightWindow,
)
from .xorhash import (
    HashConstraintSet,
    XorConstraint,
    cell_membership,
    sample_hash,
    serialize_xor_lines,
)

__version__ = "0.1.0"
