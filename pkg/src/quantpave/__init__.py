"""quantpave: tri-valued box pavings for quantified real constraints.

The solver certifies, box by box, whether constraints built from
interval atoms, conjunction, bounded quantifiers and function inversion
nodes hold (T), fail (F), or remain undecided (U), and applies this to
robust feasible initial sets of discrete-time systems with control and
perturbation.
"""

from .approxset import ApproximateSet
from .constraints import (
    AtomLE,
    Conj,
    Constraint,
    Exists,
    ForAll,
    FuncInv,
    Truth,
    free_vars,
    truth_and,
    well_formed,
)
from .errors import (
    DimensionMismatch,
    ExprParseError,
    NonDyadicRegion,
    OutsideDomain,
    QuantpaveError,
    SystemValidationError,
    UnsplittableAxis,
)
from .expr import Add, Const, Expr, Mul, Neg, Sub, Var, VecExpr, parse_expr, range_over
from .intervals import Box, Interval
from .solver import (
    CacheStore,
    Paving,
    SolveStats,
    SolverConfig,
    eval_atom,
    eval_constraint,
    find_single_true,
    pave,
    prop_funcinv,
    refine,
    refine_memo,
)
from .system import DiscreteSystem, unroll_composed, unroll_naive
from .cli import (
    RunRequest,
    dump_system,
    load_system,
    run,
    write_paving_csv,
    write_paving_svg,
    write_stats,
)

__version__ = "0.1.0"

__all__ = [
    "Add",
    "ApproximateSet",
    "AtomLE",
    "Box",
    "CacheStore",
    "Conj",
    "Const",
    "Constraint",
    "DimensionMismatch",
    "DiscreteSystem",
    "Exists",
    "Expr",
    "ExprParseError",
    "ForAll",
    "FuncInv",
    "Interval",
    "Mul",
    "Neg",
    "NonDyadicRegion",
    "OutsideDomain",
    "Paving",
    "QuantpaveError",
    "RunRequest",
    "SolveStats",
    "SolverConfig",
    "Sub",
    "SystemValidationError",
    "Truth",
    "UnsplittableAxis",
    "Var",
    "VecExpr",
    "dump_system",
    "eval_atom",
    "eval_constraint",
    "find_single_true",
    "free_vars",
    "load_system",
    "parse_expr",
    "pave",
    "prop_funcinv",
    "range_over",
    "refine",
    "refine_memo",
    "run",
    "truth_and",
    "unroll_composed",
    "unroll_naive",
    "well_formed",
    "write_paving_csv",
    "write_paving_svg",
    "write_stats",
]
