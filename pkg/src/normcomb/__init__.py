"""Mechanized square-class and norm-group combinatorics over dyadic fields.

The package has three layers:

* exact combinatorics: :mod:`normcomb.squareclass`, :mod:`normcomb.normlattice`;
* a symbolic proof engine with checkable traces: :mod:`normcomb.exprs`,
  :mod:`normcomb.derivation`, :mod:`normcomb.tracecheck`, driven by the
  scripted reproductions in :mod:`normcomb.replay`;
* an independent truncated 2-adic oracle: :mod:`normcomb.dyadic`.

:mod:`normcomb.cli` exposes everything as the ``normcomb`` command.
"""

from .squareclass import (
    CASE_A_GROUP,
    CASE_B_GROUP,
    ClassGroup,
    ClassSet,
    MixedGroups,
    SquareClass,
    UnknownLabel,
    class_mul,
    coset,
    format_class,
    parse_class,
    set_intersect,
)
from .normlattice import (
    LatticeReport,
    NormLattice,
    SumRuleResult,
    hilbert_from_lattice,
    lattice,
    sum_rule,
    verify_lattice,
)
from .exprs import Expr, RationalExpr, Scalar, parse_expr, verify_identity
from .derivation import (
    ContradictionFound,
    InconsistentHypotheses,
    KnowledgeBase,
    MissingFact,
    ZeroScalar,
    decompose_step,
    make_kb,
    propagate,
    prove,
    prove_case,
    scalar_class,
    scenario,
    substitute_transform,
)
from .dyadic import (
    ConstructionClass,
    Dyadic,
    OracleMismatch,
    PrecisionExhausted,
    arith,
    classify_in_construction,
    hilbert_oracle,
    is_square,
    quad_ext_invariants,
    sample_hypothesis,
    square_class_of,
    verify_construction,
)
from .demushkin import DemushkinPresentation, abelianization, square_class_rank

__version__ = "0.1.0"
