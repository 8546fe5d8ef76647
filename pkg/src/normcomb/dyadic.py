"""Exact truncated 2-adic arithmetic and the numerical side of the engine.

A :class:`Dyadic` is a 2-adic number stored as valuation plus odd unit part
known modulo 2^k (default k = 64).  Addition tracks cancellation, so every
value knows how many unit bits it still carries; once fewer than 3 bits
remain the square class is undecidable and operations refuse to answer.

On top of the arithmetic sit the independent decision procedures used to
cross-validate the symbolic engine: square classification, a search-based
Hilbert symbol, the valuation-ring construction probe, and hypothesis
samplers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .exprs import Expr
from .normlattice import NormLattice, hilbert_from_lattice, lattice
from .squareclass import CASE_A_GROUP, ClassSet, SquareClass

DEFAULT_PRECISION = 64
MIN_UNIT_BITS = 3


class PrecisionExhausted(ArithmeticError):
    """Too much cancellation: fewer than 3 unit bits remain."""


class DivisionByZero(ZeroDivisionError):
    pass


class OracleMismatch(AssertionError):
    """The search-based Hilbert symbol disagrees with the lattice."""


class TrivialClass(ValueError):
    """Quadratic extension data requested for the trivial square class."""


DyadicLike = Union["Dyadic", int, Fraction]


@dataclass(frozen=True)
class Dyadic:
    """2^v * u with u odd, u known modulo 2^k.  u == 0 encodes zero."""

    v: int
    u: int
    k: int = DEFAULT_PRECISION

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("precision must be at least 1 bit")
        if self.u == 0:
            if self.v != 0:
                raise ValueError("zero is stored with v=0, u=0")
        else:
            if self.u % 2 == 0:
                raise ValueError("unit part must be odd")
            if not 0 < self.u < (1 << self.k):
                raise ValueError("unit part must be reduced modulo 2^k")

    # -- construction -----------------------------------------------------

    @staticmethod
    def zero(k: int = DEFAULT_PRECISION) -> "Dyadic":
        return Dyadic(0, 0, k)

    @staticmethod
    def from_rational(q: DyadicLike, k: int = DEFAULT_PRECISION) -> "Dyadic":
        if isinstance(q, Dyadic):
            return q
        q = Fraction(q)
        if q == 0:
            return Dyadic.zero(k)
        num, den = q.numerator, q.denominator
        vn = _val2(abs(num))
        vd = _val2(den)
        un = abs(num) >> vn
        ud = den >> vd
        mod = 1 << k
        u = un * pow(ud, -1, mod) % mod
        if num < 0:
            u = mod - u
        return Dyadic(vn - vd, u, k)

    # -- basic predicates --------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.u == 0

    def unit_mod(self, bits: int) -> int:
        if self.is_zero:
            raise DivisionByZero("zero has no unit part")
        if self.k < bits:
            raise PrecisionExhausted(f"only {self.k} unit bits available, need {bits}")
        return self.u % (1 << bits)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: DyadicLike) -> "Dyadic":
        other = Dyadic.from_rational(other, self.k)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        a, b = (self, other) if self.v <= other.v else (other, self)
        shift = b.v - a.v
        known = min(a.k, b.k + shift)
        mod = 1 << known
        s = (a.u + (b.u << shift)) % mod
        if s == 0:
            raise PrecisionExhausted("sum cancels below working precision")
        t = _val2(s)
        bits = known - t
        if bits < MIN_UNIT_BITS:
            raise PrecisionExhausted(f"sum retains only {bits} unit bits")
        return Dyadic(a.v + t, (s >> t) % (1 << bits), bits)

    __radd__ = __add__

    def __neg__(self) -> "Dyadic":
        if self.is_zero:
            return self
        mod = 1 << self.k
        return Dyadic(self.v, (mod - self.u) % mod, self.k)

    def __sub__(self, other: DyadicLike) -> "Dyadic":
        return self + (-Dyadic.from_rational(other, self.k))

    def __rsub__(self, other: DyadicLike) -> "Dyadic":
        return Dyadic.from_rational(other, self.k) - self

    def __mul__(self, other: DyadicLike) -> "Dyadic":
        other = Dyadic.from_rational(other, self.k)
        if self.is_zero or other.is_zero:
            return Dyadic.zero(min(self.k, other.k))
        bits = min(self.k, other.k)
        return Dyadic(self.v + other.v, (self.u * other.u) % (1 << bits), bits)

    __rmul__ = __mul__

    def inverse(self) -> "Dyadic":
        if self.is_zero:
            raise DivisionByZero("cannot invert zero")
        mod = 1 << self.k
        return Dyadic(-self.v, pow(self.u, -1, mod), self.k)

    def __truediv__(self, other: DyadicLike) -> "Dyadic":
        return self * Dyadic.from_rational(other, self.k).inverse()

    def __rtruediv__(self, other: DyadicLike) -> "Dyadic":
        return Dyadic.from_rational(other, self.k) * self.inverse()

    def __repr__(self) -> str:
        if self.is_zero:
            return "Dyadic(0)"
        return f"Dyadic(2^{self.v} * {self.u} mod 2^{self.k})"


def _val2(n: int) -> int:
    return (n & -n).bit_length() - 1


def arith(op: str, a: DyadicLike, b: Optional[DyadicLike] = None) -> Dyadic:
    """Dispatcher for the four arithmetic operations."""
    a = Dyadic.from_rational(a)
    if op == "neg":
        return -a
    if op == "inv":
        return a.inverse()
    if b is None:
        raise ValueError(f"operation {op!r} needs two operands")
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# Square classes
# ---------------------------------------------------------------------------

def is_square(a: DyadicLike) -> bool:
    """Hensel criterion: even valuation and unit part 1 modulo 8."""
    a = Dyadic.from_rational(a)
    if a.is_zero:
        raise DivisionByZero("zero has no square class")
    return a.v % 2 == 0 and a.unit_mod(3) == 1

# unit residue mod 8 -> (sign bit, "5" bit)
_UNIT_BITS = {1: (0, 0), 3: (1, 1), 5: (0, 1), 7: (1, 0)}


def square_class_of(a: DyadicLike) -> SquareClass:
    """The square class of a nonzero dyadic, in the Case A group."""
    a = Dyadic.from_rational(a)
    if a.is_zero:
        raise DivisionByZero("zero has no square class")
    b_sign, b_five = _UNIT_BITS[a.unit_mod(3)]
    index = b_sign | (a.v & 1) << 1 | b_five << 2
    return SquareClass(CASE_A_GROUP, index)


def rational_class_index(q: Fraction) -> int:
    """Class index of a nonzero rational, without building a Dyadic."""
    if q == 0:
        raise DivisionByZero("zero has no square class")
    num, den = q.numerator, q.denominator
    v = _val2(abs(num)) - _val2(den)
    un = abs(num) >> _val2(abs(num))
    ud = den >> _val2(den)
    u = un * pow(ud, -1, 8) % 8
    if num < 0:
        u = (-u) % 8
    b_sign, b_five = _UNIT_BITS[u]
    return b_sign | (v & 1) << 1 | b_five << 2


# ---------------------------------------------------------------------------
# Hilbert symbol by bounded norm-equation search
# ---------------------------------------------------------------------------

def hilbert_oracle(
    a: DyadicLike,
    b: DyadicLike,
    lat: Optional[NormLattice] = None,
    val_range: int = 4,
    unit_bits: int = 8,
    cross_check: bool = True,
) -> int:
    """Decide whether b is a norm from Q2(sqrt(a)) by bounded search.

    Searches for x, y with b = x^2 - a*y^2 over candidate valuations in
    [-val_range, val_range] and odd unit residues modulo 2^unit_bits.  The
    result is cross-checked against the lattice-derived symbol; any
    disagreement indicates a bug and raises :class:`OracleMismatch`.
    """
    a = Dyadic.from_rational(a)
    b = Dyadic.from_rational(b)
    if a.is_zero or b.is_zero:
        raise DivisionByZero("Hilbert symbol needs nonzero arguments")

    found = _norm_search(a, b, val_range, unit_bits)
    result = 1 if found else -1

    if cross_check:
        expected = hilbert_from_lattice(
            lat if lat is not None else lattice("case-a"),
            square_class_of(a),
            square_class_of(b),
        )
        if expected != result:
            raise OracleMismatch(
                f"norm search gives {result:+d} but the lattice gives {expected:+d} "
                f"for ({square_class_of(a).label}, {square_class_of(b).label})"
            )
    return result


def _norm_search(a: Dyadic, b: Dyadic, val_range: int, unit_bits: int) -> bool:
    try:
        if is_square(b):  # y = 0
            return True
        if is_square(-(b / a)):  # x = 0
            return True
    except PrecisionExhausted:
        pass
    for vy in range(-val_range, val_range + 1):
        for uy in range(1, 1 << unit_bits, 2):
            y2 = Dyadic(2 * vy, (uy * uy) % (1 << b.k), b.k)
            try:
                z = b + a * y2
            except PrecisionExhausted:
                continue  # b = -a*y^2 to working precision; x=0 case handled above
            if z.is_zero:
                continue
            try:
                if is_square(z):
                    return True
            except PrecisionExhausted:
                continue
    return False


# ---------------------------------------------------------------------------
# Rigid-element construction probe
# ---------------------------------------------------------------------------

class ConstructionClass(Enum):
    O1 = "O1"
    O2_UNIT = "O2-unit"
    O2_NONUNIT = "O2-nonunit"
    M_ONLY = "M-only"
    OUTSIDE = "outside"


#: Fixed witnesses used to sample the definitional O2 stability predicate.
_O1_WITNESSES = (Fraction(2), Fraction(6), Fraction(40), Fraction(2, 25))


def _in_T(x: Dyadic) -> bool:
    """T = N(5)*(Q2^x)^2 is exactly the even-valuation predicate."""
    return x.v % 2 == 0


def _in_O1(x: Dyadic) -> bool:
    if x.is_zero:
        return True  # 0 is in O1(T) by the definition; callers ignore this case
    if _in_T(x):
        return False
    try:
        return _in_T(x + 1)
    except PrecisionExhausted:
        return False


def classify_in_construction(x: DyadicLike) -> ConstructionClass:
    """Classify x against O1, O2 and the maximal ideal, definitionally.

    The definitional predicates (with the O2 stability condition sampled on
    fixed O1 witnesses) are evaluated and then compared against the closed
    form: O1 = odd positive valuation, O2 = even nonnegative valuation.
    ``M_ONLY`` is returned only if the two disagree; the construction checks
    count any such answer as a violation.
    """
    x = Dyadic.from_rational(x)
    if x.is_zero:
        raise DivisionByZero("classify_in_construction needs a nonzero value")

    in_o1 = _in_O1(x)
    in_o2 = _in_T(x) and all(
        _in_O1(x * Dyadic.from_rational(w, x.k)) for w in _O1_WITNESSES
    )

    closed_o1 = x.v % 2 == 1 and x.v > 0
    closed_o2 = x.v % 2 == 0 and x.v >= 0

    if in_o1 != closed_o1 or in_o2 != closed_o2:
        return ConstructionClass.M_ONLY
    if in_o1:
        return ConstructionClass.O1
    if in_o2:
        return ConstructionClass.O2_UNIT if x.v == 0 else ConstructionClass.O2_NONUNIT
    return ConstructionClass.OUTSIDE


@dataclass
class ConstructionReport:
    samples: int
    seed: int
    precision: int
    violations: List[str]
    checks: Dict[str, bool]
    counts: Dict[str, int]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "seed": self.seed,
            "precision": self.precision,
            "ok": self.ok,
            "checks": self.checks,
            "counts": self.counts,
            "violations": self.violations,
        }


def _random_dyadic(rng: random.Random, k: int) -> Dyadic:
    v = rng.randint(-8, 8)
    u = rng.getrandbits(k - 1) << 1 | 1
    return Dyadic(v, u, k)


def verify_construction(
    samples: int, seed: int = 0, k: int = DEFAULT_PRECISION
) -> ConstructionReport:
    """Probe the valuation-ring construction on pseudo-random dyadics.

    Checks, on the sampled population: O = O1 u O2 is closed under addition
    and multiplication; units lie in O2; M = O1 u 2*O1 is an ideal; every
    unit x has 1+x in M (two-element residue field); no sample has
    0 < v(x) < v(2); and the sampled value group has exactly two classes
    modulo doubling.  Violations become report entries, not exceptions.
    """
    rng = random.Random(seed)
    violations: List[str] = []
    counts: Dict[str, int] = {c.value: 0 for c in ConstructionClass}
    checks = {
        "classification_matches_closed_form": True,
        "ring_closed_under_add": True,
        "ring_closed_under_mul": True,
        "units_in_O2": True,
        "maximal_ideal_is_O1_union_2O1": True,
        "maximal_ideal_is_ideal": True,
        "residue_field_has_two_elements": True,
        "v2_minimal_positive": True,
        "value_group_mod_2_has_order_2": True,
    }

    def note(check: str, msg: str) -> None:
        checks[check] = False
        if len(violations) < 50:
            violations.append(msg)

    pool: List[Dyadic] = []
    ring: List[Dyadic] = []
    for _ in range(samples):
        x = _random_dyadic(rng, k)
        pool.append(x)
        cls = classify_in_construction(x)
        counts[cls.value] += 1
        if cls is ConstructionClass.M_ONLY:
            note("classification_matches_closed_form", f"definitional/closed-form mismatch at {x!r}")
        if cls in (ConstructionClass.O1, ConstructionClass.O2_UNIT, ConstructionClass.O2_NONUNIT):
            ring.append(x)
        if x.v == 0 and cls is not ConstructionClass.O2_UNIT:
            note("units_in_O2", f"unit {x!r} not classified in O2")
        if 0 < x.v < 1:
            note("v2_minimal_positive", f"sampled 0 < v(x) < v(2) at {x!r}")

        in_m = x.v > 0
        in_o1_or_2o1 = _in_O1(x) or _in_O1(x / 2)
        if in_m != in_o1_or_2o1:
            note("maximal_ideal_is_O1_union_2O1", f"M decomposition fails at {x!r}")
        if x.v == 0:
            try:
                one_plus = x + 1
                if not one_plus.is_zero and not one_plus.v > 0:
                    note("residue_field_has_two_elements", f"1+{x!r} is a unit")
            except PrecisionExhausted:
                pass  # x = -1 to working precision: 1+x in M trivially

    for i in range(0, len(ring) - 1, 2):
        x, y = ring[i], ring[i + 1]
        prod = x * y
        if not (prod.is_zero or prod.v >= 0):
            note("ring_closed_under_mul", f"{x!r} * {y!r} leaves O")
        try:
            s = x + y
            if not (s.is_zero or s.v >= 0):
                note("ring_closed_under_add", f"{x!r} + {y!r} leaves O")
        except PrecisionExhausted:
            pass
        # ideal property: M * O subset of M, sampled on the same pairs
        if x.v > 0:
            if not (prod.is_zero or prod.v > 0):
                note("maximal_ideal_is_ideal", f"M member {x!r} times {y!r} leaves M")

    parities = {x.v & 1 for x in pool}
    if samples >= 2 and len(parities) != 2:
        note("value_group_mod_2_has_order_2", "sampled valuations cover one parity only")

    return ConstructionReport(
        samples=samples,
        seed=seed,
        precision=k,
        violations=violations,
        checks=checks,
        counts=counts,
    )


# ---------------------------------------------------------------------------
# Quadratic extension data and hypothesis sampling
# ---------------------------------------------------------------------------

def quad_ext_invariants(a: SquareClass) -> Tuple[int, int]:
    """(e, f) of the quadratic extension by a: unramified only for a ~ 5."""
    if a.index == 0:
        raise TrivialClass("the trivial class does not generate an extension")
    if a.label == "5":
        return (1, 2)
    return (2, 1)


@dataclass
class SampleResult:
    samples: List[Dict[str, Dyadic]]
    requested: int
    attempts: int
    unsatisfiable_at_budget: bool

    def values(self, atom: str) -> List[Dyadic]:
        return [s[atom] for s in self.samples]


def sample_hypothesis(
    hypotheses: Dict[str, "SquareClass | str"],
    count: int,
    seed: int = 0,
    k: int = DEFAULT_PRECISION,
    budget_factor: int = 300,
) -> SampleResult:
    """Draw assignments of the atoms whose classes match the hypotheses.

    ``hypotheses`` maps keys like ``"x"`` and ``"1+x"`` to square classes.
    Atoms are drawn with the correct class directly; derived keys are
    checked by rejection.  If the budget is exhausted without a single hit
    the result is flagged unsatisfiable-at-budget (a report, not an error).
    """
    group = CASE_A_GROUP
    atoms = sorted(key for key in hypotheses if "+" not in key)
    derived = {key: group.cls(v) for key, v in hypotheses.items() if "+" in key}
    wanted = {a: group.cls(hypotheses[a]) for a in atoms}

    rng = random.Random(seed)
    out: List[Dict[str, Dyadic]] = []
    attempts = 0
    budget = count * budget_factor
    while len(out) < count and attempts < budget:
        attempts += 1
        assignment: Dict[str, Dyadic] = {}
        for a in atoms:
            cls = wanted[a]
            v = (cls.index >> 1 & 1) + 2 * rng.randint(-2, 7)
            u = rng.getrandbits(k - 4) << 3 | _unit_for(cls.index)
            u %= 1 << k
            assignment[a] = Dyadic(v, u | 1, k)
        ok = True
        for key, cls in derived.items():
            atom = key.split("+")[1]
            try:
                val = assignment[atom] + 1
                if val.is_zero or square_class_of(val) != cls:
                    ok = False
                    break
            except PrecisionExhausted:
                ok = False
                break
        if ok:
            out.append(assignment)
    return SampleResult(
        samples=out,
        requested=count,
        attempts=attempts,
        unsatisfiable_at_budget=not out,
    )


def _unit_for(index: int) -> int:
    b_sign = index & 1
    b_five = index >> 2 & 1
    for residue, bits in _UNIT_BITS.items():
        if bits == (b_sign, b_five):
            return residue
    raise AssertionError("unreachable")


def eval_expr(expr: Expr, assignment: Dict[str, Dyadic], k: int = DEFAULT_PRECISION) -> Dyadic:
    """Evaluate an Expr with Case A (rational) coefficients exactly."""
    total = Dyadic.zero(k)
    for mono, scalar in expr.terms:
        term = Dyadic.from_rational(scalar.as_rational(), k)
        for atom in mono:
            term = term * assignment[atom]
        total = total + term
    return total
