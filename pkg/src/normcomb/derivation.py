"""The proof engine.

A :class:`KnowledgeBase` maps formal expressions to candidate sets of
square classes.  The engine narrows those sets with a single derivation
axiom (the sum rule of :mod:`normcomb.normlattice`): whenever a target can
be written exactly as ``u*E1 + v*E2`` for expressions with known candidate
sets and scalars with known classes, the target's set is intersected with
the union of the sum-rule results over all candidate assignments.

Narrowing runs to a fixpoint (a monotone operator on a finite lattice, so
the result is order-independent), and :func:`prove` adds the
branch-and-contradict layer: pick the most constrained undetermined
expression, split on its candidates, and discharge branches whose
propagation hits an empty set.

All derivations are recorded as checkable trace steps; the independent
checker lives in :mod:`normcomb.tracecheck`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from . import dyadic as _dyadic
from .exprs import Expr, RationalExpr, Scalar, parse_expr, verify_identity
from .normlattice import NormLattice, lattice
from .squareclass import ClassGroup, ClassSet, SquareClass, coset_mask

FULL = 0xFF


class ZeroScalar(ValueError):
    """The zero scalar has no square class."""


class MissingFact(KeyError):
    """A required expression has no fact in the knowledge base."""


class ContradictionFound(Exception):
    """Propagation produced an empty candidate set."""

    def __init__(self, expr_text: str, steps: Optional[List[dict]] = None):
        super().__init__(f"contradiction at {expr_text}")
        self.expr_text = expr_text
        self.steps = steps or []


class InconsistentHypotheses(Exception):
    """Every branch of a case split contradicts: the case itself is impossible."""


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

DERIVATION_SCENARIOS = ("case-a", "case-b-3is1", "case-b-3is2")


@dataclass(frozen=True)
class Scenario:
    """Derivation context: lattice, and the constant-class table for Case B."""

    name: str
    lat: NormLattice
    three_index: int  # class index of the rational 3
    c_table: Tuple[Tuple[Fraction, int], ...]  # t -> class index of (c - t)

    @property
    def group(self) -> ClassGroup:
        return self.lat.group

    @property
    def is_case_a(self) -> bool:
        return self.name == "case-a"

    def c_class(self, t: Fraction) -> Optional[int]:
        for key, idx in self.c_table:
            if key == t:
                return idx
        return None


def _case_b_rational_index(three_index: int, q: Fraction) -> Optional[int]:
    """Class index of a rational in Case B, or None if underivable.

    Only -1, 2 and 3 have known classes, so a rational is classifiable
    exactly when its squarefree part divides 6.
    """
    if q == 0:
        raise ZeroScalar("0 has no square class")
    idx = 1 if q < 0 else 0
    num, den = abs(q.numerator), q.denominator
    v2 = 0
    while num % 2 == 0:
        num //= 2
        v2 += 1
    while den % 2 == 0:
        den //= 2
        v2 -= 1
    v3 = 0
    while num % 3 == 0:
        num //= 3
        v3 += 1
    while den % 3 == 0:
        den //= 3
        v3 -= 1
    if v2 % 2:
        idx ^= 2
    if v3 % 2:
        idx ^= three_index
    if _is_perfect_square(num) and _is_perfect_square(den):
        return idx
    return None


def _is_perfect_square(n: int) -> bool:
    r = int(n**0.5)
    while r * r < n:
        r += 1
    while r * r > n:
        r -= 1
    return r * r == n


_SEED_C_TABLE = {
    # t -> class index of c - t, from the stored Case B constant data
    "case-b-3is2": {Fraction(0): 4, Fraction(1): 0, Fraction(2): 3, Fraction(3): 3, Fraction(4): 1},
    "case-b-3is1": {Fraction(0): 4, Fraction(1): 0, Fraction(2): 3, Fraction(3): 1, Fraction(4): 1},
}


def close_c_table(
    three_index: int,
    seed: Mapping[Fraction, int],
    lat: NormLattice,
    span: int = 6,
) -> Dict[Fraction, Dict[str, object]]:
    """Derive candidate classes for the constants c - t from a seed table.

    Every step is a sum-rule instance (c-t) = (c-s) + (s-t) with both
    summands of known class.  Returns, per t, the final candidate mask and
    whether it is pinned to a single class.
    """
    sums = lat.sum_masks()
    known: Dict[Fraction, int] = dict(seed)
    report: Dict[Fraction, Dict[str, object]] = {}
    pending = [Fraction(t) for t in range(-span, span + 1) if Fraction(t) not in known]
    changed = True
    while changed:
        changed = False
        for t in list(pending):
            mask = FULL
            for s, scls in known.items():
                diff = s - t
                if diff == 0:
                    continue
                try:
                    dcls = _case_b_rational_index(three_index, diff)
                except ZeroScalar:
                    continue
                if dcls is None:
                    continue
                mask &= sums[scls][dcls]
            report[t] = {"mask": mask, "pinned": mask.bit_count() == 1}
            if mask.bit_count() == 1 and t not in known:
                known[t] = mask.bit_length() - 1
                pending.remove(t)
                changed = True
    for t, idx in known.items():
        report[t] = {"mask": 1 << idx, "pinned": True}
    return report


@lru_cache(maxsize=None)
def scenario(name: str) -> Scenario:
    if name == "case-a":
        return Scenario("case-a", lattice("case-a"), three_index=5, c_table=())
    if name in ("case-b-3is1", "case-b-3is2"):
        three = 0 if name.endswith("3is1") else 2
        lat = lattice("case-b-K")
        seed = _SEED_C_TABLE[name]
        closed = close_c_table(three, seed, lat)
        table = tuple(
            sorted(
                ((t, (info["mask"]).bit_length() - 1) for t, info in closed.items() if info["pinned"]),
                key=lambda p: p[0],
            )
        )
        return Scenario(name, lat, three_index=three, c_table=table)
    raise ValueError(f"unknown derivation scenario {name!r}")


def scalar_class_index(scn: Scenario, s: Union[Scalar, Fraction, int]) -> Optional[int]:
    """Class index of a scalar, or None when not derivable from the tables."""
    s = Scalar.of(s)
    if s.is_zero:
        raise ZeroScalar("0 has no square class")
    if scn.is_case_a:
        if not s.is_rational:
            return None
        return _dyadic.rational_class_index(s.as_rational())
    if s.is_rational:
        return _case_b_rational_index(scn.three_index, s.as_rational())
    lead = s.coeffs[-1]
    idx = _case_b_rational_index(scn.three_index, lead)
    if idx is None:
        return None
    monic = s.divide_rational(lead)
    while monic.degree > 0:
        for t, tcls in scn.c_table:
            quotient = monic.monic_root_divide(t)
            if quotient is not None:
                idx ^= tcls
                monic = quotient
                break
        else:
            return None
    return idx


def scalar_class(kb: "KnowledgeBase", s: Union[Scalar, Fraction, int]) -> Optional[SquareClass]:
    """The square class of a scalar constant, or None (unknown)."""
    idx = scalar_class_index(kb.scenario, s)
    if idx is None:
        return None
    return SquareClass(kb.scenario.group, idx)


# ---------------------------------------------------------------------------
# Knowledge bases
# ---------------------------------------------------------------------------

ExprLike = Union[Expr, str]
FactLike = Union[SquareClass, ClassSet, str, int, Sequence[str]]


def _as_expr(e: ExprLike) -> Expr:
    return parse_expr(e) if isinstance(e, str) else e


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable snapshot: expression -> candidate class mask.

    ``notes`` carries human-readable justifications for injected facts
    (assumptions imported from previously proved results); they are copied
    into traces but play no logical role.
    """

    scenario: Scenario
    facts: Tuple[Tuple[Expr, int], ...]
    notes: Tuple[Tuple[Expr, str], ...] = ()

    def _mask_of(self, fact: FactLike) -> int:
        group = self.scenario.group
        if isinstance(fact, ClassSet):
            if fact.group != group:
                raise ValueError("fact set belongs to the wrong class group")
            return fact.mask
        if isinstance(fact, SquareClass):
            return 1 << group.cls(fact).index
        if isinstance(fact, (str, int)):
            return 1 << group.cls(fact).index
        mask = 0
        for label in fact:
            mask |= 1 << group.cls(label).index
        return mask

    def fact_map(self) -> Dict[Expr, int]:
        return dict(self.facts)

    def fact_set(self, e: ExprLike) -> ClassSet:
        e = _as_expr(e)
        for expr, mask in self.facts:
            if expr == e:
                return ClassSet(self.scenario.group, mask)
        raise MissingFact(e.format())

    def has_fact(self, e: ExprLike) -> bool:
        e = _as_expr(e)
        return any(expr == e for expr, _ in self.facts)

    def with_fact(self, e: ExprLike, fact: FactLike, note: Optional[str] = None) -> "KnowledgeBase":
        e = _as_expr(e)
        mask = self._mask_of(fact)
        if mask == 0:
            raise ValueError("an empty fact set is a contradiction, not a fact")
        items = [(expr, m) for expr, m in self.facts if expr != e]
        for expr, m in self.facts:
            if expr == e:
                mask &= m
        items.append((e, mask))
        items.sort(key=lambda t: t[0].sort_key())
        notes = self.notes if note is None else tuple(list(self.notes) + [(e, note)])
        return KnowledgeBase(self.scenario, tuple(items), notes)

    def note_for(self, e: Expr) -> Optional[str]:
        for expr, text in self.notes:
            if expr == e:
                return text
        return None


def make_kb(
    scenario_name: str,
    facts: Mapping[ExprLike, FactLike],
    assumptions: Optional[Mapping[ExprLike, Tuple[FactLike, str]]] = None,
) -> KnowledgeBase:
    """Build a knowledge base from labels, e.g. make_kb("case-a", {"x": "2"})."""
    kb = KnowledgeBase(scenario(scenario_name), ())
    for e, f in facts.items():
        kb = kb.with_fact(e, f)
    for e, (f, why) in (assumptions or {}).items():
        kb = kb.with_fact(e, f, note=why)
    return kb


# ---------------------------------------------------------------------------
# Decomposition plans
# ---------------------------------------------------------------------------

def _solve_unique(rows: List[Tuple[List[Fraction], Fraction]], n: int) -> Optional[List[Fraction]]:
    """Solve an overdetermined rational linear system, requiring a unique solution."""
    mat = [list(coeffs) + [rhs] for coeffs, rhs in rows]
    piv_rows: List[int] = []
    r = 0
    for col in range(n):
        piv = None
        for i in range(r, len(mat)):
            if mat[i][col] != 0:
                piv = i
                break
        if piv is None:
            return None  # rank deficient: no unique solution
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = 1 / mat[r][col]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        piv_rows.append(r)
        r += 1
    for i in range(r, len(mat)):
        if mat[i][n] != 0:
            return None  # inconsistent
    return [mat[i][n] for i in range(n)]


def _solve_pair(target: Expr, e1: Expr, e2: Expr) -> Optional[Tuple[Scalar, Scalar]]:
    """Scalars u, v with target = u*e1 + v*e2, if they exist uniquely."""
    monos = sorted(
        set(target.support()) | set(e1.support()) | set(e2.support()),
        key=lambda m: (len(m), m),
    )
    use_c = any(
        e.coeff(m).degree > 0 for e in (target, e1, e2) for m in monos
    )
    ncols = 4 if use_c else 2
    rows: List[Tuple[List[Fraction], Fraction]] = []
    for m in monos:
        a, b, t = e1.coeff(m), e2.coeff(m), target.coeff(m)
        top = max(a.degree + 1, b.degree + 1, t.degree, 0)
        for j in range(top + 1):
            if use_c:
                row = [a.coeff(j), a.coeff(j - 1), b.coeff(j), b.coeff(j - 1)]
            else:
                row = [a.coeff(j), b.coeff(j)]
            rows.append((row, t.coeff(j)))
    sol = _solve_unique(rows, ncols)
    if sol is None:
        return None
    if use_c:
        u, v = Scalar.linear(sol[0], sol[1]), Scalar.linear(sol[2], sol[3])
    else:
        u, v = Scalar.of(sol[0]), Scalar.of(sol[1])
    if u.is_zero or v.is_zero:
        return None
    return u, v


def _solve_scale(target: Expr, e: Expr) -> Optional[Scalar]:
    """A scalar u with target = u*e, if it exists."""
    monos = sorted(set(target.support()) | set(e.support()), key=lambda m: (len(m), m))
    use_c = any(x.coeff(m).degree > 0 for x in (target, e) for m in monos)
    ncols = 2 if use_c else 1
    rows: List[Tuple[List[Fraction], Fraction]] = []
    for m in monos:
        a, t = e.coeff(m), target.coeff(m)
        top = max(a.degree + 1, t.degree, 0)
        for j in range(top + 1):
            row = [a.coeff(j), a.coeff(j - 1)] if use_c else [a.coeff(j)]
            rows.append((row, t.coeff(j)))
    sol = _solve_unique(rows, ncols)
    if sol is None:
        return None
    u = Scalar.linear(sol[0], sol[1]) if use_c else Scalar.of(sol[0])
    return None if u.is_zero else u


@dataclass(frozen=True)
class _Decomp:
    """target = u*E1 + v*E2 (or target = u*E1 when e2 is None)."""

    e1: int  # pool index
    u: Scalar
    u_cls: int
    e2: Optional[int]
    v: Optional[Scalar]
    v_cls: Optional[int]
    u_fmt: str = ""
    v_fmt: str = ""


@dataclass
class _Plans:
    """Precomputed decomposition plans for one expression universe."""

    exprs: List[Expr]
    expr_index: Dict[Expr, int]
    # pool entries: (expr_idx, None) for plain expressions,
    # (i, j) for the product exprs[i] * atom_expr[j]
    pool: List[Tuple[int, Optional[int]]]
    pool_exprs: List[Expr]
    plans: Dict[int, List[_Decomp]]
    dependents: Dict[int, List[int]]
    scalar_seed: List[Optional[int]]
    expr_fmt: List[str] = field(default_factory=list)
    pool_fmt: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.expr_fmt:
            self.expr_fmt = [e.format() for e in self.exprs]
        if not self.pool_fmt:
            self.pool_fmt = [e.format() for e in self.pool_exprs]


def _build_plans(scn: Scenario, exprs: Tuple[Expr, ...], pool_degree: int) -> _Plans:
    expr_list = list(exprs)
    expr_index = {e: i for i, e in enumerate(expr_list)}
    atoms = sorted({a for e in expr_list for a in e.atoms()})
    atom_idx = {a: expr_index.get(Expr.atom(a)) for a in atoms}

    pool: List[Tuple[int, Optional[int]]] = [(i, None) for i in range(len(expr_list))]
    pool_exprs: List[Expr] = list(expr_list)
    for i, e in enumerate(expr_list):
        if e.degree() != 1 and not (pool_degree >= 2 and e.degree() == 0):
            continue
        for a in atoms:
            j = atom_idx[a]
            if j is None:
                continue
            prod = e * Expr.atom(a)
            if prod in expr_index or prod.degree() > 2:
                continue
            pool.append((i, j))
            pool_exprs.append(prod)
    if pool_degree >= 2:
        # products of two degree<=1 pool expressions (flagged extension)
        base = len(expr_list)
        for i, e in enumerate(expr_list):
            if e.degree() != 1:
                continue
            for j, f in enumerate(expr_list):
                if j <= i or f.degree() != 1:
                    continue
                prod = e * f
                if prod in expr_index or prod.degree() > 2:
                    continue
                pool.append((i, j))
                pool_exprs.append(prod)

    supports = [frozenset(e.support()) for e in pool_exprs]
    scalar_seed: List[Optional[int]] = []
    for e in expr_list:
        if e.is_scalar and not e.is_zero:
            scalar_seed.append(scalar_class_index(scn, e.scalar_value()))
        else:
            scalar_seed.append(None)

    plans: Dict[int, List[_Decomp]] = {}
    dependents: Dict[int, List[int]] = {i: [] for i in range(len(expr_list))}

    def refs_of(pool_i: int) -> Tuple[int, ...]:
        base, other = pool[pool_i]
        return (base,) if other is None else (base, other)

    n_pool = len(pool_exprs)
    for ti, target in enumerate(expr_list):
        tsupp = frozenset(target.support())
        out: List[_Decomp] = []
        for p1 in range(n_pool):
            if pool[p1] == (ti, None):
                continue
            s1 = supports[p1]
            # scale decompositions
            if s1 == tsupp:
                u = _solve_scale(target, pool_exprs[p1])
                if u is not None:
                    ucls = scalar_class_index(scn, u)
                    if ucls is not None:
                        out.append(_Decomp(p1, u, ucls, None, None, None, u.format()))
            for p2 in range(p1 + 1, n_pool):
                if pool[p2] == (ti, None):
                    continue
                if pool[p1][1] is not None and pool[p2][1] is not None:
                    continue  # skip product*product pairs
                s2 = supports[p2]
                union = s1 | s2
                if not tsupp <= union:
                    continue
                if not (union - tsupp) <= (s1 & s2):
                    continue
                sol = _solve_pair(target, pool_exprs[p1], pool_exprs[p2])
                if sol is None:
                    continue
                u, v = sol
                ucls = scalar_class_index(scn, u)
                vcls = scalar_class_index(scn, v)
                if ucls is None or vcls is None:
                    continue
                out.append(_Decomp(p1, u, ucls, p2, v, vcls, u.format(), v.format()))
        plans[ti] = out
        seen = set()
        for d in out:
            for p in (d.e1,) + ((d.e2,) if d.e2 is not None else ()):
                for ref in refs_of(p):
                    if (ref, ti) not in seen:
                        seen.add((ref, ti))
                        dependents.setdefault(ref, []).append(ti)

    return _Plans(expr_list, expr_index, pool, pool_exprs, plans, dependents, scalar_seed)


@lru_cache(maxsize=64)
def _cached_plans(scn_name: str, exprs: Tuple[Expr, ...], pool_degree: int) -> _Plans:
    return _build_plans(scenario(scn_name), exprs, pool_degree)


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------

def _bits(mask: int) -> Iterable[int]:
    while mask:
        b = mask & -mask
        yield b.bit_length() - 1
        mask ^= b


class _Engine:
    """Fixpoint propagation and branching over a fixed expression universe."""

    def __init__(
        self,
        kb: KnowledgeBase,
        targets: Sequence[Expr],
        pool_degree: int = 1,
        record: bool = True,
    ):
        self.scn = kb.scenario
        self.group = self.scn.group
        self.sum_table = self.scn.lat.sum_masks()
        universe = {e for e, _ in kb.facts}
        universe.update(targets)
        universe.add(Expr.one())
        ordered = tuple(sorted(universe, key=lambda e: e.sort_key()))
        self.plans = _cached_plans(self.scn.name, ordered, pool_degree)
        self.exprs = self.plans.exprs
        self.record = record
        self.steps: List[dict] = []
        self._label_memo: Dict[int, List[str]] = {}

        self.masks: List[int] = []
        fact_map = kb.fact_map()
        for i, e in enumerate(self.exprs):
            mask = FULL
            seed = self.plans.scalar_seed[i]
            if seed is not None:
                mask = 1 << seed
            if e in fact_map:
                mask &= fact_map[e]
            self.masks.append(mask)
            if mask == 0:
                raise ContradictionFound(e.format(), [])

    # -- trace helpers ------------------------------------------------------

    def _labels(self, mask: int) -> List[str]:
        memo = self._label_memo
        got = memo.get(mask)
        if got is None:
            got = [self.group.label_of(i) for i in range(8) if mask >> i & 1]
            memo[mask] = got
        return list(got)

    def index_of(self, e: Expr) -> int:
        try:
            return self.plans.expr_index[e]
        except KeyError:
            raise MissingFact(e.format()) from None

    def fact_labels(self) -> Dict[str, List[str]]:
        return {e.format(): self._labels(m) for e, m in zip(self.exprs, self.masks)}

    # -- evaluation ----------------------------------------------------------

    def _pool_mask(self, pool_i: int) -> int:
        base, other = self.plans.pool[pool_i]
        if other is None:
            return self.masks[base]
        e_base = self.plans.exprs[base]
        e_other = self.plans.exprs[other]
        if e_base == e_other:
            return 1  # a square: class is trivially 1
        m1, m2 = self.masks[base], self.masks[other]
        out = 0
        for a in _bits(m1):
            out |= coset_mask(a, m2)
        return out

    def _eval_decomp(self, d: _Decomp) -> int:
        m1 = coset_mask(d.u_cls, self._pool_mask(d.e1))
        if d.e2 is None:
            return m1  # exact transport: target = u * E1
        m2 = coset_mask(d.v_cls, self._pool_mask(d.e2))
        res = 0
        table = self.sum_table
        for a in _bits(m1):
            row = table[a]
            for b in _bits(m2):
                res |= row[b]
            if res == FULL:
                return FULL
        return res

    def _decomp_record(self, d: _Decomp, result: int) -> dict:
        def describe(pool_i: int) -> Tuple[str, Optional[List[str]], List[str]]:
            base, other = self.plans.pool[pool_i]
            factors = None
            if other is not None:
                factors = [self.plans.expr_fmt[base], self.plans.expr_fmt[other]]
            return self.plans.pool_fmt[pool_i], factors, self._labels(self._pool_mask(pool_i))

        e1, f1, set1 = describe(d.e1)
        rec = {
            "e1": e1,
            "e1_factors": f1,
            "set1": set1,
            "u": d.u_fmt,
            "result": self._labels(result),
        }
        if d.e2 is not None:
            e2, f2, set2 = describe(d.e2)
            rec.update({"e2": e2, "e2_factors": f2, "set2": set2, "v": d.v_fmt})
        return rec

    # -- fixpoint -------------------------------------------------------------

    def propagate(self, seeds: Optional[Iterable[int]] = None) -> None:
        pending = set(range(len(self.exprs))) if seeds is None else set(seeds)
        while pending:
            ti = min(pending)
            pending.discard(ti)
            old = self.masks[ti]
            new = old
            records: List[dict] = []
            for d in self.plans.plans.get(ti, []):
                res = self._eval_decomp(d)
                if res != FULL:
                    new &= res
                    if self.record:
                        records.append(self._decomp_record(d, res))
            if new == old:
                continue
            self.masks[ti] = new
            if self.record:
                self.steps.append(
                    {
                        "kind": "derive",
                        "target": self.plans.expr_fmt[ti],
                        "before": self._labels(old),
                        "after": self._labels(new),
                        "decomps": records,
                    }
                )
            if new == 0:
                raise ContradictionFound(self.plans.expr_fmt[ti], self.steps)
            for dep in self.plans.dependents.get(ti, []):
                if dep != ti:
                    pending.add(dep)

    # -- branching -------------------------------------------------------------

    def _branch_candidate(self) -> Optional[int]:
        best = None
        best_n = 9
        for i, mask in enumerate(self.masks):
            n = mask.bit_count()
            if 2 <= n < best_n:
                best, best_n = i, n
        return best

    def prove(self, goals: Dict[int, int], depth: int, seeds: Optional[Iterable[int]] = None) -> Tuple[str, Dict[int, int]]:
        """Returns (status, final masks for goal targets); raises on contradiction."""
        self.propagate(seeds)
        if all(self.masks[ti] & ~goal == 0 for ti, goal in goals.items()):
            return "proved", {ti: self.masks[ti] for ti in goals}
        if depth <= 0:
            return "stuck", {ti: self.masks[ti] for ti in goals}
        ei = self._branch_candidate()
        if ei is None:
            return "stuck", {ti: self.masks[ti] for ti in goals}

        saved_masks = list(self.masks)
        saved_steps = self.steps
        node = {
            "kind": "branch",
            "on": self.plans.expr_fmt[ei],
            "set": self._labels(saved_masks[ei]),
            "candidates": [],
        }
        branch_seeds = set(self.plans.dependents.get(ei, ())) | {ei}
        surviving: List[Tuple[str, Dict[int, int]]] = []
        for cls in _bits(saved_masks[ei]):
            self.masks = list(saved_masks)
            self.masks[ei] = 1 << cls
            self.steps = []
            entry = {"cls": self.group.label_of(cls)}
            try:
                status, finals = self.prove(goals, depth - 1, seeds=branch_seeds)
                entry["verdict"] = status
                entry["final"] = {
                    self.plans.expr_fmt[ti]: self._labels(m) for ti, m in finals.items()
                }
                surviving.append((status, finals))
            except ContradictionFound as exc:
                entry["verdict"] = "contradiction"
                entry["at"] = exc.expr_text
            entry["steps"] = self.steps
            node["candidates"].append(entry)

        self.masks = saved_masks
        self.steps = saved_steps
        if self.record:
            self.steps.append(node)
        if not surviving:
            raise ContradictionFound(self.plans.expr_fmt[ei], self.steps)

        merged: Dict[int, int] = {ti: 0 for ti in goals}
        for _, finals in surviving:
            for ti, m in finals.items():
                merged[ti] |= m
        for ti, m in merged.items():
            self.masks[ti] = m
        status = (
            "proved"
            if all(st == "proved" for st, _ in surviving)
            else "stuck"
        )
        if self.record:
            node["merged"] = {
                self.plans.expr_fmt[ti]: self._labels(m) for ti, m in merged.items()
            }
        return status, merged


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def decompose_step(kb: KnowledgeBase, target: ExprLike) -> ClassSet:
    """One round of decomposition search for a single target.

    Intersects the results of every pool decomposition of the target with
    any direct fact already stored for it.  Raises
    :class:`ContradictionFound` if the intersection is empty.
    """
    target = _as_expr(target)
    if target.is_zero:
        raise ValueError("the zero expression has no square class")
    eng = _Engine(kb, [target], record=False)
    ti = eng.index_of(target)
    mask = eng.masks[ti]
    for d in eng.plans.plans.get(ti, []):
        mask &= eng._eval_decomp(d)
    if mask == 0:
        raise ContradictionFound(target.format())
    return ClassSet(kb.scenario.group, mask)


def propagate(kb: KnowledgeBase, targets: Sequence[ExprLike]) -> KnowledgeBase:
    """Run decomposition to a fixpoint over the kb facts and the targets.

    The result is order-independent (greatest fixpoint of a monotone
    narrowing operator on a finite lattice); sets only ever shrink.
    """
    exprs = [_as_expr(t) for t in targets]
    eng = _Engine(kb, exprs, record=False)
    eng.propagate()
    out = kb
    for e, mask in zip(eng.exprs, eng.masks):
        if e == Expr.one():
            continue
        out = out.with_fact(e, ClassSet(kb.scenario.group, mask))
    return out


@dataclass
class ProveResult:
    status: str  # "proved" | "stuck"
    target: Expr
    goal: ClassSet
    final: ClassSet
    trace: dict

    @property
    def proved(self) -> bool:
        return self.status == "proved"


def prove_case(
    kb: KnowledgeBase,
    goals: Mapping[ExprLike, FactLike],
    depth: int = 3,
    extra_targets: Sequence[ExprLike] = (),
    pool_degree: int = 1,
) -> Tuple[str, Dict[Expr, ClassSet], dict]:
    """Prove several targets at once against their goal sets.

    Returns (status, final sets, trace).  Raises
    :class:`InconsistentHypotheses` when every branch contradicts.
    """
    goal_exprs = {_as_expr(e): kb._mask_of(f) for e, f in goals.items()}
    targets = list(goal_exprs) + [_as_expr(t) for t in extra_targets]
    eng = _Engine(kb, targets, pool_degree=pool_degree)
    goal_idx = {eng.index_of(e): m for e, m in goal_exprs.items()}
    trace: dict = {
        "schema": "normcomb-trace/1",
        "scenario": kb.scenario.name,
        "pool_degree": pool_degree,
        "hypotheses": [
            {
                "expr": e.format(),
                "classes": ClassSet(kb.scenario.group, m).labels(),
                "kind": "assumption" if kb.note_for(e) else "hypothesis",
                **({"why": kb.note_for(e)} if kb.note_for(e) else {}),
            }
            for e, m in kb.facts
        ],
        "goals": [
            {
                "target": e.format(),
                "goal": ClassSet(kb.scenario.group, m).labels(),
            }
            for e, m in goal_exprs.items()
        ],
    }
    try:
        status, finals = eng.prove(goal_idx, depth)
    except ContradictionFound as exc:
        trace["steps"] = exc.steps
        trace["status"] = "hypothesis-impossible"
        trace["contradiction_at"] = exc.expr_text
        raise InconsistentHypotheses(trace) from exc
    trace["steps"] = eng.steps
    trace["status"] = status
    trace["final"] = {
        eng.exprs[ti].format(): eng._labels(m) for ti, m in finals.items()
    }
    final_sets = {
        e: ClassSet(kb.scenario.group, finals[eng.index_of(e)]) for e in goal_exprs
    }
    return status, final_sets, trace


def prove(
    kb: KnowledgeBase,
    target: ExprLike,
    goal: FactLike,
    depth: int = 3,
    extra_targets: Sequence[ExprLike] = (),
    pool_degree: int = 1,
) -> ProveResult:
    """Propagate, then case-split until the target's set lies inside the goal.

    Running out of depth is not an error: the result is simply ``stuck``
    with the best set found.  If the hypotheses themselves are impossible,
    :class:`InconsistentHypotheses` is raised.
    """
    target = _as_expr(target)
    status, finals, trace = prove_case(
        kb, {target: goal}, depth=depth, extra_targets=extra_targets, pool_degree=pool_degree
    )
    goal_set = ClassSet(kb.scenario.group, kb._mask_of(goal))
    return ProveResult(status, target, goal_set, finals[target], trace)


def substitute_transform(kb: KnowledgeBase, a: Union[Scalar, Fraction, int], var: str) -> KnowledgeBase:
    """Introduce the fresh atom var' = -a*var/(1 + a*var).

    Requires facts for ``var`` and ``1 + a*var``.  The new facts follow
    from the identities var' = -a*var/(1+a*var) and 1+var' = 1/(1+a*var):
    class(var') = class(-a) * class(var) * class(1+a*var) pointwise, and
    class(1+var') = class(1+a*var).
    """
    a = Scalar.of(a)
    a_idx = scalar_class_index(kb.scenario, a)
    if a_idx is None:
        raise ValueError(f"substitution scale {a.format()} has unknown class")
    var_e = Expr.atom(var)
    shifted = Expr.one() + Expr.atom(var, a)
    if not kb.has_fact(var_e):
        raise MissingFact(var)
    if not kb.has_fact(shifted):
        raise MissingFact(shifted.format())
    var_mask = kb.fact_set(var_e).mask
    shift_mask = kb.fact_set(shifted).mask

    prime = var + "'"
    while kb.has_fact(Expr.atom(prime)):
        prime += "'"
    new_mask = 0
    for alpha in _bits(var_mask):
        for beta in _bits(shift_mask):
            new_mask |= 1 << (1 ^ a_idx ^ alpha ^ beta)
    group = kb.scenario.group
    kb = kb.with_fact(Expr.atom(prime), ClassSet(group, new_mask),
                      note=f"{prime} = -({a.format()})*{var}/(1+({a.format()})*{var})")
    kb = kb.with_fact(Expr.one() + Expr.atom(prime), ClassSet(group, shift_mask),
                      note=f"1+{prime} = 1/(1+({a.format()})*{var})")
    return kb
