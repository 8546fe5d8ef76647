"""Formal expressions with exact scalar coefficients.

A :class:`Scalar` is a polynomial in the symbolic constant ``c`` with
rational coefficients (plain rationals in Case A; the Case B arguments only
ever need degree <= 1, higher degrees appear transiently while checking
identities).  An :class:`Expr` is a linear combination of monomials in
named atoms (``x``, ``y``, substitution-introduced ``x'`` ...) with Scalar
coefficients.  A :class:`RationalExpr` is a quotient of two Exprs and
exists so that identities such as ``(1+x)*(1-2x/(1+x)) = 1-x`` can be
verified exactly by cross-multiplication.

No floating point is used anywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple, Union

RationalLike = Union[int, Fraction]


class ExprSyntaxError(ValueError):
    """Raised when an expression string cannot be parsed."""


# ---------------------------------------------------------------------------
# Scalars: polynomials in c over Q
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scalar:
    """q0 + q1*c + q2*c^2 + ...  with exact rational coefficients."""

    coeffs: Tuple[Fraction, ...]  # trimmed: last entry nonzero (or empty = 0)

    @staticmethod
    def of(value: "Scalar | RationalLike") -> "Scalar":
        if isinstance(value, Scalar):
            return value
        return Scalar._make([Fraction(value)])

    @staticmethod
    def linear(q0: RationalLike, q1: RationalLike) -> "Scalar":
        return Scalar._make([Fraction(q0), Fraction(q1)])

    @staticmethod
    def c() -> "Scalar":
        return Scalar.linear(0, 1)

    @staticmethod
    def _make(coeffs: Iterable[Fraction]) -> "Scalar":
        cs = list(coeffs)
        while cs and cs[-1] == 0:
            cs.pop()
        return Scalar(tuple(cs))

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    @property
    def is_rational(self) -> bool:
        return self.degree <= 0

    @property
    def is_linear(self) -> bool:
        return self.degree <= 1

    def coeff(self, power: int) -> Fraction:
        if 0 <= power < len(self.coeffs):
            return self.coeffs[power]
        return Fraction(0)

    def as_rational(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is not a rational constant")
        return self.coeff(0)

    def __add__(self, other: "Scalar | RationalLike") -> "Scalar":
        other = Scalar.of(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Scalar._make([self.coeff(i) + other.coeff(i) for i in range(n)])

    def __sub__(self, other: "Scalar | RationalLike") -> "Scalar":
        return self + (-Scalar.of(other))

    def __neg__(self) -> "Scalar":
        return Scalar._make([-q for q in self.coeffs])

    def __mul__(self, other: "Scalar | RationalLike") -> "Scalar":
        other = Scalar.of(other)
        if self.is_zero or other.is_zero:
            return Scalar(())
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Scalar._make(out)

    def divide_rational(self, q: RationalLike) -> "Scalar":
        q = Fraction(q)
        return Scalar._make([a / q for a in self.coeffs])

    def monic_root_divide(self, root: RationalLike) -> Optional["Scalar"]:
        """Divide by (c - root) if root is a root; None otherwise."""
        root = Fraction(root)
        if self.is_zero:
            return None
        # synthetic division
        out: List[Fraction] = []
        acc = Fraction(0)
        for q in reversed(self.coeffs):
            acc = q + acc * root
            out.append(acc)
        remainder = out.pop()
        if remainder != 0:
            return None
        out.reverse()
        return Scalar._make(out)

    def format(self) -> str:
        if self.is_zero:
            return "0"
        parts: List[str] = []
        for power in range(self.degree, -1, -1):
            q = self.coeff(power)
            if q == 0:
                continue
            if power == 0:
                term = str(q)
            else:
                cpow = "c" if power == 1 else f"c^{power}"
                if q == 1:
                    term = cpow
                elif q == -1:
                    term = f"-{cpow}"
                elif q.denominator == 1:
                    term = f"{q}{cpow}"
                else:
                    term = f"({q}){cpow}"
            if parts and not term.startswith("-"):
                parts.append("+" + term)
            else:
                parts.append(term)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Scalar({self.format()})"


ZERO = Scalar(())
ONE = Scalar.of(1)


# ---------------------------------------------------------------------------
# Expressions: linear combinations of monomials in atoms
# ---------------------------------------------------------------------------

Monomial = Tuple[str, ...]  # sorted atom names, with repetition for powers


def _mono_key(m: Monomial) -> Tuple[int, Monomial]:
    return (len(m), m)


@dataclass(frozen=True)
class Expr:
    """Canonical linear combination of monomials with Scalar coefficients.

    Terms are sorted by monomial and zero coefficients are dropped, so two
    Exprs compare equal iff they are the same formal expression.
    """

    terms: Tuple[Tuple[Monomial, Scalar], ...]

    @staticmethod
    def from_dict(d: Dict[Monomial, Scalar]) -> "Expr":
        items = [(m, s) for m, s in d.items() if not s.is_zero]
        items.sort(key=lambda t: _mono_key(t[0]))
        return Expr(tuple(items))

    @staticmethod
    def const(value: "Scalar | RationalLike") -> "Expr":
        return Expr.from_dict({(): Scalar.of(value)})

    @staticmethod
    def atom(name: str, coeff: "Scalar | RationalLike" = 1) -> "Expr":
        return Expr.from_dict({(name,): Scalar.of(coeff)})

    @staticmethod
    def one() -> "Expr":
        return Expr.const(1)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_scalar(self) -> bool:
        return all(m == () for m, _ in self.terms)

    def scalar_value(self) -> Scalar:
        if not self.is_scalar:
            raise ValueError(f"{self.format()} is not a scalar expression")
        return self.terms[0][1] if self.terms else ZERO

    def coeff(self, m: Monomial) -> Scalar:
        for mono, s in self.terms:
            if mono == m:
                return s
        return ZERO

    def support(self) -> Tuple[Monomial, ...]:
        return tuple(m for m, _ in self.terms)

    def atoms(self) -> Tuple[str, ...]:
        seen = []
        for m, _ in self.terms:
            for a in m:
                if a not in seen:
                    seen.append(a)
        return tuple(sorted(seen))

    def degree(self) -> int:
        return max((len(m) for m, _ in self.terms), default=0)

    def __add__(self, other: "Expr") -> "Expr":
        d = dict(self.terms)
        for m, s in other.terms:
            d[m] = d.get(m, ZERO) + s
        return Expr.from_dict(d)

    def __sub__(self, other: "Expr") -> "Expr":
        return self + (-other)

    def __neg__(self) -> "Expr":
        return Expr(tuple((m, -s) for m, s in self.terms))

    def scale(self, s: "Scalar | RationalLike") -> "Expr":
        s = Scalar.of(s)
        if s.is_zero:
            return Expr(())
        return Expr.from_dict({m: q * s for m, q in self.terms})

    def __mul__(self, other: "Expr") -> "Expr":
        out: Dict[Monomial, Scalar] = {}
        for m1, s1 in self.terms:
            for m2, s2 in other.terms:
                m = tuple(sorted(m1 + m2))
                out[m] = out.get(m, ZERO) + s1 * s2
        return Expr.from_dict(out)

    def substitute(self, assignment: Dict[str, "RationalExpr"]) -> "RationalExpr":
        """Evaluate with atoms replaced by rational expressions."""
        total = RationalExpr.zero()
        for m, s in self.terms:
            term = RationalExpr.from_expr(Expr.const(s))
            for a in m:
                term = term * assignment[a]
            total = total + term
        return total

    def format(self) -> str:
        if not self.terms:
            return "0"
        parts: List[str] = []
        for m, s in self.terms:
            body = "*".join(m)
            if not m:
                chunk = s.format()
            elif s == ONE:
                chunk = body
            elif s == Scalar.of(-1):
                chunk = f"-{body}"
            elif s.is_rational:
                chunk = f"{s.format()}*{body}"
            else:
                chunk = f"({s.format()})*{body}"
            if parts:
                if chunk.startswith("-"):
                    parts.append(" - " + chunk[1:])
                else:
                    parts.append(" + " + chunk)
            else:
                parts.append(chunk)
        return "".join(parts)

    def sort_key(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"Expr({self.format()})"


# ---------------------------------------------------------------------------
# Parsing (the canonical linear-combination format used in traces)
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[a-z]'*|[a-z]\^(?P<pow>\d+))"
    r"|(?P<op>[-+*()])|(?P<end>$))"
)


def _tokenize(text: str) -> List[str]:
    text = text.replace("−", "-")
    tokens: List[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos and not m.group("end"):
            raise ExprSyntaxError(f"cannot tokenize {text!r} at offset {pos}")
        if m.end() == pos:
            break
        tok = m.group("num") or m.group("name") or m.group("op")
        if tok is None:
            break
        tokens.append(tok)
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent parser for sums of scalar*monomial terms."""

    def __init__(self, tokens: List[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression")
        self.pos += 1
        return tok

    def parse_sum(self) -> Expr:
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.take() == "-" else 1
        expr = self.parse_term().scale(sign)
        while self.peek() in ("+", "-"):
            op = self.take()
            term = self.parse_term()
            expr = expr + term.scale(-1 if op == "-" else 1)
        return expr

    def parse_term(self) -> Expr:
        factors = [self.parse_factor()]
        while self.peek() == "*":
            self.take()
            factors.append(self.parse_factor())
        out = factors[0]
        for f in factors[1:]:
            out = out * f
        return out

    def parse_factor(self) -> Expr:
        tok = self.take()
        if tok == "(":
            inner = self.parse_sum()
            if self.take() != ")":
                raise ExprSyntaxError("unbalanced parentheses")
            return inner
        if re.fullmatch(r"\d+(/\d+)?", tok):
            return Expr.const(Fraction(tok))
        if tok == "c" or tok.startswith("c^"):
            power = 1 if tok == "c" else int(tok.split("^")[1])
            s = ONE
            for _ in range(power):
                s = s * Scalar.c()
            return Expr.const(s)
        if re.fullmatch(r"[a-z]'*", tok):
            return Expr.atom(tok)
        if tok.count("^"):
            name, p = tok.split("^")
            out = Expr.one()
            for _ in range(int(p)):
                out = out * Expr.atom(name)
            return out
        raise ExprSyntaxError(f"unexpected token {tok!r}")


def parse_expr(text: str) -> Expr:
    """Inverse of :meth:`Expr.format` (also accepts parenthesized sums)."""
    parser = _Parser(_tokenize(text))
    expr = parser.parse_sum()
    if parser.peek() is not None:
        raise ExprSyntaxError(f"trailing input in {text!r}")
    return expr


def parse_scalar(text: str) -> Scalar:
    expr = parse_expr(text)
    return expr.scalar_value()


# ---------------------------------------------------------------------------
# Rational expressions and identity checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalExpr:
    """A quotient num/den of two Exprs; den must not be identically zero."""

    num: Expr
    den: Expr

    def __post_init__(self) -> None:
        if self.den.is_zero:
            raise ZeroDivisionError("denominator is identically zero")

    @staticmethod
    def from_expr(e: "Expr | RationalExpr") -> "RationalExpr":
        if isinstance(e, RationalExpr):
            return e
        return RationalExpr(e, Expr.one())

    @staticmethod
    def zero() -> "RationalExpr":
        return RationalExpr(Expr(()), Expr.one())

    def __add__(self, other: "RationalExpr") -> "RationalExpr":
        return RationalExpr(self.num * other.den + other.num * self.den, self.den * other.den)

    def __sub__(self, other: "RationalExpr") -> "RationalExpr":
        return self + (-other)

    def __neg__(self) -> "RationalExpr":
        return RationalExpr(-self.num, self.den)

    def __mul__(self, other: "RationalExpr") -> "RationalExpr":
        return RationalExpr(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "RationalExpr") -> "RationalExpr":
        if other.num.is_zero:
            raise ZeroDivisionError("division by the zero rational expression")
        return RationalExpr(self.num * other.den, self.den * other.num)

    def format(self) -> str:
        if self.den == Expr.one():
            return self.num.format()
        return f"({self.num.format()}) / ({self.den.format()})"

    def __repr__(self) -> str:
        return f"RationalExpr({self.format()})"


ExprLike = Union[Expr, RationalExpr]


def verify_identity(lhs: ExprLike, rhs: ExprLike) -> bool:
    """True iff lhs - rhs is the zero rational function.

    Comparison is by exact cross-multiplication, assuming denominators are
    not identically zero (enforced at construction).
    """
    a = RationalExpr.from_expr(lhs)
    b = RationalExpr.from_expr(rhs)
    return (a.num * b.den - b.num * a.den).is_zero
