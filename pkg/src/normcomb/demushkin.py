"""Abelianization invariants of Demushkin presentations.

A presentation has N+2 generators and one relation whose commutator part
dies in the abelianization, leaving a single exponent row vector.  Its
Smith normal form (here just a gcd, since the matrix has one row) gives
the torsion part; the free rank is the number of generators minus one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple


@dataclass(frozen=True)
class DemushkinPresentation:
    """Invariants (p, N, s) of a Demushkin group of rank N+2.

    ``s`` is the exponent with p^s the largest prime-power root of unity in
    the field; ``s = None`` encodes s = infinity (torsion-free relation).
    """

    p: int
    n: int
    s: Optional[int]

    def __post_init__(self) -> None:
        if self.p < 2:
            raise ValueError("p must be a prime >= 2")
        if self.n < 1:
            raise ValueError("the degree N must be positive")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be >= 1 (or None for infinity)")

    @property
    def rank(self) -> int:
        return self.n + 2

    def relation_vector(self) -> List[int]:
        """Exponents of the single relation on the N+2 generators."""
        vec = [0] * self.rank
        if self.s is None:
            return vec
        q = self.p**self.s
        if q == 2:
            vec[0], vec[1] = 2, 4
        else:
            vec[0] = q
        return vec


def _snf_single_row(row: List[int]) -> int:
    """Smith normal form of a 1 x n integer matrix: the gcd of the entries."""
    return math.gcd(*row) if any(row) else 0


@dataclass(frozen=True)
class AbelianInvariants:
    torsion_order: int  # 1 means torsion-free
    free_rank: int

    def to_json(self) -> dict:
        return {"torsion_order": self.torsion_order, "free_rank": self.free_rank}

    def __str__(self) -> str:
        parts = []
        if self.torsion_order > 1:
            parts.append(f"Z/{self.torsion_order}")
        parts.append(f"Z_p^{self.free_rank}")
        return " x ".join(parts)


def abelianization(pres: DemushkinPresentation) -> AbelianInvariants:
    """Invariants of the abelianized group: Z/p^s x Z_p^(N+1).

    For p^s = 2 the relation row is (2, 4, 0, ...), whose gcd is still 2.
    For s = infinity the relation is trivial and the group is free abelian
    of rank N+2.
    """
    row = pres.relation_vector()
    torsion = _snf_single_row(row)
    if torsion == 0:
        return AbelianInvariants(1, pres.rank)
    return AbelianInvariants(torsion, pres.rank - 1)


def square_class_rank(n: int, p: int) -> int:
    """dim of L*/(L*)^p for a degree-n extension of Q_p containing zeta_p."""
    if n < 1:
        raise ValueError("the degree must be positive")
    return n + 2
