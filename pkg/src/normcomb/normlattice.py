"""Norm-group lattices N(a) and the rules derived from them.

Three hard-coded lattices are provided, one per scenario:

* ``case-a``  -- the lattice shared by Q2 and any Case A field,
* ``case-b-k``  -- the Case B lattice over the algebraic part k (one norm
  group of index 4, so not Demushkin),
* ``case-b-K`` -- the Case B lattice over the big field K.

The lattices are data, validated by :func:`verify_lattice` rather than
derived from field theory.  On top of them sit the two derived rules the
whole engine runs on: the sum rule (the possible classes of p+q given the
classes of p and q) and the Hilbert symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Tuple

from .squareclass import (
    CASE_A_GROUP,
    CASE_B_GROUP,
    ClassGroup,
    ClassSet,
    SquareClass,
    coset_mask,
)

SCENARIOS = ("case-a", "case-b-k", "case-b-K")

# Generators of each norm group N(a), keyed by the label of a.
_GENERATORS = {
    "case-a": {
        "-1": ("2", "5"),
        "2": ("-1", "2"),
        "5": ("-1", "5"),
        "10": ("-1", "10"),
        "-2": ("2", "-5"),
        "-5": ("-2", "5"),
        "-10": ("-2", "-5"),
    },
    "case-b-k": {
        "-1": ("2", "c"),
        "2": ("-1", "2"),
        "c": ("-1", "c"),
        "2c": ("-1", "2c"),
        "-2": ("2",),
        "-c": ("c",),
        "-2c": ("2c",),
    },
    "case-b-K": {
        "-1": ("2", "c"),
        "2": ("-1", "2"),
        "c": ("-1", "c"),
        "2c": ("-1", "2c"),
        "-2": ("2", "-c"),
        "-c": ("c", "-2"),
        "-2c": ("2c", "-2"),
    },
}


def _span_mask(group: ClassGroup, gens: Tuple[str, ...]) -> int:
    mask = 1  # identity
    for g in gens:
        idx = group.index_of(g)
        mask |= coset_mask(idx, mask)
    return mask


@dataclass(frozen=True)
class NormLattice:
    """The map a -> N(a) for the 7 nonzero square classes of one scenario."""

    scenario: str
    group: ClassGroup
    masks: Tuple[int, ...]  # masks[i] = N(class index i+1), for i in 0..6

    def norm_group(self, a: "SquareClass | str | int") -> ClassSet:
        idx = self.group.cls(a).index
        if idx == 0:
            raise ValueError("N(a) is only defined for nonsquare classes a")
        return ClassSet(self.group, self.masks[idx - 1])

    def norm_mask(self, index: int) -> int:
        return self.masks[index - 1]

    def groups(self) -> Dict[str, ClassSet]:
        return {
            self.group.label_of(i): ClassSet(self.group, self.masks[i - 1])
            for i in range(1, 8)
        }

    def sum_masks(self) -> Tuple[Tuple[int, ...], ...]:
        """sum_masks()[a][b] = mask of possible classes of p+q for p~a, q~b.

        0xFF marks the degenerate b = -a case, where p+q may vanish.
        """
        return _sum_table(self)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "basis": list(self.group.basis_labels),
            "groups": {label: s.labels() for label, s in self.groups().items()},
        }

    def with_toggled(self, a: "SquareClass | str", member: "SquareClass | str") -> "NormLattice":
        """Copy of the lattice with one membership bit flipped (mutation testing)."""
        ai = self.group.cls(a).index
        mi = self.group.cls(member).index
        masks = list(self.masks)
        masks[ai - 1] ^= 1 << mi
        return NormLattice(self.scenario, self.group, tuple(masks))


@lru_cache(maxsize=None)
def _sum_table(lat: NormLattice) -> Tuple[Tuple[int, ...], ...]:
    table = []
    for a in range(8):
        row = []
        for b in range(8):
            d = 1 ^ a ^ b  # class index of -a*b
            if d == 0:
                row.append(0xFF)
            else:
                row.append(coset_mask(a, lat.norm_mask(d)))
        table.append(tuple(row))
    return tuple(table)


@lru_cache(maxsize=None)
def lattice(scenario: str) -> NormLattice:
    """The hard-coded norm lattice for a scenario."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    group = CASE_A_GROUP if scenario == "case-a" else CASE_B_GROUP
    gens = _GENERATORS[scenario]
    masks = [0] * 7
    for label, g in gens.items():
        masks[group.index_of(label) - 1] = _span_mask(group, g)
    return NormLattice(scenario, group, tuple(masks))


@dataclass(frozen=True)
class LatticeReport:
    scenario: str
    all_subgroups: bool
    reciprocity_holds: bool
    all_index_2: bool
    injective: bool
    failures: Tuple[str, ...]

    @property
    def demushkin_consistent(self) -> bool:
        return self.all_subgroups and self.reciprocity_holds and self.all_index_2 and self.injective

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "all_subgroups": self.all_subgroups,
            "reciprocity_holds": self.reciprocity_holds,
            "all_index_2": self.all_index_2,
            "injective": self.injective,
            "demushkin_consistent": self.demushkin_consistent,
            "failures": list(self.failures),
        }


def verify_lattice(lat: NormLattice) -> LatticeReport:
    """Exhaustive well-formedness check of a lattice (at most 8^3 steps).

    Failures are report content, never exceptions.
    """
    group = lat.group
    failures: List[str] = []

    all_subgroups = True
    for a in range(1, 8):
        s = ClassSet(group, lat.norm_mask(a))
        if not s.is_subgroup():
            all_subgroups = False
            failures.append(f"N({group.label_of(a)}) is not a subgroup")
        if 0 not in [m.index for m in s.members()] and not s.mask & 1:
            failures.append(f"N({group.label_of(a)}) does not contain 1")

    reciprocity = True
    for a in range(1, 8):
        for b in range(1, 8):
            in_ab = bool(lat.norm_mask(a) >> b & 1)
            in_ba = bool(lat.norm_mask(b) >> a & 1)
            if in_ab != in_ba:
                reciprocity = False
                failures.append(
                    f"reciprocity fails for ({group.label_of(a)}, {group.label_of(b)})"
                )

    all_index_2 = True
    for a in range(1, 8):
        if lat.norm_mask(a).bit_count() != 4:
            all_index_2 = False
            failures.append(f"N({group.label_of(a)}) does not have index 2")

    injective = len({lat.norm_mask(a) for a in range(1, 8)}) == 7
    if not injective:
        failures.append("a -> N(a) is not injective on nonsquare classes")

    return LatticeReport(
        scenario=lat.scenario,
        all_subgroups=all_subgroups,
        reciprocity_holds=reciprocity,
        all_index_2=all_index_2,
        injective=injective,
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class SumRuleResult:
    classes: ClassSet
    may_vanish: bool

    def to_json(self) -> dict:
        return {"classes": self.classes.labels(), "may_vanish": self.may_vanish}


def sum_rule(lat: NormLattice, a: SquareClass, b: SquareClass) -> SumRuleResult:
    """Possible classes of p+q when p ~ a and q ~ b.

    If b != -a the sum lies in the coset a*N(-a*b).  If b = -a the sum may
    be zero and nothing can be said: the full group is returned with
    ``may_vanish`` set, so callers can detect accidental reliance on it.
    """
    a = lat.group.cls(a)
    b = lat.group.cls(b)
    mask = lat.sum_masks()[a.index][b.index]
    vanish = (a.index ^ b.index) == 1
    return SumRuleResult(ClassSet(lat.group, mask if not vanish else 0xFF), vanish)


def hilbert_from_lattice(lat: NormLattice, a: SquareClass, b: SquareClass) -> int:
    """+1 iff b is a norm from K(sqrt(a)), read off the lattice; else -1."""
    a = lat.group.cls(a)
    b = lat.group.cls(b)
    if a.index == 0 or b.index == 0:
        return 1
    return 1 if lat.norm_mask(a.index) >> b.index & 1 else -1
