"""Exact arithmetic in the square-class group K*/(K*)^2 as an F2-vector space.

The group has a fixed 3-element basis and therefore exactly 8 elements.
A class is stored as a 3-bit exponent vector (bit 0: the sign generator,
bit 1: the "2" generator, bit 2: the third generator, "5" or "c").
Subsets are stored as 8-bit masks indexed by class.

Everything here is immutable and pure; values can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, List, Sequence, Tuple


class MixedGroups(ValueError):
    """Raised when operands belong to class groups with different bases."""


class UnknownLabel(ValueError):
    """Raised when a label is not one of the 8 canonical class labels."""


@lru_cache(maxsize=None)
def _build_labels(basis: Tuple[str, str, str]) -> Tuple[str, ...]:
    """Canonical label for each of the 8 classes, indexed by bit vector."""
    labels = []
    for idx in range(8):
        parts = [basis[i] for i in (1, 2) if idx >> i & 1]
        numeric = 1
        symbolic = ""
        for p in parts:
            if p.isdigit():
                numeric *= int(p)
            else:
                symbolic += p
        body = ""
        if numeric != 1 or not symbolic:
            body = str(numeric)
        body += symbolic
        if idx & 1:
            body = "-" + body
        labels.append(body)
    return tuple(labels)


@dataclass(frozen=True)
class ClassGroup:
    """The 8-element group K*/(K*)^2 with an ordered 3-generator basis."""

    basis_labels: Tuple[str, str, str]

    def __post_init__(self) -> None:
        if len(self.basis_labels) != 3 or len(set(self.basis_labels)) != 3:
            raise ValueError("basis must consist of 3 distinct labels")

    @property
    def labels(self) -> Tuple[str, ...]:
        return _build_labels(self.basis_labels)

    def label_of(self, index: int) -> str:
        return self.labels[index]

    def index_of(self, label: str) -> int:
        label = label.strip().replace("−", "-").replace("−1", "-1")
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"{label!r} is not a class label of {self.basis_labels}") from None

    def cls(self, spec: "SquareClass | str | int") -> "SquareClass":
        """Coerce an index or label to a SquareClass of this group."""
        if isinstance(spec, SquareClass):
            if spec.group != self:
                raise MixedGroups(f"class {spec.label} belongs to {spec.group.basis_labels}")
            return spec
        if isinstance(spec, int):
            return SquareClass(self, spec)
        return SquareClass(self, self.index_of(spec))

    def subset(self, specs: Iterable["SquareClass | str | int"]) -> "ClassSet":
        mask = 0
        for s in specs:
            mask |= 1 << self.cls(s).index
        return ClassSet(self, mask)

    def full_set(self) -> "ClassSet":
        return ClassSet(self, 0xFF)

    def empty_set(self) -> "ClassSet":
        return ClassSet(self, 0)

    def elements(self) -> List["SquareClass"]:
        return [SquareClass(self, i) for i in range(8)]


#: Case A basis: the square classes of -1, 2 and 5.
CASE_A_GROUP = ClassGroup(("-1", "2", "5"))
#: Case B basis: the square classes of -1, 2 and c.
CASE_B_GROUP = ClassGroup(("-1", "2", "c"))


@dataclass(frozen=True)
class SquareClass:
    """A single square class, i.e. an exponent vector in F2^3."""

    group: ClassGroup
    index: int

    def __post_init__(self) -> None:
        if not 0 <= self.index < 8:
            raise ValueError(f"class index {self.index} out of range")

    @property
    def bits(self) -> Tuple[int, int, int]:
        return (self.index & 1, self.index >> 1 & 1, self.index >> 2 & 1)

    @property
    def label(self) -> str:
        return self.group.label_of(self.index)

    @property
    def is_identity(self) -> bool:
        return self.index == 0

    def mul(self, other: "SquareClass") -> "SquareClass":
        if self.group != other.group:
            raise MixedGroups("cannot multiply classes from different groups")
        return SquareClass(self.group, self.index ^ other.index)

    __mul__ = mul

    def inverse(self) -> "SquareClass":
        return self  # every element squares to the identity

    def negate(self) -> "SquareClass":
        """The class of -1 times this class."""
        return SquareClass(self.group, self.index ^ 1)

    def __repr__(self) -> str:
        return f"SquareClass({self.label!r})"


@dataclass(frozen=True)
class ClassSet:
    """A subset of the 8 square classes, stored as an 8-bit mask."""

    group: ClassGroup
    mask: int

    def __post_init__(self) -> None:
        if not 0 <= self.mask <= 0xFF:
            raise ValueError(f"mask {self.mask:#x} out of range")

    def __contains__(self, cls: "SquareClass | str | int") -> bool:
        return bool(self.mask >> self.group.cls(cls).index & 1)

    def __iter__(self) -> Iterator[SquareClass]:
        return iter(self.members())

    def __len__(self) -> int:
        return self.mask.bit_count()

    def members(self) -> List[SquareClass]:
        return [SquareClass(self.group, i) for i in range(8) if self.mask >> i & 1]

    def labels(self) -> List[str]:
        """Canonical serialization order: ascending class index."""
        return [self.group.label_of(i) for i in range(8) if self.mask >> i & 1]

    def _check(self, other: "ClassSet") -> None:
        if self.group != other.group:
            raise MixedGroups("sets belong to different class groups")

    def intersect(self, other: "ClassSet") -> "ClassSet":
        self._check(other)
        return ClassSet(self.group, self.mask & other.mask)

    __and__ = intersect

    def union(self, other: "ClassSet") -> "ClassSet":
        self._check(other)
        return ClassSet(self.group, self.mask | other.mask)

    __or__ = union

    def issubset(self, other: "ClassSet") -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def coset(self, a: "SquareClass | str | int") -> "ClassSet":
        """The set {a*s : s in self}; same cardinality as self."""
        a = self.group.cls(a)
        return ClassSet(self.group, coset_mask(a.index, self.mask))

    def pointwise_mul(self, other: "ClassSet") -> "ClassSet":
        """All products of a member of self with a member of other."""
        self._check(other)
        mask = 0
        for i in range(8):
            if self.mask >> i & 1:
                mask |= coset_mask(i, other.mask)
        return ClassSet(self.group, mask)

    def is_subgroup(self) -> bool:
        """Contains the identity and is closed under the group law."""
        if not self.mask & 1:
            return False
        for a in range(8):
            if not self.mask >> a & 1:
                continue
            if coset_mask(a, self.mask) != self.mask:
                return False
        return True

    def __repr__(self) -> str:
        return f"ClassSet({{{', '.join(self.labels())}}})"


@lru_cache(maxsize=None)
def _coset_table() -> Tuple[Tuple[int, ...], ...]:
    table = []
    for g in range(8):
        row = []
        for mask in range(256):
            out = 0
            for i in range(8):
                if mask >> i & 1:
                    out |= 1 << (i ^ g)
            row.append(out)
        table.append(tuple(row))
    return tuple(table)


def coset_mask(g: int, mask: int) -> int:
    """Image of an 8-bit subset mask under multiplication by class index g."""
    return _coset_table()[g][mask]


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def class_mul(a: SquareClass, b: SquareClass) -> SquareClass:
    """Group law: exponent-wise addition in F2."""
    return a.mul(b)


def parse_class(label: str, group: ClassGroup) -> SquareClass:
    """Parse a canonical signed product of basis generators, e.g. "-10" or "2c"."""
    return group.cls(label)


def format_class(cls: SquareClass) -> str:
    return cls.label


def set_intersect(sets: Sequence[ClassSet]) -> ClassSet:
    """Intersection of one or more class sets over a common group."""
    if not sets:
        raise ValueError("set_intersect needs at least one set")
    out = sets[0]
    for s in sets[1:]:
        out = out.intersect(s)
    return out


def coset(a: SquareClass, s: ClassSet) -> ClassSet:
    """The coset {a*x : x in s}."""
    if a.group != s.group:
        raise MixedGroups("class and set belong to different groups")
    return s.coset(a)
