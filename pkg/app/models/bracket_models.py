from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from app.utils.utils import Scalar


@dataclass(frozen=True)
class MonomialForm:
    """``sign * coefficient * a_{s1} ... a_{sj} * n^power``."""

    sign: int = 1
    symbols: tuple[int, ...] = ()
    power: int = 0
    coefficient: Fraction = Fraction(1)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.power < 0:
            raise ValueError(f"power must be non-negative, got {self.power}")
        if any(s < 1 for s in self.symbols):
            raise ValueError("symbol indices start at 1")
        coefficient = Fraction(self.coefficient)
        if coefficient < 0:
            raise ValueError("coefficient must be non-negative; use the sign")
        object.__setattr__(self, "symbols", tuple(sorted(self.symbols)))
        object.__setattr__(self, "coefficient", coefficient)

    @property
    def constant_free(self) -> bool:
        return self.power != 0

    def sort_key(self) -> tuple:
        return (self.power, self.symbols, self.sign, self.coefficient)

    def __mul__(self, other: MonomialForm) -> MonomialForm:
        return MonomialForm(
            sign=self.sign * other.sign,
            symbols=self.symbols + other.symbols,
            power=self.power + other.power,
            coefficient=self.coefficient * other.coefficient,
        )

    def __neg__(self) -> MonomialForm:
        return MonomialForm(-self.sign, self.symbols, self.power, self.coefficient)


@dataclass(frozen=True)
class PolynomialForm:
    terms: tuple[MonomialForm, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple(sorted(self.terms, key=MonomialForm.sort_key)))

    @property
    def degree(self) -> int:
        return max((t.power for t in self.terms), default=0)

    @property
    def constant_free(self) -> bool:
        return all(t.constant_free for t in self.terms)

    @property
    def symbols(self) -> frozenset[int]:
        return frozenset(s for t in self.terms for s in t.symbols)

    def __add__(self, other: PolynomialForm) -> PolynomialForm:
        return PolynomialForm(self.terms + other.terms)

    def __mul__(self, other: PolynomialForm) -> PolynomialForm:
        return PolynomialForm(tuple(a * b for a in self.terms for b in other.terms))

    def __neg__(self) -> PolynomialForm:
        return PolynomialForm(tuple(-t for t in self.terms))


@dataclass(frozen=True)
class RealPolynomial:
    """A realised polynomial form: one (coefficient, power) pair per monomial."""

    terms: tuple[tuple[Scalar, int], ...] = ()

    @property
    def degree(self) -> int:
        return max((p for _, p in self.terms), default=0)

    @property
    def constant_free(self) -> bool:
        return all(p != 0 for _, p in self.terms)

    @property
    def exact(self) -> bool:
        return all(not isinstance(c, float) for c, _ in self.terms)


Leaf = Union[PolynomialForm, RealPolynomial]


@dataclass(frozen=True)
class Poly:
    leaf: Leaf
    degree_bound: int = field(init=False, compare=False, repr=False)
    constant_free: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "degree_bound", self.leaf.degree)
        object.__setattr__(self, "constant_free", self.leaf.constant_free)


@dataclass(frozen=True)
class Neg:
    child: BracketNode
    degree_bound: int = field(init=False, compare=False, repr=False)
    constant_free: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "degree_bound", self.child.degree_bound)
        object.__setattr__(self, "constant_free", self.child.constant_free)


@dataclass(frozen=True)
class Frac:
    child: BracketNode
    degree_bound: int = field(init=False, compare=False, repr=False)
    constant_free: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "degree_bound", self.child.degree_bound)
        object.__setattr__(self, "constant_free", self.child.constant_free)


@dataclass(frozen=True)
class Sum:
    left: BracketNode
    right: BracketNode
    degree_bound: int = field(init=False, compare=False, repr=False)
    constant_free: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "degree_bound", max(self.left.degree_bound, self.right.degree_bound))
        object.__setattr__(
            self, "constant_free", self.left.constant_free and self.right.constant_free)


@dataclass(frozen=True)
class Prod:
    left: BracketNode
    right: BracketNode
    degree_bound: int = field(init=False, compare=False, repr=False)
    constant_free: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "degree_bound", self.left.degree_bound + self.right.degree_bound)
        object.__setattr__(
            self, "constant_free", self.left.constant_free and self.right.constant_free)


BracketNode = Union[Poly, Neg, Frac, Sum, Prod]
# A BracketForm has PolynomialForm leaves; a BracketPolynomial has RealPolynomial leaves.
BracketForm = BracketNode
BracketPolynomial = BracketNode


def poly_of(*terms: MonomialForm) -> Poly:
    return Poly(PolynomialForm(terms))


def make_neg(child: BracketNode) -> BracketNode:
    if isinstance(child, Poly) and isinstance(child.leaf, PolynomialForm):
        return Poly(-child.leaf)
    return Neg(child)


def make_sum(left: BracketNode, right: BracketNode) -> BracketNode:
    if (isinstance(left, Poly) and isinstance(right, Poly)
            and isinstance(left.leaf, PolynomialForm) and isinstance(right.leaf, PolynomialForm)):
        return Poly(left.leaf + right.leaf)
    return Sum(left, right)


def make_prod(left: BracketNode, right: BracketNode) -> BracketNode:
    if (isinstance(left, Poly) and isinstance(right, Poly)
            and isinstance(left.leaf, PolynomialForm) and isinstance(right.leaf, PolynomialForm)):
        return Poly(left.leaf * right.leaf)
    return Prod(left, right)


def make_frac(child: BracketNode) -> BracketNode:
    return Frac(child)
