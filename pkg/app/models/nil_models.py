from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import sympy

N_SYMBOL = sympy.Symbol("n", integer=True)


class GeneratorId(NamedTuple):
    """Standard generator E_{row,col} of block ``block``; 0-based, row < col."""

    block: int
    row: int
    col: int

    @property
    def distance(self) -> int:
        return self.col - self.row


def _as_array(entries, exact: bool | None = None) -> np.ndarray:
    arr = np.asarray(entries)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected shape (r, p+1, p+1), got {arr.shape}")
    if exact or (exact is None and arr.dtype == object):
        return np.vectorize(Fraction, otypes=[object])(arr) if arr.size else arr.astype(object)
    return arr.astype(float)


@dataclass(frozen=True, eq=False)
class Unitriangular:
    """An element of T_p^r: r upper unitriangular (p+1)x(p+1) blocks.

    Float entries by default; object arrays of Fraction in exact mode.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_array(self.entries)
        size = arr.shape[1]
        lower = np.tril_indices(size, -1)
        diag = np.diagonal(arr, axis1=1, axis2=2)
        if any(d != 1 for d in diag.ravel()):
            raise ValueError("diagonal entries must be 1")
        if any(v != 0 for v in arr[:, lower[0], lower[1]].ravel()):
            raise ValueError("entries below the diagonal must vanish")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def p(self) -> int:
        return self.entries.shape[1] - 1

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    @classmethod
    def identity(cls, p: int, r: int = 1, exact: bool = False) -> Unitriangular:
        eye = np.broadcast_to(np.eye(p + 1), (r, p + 1, p + 1))
        return cls(_as_array(eye.astype(int) if exact else eye, exact))

    def __matmul__(self, other: Unitriangular) -> Unitriangular:
        return Unitriangular(np.matmul(self.entries, other.entries))

    def inverse(self) -> Unitriangular:
        nilpotent = self.entries - _eye_like(self.entries)
        term = _eye_like(self.entries)
        total = _eye_like(self.entries)
        for _ in range(self.p):
            term = np.matmul(term, -nilpotent)
            total = total + term
        return Unitriangular(total)

    def is_integral(self) -> bool:
        if self.exact:
            return all(Fraction(v).denominator == 1 for v in self.entries.ravel())
        return bool(np.all(self.entries == np.rint(self.entries)))

    def allclose(self, other: Unitriangular, atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.entries.astype(float), other.entries.astype(float), atol=atol, rtol=0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Unitriangular) or other.entries.shape != self.entries.shape:
            return NotImplemented
        return bool(np.all(self.entries == other.entries))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LieElement:
    """Strictly upper triangular blocks; an element of the Lie algebra of T_p^r."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_array(self.entries)
        size = arr.shape[1]
        lower = np.tril_indices(size)
        if any(v != 0 for v in arr[:, lower[0], lower[1]].ravel()):
            raise ValueError("Lie elements are strictly upper triangular")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def p(self) -> int:
        return self.entries.shape[1] - 1

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def generator(cls, gen: GeneratorId, p: int, r: int = 1, scale=1, exact: bool = False) -> LieElement:
        arr = np.zeros((r, p + 1, p + 1), dtype=object if exact else float)
        if exact:
            arr[...] = Fraction(0)
            arr[gen.block, gen.row, gen.col] = Fraction(scale)
        else:
            arr[gen.block, gen.row, gen.col] = float(scale)
        return cls(arr)

    def bracket(self, other: LieElement) -> LieElement:
        return LieElement(np.matmul(self.entries, other.entries) - np.matmul(other.entries, self.entries))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LieElement):
            return NotImplemented
        return bool(np.all(self.entries == other.entries))

    __hash__ = None


def _eye_like(arr: np.ndarray) -> np.ndarray:
    size = arr.shape[1]
    eye = np.broadcast_to(np.eye(size, dtype=int), arr.shape)
    if arr.dtype == object:
        return np.vectorize(Fraction, otypes=[object])(eye)
    return eye.astype(float)


@dataclass(frozen=True)
class Filtration:
    """G_0 >= G_1 >= ... >= G_{degree+1} = {1}, each G_i = T_p(level(i)).

    The lower central series of T_p has G_0 = G_1 = T_p and G_i = T_p(i-1).
    A finer filtration with dilation d sets G_i = G'_{ceil(i/d)} for the lower
    central series G'.
    """

    p: int
    r: int = 1
    dilation: int = 1

    @property
    def degree(self) -> int:
        return self.p * self.dilation

    @property
    def kind(self) -> str:
        return "lower-central" if self.dilation == 1 else f"finer(d={self.dilation})"

    def level(self, i: int) -> int:
        if i < 0:
            raise ValueError("filtration index must be non-negative")
        base_index = math.ceil(i / self.dilation)
        return min(max(0, base_index - 1), self.p)


@dataclass(frozen=True)
class MalcevBasis:
    p: int
    r: int
    elements: tuple[tuple[GeneratorId, int], ...]
    nested: bool = False
    adapted_to: Filtration | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        expected = {
            GeneratorId(b, i, j)
            for b in range(self.r)
            for i in range(self.p + 1)
            for j in range(i + 1, self.p + 1)
        }
        gens = [GeneratorId(*g) for g, _ in self.elements]
        if set(gens) != expected or len(gens) != len(expected):
            raise ValueError("a Mal'cev basis here is a signed reordering of the standard generators")
        if any(s not in (1, -1) for _, s in self.elements):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(
            self, "elements", tuple((GeneratorId(*g), s) for g, s in self.elements))

    @property
    def dimension(self) -> int:
        return len(self.elements)

    def tail(self, j: int) -> set[GeneratorId]:
        """Generators spanning h_j (0-based: h_0 is everything)."""
        return {g for g, _ in self.elements[j:]}


@dataclass(frozen=True, eq=False)
class PolynomialMapping:
    """n -> rho(n) in T_p^r with polynomial entries.

    ``entries`` maps (block, row, col) above the diagonal to a sympy
    expression in ``N_SYMBOL``; further symbols (shifts h, coefficients) may
    appear. Missing keys are zero.
    """

    p: int
    r: int
    entries: dict[GeneratorId, sympy.Expr]

    def __post_init__(self):
        cleaned: dict[GeneratorId, sympy.Expr] = {}
        for key, expr in self.entries.items():
            gen = GeneratorId(*key)
            if not (0 <= gen.block < self.r and 0 <= gen.row < gen.col <= self.p):
                raise ValueError(f"entry {tuple(gen)} is not above the diagonal of T_{self.p}^{self.r}")
            value = sympy.expand(sympy.sympify(expr))
            if value != 0:
                cleaned[gen] = value
        object.__setattr__(self, "entries", cleaned)

    def entry(self, block: int, row: int, col: int) -> sympy.Expr:
        return self.entries.get(GeneratorId(block, row, col), sympy.Integer(0))

    @property
    def degree(self) -> int:
        return max((sympy.Poly(e, N_SYMBOL).degree() for e in self.entries.values()), default=0)

    @property
    def constant_free(self) -> bool:
        return all(e.subs(N_SYMBOL, 0) == 0 for e in self.entries.values())

    @property
    def is_identity(self) -> bool:
        return not self.entries

    @property
    def is_constant(self) -> bool:
        return all(not e.has(N_SYMBOL) for e in self.entries.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolynomialMapping):
            return NotImplemented
        return (self.p, self.r) == (other.p, other.r) and all(
            sympy.expand(self.entry(*g) - other.entry(*g)) == 0
            for g in set(self.entries) | set(other.entries)
        )

    __hash__ = None
