from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from app.utils.utils import Scalar

BOUNDARY_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SequenceFn:
    """A finite sequence indexed by ``start .. start + len - 1``.

    With ``cyclic`` the sequence lives on Z/len and indices wrap; ``start`` is
    then 0.
    """

    values: np.ndarray
    start: int = 1
    cyclic: bool = False
    disc_valued: bool = False

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        if values.ndim != 1:
            raise ValueError("sequence values must be one-dimensional")
        if self.cyclic and self.start != 0:
            raise ValueError("cyclic sequences are indexed from 0")
        if self.disc_valued and values.dtype != object and values.size:
            if np.max(np.abs(values)) > 1 + BOUNDARY_TOLERANCE:
                raise ValueError("disc-valued sequence has |value| > 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def stop(self) -> int:
        return self.start + len(self.values) - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self.values))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def at(self, n: int):
        if self.cyclic:
            return self.values[n % len(self.values)]
        if not self.start <= n <= self.stop:
            raise IndexError(f"index {n} outside [{self.start}, {self.stop}]")
        return self.values[n - self.start]

    @classmethod
    def on_interval(cls, values, disc_valued: bool = False) -> SequenceFn:
        return cls(np.asarray(values), start=1, disc_valued=disc_valued)

    @classmethod
    def on_group(cls, values, disc_valued: bool = False) -> SequenceFn:
        return cls(np.asarray(values), start=0, cyclic=True, disc_valued=disc_valued)


RealSeq = SequenceFn
ComplexSeq = SequenceFn


def _le(a: Scalar, b: Scalar) -> bool:
    return a <= b or (isinstance(a, float) or isinstance(b, float)) and float(a) - float(b) <= BOUNDARY_TOLERANCE


@dataclass(frozen=True)
class IntervalSpec:
    """A subinterval of (-1/2, 1/2] with explicit end-point closure."""

    lo: Scalar
    hi: Scalar
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")
        if self.lo < Fraction(-1, 2) or self.hi > Fraction(1, 2):
            raise ValueError("interval must lie in (-1/2, 1/2]")
        if self.lo == Fraction(-1, 2) and self.lo_closed:
            raise ValueError("-1/2 is not a fractional part")

    @classmethod
    def centered(cls, eps: Scalar) -> IntervalSpec:
        """I_eps = (-eps, eps)."""
        if eps <= 0 or eps > Fraction(1, 2):
            raise ValueError(f"I_eps needs 0 < eps <= 1/2, got {eps}")
        return cls(-eps, eps)

    @classmethod
    def full(cls) -> IntervalSpec:
        return cls(Fraction(-1, 2), Fraction(1, 2), hi_closed=True)

    @property
    def width(self) -> Scalar:
        return self.hi - self.lo

    @property
    def is_centered(self) -> bool:
        return self.lo == -self.hi and self.lo_closed == self.hi_closed

    def contains(self, x: Scalar) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return bool(above and below)

    def contains_array(self, values: np.ndarray) -> np.ndarray:
        if values.dtype == object:
            return np.array([self.contains(v) for v in values], dtype=bool)
        lo, hi = float(self.lo), float(self.hi)
        above = values >= lo if self.lo_closed else values > lo
        below = values <= hi if self.hi_closed else values < hi
        return above & below

    def is_subset_of(self, other: IntervalSpec) -> bool:
        lo_ok = _le(other.lo, self.lo) and not (
            self.lo == other.lo and self.lo_closed and not other.lo_closed)
        hi_ok = _le(self.hi, other.hi) and not (
            self.hi == other.hi and self.hi_closed and not other.hi_closed)
        return lo_ok and hi_ok

    def widened(self, factor: Scalar) -> IntervalSpec:
        """Same centre, width scaled, clipped to (-1/2, 1/2]."""
        centre = (self.lo + self.hi) / 2
        half = self.width * factor / 2
        lo = max(centre - half, Fraction(-1, 2))
        hi = min(centre + half, Fraction(1, 2))
        return IntervalSpec(lo, hi, self.lo_closed and lo != Fraction(-1, 2), self.hi_closed or hi == Fraction(1, 2))

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo}, {self.hi}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class Constraint:
    nu: object  # a realised bracket polynomial
    target: IntervalSpec


@dataclass(frozen=True)
class RecurrenceSetSpec:
    """B_N(nu_1..nu_r; S_1..S_r)."""

    constraints: tuple[Constraint, ...]
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True)
class PigeonholeResult:
    intervals: tuple[IntervalSpec, ...]
    subset: np.ndarray = field(compare=False)
    bound: float
