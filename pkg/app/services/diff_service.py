import logging
from fractions import Fraction

import numpy as np

from app.models.bracket_models import BracketNode
from app.models.sequence_models import IntervalSpec, SequenceFn
from app.schemas.run_schema import NumericMode
from app.services.bracket_service import eval_many
from app.utils.errors import PreconditionError
from app.utils.utils import Scalar, frac, phase, write_csv

logger = logging.getLogger(__name__)

FRAC_TOLERANCE = 1e-12


def delta(phi: SequenceFn, h: int) -> SequenceFn:
    """Delta_h phi(n) = phi(n+h) - phi(n) on the n with n, n+h both in the domain."""
    if phi.cyclic:
        return SequenceFn(np.roll(phi.values, -h) - phi.values, start=0, cyclic=True)
    length = len(phi)
    lo, hi = max(0, -h), min(length, length - h)
    if hi <= lo:
        return SequenceFn(phi.values[:0], start=phi.start + lo)
    return SequenceFn(phi.values[lo + h:hi + h] - phi.values[lo:hi], start=phi.start + lo)


def delta_iter(phi: SequenceFn, hs) -> SequenceFn:
    for h in hs:
        phi = delta(phi, h)
    return phi


def mult_delta(f: SequenceFn, h: int) -> SequenceFn:
    """Delta*_h f(x) = f(x+h) conj(f(x))."""
    if f.cyclic:
        return SequenceFn(np.roll(f.values, -h) * np.conj(f.values), start=0, cyclic=True)
    length = len(f)
    lo, hi = max(0, -h), min(length, length - h)
    if hi <= lo:
        return SequenceFn(f.values[:0], start=f.start + lo)
    return SequenceFn(f.values[lo + h:hi + h] * np.conj(f.values[lo:hi]), start=f.start + lo)


def _close(a: Scalar, b: Scalar) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return abs(float(a) - float(b)) <= FRAC_TOLERANCE
    return a == b


def frac_difference_check(x: Scalar, y: Scalar, J: IntervalSpec) -> bool:
    """If {x} and {y} both lie in J (width < 1/2) then {x} - {y} = {x - y}.

    For J centred on 0 also {x} + {y} = {x + y}. Returns True when the
    premise fails.
    """
    if J.width >= Fraction(1, 2):
        raise PreconditionError(f"interval width {J.width} must be < 1/2")
    fx, fy = frac(x), frac(y)
    if not (J.contains(fx) and J.contains(fy)):
        return True
    holds = _close(fx - fy, frac(x - y))
    if J.is_centered:
        holds = holds and _close(fx + fy, frac(x + y))
    return holds


def frac_sum_check(x: Scalar, y: Scalar, J: IntervalSpec) -> bool:
    """{x} + {y} = {x + y} whenever {x}, {y} lie in a centred J of width < 1/2."""
    if J.width >= Fraction(1, 2) or not J.is_centered:
        raise PreconditionError("needs an interval centred on 0 of width < 1/2")
    fx, fy = frac(x), frac(y)
    if not (J.contains(fx) and J.contains(fy)):
        return True
    return _close(fx + fy, frac(x + y))


def bracket_sequence(p: BracketNode, N: int, mode: NumericMode = NumericMode.FLOAT) -> SequenceFn:
    return SequenceFn.on_interval(eval_many(p, np.arange(1, N + 1), mode))


def phase_sequence(p: BracketNode, N: int) -> SequenceFn:
    """e(phi(n)) on [1, N]."""
    return SequenceFn.on_interval(phase(eval_many(p, np.arange(1, N + 1))), disc_valued=True)


def indicator_sequence(B, N: int) -> SequenceFn:
    values = np.zeros(N)
    members = np.array(sorted(B), dtype=int)
    if members.size:
        if members.min() < 1 or members.max() > N:
            raise PreconditionError(f"set is not contained in [1, {N}]")
        values[members - 1] = 1.0
    return SequenceFn.on_interval(values, disc_valued=True)


def sequence_to_csv(seq: SequenceFn, path=None) -> str:
    if seq.is_complex:
        rows = ([n, float(v.real), float(v.imag)] for n, v in zip(seq.indices, seq.values))
        return write_csv(["index", "re", "im"], rows, path)
    return write_csv(["index", "value"], ([n, v] for n, v in zip(seq.indices, seq.values)), path)
