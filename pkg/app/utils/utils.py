import csv
import io
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from app.config.config import settings

Scalar = int | float | Fraction


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def frac(x: Scalar) -> Scalar:
    """Fractional part chosen in (-1/2, 1/2]."""
    if isinstance(x, float):
        return x - math.ceil(x - 0.5)
    if isinstance(x, np.integer):
        x = int(x)
    return x - math.ceil(x - Fraction(1, 2))


def int_part(x: Scalar) -> Scalar:
    return x - frac(x)


def frac_array(values: np.ndarray) -> np.ndarray:
    if values.dtype == object:
        return np.array([frac(v) for v in values], dtype=object)
    return values - np.ceil(values - 0.5)


def circle_norm(values: np.ndarray) -> np.ndarray:
    """Distance to the nearest integer, ``||x||_{R/Z}``."""
    return np.abs(frac_array(values)).astype(float)


def phase(values) -> np.ndarray:
    """e(x) = exp(2 pi i x), with the integer part removed first."""
    arr = np.asarray(values)
    if arr.dtype == object:
        reduced = np.array([float(frac(v)) for v in arr.ravel()]).reshape(arr.shape)
    else:
        reduced = arr - np.rint(arr)
    return np.exp(2j * np.pi * reduced)


def complex_fsum(values: Iterable[complex]) -> complex:
    vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
    if vals.size == 0:
        return 0j
    vals = vals.astype(complex).ravel()
    return complex(math.fsum(vals.real), math.fsum(vals.imag))


def make_rng(seed: int | None = None) -> np.random.Generator:
    return np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)


def scalar_to_str(x: Scalar) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path: str | Path | None = None) -> str:
    """Write rows with a header; returns the CSV text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([scalar_to_str(v) if isinstance(v, (Fraction, float)) else v for v in row])
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def next_power_of_two(x: int) -> int:
    return 1 << max(0, (x - 1).bit_length())
