import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, seed, settings, strategies as st

from app.schemas.run_schema import NumericMode
from app.services.bracket_service import (
    components,
    degree_bound,
    eval_at,
    eval_many,
    frac,
    generalized_family_form,
    int_part,
    mul_poly_forms,
    nested_bracket_form,
    numeric_mode_of,
    realize,
    symbols_of,
)
from app.services.dsl_service import parse_form, print_form
from app.utils.errors import ExactModeError, MissingBindingError
from tests.test_dsl_service import bracket_forms

SQRT2, SQRT3 = math.sqrt(2), math.sqrt(3)


@pytest.mark.parametrize(
    "x, expected",
    [(0.6, -0.4), (0.5, 0.5), (-0.5, 0.5), (3.0, 0.0), (Fraction(7, 4), Fraction(-1, 4))],
)
def test_frac(x, expected):
    assert frac(x) == pytest.approx(expected)


@pytest.mark.parametrize("x, expected", [(0.75, 1), (3, 3), (-0.5, -1), (Fraction(-3, 2), -2)])
def test_int_part(x, expected):
    assert int_part(x) == expected


@seed(20240603)
@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=97), st.integers(-50, 50))
def test_frac_is_shift_invariant_and_splits_exactly(x, m):
    assert frac(x + m) == frac(x)
    assert Fraction(-1, 2) < frac(x) <= Fraction(1, 2)
    assert int_part(x) + frac(x) == x
    assert int_part(x).denominator == 1


@seed(20240604)
@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_frac_float_split(x):
    assert -0.5 < frac(x) <= 0.5
    assert abs(int_part(x) + frac(x) - x) <= 1e-12 * max(1.0, abs(x))


def test_mul_poly_forms():
    a = parse_form("-a1*n").leaf
    b = parse_form("-a2*n^3").leaf

    assert mul_poly_forms(a, b) == parse_form("a1*a2*n^4").leaf


def test_degree_bound():
    assert degree_bound(parse_form("{a1*n*{a2*n}}")) == 2
    assert degree_bound(parse_form("a1*n + a2*n^2 - a1*a2*n^3")) == 3
    assert degree_bound(parse_form("{a1*n}*{a2*n^2}")) == 3
    assert degree_bound(parse_form("{a1*n} + {a2*n^2}")) == 2


def test_realize_keeps_shape():
    p = realize(parse_form("{a1*n*{a2*n}}"), {1: SQRT2, 2: SQRT3})

    assert p.degree_bound == 2
    assert p.constant_free
    assert eval_at(p, 5) == pytest.approx(frac(SQRT2 * 5 * frac(SQRT3 * 5)))


def test_realize_without_symbols_is_unchanged_in_value():
    p = realize(parse_form("2*n + {1/2*n}"), {})

    assert eval_at(p, 3) == pytest.approx(6.5)
    assert eval_at(p, 3, NumericMode.EXACT) == Fraction(13, 2)


def test_realize_missing_binding():
    with pytest.raises(MissingBindingError) as excinfo:
        realize(parse_form("{a1*n}"), {})

    assert excinfo.value.symbol == 1
    assert "a1" in excinfo.value.detail


@seed(20240605)
@settings(max_examples=200, deadline=None)
@given(bracket_forms)
def test_realize_preserves_degree_and_constant_freeness(f):
    p = realize(f, {1: SQRT2, 2: Fraction(1, 3), 3: -0.25})

    assert p.degree_bound == f.degree_bound
    assert p.constant_free == f.constant_free


def test_eval_three_tenths():
    p = realize(parse_form("{3/10*n}"), {})

    assert eval_at(p, 6) == pytest.approx(-0.2)
    assert eval_at(p, 6, NumericMode.EXACT) == Fraction(-1, 5)


def test_eval_one_tenth_pattern_exact():
    p = realize(parse_form("{1/10*n}"), {})
    expected = [Fraction(x, 10) for x in (1, 2, 3, 4, 5, -4, -3, -2, -1, 0)]

    assert list(eval_many(p, range(1, 11), NumericMode.EXACT)) == expected


def test_eval_many_matches_eval_at(realized):
    p = realized("a1*n*{a2*n} - {a1*n^2}", {1: SQRT2, 2: SQRT3})
    ns = np.arange(1, 50)

    np.testing.assert_allclose(eval_many(p, ns), [eval_at(p, int(n)) for n in ns], atol=1e-12)


def test_exact_mode_rejects_float_bindings(realized):
    p = realized("{a1*n}", {1: SQRT2})

    with pytest.raises(ExactModeError):
        eval_many(p, [1, 2], NumericMode.EXACT)


def test_numeric_mode_of(realized):
    assert numeric_mode_of(realized("{a1*n}", {1: Fraction(1, 3)})) == NumericMode.EXACT
    assert numeric_mode_of(realized("{a1*n}", {1: 2})) == NumericMode.EXACT
    assert numeric_mode_of(realized("{a1*n}", {1: 0.5})) == NumericMode.FLOAT


def test_components_of_polynomial_is_empty():
    assert components(parse_form("a1*n + a2*n^2")) == []


def test_components_in_post_order():
    f = parse_form("n*{a1*n*{a2*n}*{a3*n}}")

    assert components(f) == [parse_form("a2*n"), parse_form("a3*n"), parse_form("a1*n*{a2*n}*{a3*n}")]


def test_components_through_negation():
    f = parse_form("{-{a1*n}}")

    assert components(f) == [parse_form("a1*n"), parse_form("-{a1*n}")]


def test_components_are_deduplicated():
    f = parse_form("{a1*n}*{a1*n} + {a2*n}")

    assert components(f) == [parse_form("a1*n"), parse_form("a2*n")]


@seed(20240606)
@settings(max_examples=200, deadline=None)
@given(bracket_forms)
def test_components_of_constant_free_forms_are_constant_free(f):
    if f.constant_free:
        assert all(nu.constant_free for nu in components(f))


def test_nested_bracket_form():
    f = nested_bracket_form(4)

    assert print_form(f) == "a3*n*{a2*n*{a1*n}}"
    assert f.degree_bound == 3
    assert symbols_of(f) == {1, 2, 3}
    with pytest.raises(ValueError):
        nested_bracket_form(1)


def test_generalized_family_form():
    f, index = generalized_family_form(1, 0, 1, 1)

    assert print_form(f) == "a3*n*{a2*{a1*n}}"
    assert index == 3

    outer, outer_index = generalized_family_form(1, 0, 1, 1, outer=True)
    assert print_form(outer) == "a4*n*{a3*n*{a2*{a1*n}}}"
    assert outer_index == 4
