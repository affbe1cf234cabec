from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, seed, strategies as st

from app.models.sequence_models import IntervalSpec, SequenceFn
from app.schemas.run_schema import NumericMode
from app.services.diff_service import (
    bracket_sequence,
    delta,
    delta_iter,
    frac_difference_check,
    frac_sum_check,
    indicator_sequence,
    mult_delta,
    phase_sequence,
    sequence_to_csv,
)
from app.utils.errors import PreconditionError

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=64)


def test_delta_on_an_interval():
    squares = SequenceFn.on_interval([1, 4, 9, 16])

    forward = delta(squares, 1)
    assert forward.start == 1
    np.testing.assert_array_equal(forward.values, [3, 5, 7])

    backward = delta(squares, -1)
    assert backward.start == 2
    np.testing.assert_array_equal(backward.values, [-3, -5, -7])

    assert len(delta(squares, 4)) == 0


def test_iterated_delta_of_a_quadratic_is_constant():
    squares = SequenceFn.on_interval(np.arange(1, 11) ** 2)

    np.testing.assert_array_equal(delta_iter(squares, [1, 2]).values, [4] * 7)
    np.testing.assert_array_equal(delta_iter(squares, [1, 1, 1]).values, [0] * 7)


def test_delta_wraps_on_a_group():
    f = SequenceFn.on_group([0, 1, 2, 3])

    np.testing.assert_array_equal(delta(f, 1).values, [1, 1, 1, -3])
    assert delta(f, 1).cyclic


def test_mult_delta_of_a_linear_phase():
    f = SequenceFn.on_group(np.exp(2j * np.pi * np.arange(8) / 8))

    np.testing.assert_allclose(mult_delta(f, 3).values, np.exp(2j * np.pi * 3 / 8) * np.ones(8))


def test_frac_difference_check_examples():
    J = IntervalSpec.centered(Fraction(1, 5))

    assert frac_difference_check(Fraction(1, 10), Fraction(1, 20), J)
    assert frac_difference_check(Fraction(21, 10), Fraction(-31, 20), J)
    assert frac_difference_check(0.1, 0.05, IntervalSpec.centered(0.2))


def test_frac_difference_check_needs_a_narrow_interval():
    with pytest.raises(PreconditionError):
        frac_difference_check(0.1, 0.2, IntervalSpec.centered(0.3))


def test_frac_sum_check_needs_a_centred_interval():
    with pytest.raises(PreconditionError):
        frac_sum_check(0.1, 0.2, IntervalSpec(0.0, 0.2))


@seed(20240607)
@given(fractions, fractions, st.fractions(min_value=Fraction(1, 100), max_value=Fraction(6, 25), max_denominator=100))
def test_fractional_parts_add_inside_a_small_interval(x, y, eps):
    J = IntervalSpec.centered(eps)

    assert frac_difference_check(x, y, J)
    assert frac_sum_check(x, y, J)


def test_bracket_and_phase_sequences(realized):
    p = realized("{1/10*n}")

    exact = bracket_sequence(p, 10, NumericMode.EXACT)
    assert exact.at(6) == Fraction(-2, 5)
    assert exact.indices[0] == 1

    phases = phase_sequence(p, 10)
    assert phases.disc_valued
    assert abs(phases.at(10) - 1) < 1e-12


def test_indicator_sequence():
    seq = indicator_sequence({2, 4}, 5)

    np.testing.assert_array_equal(seq.values, [0, 1, 0, 1, 0])
    with pytest.raises(PreconditionError):
        indicator_sequence({6}, 5)


def test_sequence_to_csv(tmp_path):
    path = tmp_path / "seq.csv"
    text = sequence_to_csv(SequenceFn.on_interval([0.5, -0.25]), path)

    assert text == "index,value\n1,0.5\n2,-0.25\n"
    assert path.read_text() == text
