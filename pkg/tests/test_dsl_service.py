import math
from fractions import Fraction

import pytest
from hypothesis import given, seed, settings, strategies as st

from app.models.bracket_models import (
    Frac,
    MonomialForm,
    Neg,
    Poly,
    PolynomialForm,
    Prod,
    make_frac,
    make_neg,
    make_prod,
    make_sum,
)
from app.schemas.run_schema import NumericMode
from app.services.dsl_service import (
    load_bindings,
    parse_bindings,
    parse_form,
    parse_scalar,
    print_form,
)
from app.utils.errors import ExactModeError, ParseError

monomials = st.builds(
    MonomialForm,
    sign=st.sampled_from([1, -1]),
    symbols=st.lists(st.integers(1, 3), max_size=2).map(tuple),
    power=st.integers(0, 3),
    coefficient=st.sampled_from([Fraction(1), Fraction(2), Fraction(1, 2)]),
)
poly_forms = st.lists(monomials, min_size=1, max_size=4).map(lambda ts: PolynomialForm(tuple(ts)))
bracket_forms = st.recursive(
    poly_forms.map(Poly),
    lambda children: st.one_of(
        children.map(make_frac),
        children.map(make_neg),
        st.tuples(children, children).map(lambda pair: make_sum(*pair)),
        st.tuples(children, children).map(lambda pair: make_prod(*pair)),
    ),
    max_leaves=6,
)


def test_parse_nested_bracket():
    f = parse_form("{a1*n*{a2*n}}")

    assert isinstance(f, Frac)
    assert isinstance(f.child, Prod)
    assert f.child.left == Poly(PolynomialForm((MonomialForm(symbols=(1,), power=1),)))
    assert isinstance(f.child.right, Frac)
    assert f.degree_bound == 2
    assert f.constant_free


def test_parse_polynomial_form_is_a_single_leaf():
    f = parse_form("a1*n + a2*n^2 - a1*a2*n^3")

    assert isinstance(f, Poly)
    assert f.degree_bound == 3
    assert len(f.leaf.terms) == 3
    assert f.leaf.terms[-1] == MonomialForm(sign=-1, symbols=(1, 2), power=3)


def test_constant_term_is_not_constant_free():
    assert not parse_form("1/2 + a1*n").constant_free
    assert parse_form("-{a1*n}").constant_free


def test_negation_folds_into_polynomial_leaves():
    assert parse_form("-a1*n") == parse_form("-(a1*n)")
    assert isinstance(parse_form("-{a1*n}"), Neg)


@pytest.mark.parametrize(
    "text, offset",
    [
        ("{", 1),
        ("a1*n +", 6),
        ("(a1*n", 5),
        ("a1*n}", 4),
        ("pi*n", 0),
        ("n/4", 1),
        ("a1 * 3/0", 7),
    ],
)
def test_syntax_errors_report_the_byte_offset(text, offset):
    with pytest.raises(ParseError) as excinfo:
        parse_form(text)

    assert excinfo.value.offset == offset
    assert excinfo.value.status_code == 2


def test_syntax_error_lists_expected_tokens():
    with pytest.raises(ParseError) as excinfo:
        parse_form("{")

    assert {"{", "n", "a<k>"} <= excinfo.value.expected
    assert "offset 1" in excinfo.value.detail


def test_print_form_is_canonical():
    assert print_form(parse_form("{a1*n*{a2*n}}")) == "{a1*n*{a2*n}}"
    assert print_form(parse_form("a2*n^2 + a1*n")) == "a1*n + a2*n^2"
    assert print_form(parse_form("n * -{1/10*n}")) == "n*-{1/10*n}"


def test_print_form_subtracts_negative_terms():
    assert print_form(parse_form("{a1*n} + -n")) == "{a1*n} - n"
    assert print_form(parse_form("{a1*n} - 2*a2*n^2")) == "{a1*n} - 2*a2*n^2"
    assert parse_form("{a1*n} - n") == parse_form("{a1*n} + -n")


@seed(20240601)
@settings(max_examples=500, deadline=None)
@given(bracket_forms)
def test_print_then_parse_round_trips(f):
    assert parse_form(print_form(f)) == f


@seed(20240602)
@settings(max_examples=200, deadline=None)
@given(poly_forms, poly_forms, poly_forms)
def test_polynomial_forms_form_a_ring(a, b, c):
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


def test_monomial_product_merges_symbols_and_signs():
    left = MonomialForm(sign=-1, symbols=(1,), power=1)

    assert left * MonomialForm(sign=-1, symbols=(2,), power=3) == MonomialForm(symbols=(1, 2), power=4)
    assert left * MonomialForm(symbols=(1,), power=1) == MonomialForm(sign=-1, symbols=(1, 1), power=2)
    assert MonomialForm() * left == left


def test_parse_scalar_values():
    assert parse_scalar("sqrt2") == pytest.approx(math.sqrt(2))
    assert parse_scalar("phi") == pytest.approx((1 + math.sqrt(5)) / 2)
    assert parse_scalar("1/3", NumericMode.EXACT) == Fraction(1, 3)
    assert parse_scalar("0.25", NumericMode.EXACT) == Fraction(1, 4)
    assert parse_scalar("-2") == -2.0


def test_parse_scalar_rejects_irrationals_in_exact_mode():
    with pytest.raises(ExactModeError):
        parse_scalar("pi", NumericMode.EXACT)


def test_parse_scalar_rejects_garbage():
    with pytest.raises(ParseError):
        parse_scalar("two")
    with pytest.raises(ParseError):
        parse_scalar("1/0")


def test_parse_bindings():
    binding = parse_bindings("a1 = sqrt2\n# irrational frequencies\na2 = 1/3  # comment\n")

    assert binding == {1: pytest.approx(math.sqrt(2)), 2: pytest.approx(1 / 3)}


def test_parse_bindings_exact():
    assert parse_bindings("a1 = 1/3\na2 = 0.25\n", NumericMode.EXACT) == {1: Fraction(1, 3), 2: Fraction(1, 4)}


def test_parse_bindings_malformed_line_offset():
    with pytest.raises(ParseError) as excinfo:
        parse_bindings("a1 = 1\nb2 = 3\n")

    assert excinfo.value.offset == 7


def test_parse_bindings_invalid_value_offset():
    with pytest.raises(ParseError) as excinfo:
        parse_bindings("a1 = 1\na2 = foo\n")

    assert excinfo.value.offset == 12


def test_load_bindings(tmp_path):
    path = tmp_path / "alphas.bind"
    path.write_text("a1 = 1/2\na3 = 5\n")

    assert load_bindings(path, NumericMode.EXACT) == {1: Fraction(1, 2), 3: Fraction(5)}
