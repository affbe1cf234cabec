import math
from fractions import Fraction

import numpy as np
import pytest

from app.models.sequence_models import IntervalSpec
from app.schemas.recurrence_schema import BudgetMode, CheckerBudget, CheckMode
from app.services.bracket_service import components, generalized_family_form, realize
from app.services.recurrence_service import (
    ap_dilation_check,
    c_hat,
    c_k,
    check_locally_poly,
    component_set,
    concentration_check,
    density,
    density_scan,
    density_scan_csv,
    epsilon_sweep,
    find_progressions,
    kth_derivative_identity_check,
    linear_recurrence_witness,
    members,
    membership,
    pigeonhole_intervals,
    recurrence_set,
    replay_witness,
    simple_deriv_check,
    simple_deriv_scan,
    strong_set_builder,
    weak_recurrence_check,
    weak_to_strong_intervals,
)
from app.utils.errors import BudgetExceededError, PreconditionError, UsageError
from app.utils.utils import frac, frac_array, make_rng

SQRT2, SQRT3 = math.sqrt(2), math.sqrt(3)
OVERFLOW_SET = [n for n in range(1, 31) if n % 10 in (3, 4, 5)]


@pytest.fixture
def nested(realized):
    """sqrt2 n {sqrt3 n}."""
    return realized("a1*n*{a2*n}", {1: SQRT2, 2: SQRT3})


# Recurrence sets


def test_density_and_membership(realized):
    spec = recurrence_set([(realized("1/4*n"), IntervalSpec.centered(Fraction(3, 10)))], 100)

    assert density(spec) == 0.75
    assert membership(spec, 3)
    assert not membership(spec, 2)
    with pytest.raises(UsageError):
        membership(spec, 101)


def test_no_constraints_is_the_whole_interval():
    spec = recurrence_set([], 20)

    assert density(spec) == 1.0
    assert membership(spec, 7)
    np.testing.assert_array_equal(members(spec), np.arange(1, 21))


def test_shifted_linear_set_is_empty(realized):
    shifted = realized("a1*n + 1/2", {1: SQRT2})
    plain = realized("a1*n", {1: SQRT2})
    I = IntervalSpec.centered(Fraction(1, 10))
    spec = recurrence_set([(shifted, I), (plain, I)], 1000)

    assert density(spec) == 0.0


def test_density_of_an_irrational_rotation(realized):
    spec = recurrence_set([(realized("a1*n", {1: SQRT2}), IntervalSpec.centered(0.1))], 100000)

    assert density(spec) == pytest.approx(0.2, abs=0.01)


def test_component_set(nested):
    spec = component_set(nested, [IntervalSpec.centered(Fraction(1, 16))], 200)

    assert len(spec.constraints) == 1
    assert all(abs(frac(SQRT3 * int(n))) < 1 / 16 for n in members(spec))
    with pytest.raises(UsageError):
        component_set(nested, [], 200)


# Pigeonhole


def test_pigeonhole_on_a_two_valued_sequence():
    values = frac_array(np.arange(1, 101) / 2)

    result = pigeonhole_intervals([values], [0.3], IntervalSpec.full())
    assert result.bound == pytest.approx(15.0)
    assert len(result.subset) >= 50
    assert all(result.intervals[0].contains(v) for v in values[result.subset - 1])


def test_pigeonhole_of_an_irrational_rotation():
    values = frac_array(SQRT2 * np.arange(1, 101))

    result = pigeonhole_intervals([values], [0.1], IntervalSpec.full())
    assert result.intervals[0].width == pytest.approx(0.1)
    assert len(result.subset) >= max(result.bound, 10)


def test_pigeonhole_in_two_dimensions():
    rng = make_rng(1)
    gs = [rng.uniform(-0.49, 0.49, size=200) for _ in range(2)]

    result = pigeonhole_intervals(gs, [0.2, 0.25], IntervalSpec.full())
    assert len(result.subset) >= result.bound
    for g, J in zip(gs, result.intervals):
        assert J.contains_array(g[result.subset - 1]).all()


def test_pigeonhole_preconditions():
    with pytest.raises(PreconditionError):
        pigeonhole_intervals([np.zeros(4)], [0.6], IntervalSpec.centered(0.25))
    with pytest.raises(PreconditionError):
        pigeonhole_intervals([np.array([0.0, 0.4])], [0.1], IntervalSpec.centered(0.25))


def test_linear_witness_for_a_rational_frequency():
    witness = linear_recurrence_witness([Fraction(1, 3)], Fraction(1, 5), 30)

    assert len(witness) >= 9
    assert all(int(m) % 3 == 0 for m in witness)


def test_linear_witness_without_frequencies_is_everything():
    np.testing.assert_array_equal(linear_recurrence_witness([], 0.1, 12), np.arange(1, 13))


def test_linear_witness_members_are_recurrent():
    rng = make_rng(2)
    for _ in range(100):
        alphas = list(rng.uniform(0, 1, size=int(rng.integers(1, 4))))
        delta = float(rng.uniform(0.15, 0.3))
        witness = linear_recurrence_witness(alphas, delta, 10_000)

        assert len(witness) > 0
        assert witness.min() >= 1 and witness.max() <= 10_000
        for a in alphas:
            assert np.all(np.abs(frac_array(a * witness.astype(float))) < delta)


def test_linear_witness_needs_positive_delta():
    with pytest.raises(PreconditionError):
        linear_recurrence_witness([SQRT2], 0, 10)


# Local polynomiality


def test_overflow_witness(overflow_phi):
    result = check_locally_poly(overflow_phi, OVERFLOW_SET, 2, CheckMode.STRONG, N=30)

    assert not result.ok
    assert result.certified
    assert result.witness.n == 6
    assert result.witness.hs == [-1, -1]
    assert result.witness.derivative_exact == "-1"
    assert replay_witness(overflow_phi, result.witness) == Fraction(-1)


def test_overflow_witness_on_a_recurrence_set(overflow_phi, realized):
    spec = recurrence_set([(realized("1/10*n"), IntervalSpec(Fraction(1, 4), Fraction(1, 2), hi_closed=True))], 30)

    np.testing.assert_array_equal(members(spec), OVERFLOW_SET)
    result = check_locally_poly(overflow_phi, spec, 2, CheckMode.STRONG)
    assert (result.witness.n, result.witness.hs) == (6, [-1, -1])


@pytest.mark.parametrize("mode", [CheckMode.APPROX, CheckMode.STRONG_APPROX])
def test_integer_derivatives_vanish_mod_one(overflow_phi, mode):
    result = check_locally_poly(overflow_phi, OVERFLOW_SET, 2, mode, N=30, delta=Fraction(1, 100))

    assert result.ok
    assert result.certified


@pytest.mark.parametrize("mode", list(CheckMode))
def test_polynomials_are_locally_polynomial_everywhere(realized, mode):
    p = realized("a1*n + a2*n^2", {1: SQRT2, 2: SQRT3})

    result = check_locally_poly(p, range(1, 21), 3, mode, delta=0.01)
    assert result.ok
    assert result.certified
    assert result.tuples_checked > 0


def test_nested_bracket_on_its_recurrence_set(nested):
    spec = component_set(nested, [IntervalSpec.centered(Fraction(1, 16))], 200)

    result = check_locally_poly(nested, spec, 3, CheckMode.STRONG)
    assert result.ok
    assert result.certified


def test_checker_budget(realized):
    p = realized("a1*n^2", {1: SQRT2})

    with pytest.raises(BudgetExceededError) as excinfo:
        check_locally_poly(p, range(1, 101), 3, budget=CheckerBudget(max_tuples=1000))
    assert excinfo.value.requested == 100**4
    assert excinfo.value.allowed == 1000


def test_randomized_budget_never_certifies(realized, overflow_phi):
    budget = CheckerBudget(mode=BudgetMode.RANDOMIZED, max_tuples=5000, seed=4)

    clean = check_locally_poly(realized("a1*n^2", {1: SQRT2}), range(1, 31), 3, budget=budget)
    assert clean.ok
    assert not clean.certified
    assert "5000 samples" in clean.note

    found = check_locally_poly(overflow_phi, OVERFLOW_SET, 2, CheckMode.STRONG, budget=budget, N=30)
    assert not found.certified
    if found.witness is not None:
        assert replay_witness(overflow_phi, found.witness) == Fraction(found.witness.derivative_exact)


def test_empty_set_is_trivially_fine(overflow_phi):
    result = check_locally_poly(overflow_phi, [], 2, N=10)

    assert result.ok
    assert result.note == "empty set"


def test_checker_usage_errors(overflow_phi):
    with pytest.raises(UsageError):
        check_locally_poly(overflow_phi, OVERFLOW_SET, 0)
    with pytest.raises(UsageError):
        check_locally_poly(overflow_phi, OVERFLOW_SET, 2, CheckMode.APPROX)


def test_constants(monkeypatch):
    from app.config.config import settings

    assert c_k(2) == Fraction(1, 20)
    assert c_k(3) == Fraction(1, 56)
    assert c_hat(2) == Fraction(1, 20)
    monkeypatch.setattr(settings, "C_HAT_OVERRIDE", 0.01)
    assert c_hat(2) == 0.01


def test_strong_set_builder(nested):
    J = IntervalSpec(Fraction(-1, 40), Fraction(1, 40))
    spec = strong_set_builder(nested, Fraction(1, 20), Fraction(1, 10), [J], 200)

    assert spec.constraints[0].target == J
    assert check_locally_poly(nested, spec, 3, CheckMode.STRONG).ok


@pytest.mark.parametrize(
    "delta, eps, J",
    [
        (Fraction(1, 10), Fraction(3, 10), IntervalSpec.centered(Fraction(1, 20))),
        (Fraction(1, 20), Fraction(1, 20), IntervalSpec.centered(Fraction(1, 40))),
        (Fraction(1, 20), Fraction(1, 5), IntervalSpec.centered(Fraction(1, 20))),
        (Fraction(1, 20), Fraction(9, 20), IntervalSpec(Fraction(1, 50), Fraction(7, 100))),
    ],
)
def test_strong_set_builder_preconditions(nested, delta, eps, J):
    with pytest.raises(PreconditionError):
        strong_set_builder(nested, delta, eps, [J], 200)


def test_weak_to_strong_intervals(nested):
    Js, spec = weak_to_strong_intervals(nested, 0.1, 200)

    assert len(Js) == 1
    assert float(Js[0].width) <= 0.05 + 1e-12
    assert check_locally_poly(nested, spec, 3, CheckMode.STRONG).ok


@pytest.mark.parametrize("text", ["a1*n*{a2*n}", "{a1*n*{a2*n}}"])
def test_strong_sets_for_bracket_quadratics(realized, text):
    phi = realized(text, {1: SQRT2, 2: SQRT3})
    delta = c_k(2)
    eps = 2 * delta
    Js, spec = weak_to_strong_intervals(phi, eps, 200)

    assert len(Js) == len(components(phi))
    assert all(J.width <= delta for J in Js)
    assert spec == strong_set_builder(phi, delta, eps, Js, 200)
    result = check_locally_poly(phi, spec, 3, CheckMode.STRONG)
    assert result.ok
    assert result.certified


def test_weak_recurrence(realized):
    report = weak_recurrence_check([realized("a1*n", {1: SQRT2})], 0.1, 0.5, 10000)
    assert report.density == pytest.approx(0.8, abs=0.01)
    assert report.holds

    half = weak_recurrence_check([realized("1/2*n")], Fraction(1, 10), 0.6, 100)
    assert half.density == 0.5
    assert not half.holds

    assert weak_recurrence_check([realized("1/2*n")], Fraction(1, 10), 0, 100).holds


def test_weak_recurrence_needs_eps_below_a_half(realized):
    with pytest.raises(PreconditionError):
        weak_recurrence_check([realized("1/2*n")], Fraction(1, 2), 0.5, 100)


# Derivative identities


def test_kth_identity_for_monomials(realized):
    report = kth_derivative_identity_check(realized("a1*n^2", {1: SQRT2}), 3, 5, 0.1)
    assert report.equal
    assert report.k == 2

    exact = kth_derivative_identity_check(realized("1/3*n^3"), 2, 4, Fraction(1, 10))
    assert exact.equal
    assert exact.lhs_exact == exact.rhs_exact == "128"


def test_kth_identity_along_a_recurrent_progression(nested):
    report = kth_derivative_identity_check(nested, 41, 15, Fraction(1, 20), k=2, N=200)

    assert report.equal
    assert report.lhs == pytest.approx(2 * SQRT2 * 15 * frac(SQRT3 * 15))


def test_kth_identity_rejects_non_recurrent_progressions(nested):
    with pytest.raises(PreconditionError):
        kth_derivative_identity_check(nested, 1, 1, Fraction(1, 20), k=2, N=200)


def test_find_progressions():
    assert find_progressions([1, 2, 3, 5, 7, 9], 2) == [(1, 1), (1, 2), (1, 4), (3, 2), (5, 2)]
    assert find_progressions([1, 2, 3, 5, 7, 9], 2, max_count=2) == [(1, 1), (1, 2)]
    assert find_progressions([], 2, N=5) == []


def test_progressions_are_found_in_recurrence_sets(nested, realized):
    spec = component_set(nested, [IntervalSpec.centered(Fraction(1, 20))], 200)

    assert (41, 15) in find_progressions(spec, 2, max_count=1000)


def test_dilation_along_a_progression(realized):
    phi = realized("a1*n^2", {1: SQRT2})
    J = IntervalSpec.centered(Fraction(1, 20))
    N = 2000
    progressions = find_progressions(recurrence_set([(phi, J)], N // 2), 2, max_count=5)
    assert progressions

    for n, h in progressions:
        report = ap_dilation_check(phi, [], n, h, 2, J, Fraction(1, 10), Fraction(1, 20), N)
        assert report.dilated_h == 2 * h
        assert report.predicted_phi_width == pytest.approx(0.8)
        assert report.within_prediction
        assert report.nu_factor is None
        assert not report.hypothesis_breach
        assert report.chain_holds


@pytest.mark.parametrize("s, t", [(1, 1), (2, 0)])
def test_dilation_of_a_bracket_family(s, t):
    form, index = generalized_family_form(0, 1, s, t)
    phi = realize(form, {1: SQRT3, 2: SQRT2})
    nus = components(phi)
    J = IntervalSpec.centered(Fraction(1, 20))
    inner = IntervalSpec.centered(Fraction(1, 20))
    N = 10_000
    spec = recurrence_set([(phi, J), *((nu, inner) for nu in nus)], N // 2)
    progressions = find_progressions(spec, 2, max_count=20)
    assert index == 3
    assert len(nus) == 1
    assert progressions

    for n, h in progressions:
        report = ap_dilation_check(phi, nus, n, h, 2, J, Fraction(1, 10), Fraction(1, 20), N)
        assert report.dilated_h == 2 * h
        assert report.within_prediction
        assert report.nu_factor is not None
        assert report.nu_factor < 4
        assert not report.hypothesis_breach
        assert report.chain_holds


def test_dilation_preconditions(realized):
    phi = realized("1/7*n^2")
    J = IntervalSpec.centered(Fraction(1, 20))

    assert ap_dilation_check(phi, [], 7, 7, 2, J, Fraction(1, 10), Fraction(1, 20), 50).phi_value == 0
    with pytest.raises(PreconditionError):
        ap_dilation_check(phi, [], 7, 7, 2, J, Fraction(1, 10), Fraction(1, 10), 50)
    with pytest.raises(PreconditionError):
        ap_dilation_check(phi, [], 7, 7, 2, J, Fraction(1, 20), Fraction(1, 20), 50)
    with pytest.raises(PreconditionError):
        ap_dilation_check(phi, [], 1, 7, 2, J, Fraction(1, 10), Fraction(1, 20), 50)


def test_simple_derivative_is_an_integer_multiple(realized):
    nu = realized("a1*n", {1: SQRT3})
    J = IntervalSpec.centered(Fraction(1, 8))

    reports = simple_deriv_scan(SQRT2, nu, J, 2, 128)
    assert reports
    assert all(r.q_is_integer for r in reports)
    assert max(r.abs_q for r in reports) <= 4

    first = reports[0]
    again = simple_deriv_check(SQRT2, nu, None, J, first.n, first.hs, 128)
    assert again.value == pytest.approx(first.value, abs=1e-9)
    assert again.q_is_integer


def test_simple_derivative_preconditions(realized):
    nu = realized("a1*n", {1: SQRT3})

    with pytest.raises(PreconditionError):
        simple_deriv_scan(SQRT2, nu, IntervalSpec.centered(Fraction(1, 4)), 2, 64)
    with pytest.raises(PreconditionError):
        simple_deriv_check(SQRT2, nu, None, IntervalSpec.centered(Fraction(1, 8)), 1, [1, 1, 1], 64)


def test_simple_derivative_respects_the_extra_set(realized):
    nu = realized("a1*n", {1: SQRT3})
    J = IntervalSpec.centered(Fraction(1, 8))
    A = range(1, 65, 2)

    for report in simple_deriv_scan(SQRT2, nu, J, 1, 64, A=A):
        corners = [report.n + report.hs[0], report.n + report.hs[1], report.n + sum(report.hs)]
        assert all(m % 2 == 1 for m in corners)


# Scans


def test_concentration_of_a_two_valued_phase(realized):
    report = concentration_check(realized("1/2*n"), [], 0.1, 0.1, 40)

    assert report.set_size == 40
    assert report.fraction == 0.5


def test_concentration_of_an_empty_set(realized):
    report = concentration_check(realized("1/2*n"), [realized("a1*n + 1/2", {1: 1})], 0.1, 0.1, 40)

    assert report.set_size == 0
    assert report.fraction == 0.0


def test_epsilon_sweep(nested):
    report = epsilon_sweep(nested, 200, [0.1, 0.02, 0.05])

    assert report.k == 2
    assert [row.eps for row in report.rows] == [0.02, 0.05, 0.1]
    assert all(row.violations == 0 for row in report.rows)
    assert report.largest_clean_eps == 0.1


def test_density_scan(realized, tmp_path):
    nu = realized("1/4*n")
    report = density_scan(lambda N: recurrence_set([(nu, IntervalSpec.centered(Fraction(3, 10)))], N), [4, 8, 100], 0.7)

    assert [row.density for row in report.rows] == [0.75, 0.75, 0.75]
    assert report.smallest_n_meeting_floor == 4

    path = tmp_path / "density.csv"
    text = density_scan_csv(report, path)
    assert text == "N,density\n4,0.75\n8,0.75\n100,0.75\n"
    assert path.read_text() == text
