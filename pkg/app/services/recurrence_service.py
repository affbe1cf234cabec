"""Recurrence sets and local polynomiality.

A recurrence set is ``B_N(nu_1..nu_r; S_1..S_r) = {n in [N] : {nu_i(n)} in S_i}``.
The checkers decide whether a bracket polynomial behaves like a polynomial
on such a set, i.e. whether its k-fold differences vanish (or are small mod 1)
on every cube ``n + omega . h`` whose corners lie in the set.
"""
import itertools
import logging
import math
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from app.config.config import settings
from app.models.bracket_models import BracketNode
from app.models.sequence_models import (
    Constraint,
    IntervalSpec,
    PigeonholeResult,
    RecurrenceSetSpec,
    SequenceFn,
)
from app.schemas.recurrence_schema import (
    BudgetMode,
    CheckerBudget,
    CheckMode,
    CheckResult,
    ConcentrationReport,
    DensityRow,
    DensityScanReport,
    DerivativeIdentityReport,
    DilationReport,
    SimpleDerivReport,
    SweepReport,
    SweepRow,
    ViolationWitness,
    WeakRecurrenceReport,
)
from app.schemas.run_schema import NumericMode
from app.services.bracket_service import (
    components,
    degree_bound,
    eval_at,
    eval_many,
    numeric_mode_of,
)
from app.services.diff_service import frac_difference_check
from app.utils.errors import BudgetExceededError, PreconditionError, UsageError
from app.utils.utils import Scalar, frac, frac_array, make_rng, scalar_to_str, write_csv

logger = logging.getLogger(__name__)

COMPARE_TOLERANCE = 1e-12
IDENTITY_TOLERANCE = 1e-9
SAMPLE_BATCH = 1 << 16


def _le(a: Scalar, b: Scalar) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return float(a) <= float(b) + COMPARE_TOLERANCE
    return a <= b


def _mode_for(*forms: BracketNode) -> NumericMode:
    if all(numeric_mode_of(f) == NumericMode.EXACT for f in forms):
        return NumericMode.EXACT
    return NumericMode.FLOAT


# Recurrence sets


def recurrence_set(constraints: Iterable[tuple[BracketNode, IntervalSpec]], N: int) -> RecurrenceSetSpec:
    return RecurrenceSetSpec(tuple(Constraint(nu, S) for nu, S in constraints), N)


def component_set(phi: BracketNode, intervals: Sequence[IntervalSpec], N: int) -> RecurrenceSetSpec:
    """B_N(components(phi); intervals), one interval per component."""
    nus = components(phi)
    if len(nus) != len(intervals):
        raise UsageError(f"{len(nus)} components but {len(intervals)} intervals given")
    return recurrence_set(zip(nus, intervals), N)


def member_mask(spec: RecurrenceSetSpec) -> np.ndarray:
    ns = np.arange(1, spec.N + 1)
    mask = np.ones(spec.N, dtype=bool)
    for constraint in spec.constraints:
        values = frac_array(eval_many(constraint.nu, ns, numeric_mode_of(constraint.nu)))
        mask &= constraint.target.contains_array(values)
    return mask


def members(spec: RecurrenceSetSpec) -> np.ndarray:
    return np.flatnonzero(member_mask(spec)) + 1


def membership(spec: RecurrenceSetSpec, n: int) -> bool:
    if not 1 <= n <= spec.N:
        raise UsageError(f"n = {n} outside [1, {spec.N}]")
    for constraint in spec.constraints:
        value = eval_at(constraint.nu, n, numeric_mode_of(constraint.nu))
        if not constraint.target.contains(frac(value)):
            return False
    return True


def density(spec: RecurrenceSetSpec) -> float:
    count = int(member_mask(spec).sum())
    logger.debug("recurrence set holds %d of %d points", count, spec.N)
    return count / spec.N


def _as_member_array(B, N: int | None) -> tuple[np.ndarray, int]:
    if isinstance(B, RecurrenceSetSpec):
        return members(B), B.N
    found = np.array(sorted({int(n) for n in B}), dtype=np.int64)
    if N is None:
        N = int(found[-1]) if found.size else 0
    if found.size and (found[0] < 1 or found[-1] > N):
        raise PreconditionError(f"set is not contained in [1, {N}]")
    return found, N


# Pigeonhole selection


def pigeonhole_intervals(
    gs: Sequence[SequenceFn | np.ndarray],
    deltas: Sequence[Scalar],
    I: IntervalSpec,
    domain: np.ndarray | None = None,
) -> PigeonholeResult:
    """Cut I into boxes of width delta_i per axis and keep the fullest cell.

    The cell holds at least prod(delta_i) |A| / (2^l width(I)^l) points.
    """
    if len(gs) != len(deltas):
        raise UsageError("one delta per sequence is required")
    arrays = [np.asarray(g.values if isinstance(g, SequenceFn) else g) for g in gs]
    if domain is None:
        if gs and isinstance(gs[0], SequenceFn):
            domain = gs[0].indices
        else:
            domain = np.arange(1, (len(arrays[0]) if arrays else 0) + 1)
    domain = np.asarray(domain)
    if any(len(a) != len(domain) for a in arrays):
        raise UsageError("all sequences must live on the same domain")

    width = I.width
    l = len(arrays)
    bound = float(math.prod(float(d) for d in deltas)) * len(domain) / (2**l * float(width) ** l)
    if l == 0 or len(domain) == 0:
        return PigeonholeResult(tuple(), domain.copy(), bound)

    cells = []
    for values, d in zip(arrays, deltas):
        if not d < width:
            raise PreconditionError(f"delta = {d} must be < width(I) = {width}")
        if not I.contains_array(values).all():
            raise PreconditionError(f"sequence leaves the interval {I}")
        boxes = math.ceil(width / d)
        index = np.floor((values.astype(float) - float(I.lo)) / float(d)).astype(np.int64)
        cells.append(np.clip(index, 0, boxes - 1))

    grid = np.stack(cells, axis=1)
    unique, counts = np.unique(grid, axis=0, return_counts=True)
    best = unique[int(np.argmax(counts))]

    intervals = []
    for b, d in zip(best.tolist(), deltas):
        boxes = math.ceil(width / d)
        if b < boxes - 1:
            J = IntervalSpec(I.lo + b * d, I.lo + (b + 1) * d, lo_closed=bool(b > 0 or I.lo_closed))
        else:
            J = IntervalSpec(I.hi - d, I.hi, lo_closed=True, hi_closed=I.hi_closed)
        intervals.append(J)

    inside = np.ones(len(domain), dtype=bool)
    for values, J in zip(arrays, intervals):
        inside &= J.contains_array(values)
    subset = domain[inside]
    logger.debug("pigeonhole kept %d of %d points (bound %.3f)", len(subset), len(domain), bound)
    return PigeonholeResult(tuple(intervals), subset, bound)


def _frac_products(alpha: Scalar, ns: np.ndarray) -> np.ndarray:
    if isinstance(alpha, (int, Fraction)):
        return np.array([frac(alpha * int(n)) for n in ns], dtype=object)
    return frac_array(float(alpha) * ns.astype(float))


def linear_recurrence_witness(alphas: Sequence[Scalar], delta: Scalar, N: int) -> np.ndarray:
    """Integers m in [N] with ||alpha_j m|| < delta for every j.

    Pigeonhole the points ({alpha_j n})_j into boxes of width delta/2, then
    take the differences to the largest member of the fullest box.
    """
    if not delta > 0:
        raise PreconditionError(f"delta = {delta} must be positive")
    if not alphas:
        return np.arange(1, N + 1)
    ns = np.arange(1, N + 1)
    width = min(delta / 2, Fraction(1, 4))
    gs = [_frac_products(a, ns) for a in alphas]
    result = pigeonhole_intervals(gs, [width] * len(alphas), IntervalSpec.full(), domain=ns)
    A = result.subset
    if A.size == 0:
        return A
    top = int(A.max())
    witness = np.sort(top - A[A < top])
    logger.info("linear recurrence witness: %d elements from a box of %d", witness.size, A.size)
    return witness


# Local polynomiality


def c_k(k: int) -> Fraction:
    """c_k = 2^{-k} (2k+1)^{-1}."""
    return Fraction(1, 2**k * (2 * k + 1))


def c_hat(k: int) -> Scalar:
    if settings.C_HAT_OVERRIDE is not None:
        return settings.C_HAT_OVERRIDE
    return c_k(k)


def _corner_signs(k: int) -> tuple[np.ndarray, np.ndarray]:
    omegas = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int64).reshape(-1, k)
    signs = np.array([(-1) ** (k - int(w.sum())) for w in omegas], dtype=np.int64)
    return omegas, signs


def derivative_at(values_at: Callable[[np.ndarray], np.ndarray], n: int, hs: Sequence[int]) -> Scalar:
    """Delta_{h_1..h_k} f(n) = sum over omega of (-1)^{k-|omega|} f(n + omega . h)."""
    k = len(hs)
    omegas, signs = _corner_signs(k)
    points = n + omegas @ np.asarray(hs, dtype=np.int64)
    values = values_at(points)
    total = sum(int(s) * v for s, v in zip(signs, values))
    return total if isinstance(total, Fraction) else float(total)


def _phi_evaluator(phi: BracketNode, mode: NumericMode):
    return lambda points: eval_many(phi, points, mode)


def replay_witness(phi: BracketNode, witness: ViolationWitness) -> Scalar:
    return derivative_at(_phi_evaluator(phi, numeric_mode_of(phi)), witness.n, witness.hs)


def _is_violation(values: np.ndarray, mode: CheckMode, exact: bool, delta: Scalar | None) -> np.ndarray:
    if mode.approximate:
        if exact:
            return np.array([abs(frac(v)) > delta for v in values], dtype=bool)
        distance = np.abs(frac_array(values.astype(float)))
        return distance > float(delta) + settings.CHECKER_ZERO_TOLERANCE
    if exact:
        return np.array([v != 0 for v in values], dtype=bool)
    return np.abs(values.astype(float)) > settings.CHECKER_ZERO_TOLERANCE


def _admissible_tuples(n: int, offsets: np.ndarray, k: int, in_set: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """All h in (B - n)^k whose corners omega . h (|omega| >= 2) stay in B."""
    grids = np.meshgrid(*([offsets] * k), indexing="ij")
    hs = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.ones(len(hs), dtype=bool)
    N = len(in_set) - 1
    for omega in omegas:
        if omega.sum() < 2:
            continue
        points = n + hs @ omega
        inside = (points >= 1) & (points <= N)
        keep &= inside
        keep[inside] &= in_set[points[inside]]
    return hs[keep]


def _derivatives(values: np.ndarray, n: int, hs: np.ndarray, omegas: np.ndarray, signs: np.ndarray) -> np.ndarray:
    total = None
    for omega, sign in zip(omegas, signs):
        term = values[n + hs @ omega] * int(sign)
        total = term if total is None else total + term
    return total


def _first_witness(n: int, hs: np.ndarray, deltas: np.ndarray, mode: CheckMode, exact: bool) -> ViolationWitness:
    order = np.lexsort(tuple(hs[:, j] for j in reversed(range(hs.shape[1]))) + (np.abs(hs).sum(axis=1),))
    best = int(order[0])
    value = deltas[best]
    return ViolationWitness(
        n=int(n),
        hs=[int(h) for h in hs[best]],
        derivative_value=float(value),
        derivative_exact=scalar_to_str(value) if exact else None,
        mode=mode,
    )


def check_locally_poly(
    phi: BracketNode,
    B,
    k: int,
    mode: CheckMode = CheckMode.PLAIN,
    budget: CheckerBudget | None = None,
    N: int | None = None,
    delta: Scalar | None = None,
) -> CheckResult:
    """Search for a cube n + omega . h with its required corners in B on which
    the k-fold difference of phi is non-zero (or, approximately, > delta mod 1).

    Plain and approx need every corner in B; the strong variants only the
    corners with omega != 0. Exhaustive budgets certify, randomized ones only
    ever report witnesses.
    """
    mode = CheckMode(mode)
    budget = budget or CheckerBudget()
    if k < 1:
        raise UsageError(f"k = {k} must be at least 1")
    if mode.approximate and delta is None:
        raise UsageError(f"mode {mode.value} needs delta")
    found, N = _as_member_array(B, N)
    numeric = numeric_mode_of(phi)
    exact = numeric == NumericMode.EXACT

    values = eval_many(phi, np.arange(0, N + 1), numeric)
    in_set = np.zeros(N + 1, dtype=bool)
    in_set[found] = True
    omegas, signs = _corner_signs(k)

    base = dict(mode=mode, budget=budget, k=k, N=N, set_size=int(found.size),
                delta=None if delta is None else float(delta))
    if found.size == 0:
        return CheckResult(ok=True, certified=budget.mode == BudgetMode.EXHAUSTIVE,
                           tuples_checked=0, note="empty set", **base)

    if budget.mode == BudgetMode.RANDOMIZED:
        return _randomized_check(phi, values, found, in_set, omegas, signs, mode, exact, delta, budget, base)

    starts = found if not mode.strong else np.arange(1, N + 1)
    requested = len(starts) * int(found.size) ** k
    if requested > budget.max_tuples:
        raise BudgetExceededError("checker", requested, budget.max_tuples)
    logger.info("exhaustive %s check: k=%d, |B|=%d, %d candidate tuples", mode.value, k, found.size, requested)

    checked = 0
    for n in starts:
        n = int(n)
        hs = _admissible_tuples(n, found - n, k, in_set, omegas)
        if len(hs) == 0:
            continue
        checked += len(hs)
        deltas = _derivatives(values, n, hs, omegas, signs)
        bad = _is_violation(deltas, mode, exact, delta)
        if bad.any():
            witness = _first_witness(n, hs[bad], deltas[bad], mode, exact)
            logger.info("violation at n=%d, h=%s", witness.n, witness.hs)
            return CheckResult(ok=False, certified=True, tuples_checked=checked, witness=witness, **base)
    return CheckResult(ok=True, certified=True, tuples_checked=checked, **base)


def _randomized_check(phi, values, found, in_set, omegas, signs, mode, exact, delta, budget, base) -> CheckResult:
    rng = make_rng(budget.seed)
    k = omegas.shape[1]
    N = len(in_set) - 1
    remaining = budget.max_tuples
    checked = 0
    while remaining > 0:
        size = min(remaining, SAMPLE_BATCH)
        remaining -= size
        if mode.strong:
            ns = rng.integers(1, N + 1, size=size)
        else:
            ns = found[rng.integers(0, found.size, size=size)]
        hs = found[rng.integers(0, found.size, size=(size, k))] - ns[:, None]
        keep = np.ones(size, dtype=bool)
        for omega in omegas:
            if omega.sum() < 2:
                continue
            points = ns + hs @ omega
            inside = (points >= 1) & (points <= N)
            keep &= inside
            keep[inside] &= in_set[points[inside]]
        ns, hs = ns[keep], hs[keep]
        checked += len(ns)
        if len(ns) == 0:
            continue
        deltas = None
        for omega, sign in zip(omegas, signs):
            term = values[ns + hs @ omega] * int(sign)
            deltas = term if deltas is None else deltas + term
        bad = _is_violation(deltas, mode, exact, delta)
        if bad.any():
            first_n = int(ns[bad].min())
            pick = bad & (ns == first_n)
            witness = _first_witness(first_n, hs[pick], deltas[pick], mode, exact)
            return CheckResult(ok=False, certified=False, tuples_checked=checked, witness=witness, **base)
    note = f"no witness found in {budget.max_tuples} samples"
    logger.info(note)
    return CheckResult(ok=True, certified=False, tuples_checked=checked, note=note, **base)


def strong_set_builder(
    phi: BracketNode,
    delta: Scalar,
    eps: Scalar,
    Js: Sequence[IntervalSpec],
    N: int,
) -> RecurrenceSetSpec:
    """The set on which phi of degree k is strongly locally polynomial of
    degree k: B_N(components; J) with delta <= c_k, eps >= k delta and each
    J_i of width <= delta inside I_{1/2 - eps}.

    Check it with ``check_locally_poly(phi, spec, k + 1, CheckMode.STRONG)``.
    """
    k = degree_bound(phi)
    nus = components(phi)
    if len(Js) != len(nus):
        raise UsageError(f"{len(nus)} components but {len(Js)} intervals given")
    if not _le(delta, c_k(k)):
        raise PreconditionError(f"delta <= c_{k} fails: {delta} > {c_k(k)}")
    if not _le(k * delta, eps):
        raise PreconditionError(f"eps >= k*delta fails: {eps} < {k} * {delta}")
    if not eps < Fraction(1, 2):
        raise PreconditionError(f"eps < 1/2 fails: eps = {eps}")
    outer = IntervalSpec.centered(Fraction(1, 2) - eps)
    for i, J in enumerate(Js):
        if not _le(J.width, delta):
            raise PreconditionError(f"width(J_{i + 1}) <= delta fails: {J.width} > {delta}")
        if not J.is_subset_of(outer):
            raise PreconditionError(f"J_{i + 1} = {J} is not inside I_(1/2-eps) = {outer}")
    return recurrence_set(zip(nus, Js), N)


def weak_to_strong_intervals(phi: BracketNode, eps: Scalar, N: int) -> tuple[tuple[IntervalSpec, ...], RecurrenceSetSpec]:
    """From the weakly recurrent set B_N(nu; I_{1/2-eps}) to a strong set:
    delta = min(c_k, eps/k) and pigeonholed intervals for the components."""
    k = max(degree_bound(phi), 1)
    delta = min(c_k(k), eps / k)
    nus = components(phi)
    outer = IntervalSpec.centered(Fraction(1, 2) - eps)
    if not nus:
        return tuple(), strong_set_builder(phi, delta, eps, [], N)
    weak = members(recurrence_set(((nu, outer) for nu in nus), N))
    if weak.size == 0:
        raise PreconditionError(f"B_N(nu; I_(1/2-eps)) is empty at N = {N}")
    gs = [frac_array(eval_many(nu, weak, numeric_mode_of(nu))) for nu in nus]
    picked = pigeonhole_intervals(gs, [delta] * len(nus), outer, domain=weak)
    logger.info("weak set of %d points, strong subset of %d (delta=%s)", weak.size, picked.subset.size, delta)
    return picked.intervals, strong_set_builder(phi, delta, eps, picked.intervals, N)


def weak_recurrence_check(nus: Sequence[BracketNode], eps: Scalar, lam: Scalar, N: int) -> WeakRecurrenceReport:
    if not 0 < eps < Fraction(1, 2):
        raise PreconditionError(f"0 < eps < 1/2 fails: eps = {eps}")
    spec = recurrence_set(((nu, IntervalSpec.centered(Fraction(1, 2) - eps)) for nu in nus), N)
    d = density(spec)
    return WeakRecurrenceReport(N=N, eps=float(eps), lam=float(lam), density=d, holds=_le(lam, d))


def _require_progression(forms: Sequence[BracketNode], targets: Sequence[IntervalSpec], points: Sequence[int], N: int):
    for m in points:
        if not 1 <= m <= N:
            raise PreconditionError(f"progression point {m} leaves [1, {N}]")
        for form, target in zip(forms, targets):
            value = frac(eval_at(form, m, numeric_mode_of(form)))
            if not target.contains(value):
                raise PreconditionError(f"{{nu({m})}} = {value} is not in {target}")


def kth_derivative_identity_check(
    phi: BracketNode,
    n: int,
    h: int,
    eps: Scalar,
    k: int | None = None,
    N: int | None = None,
) -> DerivativeIdentityReport:
    """(Delta_h)^k phi(n) = k! phi(h) along a progression inside B_N(components; I_eps)."""
    k = degree_bound(phi) if k is None else k
    N = n + k * h if N is None else N
    points = [n + j * h for j in range(k + 1)]
    nus = components(phi)
    _require_progression(nus, [IntervalSpec.centered(eps)] * len(nus), points, N)
    mode = numeric_mode_of(phi)
    values = eval_many(phi, points, mode)
    lhs = sum((-1) ** (k - j) * math.comb(k, j) * values[j] for j in range(k + 1))
    rhs = math.factorial(k) * eval_at(phi, h, mode)
    exact = mode == NumericMode.EXACT
    equal = lhs == rhs if exact else abs(float(lhs) - float(rhs)) <= IDENTITY_TOLERANCE
    return DerivativeIdentityReport(
        k=k, n=n, h=h, lhs=float(lhs), rhs=float(rhs),
        lhs_exact=scalar_to_str(lhs) if exact else None,
        rhs_exact=scalar_to_str(rhs) if exact else None,
        equal=bool(equal),
    )


def ap_dilation_check(
    phi: BracketNode,
    nus: Sequence[BracketNode],
    n: int,
    h: int,
    k: int,
    J: IntervalSpec,
    delta: Scalar,
    eps: Scalar,
    N: int,
) -> DilationReport:
    """Where phi and the nu_i send k! h, given a progression of length k+1 in
    B_{N/k!}(phi, nu; J, I_eps, ...).

    The predicted windows are I_C with C = (k!)^{k-1} 2^k delta for phi and
    C = 2 k! eps for each nu_i; the measured widening factors are logged.
    """
    if not _le(eps, c_hat(k)):
        raise PreconditionError(f"eps <= c_hat_{k} fails: {eps} > {c_hat(k)}")
    if not _le(J.width, delta):
        raise PreconditionError(f"width(J) <= delta fails: {J.width} > {delta}")
    k_fact = math.factorial(k)
    points = [n + j * h for j in range(k + 1)]
    inner = IntervalSpec.centered(eps)
    _require_progression([phi, *nus], [J, *([inner] * len(nus))], points, N // k_fact)

    dilated = k_fact * h
    phi_value = float(frac(eval_at(phi, dilated, numeric_mode_of(phi))))
    nu_values = [float(frac(eval_at(nu, dilated, numeric_mode_of(nu)))) for nu in nus]
    phi_width = float(k_fact ** (k - 1) * 2**k * delta)
    nu_width = float(2 * k_fact * eps)

    phi_factor = abs(phi_value) / float(delta)
    nu_factor = max((abs(v) for v in nu_values), default=0.0) / float(eps) if nus else None
    within = abs(phi_value) <= phi_width + COMPARE_TOLERANCE and all(
        abs(v) <= nu_width + COMPARE_TOLERANCE for v in nu_values)

    breach = False
    chain = True
    for nu in nus:
        mode = numeric_mode_of(nu)
        if abs(float(frac(eval_at(nu, h, mode)))) >= 2 * float(eps):
            breach = True
        base = eval_at(nu, n, mode)
        for m in points[1:]:
            chain = chain and frac_difference_check(eval_at(nu, m, mode), base, inner)

    logger.info("k!h=%d: phi widening factor %.4f, nu widening factor %s", dilated, phi_factor, nu_factor)
    return DilationReport(
        k=k, n=n, h=h, dilated_h=dilated,
        phi_value=phi_value, nu_values=nu_values,
        predicted_phi_width=phi_width, predicted_nu_width=nu_width,
        phi_factor=phi_factor, nu_factor=nu_factor,
        within_prediction=within, hypothesis_breach=breach, chain_holds=chain,
    )


def _simple_values(lam: Scalar, nu: BracketNode, exact: bool):
    mode = NumericMode.EXACT if exact else NumericMode.FLOAT
    scale = lam if exact else float(lam)

    def values_at(points: np.ndarray) -> np.ndarray:
        inner = frac_array(eval_many(nu, points, mode))
        if exact:
            return np.array([scale * int(m) * v for m, v in zip(points, inner)], dtype=object)
        return scale * points.astype(float) * inner

    return values_at


def _simple_report(lam: Scalar, n: int, hs: Sequence[int], value: Scalar) -> SimpleDerivReport:
    base = lam * n
    if base == 0:
        return SimpleDerivReport(n=n, hs=list(hs), value=float(value))
    q = float(value) / float(base) if not isinstance(value, Fraction) else value / base
    nearest = round(q)
    return SimpleDerivReport(
        n=n, hs=list(hs), value=float(value), q=float(q),
        q_is_integer=abs(float(q) - nearest) <= settings.INTEGER_TOLERANCE,
        abs_q=abs(float(q)),
    )


def simple_deriv_check(
    lam: Scalar,
    nu: BracketNode,
    A: Iterable[int] | None,
    J: IntervalSpec,
    n: int,
    hs: Sequence[int],
    N: int,
) -> SimpleDerivReport:
    """The (k+1)-fold difference of lam n {nu(n)} with every corner omega != 0
    in B_N(nu; J) and A; it should be an integer multiple of lam n."""
    k = len(hs) - 1
    if k < 0:
        raise UsageError("need at least one step")
    if not _le(J.width, Fraction(1, 2**k)):
        raise PreconditionError(f"width(J) <= 2^-{k} fails: {J.width}")
    allowed = set(range(1, N + 1)) if A is None else set(A)
    exact = isinstance(lam, (int, Fraction)) and numeric_mode_of(nu) == NumericMode.EXACT
    inner_mode = numeric_mode_of(nu)
    omegas, _ = _corner_signs(k + 1)
    for omega in omegas[1:]:
        m = n + int(omega @ np.asarray(hs))
        if not 1 <= m <= N or m not in allowed or not J.contains(frac(eval_at(nu, m, inner_mode))):
            raise PreconditionError(f"corner {m} is not in B_N(nu; J) and A")
    value = derivative_at(_simple_values(lam, nu, exact), n, hs)
    return _simple_report(lam, n, hs, value)


def simple_deriv_scan(
    lam: Scalar,
    nu: BracketNode,
    J: IntervalSpec,
    k: int,
    N: int,
    A: Iterable[int] | None = None,
    max_cases: int = 10000,
) -> list[SimpleDerivReport]:
    """Every (n, h_1..h_{k+1}) qualifying for ``simple_deriv_check``, up to max_cases."""
    if not _le(J.width, Fraction(1, 2**k)):
        raise PreconditionError(f"width(J) <= 2^-{k} fails: {J.width}")
    spec = recurrence_set([(nu, J)], N)
    found = members(spec)
    if A is not None:
        found = np.intersect1d(found, np.array(sorted(set(A)), dtype=np.int64))
    in_set = np.zeros(N + 1, dtype=bool)
    in_set[found] = True
    exact = isinstance(lam, (int, Fraction)) and numeric_mode_of(nu) == NumericMode.EXACT
    values = _simple_values(lam, nu, exact)(np.arange(0, N + 1))
    omegas, signs = _corner_signs(k + 1)

    reports: list[SimpleDerivReport] = []
    for n in range(1, N + 1):
        if found.size == 0 or len(reports) >= max_cases:
            break
        hs = _admissible_tuples(n, found - n, k + 1, in_set, omegas)
        if len(hs) == 0:
            continue
        deltas = _derivatives(values, n, hs, omegas, signs)
        for row, value in zip(hs[: max_cases - len(reports)], deltas):
            reports.append(_simple_report(lam, n, [int(h) for h in row], value))
    worst = max((r.abs_q for r in reports if r.abs_q is not None), default=None)
    logger.info("simple derivative scan: %d cases, max |q| = %s", len(reports), worst)
    return reports


def find_progressions(B, k: int, max_count: int = 100, N: int | None = None) -> list[tuple[int, int]]:
    """(n, h) with h > 0 and n, n+h, ..., n+kh all in B, ordered by n then h."""
    found, N = _as_member_array(B, N)
    in_set = np.zeros(N + 1, dtype=bool)
    in_set[found] = True
    hits: list[tuple[int, int]] = []
    for h in range(1, (N - 1) // max(k, 1) + 1):
        starts = np.arange(1, N - k * h + 1)
        mask = np.ones(len(starts), dtype=bool)
        for j in range(k + 1):
            mask &= in_set[starts + j * h]
        hits.extend((int(n), h) for n in starts[mask][:max_count])
    hits.sort()
    return hits[:max_count]


def concentration_check(phi: BracketNode, nus: Sequence[BracketNode], delta: Scalar, eps: Scalar, N: int) -> ConcentrationReport:
    """Largest share of B_N(nu; I_eps) that phi sends into one interval of width delta."""
    spec = recurrence_set(((nu, IntervalSpec.centered(eps)) for nu in nus), N)
    found = members(spec)
    if found.size == 0:
        return ConcentrationReport(N=N, set_size=0, fraction=0.0)
    values = np.sort(frac_array(eval_many(phi, found, numeric_mode_of(phi))).astype(float))
    ends = np.searchsorted(values, values + float(delta) + COMPARE_TOLERANCE, side="right")
    counts = ends - np.arange(len(values))
    best = int(np.argmax(counts))
    lo = values[best]
    J = IntervalSpec(lo, min(lo + float(delta), 0.5), lo_closed=True, hi_closed=True)
    return ConcentrationReport(N=N, set_size=int(found.size), interval=str(J),
                               fraction=float(counts[best]) / found.size)


def epsilon_sweep(
    phi: BracketNode,
    N: int,
    eps_grid: Sequence[Scalar],
    k: int | None = None,
    max_progressions: int = 2000,
) -> SweepReport:
    """Count kth-derivative identity failures on B_N(components; I_eps) per eps."""
    k = degree_bound(phi) if k is None else k
    nus = components(phi)
    mode = numeric_mode_of(phi)
    rows: list[SweepRow] = []
    for eps in sorted(eps_grid):
        spec = recurrence_set(((nu, IntervalSpec.centered(eps)) for nu in nus), N)
        progressions = find_progressions(spec, k, max_progressions)
        failures = 0
        for n, h in progressions:
            values = eval_many(phi, [n + j * h for j in range(k + 1)], mode)
            lhs = sum((-1) ** (k - j) * math.comb(k, j) * values[j] for j in range(k + 1))
            rhs = math.factorial(k) * eval_at(phi, h, mode)
            if abs(float(lhs - rhs)) > IDENTITY_TOLERANCE:
                failures += 1
        rows.append(SweepRow(eps=float(eps), progressions=len(progressions), violations=failures))
    clean = [row.eps for row in rows if row.progressions and not row.violations]
    largest = max(clean, default=None)
    logger.info("epsilon sweep: largest clean eps %s (c_hat_%d = %s)", largest, k, c_hat(k))
    return SweepReport(k=k, N=N, rows=rows, largest_clean_eps=largest)


def density_scan(
    builder: Callable[[int], RecurrenceSetSpec],
    Ns: Sequence[int],
    floor: float | None = None,
) -> DensityScanReport:
    rows = [DensityRow(N=N, density=density(builder(N))) for N in Ns]
    meeting = [row.N for row in rows if floor is not None and row.density >= floor]
    return DensityScanReport(rows=rows, floor=floor, smallest_n_meeting_floor=min(meeting, default=None))


def density_scan_csv(report: DensityScanReport, path=None) -> str:
    return write_csv(["N", "density"], ([row.N, row.density] for row in report.rows), path)
