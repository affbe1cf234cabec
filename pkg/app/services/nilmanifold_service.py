"""Unitriangular groups T_p^r, Mal'cev coordinates and polynomial mappings.

Matrices are numpy arrays of shape (r, p+1, p+1): float64 in float mode,
object arrays of Fraction in exact mode. Polynomial mappings keep sympy
expressions in ``n`` so derivatives can be taken with symbolic shifts.
"""
import itertools
import logging
import math
from fractions import Fraction
from typing import Callable

import numpy as np
import sympy

from app.config.config import settings
from app.models.bracket_models import BracketNode
from app.models.nil_models import (
    N_SYMBOL,
    Filtration,
    GeneratorId,
    LieElement,
    MalcevBasis,
    PolynomialMapping,
    Unitriangular,
)
from app.schemas.nil_schema import (
    DiscrepancyReport,
    FiltrationCheck,
    HeisenbergReport,
    InverseReport,
    MappingEntry,
    MappingPayload,
)
from app.schemas.run_schema import NumericMode
from app.services.bracket_service import eval_many, realize
from app.services.dsl_service import parse_form
from app.utils.errors import AcceptanceError, ConsistencyError, UsageError
from app.utils.utils import Scalar, frac, frac_array, int_part, make_rng, scalar_to_str

logger = logging.getLogger(__name__)

HEISENBERG_BRACKET = "a1*n*(a2*n - {a2*n})"


# ================== EXP / LOG ================

def mat_exp(X: LieElement) -> Unitriangular:
    """exp(X) = sum_{j <= p} X^j / j!; the series stops because X^(p+1) = 0."""
    term = _identity_array(X.entries)
    total = _identity_array(X.entries)
    for j in range(1, X.p + 1):
        term = np.matmul(term, X.entries) / j
        total = total + term
    return Unitriangular(total)


def mat_log(g: Unitriangular) -> LieElement:
    nilpotent = g.entries - _identity_array(g.entries)
    power = nilpotent
    total = nilpotent
    for j in range(2, g.p + 1):
        power = np.matmul(power, nilpotent)
        total = total + power * ((-1) ** (j + 1)) / j
    return LieElement(total)


def _identity_array(like: np.ndarray) -> np.ndarray:
    return Unitriangular.identity(like.shape[1] - 1, like.shape[0], like.dtype == object).entries.copy()


# ================== BASES ================

def standard_generators(p: int, r: int = 1) -> list[GeneratorId]:
    return sorted(
        (GeneratorId(b, i, j) for b in range(r) for i in range(p + 1) for j in range(i + 1, p + 1)),
        key=lambda g: (g.distance, g.block, g.row),
    )


def standard_basis(p: int, r: int = 1) -> MalcevBasis:
    """Generators ordered by distance from the diagonal, then block, then row."""
    basis = MalcevBasis(
        p, r, tuple((g, 1) for g in standard_generators(p, r)), name=f"standard(T_{p}^{r})")
    return MalcevBasis(p, r, basis.elements, nested=is_nested(basis), name=basis.name)


def heisenberg_bases() -> tuple[MalcevBasis, MalcevBasis]:
    """The bases X = (E12, E01, E02) and Y = (E01, E12, E02) of the Heisenberg algebra."""
    e01, e12, e02 = GeneratorId(0, 0, 1), GeneratorId(0, 1, 2), GeneratorId(0, 0, 2)
    bases = []
    for name, order in (("X", (e12, e01, e02)), ("Y", (e01, e12, e02))):
        draft = MalcevBasis(2, 1, tuple((g, 1) for g in order), name=name)
        bases.append(MalcevBasis(2, 1, draft.elements, nested=is_nested(draft), name=name))
    return bases[0], bases[1]


def _support(element: LieElement) -> set[GeneratorId]:
    blocks, rows, cols = np.nonzero(element.entries != 0)
    return {GeneratorId(int(b), int(i), int(j)) for b, i, j in zip(blocks, rows, cols)}


def _bracket_support(a: GeneratorId, b: GeneratorId, p: int, r: int) -> set[GeneratorId]:
    x = LieElement.generator(a, p, r, exact=True)
    y = LieElement.generator(b, p, r, exact=True)
    return _support(x.bracket(y))


def _tails_absorb(basis: MalcevBasis, shift: int) -> bool:
    generators = [g for g, _ in basis.elements]
    for j in range(basis.dimension):
        target = basis.tail(j + shift)
        for x in generators:
            for y in basis.tail(j):
                if not _bracket_support(x, y, basis.p, basis.r) <= target:
                    return False
    return True


def is_malcev(basis: MalcevBasis) -> bool:
    """Every tail h_j is an ideal: [g, h_j] lies in h_j."""
    return _tails_absorb(basis, 0)


def is_nested(basis: MalcevBasis) -> bool:
    """[g, h_j] lies in h_{j+1} for every j."""
    return _tails_absorb(basis, 1)


# ================== COORDINATES ================

def malcev_coords(g: Unitriangular, basis: MalcevBasis) -> list[Scalar]:
    """psi(g): the t with g = exp(t_1 X_1) ... exp(t_m X_m).

    Peels generators off the left: t_i is read from the entry X_i controls,
    then the row operation for exp(-t_i X_i) is applied.
    """
    current = np.array(g.entries, copy=True)
    coords: list[Scalar] = []
    for gen, sign in basis.elements:
        t = current[gen.block, gen.row, gen.col] * sign
        if not g.exact:
            t = float(t)
        coords.append(t)
        current[gen.block, gen.row, :] = current[gen.block, gen.row, :] - t * sign * current[gen.block, gen.col, :]
    residual = current - _identity_array(current)
    if g.exact:
        clean = all(v == 0 for v in residual.ravel())
    else:
        clean = bool(np.all(np.abs(residual) <= settings.ORBIT_TOLERANCE))
    if not clean:
        raise ConsistencyError("non-identity residual after peeling; not a Mal'cev basis for this group")
    return coords


def from_coords(t, basis: MalcevBasis, exact: bool = False) -> Unitriangular:
    """prod_i exp(t_i X_i), built with column operations."""
    if len(t) != basis.dimension:
        raise UsageError(f"expected {basis.dimension} coordinates, got {len(t)}")
    exact = exact or all(isinstance(v, (int, Fraction)) for v in t) and any(isinstance(v, Fraction) for v in t)
    current = Unitriangular.identity(basis.p, basis.r, exact).entries.copy()
    for (gen, sign), value in zip(basis.elements, t):
        c = Fraction(value) * sign if exact else float(value) * sign
        current[gen.block, :, gen.col] = current[gen.block, :, gen.col] + c * current[gen.block, :, gen.row]
    return Unitriangular(current)


def _integer(x: Scalar) -> int:
    return int(int_part(x)) if isinstance(x, Fraction) else int(round(int_part(x)))


def _in_fundamental(coords) -> bool:
    half = Fraction(1, 2)
    return all(-half < c <= half for c in coords)


def reduce_to_fundamental(g: Unitriangular, basis: MalcevBasis) -> tuple[list[Scalar], Unitriangular]:
    """Find z in Gamma with psi(gz) in (-1/2, 1/2]^m; returns (chi, z)."""
    if not basis.nested:
        raise UsageError("fundamental-domain reduction needs a nested basis")
    current = g
    z = Unitriangular.identity(g.p, g.r, g.exact)
    for sweep in range(2):
        for i, (gen, sign) in enumerate(basis.elements):
            t = malcev_coords(current, basis)[i]
            shift = _integer(t)
            if shift == 0:
                continue
            step = mat_exp(LieElement.generator(gen, g.p, g.r, scale=-shift * sign, exact=g.exact))
            current = current @ step
            z = z @ step
        chi = malcev_coords(current, basis)
        if _in_fundamental(chi):
            return chi, z
        logger.debug("re-sweeping fundamental-domain reduction (sweep %d): %s", sweep, chi)
    raise ConsistencyError(f"reduction left coordinates outside (-1/2, 1/2]: {chi}")


def fundamental_matrix(g: Unitriangular, basis: MalcevBasis) -> Unitriangular:
    _, z = reduce_to_fundamental(g, basis)
    return g @ z


def coordinate_distance(x: Unitriangular, y: Unitriangular, basis: MalcevBasis) -> float:
    """|psi(x y^-1)|, the sup-norm upper bound for the nilmanifold metric."""
    coords = malcev_coords(x @ y.inverse(), basis)
    return max((abs(float(c)) for c in coords), default=0.0)


def change_of_basis_jacobian(source: MalcevBasis, target: MalcevBasis, points: int = 20,
                             seed: int | None = None, step: float = 1e-6) -> np.ndarray:
    """|det| of d(psi_target o psi_source^-1) at random points, by central differences."""
    rng = make_rng(seed)
    dets = []
    m = source.dimension
    for _ in range(points):
        base = rng.uniform(-2, 2, size=m)
        jacobian = np.empty((m, m))
        for j in range(m):
            offset = np.zeros(m)
            offset[j] = step
            up = malcev_coords(from_coords(base + offset, source), target)
            down = malcev_coords(from_coords(base - offset, source), target)
            jacobian[:, j] = (np.array(up, dtype=float) - np.array(down, dtype=float)) / (2 * step)
        dets.append(abs(np.linalg.det(jacobian)))
    return np.array(dets)


# ================== HEISENBERG ================

def heisenberg_element(alpha: Scalar, beta: Scalar, n: int) -> Unitriangular:
    return Unitriangular(np.array([[1, -alpha * n, 0], [0, 1, beta * n], [0, 0, 1]],
                                  dtype=object if isinstance(alpha * n, Fraction) else float))


def heisenberg_bracket(alpha: Scalar, beta: Scalar) -> BracketNode:
    return realize(parse_form(HEISENBERG_BRACKET), {1: alpha, 2: beta})


def heisenberg_orbit_check(alpha: Scalar, beta: Scalar, n_max: int,
                           mode: NumericMode = NumericMode.FLOAT) -> HeisenbergReport:
    """The reduced orbit of [[1,-an,0],[0,1,bn],[0,0,1]] has {a n [b n]} in its corner."""
    exact = NumericMode(mode) == NumericMode.EXACT
    if exact:
        alpha, beta = Fraction(alpha), Fraction(beta)
    x_basis, _ = heisenberg_bases()
    ns = np.arange(1, n_max + 1)
    corner = frac_array(eval_many(heisenberg_bracket(alpha, beta), ns, mode))
    max_error = 0.0
    for n, expected_corner in zip(ns, corner):
        n = int(n)
        reduced = fundamental_matrix(heisenberg_element(alpha, beta, n), x_basis).entries[0]
        expected = [frac(-alpha * n), expected_corner, frac(beta * n)]
        actual = [reduced[0, 1], reduced[0, 2], reduced[1, 2]]
        if exact:
            error = 0.0 if all(a == e for a, e in zip(actual, expected)) else math.inf
        else:
            error = max(abs(float(a) - float(e)) for a, e in zip(actual, expected))
        max_error = max(max_error, error)
        if error > settings.ORBIT_TOLERANCE:
            raise AcceptanceError(
                f"Heisenberg correspondence fails at n={n}: got {actual}, expected {expected}")
    logger.info("Heisenberg orbit check passed for n <= %d (max error %.3g)", n_max, max_error)
    return HeisenbergReport(
        alpha=scalar_to_str(alpha), beta=scalar_to_str(beta), n_max=n_max, mode=NumericMode(mode).value,
        checked=n_max, max_error=max_error, passed=True,
    )


def orbit(sequence: Callable[[int], Unitriangular], basis: MalcevBasis, N: int) -> list[list]:
    """Rows (n, chi_1, ..., chi_m) for n in [N]."""
    rows = []
    for n in range(1, N + 1):
        chi, _ = reduce_to_fundamental(sequence(n), basis)
        rows.append([n, *chi])
    return rows


# ================== FILTRATIONS AND LAYERS ================

def lower_central_filtration(p: int, r: int = 1) -> Filtration:
    return Filtration(p, r, dilation=1)


def layer(g) -> int:
    """Largest l with g in T_p(l): every entry within distance l of the diagonal vanishes."""
    for distance in range(1, g.p + 1):
        if isinstance(g, PolynomialMapping):
            vanish = all(
                g.entry(b, i, i + distance) == 0 for b in range(g.r) for i in range(g.p + 1 - distance))
        else:
            diagonal = np.array([np.diagonal(block, offset=distance) for block in g.entries])
            vanish = all(v == 0 for v in diagonal.ravel())
        if not vanish:
            return distance - 1
    return g.p


def _random_in_layer(p: int, r: int, level: int, rng: np.random.Generator) -> Unitriangular:
    arr = Unitriangular.identity(p, r, exact=True).entries.copy()
    for b in range(r):
        for i in range(p + 1):
            for j in range(i + level + 1, p + 1):
                arr[b, i, j] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 5)))
    return Unitriangular(arr)


def check_filtration(filtration: Filtration, samples: int = 25, seed: int | None = None) -> FiltrationCheck:
    """Spot-check [G_i, G_j] in G_{i+j} on random exact elements."""
    rng = make_rng(seed)
    top = filtration.degree + 1
    holds = True
    for i, j in itertools.product(range(1, top + 1), repeat=2):
        for _ in range(samples):
            g = _random_in_layer(filtration.p, filtration.r, filtration.level(i), rng)
            h = _random_in_layer(filtration.p, filtration.r, filtration.level(j), rng)
            commutator = g @ h @ g.inverse() @ h.inverse()
            if layer(commutator) < filtration.level(i + j):
                holds = False
                break
    return FiltrationCheck(kind=filtration.kind, degree=filtration.degree, samples=samples, holds=holds)


# ================== POLYNOMIAL MAPPINGS ================

def poly_map_eval(rho: PolynomialMapping, n: int, exact: bool | None = None) -> Unitriangular:
    values = {g: e.subs(N_SYMBOL, n) for g, e in rho.entries.items()}
    for g, v in values.items():
        if v.free_symbols:
            raise UsageError(f"entry {tuple(g)} still depends on {sorted(map(str, v.free_symbols))}")
    if exact is None:
        exact = all(v.is_Rational for v in values.values())
    arr = Unitriangular.identity(rho.p, rho.r, exact).entries.copy()
    for g, v in values.items():
        arr[g.block, g.row, g.col] = Fraction(int(v.p), int(v.q)) if exact else float(v)
    return Unitriangular(arr)


def poly_map_product(rho: PolynomialMapping, sigma: PolynomialMapping) -> PolynomialMapping:
    """(rho sigma)(n) = rho(n) sigma(n); degree at most deg rho + deg sigma."""
    _require_same_group(rho, sigma)
    entries = {}
    for b in range(rho.r):
        for i in range(rho.p + 1):
            for j in range(i + 1, rho.p + 1):
                total = rho.entry(b, i, j) + sigma.entry(b, i, j)
                for t in range(i + 1, j):
                    total += rho.entry(b, i, t) * sigma.entry(b, t, j)
                entries[GeneratorId(b, i, j)] = total
    return PolynomialMapping(rho.p, rho.r, entries)


def poly_map_inverse(rho: PolynomialMapping) -> PolynomialMapping:
    """Back-substitution: inv_ij = -rho_ij - sum_{i<t<j} rho_it inv_tj, bottom row first."""
    inverse: dict[GeneratorId, sympy.Expr] = {}
    for b in range(rho.r):
        for i in range(rho.p, -1, -1):
            for j in range(i + 1, rho.p + 1):
                total = -rho.entry(b, i, j)
                for t in range(i + 1, j):
                    total -= rho.entry(b, i, t) * inverse.get(GeneratorId(b, t, j), 0)
                inverse[GeneratorId(b, i, j)] = sympy.expand(total)
    return PolynomialMapping(rho.p, rho.r, inverse)


def shift(rho: PolynomialMapping, h) -> PolynomialMapping:
    return PolynomialMapping(
        rho.p, rho.r, {g: e.subs(N_SYMBOL, N_SYMBOL + h) for g, e in rho.entries.items()})


def derivative(g, h):
    """d_h g(n) = g(n+h) g(n)^-1, for a PolynomialMapping or a callable n -> Unitriangular."""
    if isinstance(g, PolynomialMapping):
        return poly_map_product(shift(g, h), poly_map_inverse(g))
    if callable(g):
        return lambda n: g(n + h) @ g(n).inverse()
    raise TypeError(f"cannot differentiate {type(g).__name__}")


def shift_symbols(count: int, start: int = 1) -> list[sympy.Symbol]:
    return [sympy.Symbol(f"h{i}", integer=True) for i in range(start, start + count)]


def iterated_derivative(rho: PolynomialMapping, hs) -> PolynomialMapping:
    for h in hs:
        rho = derivative(rho, h)
    return rho


def depth_bound(k: int, p: int) -> int:
    """Upper bound on the triviality depth of a degree-k mapping into T_p."""
    return k * p * (p + 1) // 2 + p - 1


def triviality_depth(rho: PolynomialMapping, cap: int | None = None) -> int:
    """Smallest d such that every (d+1)-fold derivative is the identity."""
    cap = cap if cap is not None else depth_bound(max(rho.degree, 1), rho.p) + 2
    current = rho
    hs = shift_symbols(cap + 1)
    for d in range(cap + 1):
        current = derivative(current, hs[d])
        if current.is_identity:
            return d
    raise ConsistencyError(f"derivatives still non-trivial after {cap + 1} steps")


def is_poly_sequence(rho: PolynomialMapping, filtration: Filtration) -> bool:
    """i-fold derivatives with symbolic shifts lie in G_i for every i."""
    if rho.p != filtration.p:
        raise UsageError("mapping and filtration live on different groups")
    current = rho
    hs = shift_symbols(filtration.degree + 1)
    for i in range(1, filtration.degree + 2):
        current = derivative(current, hs[i - 1])
        if layer(current) < filtration.level(i):
            return False
        if current.is_identity:
            return True
    return current.is_identity


def generic_mapping(p: int, r: int, k: int) -> PolynomialMapping:
    """Every above-diagonal entry is sum_{t=1..k} c n^t with independent symbolic c."""
    entries = {}
    for g in standard_generators(p, r):
        coefficients = sympy.symbols(f"c_{g.block}_{g.row}_{g.col}_1:{k + 1}")
        entries[g] = sum((c * N_SYMBOL ** (t + 1) for t, c in enumerate(coefficients)), sympy.Integer(0))
    return PolynomialMapping(p, r, entries)


def finer_filtration(p: int, r: int, k: int) -> Filtration:
    depth = triviality_depth(generic_mapping(p, r, k))
    logger.info("triviality depth of a generic degree-%d mapping into T_%d^%d is %d", k, p, r, depth)
    return Filtration(p, r, dilation=max(depth, 1))


def random_mapping(p: int, r: int, k: int, seed: int | None = None) -> PolynomialMapping:
    """Rational coefficients of small height, degree at most k."""
    rng = make_rng(seed)
    entries = {}
    for g in standard_generators(p, r):
        entries[g] = sum(
            (sympy.Rational(int(rng.integers(-5, 6)), int(rng.integers(1, 4))) * N_SYMBOL**t
             for t in range(k + 1)),
            sympy.Integer(0),
        )
    return PolynomialMapping(p, r, entries)


def _require_same_group(rho: PolynomialMapping, sigma: PolynomialMapping):
    if (rho.p, rho.r) != (sigma.p, sigma.r):
        raise UsageError(f"T_{rho.p}^{rho.r} and T_{sigma.p}^{sigma.r} mappings cannot be multiplied")


def mapping_to_payload(rho: PolynomialMapping) -> MappingPayload:
    entries = []
    for g in sorted(rho.entries):
        poly = sympy.Poly(rho.entries[g], N_SYMBOL)
        coefficients = [str(c) for c in reversed(poly.all_coeffs())]
        entries.append(MappingEntry(block=g.block, row=g.row, col=g.col, coefficients=coefficients))
    return MappingPayload(p=rho.p, r=rho.r, entries=entries)


def mapping_from_payload(payload: MappingPayload) -> PolynomialMapping:
    entries = {}
    for e in payload.entries:
        entries[GeneratorId(e.block, e.row, e.col)] = sum(
            (sympy.sympify(c) * N_SYMBOL**t for t, c in enumerate(e.coefficients)), sympy.Integer(0))
    return PolynomialMapping(payload.p, payload.r, entries)


def inverse_report(rho: PolynomialMapping, with_depth: bool = True) -> InverseReport:
    """Symbolic inverse of rho with both products checked against the identity."""
    inverse = poly_map_inverse(rho)
    identity = poly_map_product(rho, inverse).is_identity and poly_map_product(inverse, rho).is_identity
    return InverseReport(
        mapping=mapping_to_payload(rho),
        inverse=mapping_to_payload(inverse),
        degree=rho.degree,
        inverse_degree=inverse.degree,
        product_is_identity=identity,
        triviality_depth=triviality_depth(rho) if with_depth else None,
    )


# ================== EMBEDDING ================

def embed(p: int, q: int, g: Unitriangular) -> Unitriangular:
    """iota_{p,q}: entry (i, j) moves to (s i, s j) with s = q / p."""
    if p < 1 or q % p:
        raise UsageError(f"q={q} is not a multiple of p={p}")
    if g.p != p:
        raise UsageError(f"element lives in T_{g.p}, not T_{p}")
    s = q // p
    out = Unitriangular.identity(q, g.r, g.exact).entries.copy()
    for i in range(p + 1):
        for j in range(i + 1, p + 1):
            out[:, s * i, s * j] = g.entries[:, i, j]
    return Unitriangular(out)


# ================== EQUIDISTRIBUTION ================

def equidistribution_discrepancy(coords, boxes_per_axis: int = 10) -> DiscrepancyReport:
    """max over grid-aligned sub-boxes of |empirical mass - volume| on (-1/2, 1/2]^m."""
    points = np.asarray(coords, dtype=float)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    count, m = points.shape
    if count == 0:
        raise UsageError("no points")
    if np.any(points <= -0.5 - 1e-12) or np.any(points > 0.5 + 1e-12):
        raise UsageError("coordinates must lie in (-1/2, 1/2]")
    b = boxes_per_axis
    hist, _ = np.histogramdd(points, bins=[b] * m, range=[(-0.5, 0.5)] * m)
    prefix = np.zeros((b + 1,) * m)
    prefix[(slice(1, None),) * m] = hist / count
    for axis in range(m):
        prefix = np.cumsum(prefix, axis=axis)
    lo, hi = np.triu_indices(b + 1, 1)
    mass = np.zeros((len(lo),) * m)
    for corner in itertools.product((0, 1), repeat=m):
        index = [hi if c else lo for c in corner]
        sign = (-1) ** (m - sum(corner))
        mass = mass + sign * prefix[np.ix_(*index)]
    lengths = (hi - lo) / b
    volume = lengths
    for _ in range(m - 1):
        volume = np.multiply.outer(volume, lengths)
    discrepancy = float(np.max(np.abs(mass - volume)))
    logger.debug("discrepancy %.4g over %d points in dimension %d", discrepancy, count, m)
    return DiscrepancyReport(points=count, dimension=m, boxes_per_axis=b, discrepancy=discrepancy)
