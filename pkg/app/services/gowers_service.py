"""Gowers U^k norms on Z/M and on [N], inner products and masked correlations.

Notation: ``M`` is the cyclic group size (the padded length for [N] inputs).
The "power" of a norm is its 2^k-th power, the average that is actually
computed; the norm is its 2^k-th root.
"""
import itertools
import logging
import math
from fractions import Fraction

import numpy as np

from app.config.config import settings
from app.models.sequence_models import SequenceFn
from app.schemas.gowers_schema import CorrelationReport, GcsReport, GowersReport, Method, NormEstimate
from app.utils.errors import BudgetExceededError, ConsistencyError, UsageError
from app.utils.utils import complex_fsum, make_rng, next_power_of_two, phase

logger = logging.getLogger(__name__)

MIN_K, MAX_K = 2, 5
Z_99 = 2.326

CornerFamily = dict[tuple[int, ...], np.ndarray]


def _check_k(k: int):
    if not MIN_K <= k <= MAX_K:
        raise UsageError(f"k must be between {MIN_K} and {MAX_K}, got {k}")


def _values(f) -> np.ndarray:
    values = f.values if isinstance(f, SequenceFn) else f
    return np.asarray(values, dtype=complex)


def default_ntilde(k: int, N: int) -> int:
    """Smallest power of two >= 2^k N."""
    return next_power_of_two(2**k * N)


def resolve_method(k: int, method: Method | str = Method.AUTO) -> Method:
    method = Method(method)
    if method != Method.AUTO:
        return method
    return Method.MONTE_CARLO if k >= 5 else Method.RECURSIVE


def _real_power(value: complex) -> float:
    """Assert the averaged 2^k-fold product is real and non-negative."""
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > settings.IMAG_TOLERANCE * scale:
        raise ConsistencyError(f"Gowers average has imaginary residue {value.imag:.3g}")
    if value.real < -settings.IMAG_TOLERANCE * scale:
        raise ConsistencyError(f"Gowers average is negative: {value.real:.3g}")
    return max(value.real, 0.0)


# ================== EVALUATORS ================

def _direct_power(values: np.ndarray, k: int, budget: int | None = None) -> complex:
    """The definitional sum over x and h in (Z/M)^k."""
    M = len(values)
    budget = budget or settings.GOWERS_DIRECT_BUDGET
    if M ** (k + 1) > budget:
        raise BudgetExceededError("direct Gowers sum", M ** (k + 1), budget)
    sums = []
    for hs in itertools.product(range(M), repeat=k):
        g = values
        for h in hs:
            g = np.roll(g, -h) * np.conj(g)
        sums.append(complex_fsum(g))
    return complex_fsum(sums) / M ** (k + 1)


def _u2_power_rows(rows: np.ndarray) -> np.ndarray:
    """sum_xi |f^(xi)|^4 per row, with f^(xi) = E_x f(x) e(-x xi / M)."""
    spectrum = np.fft.fft(rows, axis=-1) / rows.shape[-1]
    return np.sum(np.abs(spectrum) ** 4, axis=-1)


def _support_differences(values: np.ndarray) -> np.ndarray:
    """Shifts h for which supp f and supp f - h meet."""
    M = len(values)
    support = np.flatnonzero(values != 0)
    if support.size == 0:
        return support
    return np.unique((support[None, :] - support[:, None]).ravel() % M)


def _shifted_products(values: np.ndarray, hs: np.ndarray) -> np.ndarray:
    """Row i is Delta*_{hs[i]} f."""
    M = len(values)
    index = (np.arange(M)[None, :] + hs[:, None]) % M
    return values[index] * np.conj(values)[None, :]


def _recursive_power(values: np.ndarray, k: int) -> float:
    """||f||^{2^k} = E_h ||Delta*_h f||_{U^{k-1}}^{2^{k-1}}, ending in the Fourier U^2 formula."""
    M = len(values)
    if k == 2:
        spectrum = np.fft.fft(values) / M
        return math.fsum((np.abs(spectrum) ** 4).tolist())
    shifts = _support_differences(values)
    if shifts.size == 0:
        return 0.0
    if k == 3:
        return math.fsum(_u2_power_rows(_shifted_products(values, shifts)).tolist()) / M
    partial = [_recursive_power(row, k - 1) for row in _shifted_products(values, shifts)]
    return math.fsum(partial) / M


def _recursive_cost(values: np.ndarray, k: int) -> int:
    shifts = max(1, _support_differences(values).size)
    M = len(values)
    return shifts ** (k - 2) * M * max(1, M.bit_length())


def _mc_samples(values: np.ndarray, k: int, samples: int, window: int | None,
                seed: int | None) -> np.ndarray:
    """Per-sample U^2 powers of Delta*_{h_1..h_{k-2}} f with random shifts.

    With ``window`` the shifts are drawn from [-window, window] instead of Z/M.
    """
    rng = make_rng(seed)
    M = len(values)
    out = np.empty(samples)
    done = 0
    while done < samples:
        batch = min(settings.MC_BATCH, samples - done)
        rows = np.broadcast_to(values, (batch, M)).copy()
        for _ in range(k - 2):
            if window is None:
                hs = rng.integers(0, M, size=batch)
            else:
                hs = rng.integers(-window, window + 1, size=batch)
            index = (np.arange(M)[None, :] + hs[:, None]) % M
            rows = np.take_along_axis(rows, index, axis=1) * np.conj(rows)
        out[done:done + batch] = _u2_power_rows(rows)
        done += batch
    return out


def _check_samples(samples: int):
    if samples < settings.MC_MIN_SAMPLES:
        raise UsageError(
            f"Monte Carlo needs at least {settings.MC_MIN_SAMPLES} samples, got {samples}")


def _power(values: np.ndarray, k: int, method: Method, budget: int | None = None) -> float:
    if method == Method.DIRECT:
        return _real_power(_direct_power(values, k, budget))
    budget = budget or settings.GOWERS_RECURSIVE_BUDGET
    cost = _recursive_cost(values, k)
    if cost > budget:
        raise BudgetExceededError("recursive Gowers evaluation", cost, budget)
    return _recursive_power(values, k)


def _root(power: float, k: int) -> float:
    return power ** (1.0 / 2**k)


# ================== NORMS ================

def gowers_norm_group(f, k: int, method: Method | str = Method.AUTO,
                      samples: int | None = None, seed: int | None = None,
                      budget: int | None = None) -> NormEstimate:
    """||f||_{U^k(Z/M)} for f given on Z/M.

    ``budget`` replaces the configured direct or recursive budget for this call.
    """
    _check_k(k)
    values = _values(f)
    method = resolve_method(k, method)
    if method != Method.MONTE_CARLO:
        power = _power(values, k, method, budget)
        return NormEstimate(norm=_root(power, k), power=power, method=method)
    samples = samples or settings.MC_DEFAULT_SAMPLES
    _check_samples(samples)
    draws = _mc_samples(values, k, samples, None, seed)
    mean = math.fsum(draws.tolist()) / samples
    stderr = float(np.std(draws, ddof=1) / math.sqrt(samples))
    return NormEstimate(
        norm=_root(mean, k), power=mean, method=method, stderr=stderr,
        lower_bound=_root(max(mean - Z_99 * stderr, 0.0), k), samples=samples,
    )


def interval_normalizer_power(k: int, N: int, ntilde: int) -> Fraction:
    """||1_[N]||^{2^k} on Z/ntilde in closed form (ntilde >= 2^k N).

    Counts sum_{h in Z^k} max(0, N - |h|_1) via the number of h with |h|_1 = s.
    """
    count = N
    for s in range(1, N):
        shells = sum(2**j * math.comb(k, j) * math.comb(s - 1, j - 1) for j in range(1, min(k, s) + 1))
        count += (N - s) * shells
    return Fraction(count, ntilde ** (k + 1))


def pad(f, N: int, ntilde: int) -> np.ndarray:
    """Zero-extend a sequence on [1, N] to Z/ntilde (index n stays at n)."""
    values = _values(f)
    if len(values) != N:
        raise UsageError(f"sequence has length {len(values)}, expected {N}")
    padded = np.zeros(ntilde, dtype=complex)
    padded[1:N + 1] = values
    return padded


def gowers_norm_interval(f, k: int, ntilde: int | None = None, method: Method | str = Method.AUTO,
                         samples: int | None = None, seed: int | None = None,
                         budget: int | None = None) -> GowersReport:
    """||f||_{U^k[N]} = ||f~||_{U^k(Z/ntilde)} / ||1_[N]||_{U^k(Z/ntilde)}."""
    _check_k(k)
    values = _values(f)
    N = len(values)
    if N < 1:
        raise UsageError("empty sequence")
    ntilde = ntilde or default_ntilde(k, N)
    if ntilde < 2**k * N:
        raise UsageError(f"Ntilde={ntilde} is smaller than 2^k N = {2**k * N}")
    method = resolve_method(k, method)
    padded = pad(values, N, ntilde)
    seed = settings.DEFAULT_SEED if seed is None else seed
    logger.info("U^%d[%d] with Ntilde=%d by %s", k, N, ntilde, method.value)

    if method != Method.MONTE_CARLO:
        power = _power(padded, k, method, budget)
        normalizer_power = _power(pad(np.ones(N), N, ntilde), k, method, budget)
        if normalizer_power <= 0:
            raise ConsistencyError("normalizer vanished")
        return GowersReport(
            k=k, N=N, ntilde=ntilde, norm=_root(power / normalizer_power, k),
            normalizer=_root(normalizer_power, k), method=method, seed=seed,
        )

    samples = samples or settings.MC_DEFAULT_SAMPLES
    _check_samples(samples)
    window = N - 1
    scale = ((2 * window + 1) / ntilde) ** (k - 2)
    normalizer_power = float(interval_normalizer_power(k, N, ntilde))
    draws = _mc_samples(padded, k, samples, window, seed) * scale / normalizer_power
    mean = math.fsum(draws.tolist()) / samples
    stderr_power = float(np.std(draws, ddof=1) / math.sqrt(samples))
    norm = _root(mean, k)
    # delta method: d(x^(1/2^k)) = x^(1/2^k - 1) / 2^k dx
    stderr = stderr_power * norm / (2**k * mean) if mean > 0 else float("inf")
    lower = _root(max(mean - Z_99 * stderr_power, 0.0), k)
    logger.info("Monte Carlo U^%d[%d]: %.6f +/- %.2g (99%% lower bound %.6f)", k, N, norm, stderr, lower)
    return GowersReport(
        k=k, N=N, ntilde=ntilde, norm=norm, normalizer=_root(normalizer_power, k), method=method,
        mc_stderr=stderr, mc_lower_bound=lower, samples=samples, seed=seed,
    )


# ================== INNER PRODUCTS ================

def _family_arrays(g: CornerFamily) -> tuple[dict[tuple[int, ...], np.ndarray], int]:
    if not g:
        raise UsageError("empty corner family")
    k = len(next(iter(g)))
    expected = set(itertools.product((0, 1), repeat=k))
    if set(g) != expected:
        raise UsageError(f"corner family must be indexed by {{0,1}}^{k}")
    arrays = {omega: _values(v) for omega, v in g.items()}
    sizes = {len(v) for v in arrays.values()}
    if len(sizes) != 1:
        raise UsageError(f"corner family mixes group sizes {sorted(sizes)}")
    return arrays, k


def _overlap_shifts(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """h with supp(first) meeting supp(second) - h."""
    M = len(first)
    a = np.flatnonzero(first != 0)
    b = np.flatnonzero(second != 0)
    if a.size == 0 or b.size == 0:
        return np.array([], dtype=int)
    return np.unique((b[None, :] - a[:, None]).ravel() % M)


def _inner(arrays: dict[tuple[int, ...], np.ndarray], k: int) -> complex:
    """<g_omega> with the last coordinate peeled off:
    G_w'(y) = g_(w',0)(y) conj(g_(w',1)(y + h))."""
    M = len(next(iter(arrays.values())))
    if k == 2:
        spectra = {omega: np.fft.fft(v) / M for omega, v in arrays.items()}
        terms = spectra[(0, 0)] * np.conj(spectra[(1, 0)]) * np.conj(spectra[(0, 1)]) * spectra[(1, 1)]
        return complex_fsum(terms)
    heads = list(itertools.product((0, 1), repeat=k - 1))
    shifts = None
    for head in heads:
        overlap = _overlap_shifts(arrays[head + (0,)], arrays[head + (1,)])
        shifts = overlap if shifts is None else np.intersect1d(shifts, overlap)
    if shifts.size == 0:
        return 0j
    index = (np.arange(M)[None, :] + shifts[:, None]) % M
    stacked = {
        head: arrays[head + (0,)][None, :] * np.conj(arrays[head + (1,)][index])
        for head in heads
    }
    if k == 3:
        spectra = {head: np.fft.fft(rows, axis=1) / M for head, rows in stacked.items()}
        terms = spectra[(0, 0)] * np.conj(spectra[(1, 0)]) * np.conj(spectra[(0, 1)]) * spectra[(1, 1)]
        return complex_fsum(terms) / M
    partial = [
        _inner({head: stacked[head][i] for head in heads}, k - 1) for i in range(len(shifts))
    ]
    return complex_fsum(partial) / M


def gowers_inner_product(g: CornerFamily) -> complex:
    """<g_omega>_{U^k} = E_{x,h} prod_omega C^{|omega|} g_omega(x + omega.h)."""
    arrays, k = _family_arrays(g)
    if k < 2:
        raise UsageError("inner products need k >= 2")
    return _inner(arrays, k)


def gcs_check(g: CornerFamily) -> GcsReport:
    arrays, k = _family_arrays(g)
    lhs = abs(gowers_inner_product(arrays))
    rhs = math.prod(gowers_norm_group(v, k, Method.RECURSIVE).norm for v in arrays.values())
    return GcsReport(lhs=lhs, rhs=rhs, holds=lhs <= rhs + settings.GCS_TOLERANCE)


# ================== MASKED CORRELATION ================

def _set_array(B, N: int) -> np.ndarray:
    members = np.array(sorted(B), dtype=int)
    if members.size and (members.min() < 1 or members.max() > N):
        raise UsageError(f"set is not contained in [1, {N}]")
    return members


def masked_family(phi_values: np.ndarray, B, k: int, ntilde: int) -> CornerFamily:
    """g_0 = e(phi) 1_[N] and g_omega = e(phi) 1_B for omega != 0, padded to Z/ntilde."""
    N = len(phi_values)
    f = phase(phi_values)
    members = _set_array(B, N)
    masked = np.zeros(N, dtype=complex)
    masked[members - 1] = f[members - 1]
    g0, gb = pad(f, N, ntilde), pad(masked, N, ntilde)
    return {omega: (g0 if not any(omega) else gb) for omega in itertools.product((0, 1), repeat=k)}


def _mc_correlation(phi_values: np.ndarray, in_b: np.ndarray, k: int, samples: int,
                    seed: int | None) -> tuple[float, float]:
    rng = make_rng(seed)
    N = len(phi_values)
    omegas = np.array(list(itertools.product((0, 1), repeat=k)))
    signs = (-1.0) ** (k - omegas.sum(axis=1))
    n = rng.integers(1, N + 1, size=samples)
    h = rng.integers(-N, N + 1, size=(samples, k))
    corners = n[:, None] + h @ omegas.T
    valid = (corners >= 1) & (corners <= N)
    safe = np.where(valid, corners, 1) - 1
    members = np.where(valid, in_b[safe], False)
    members[:, 0] = True  # omega = 0 is n itself, always in [N]
    keep = members.all(axis=1)
    derivative = (phi_values[safe] * signs[None, :]).sum(axis=1)
    terms = np.where(keep, phase(derivative), 0)
    mean = complex(np.mean(terms))
    stderr = math.sqrt(np.var(terms.real, ddof=1) + np.var(terms.imag, ddof=1)) / math.sqrt(samples)
    return abs(mean), stderr


def masked_correlation(phi_values, B, k: int, allow_monte_carlo: bool = True,
                       samples: int | None = None, seed: int | None = None) -> CorrelationReport:
    """|E_{n in [N], h in [-N,N]^k} e(Delta_h phi(n)) prod_{omega != 0} 1_B(n + omega.h)|."""
    phi_values = np.asarray(_real_values(phi_values), dtype=float)
    N = len(phi_values)
    members = _set_array(B, N)
    if members.size == 0:
        return CorrelationReport(k=k, N=N, set_size=0, value=0.0, exact=True)
    if N ** (k + 1) <= settings.CORRELATION_BUDGET:
        ntilde = default_ntilde(k, N)
        inner = gowers_inner_product(masked_family(phi_values, members, k, ntilde))
        value = abs(inner) * ntilde ** (k + 1) / (N * (2 * N + 1) ** k)
        return CorrelationReport(k=k, N=N, set_size=int(members.size), value=value, exact=True)
    if not allow_monte_carlo:
        raise BudgetExceededError("masked correlation", N ** (k + 1), settings.CORRELATION_BUDGET)
    samples = samples or settings.MC_DEFAULT_SAMPLES
    _check_samples(samples)
    in_b = np.zeros(N, dtype=bool)
    in_b[members - 1] = True
    value, stderr = _mc_correlation(phi_values, in_b, k, samples, seed)
    return CorrelationReport(k=k, N=N, set_size=int(members.size), value=value, exact=False,
                             stderr=stderr, samples=samples)


def _real_values(phi) -> np.ndarray:
    values = phi.values if isinstance(phi, SequenceFn) else phi
    return np.array([float(v) for v in np.ravel(values)])


def strong_local_poly_bound(phi_values, B, k: int, **kwargs) -> float:
    """Lower bound for ||e(phi)||_{U^k[N]} from Gowers-Cauchy-Schwarz:
    ||f||_{U^k[N]} >= |<g_omega>| / ||1_[N]||^{2^k} with the masked family."""
    report = masked_correlation(phi_values, B, k, **kwargs)
    N = report.N
    ntilde = default_ntilde(k, N)
    inner = report.value * N * (2 * N + 1) ** k / ntilde ** (k + 1)
    return inner / float(interval_normalizer_power(k, N, ntilde))


# ================== BOX COUNTING ================

def box_count(B, j: int, N: int) -> int:
    """|{(n, h) in [N] x [-N,N]^j : n + omega.h in B for all omega}|.

    Uses |B_j| = sum_{h'} r(h')^2 with r(h') the size of the (j-1)-cube set.
    """
    if j < 0:
        raise UsageError("j must be non-negative")
    members = _set_array(B, N)
    if j == 0 or members.size == 0:
        return int(members.size)
    width = 2 * N - 1
    rows_needed = width ** (j - 1) * N
    if rows_needed > settings.BOX_COUNT_BUDGET:
        raise BudgetExceededError("box count", rows_needed, settings.BOX_COUNT_BUDGET)
    rows = np.zeros((1, N), dtype=bool)
    rows[0, members - 1] = True
    for _ in range(j - 1):
        shifted = []
        for h in range(-(N - 1), N):
            moved = np.zeros_like(rows)
            if h >= 0:
                moved[:, :N - h] = rows[:, h:]
            else:
                moved[:, -h:] = rows[:, :N + h]
            shifted.append(rows & moved)
        rows = np.concatenate(shifted, axis=0)
    counts = rows.sum(axis=1).astype(object)
    return int(sum(c * c for c in counts))
