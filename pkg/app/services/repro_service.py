"""Reproduction experiments and their pilot-calibrated floors.

Each experiment is a fixed grid of cells. Cells are independent and run on a
thread pool; ``Executor.map`` keeps the report in grid order, so a parallel
run produces the same report as a serial one.
"""
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from app.config.config import settings
from app.models.nil_models import GeneratorId, N_SYMBOL, PolynomialMapping
from app.models.sequence_models import IntervalSpec
from app.schemas.gowers_schema import Method
from app.schemas.recurrence_schema import CheckMode
from app.schemas.run_schema import CellResult, Experiment, NumericMode, ReproReport, RunConfig
from app.services import nilmanifold_service, recurrence_service
from app.services.bracket_service import eval_many, nested_bracket_form, realize
from app.services.dsl_service import NAMED_CONSTANTS, parse_form
from app.services.gowers_service import gowers_norm_interval
from app.utils.errors import BracketLabError, UsageError
from app.utils.utils import circle_norm, make_rng, phase, write_csv

logger = logging.getLogger(__name__)

ALPHA_NAMES = ("sqrt2", "sqrt3", "sqrt5", "phi")
SAFETY_FACTOR = 0.5
NON_DECAY_RATIO = 0.8
LINEAR_WITNESS_DRAWS = 20


@dataclass(frozen=True)
class NormCell:
    k: int
    N: int
    method: Method
    samples: int | None = None

    @property
    def cell_id(self) -> str:
        return f"k{self.k}-N{self.N}"


UK_FLOOR_GRID: tuple[NormCell, ...] = (
    NormCell(2, 64, Method.RECURSIVE),
    NormCell(2, 128, Method.RECURSIVE),
    NormCell(3, 64, Method.RECURSIVE),
    NormCell(3, 128, Method.RECURSIVE),
    NormCell(3, 256, Method.RECURSIVE),
    NormCell(4, 32, Method.RECURSIVE),
    NormCell(4, 64, Method.RECURSIVE),
    NormCell(5, 64, Method.MONTE_CARLO, samples=100_000),
)


# ================== FLOORS ================

def load_floors(path: str | Path | None = None) -> tuple[dict[str, float], str | None]:
    path = Path(path or settings.PILOT_FLOORS_PATH)
    if not path.exists():
        logger.warning("no pilot floor file at %s", path)
        return {}, None
    data = json.loads(path.read_text())
    return {key: float(value) for key, value in data.get("floors", {}).items()}, data.get("provenance")


def load_measured(path: str | Path | None = None) -> dict[str, float]:
    """Pilot measurements behind the floors; empty for hand-set floors."""
    path = Path(path or settings.PILOT_FLOORS_PATH)
    if not path.exists():
        return {}
    return {key: float(value) for key, value in json.loads(path.read_text()).get("measured", {}).items()}


def save_floors(floors: dict[str, float], provenance: str, measured: dict[str, float],
                path: str | Path | None = None) -> Path:
    path = Path(path or settings.PILOT_FLOORS_PATH)
    payload = {
        "schema_version": settings.REPORT_SCHEMA_VERSION,
        "provenance": provenance,
        "measured": measured,
        "floors": floors,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def recalibrate(report: ReproReport, path: str | Path | None = None) -> dict[str, float]:
    """New floors: the smallest measured value per k times the safety factor."""
    if report.experiment != Experiment.UK_FLOOR:
        raise UsageError("only the uk-floor experiment has floors")
    measured: dict[str, float] = {}
    for cell in report.cells:
        value = cell.lower_bound if cell.lower_bound is not None else cell.value
        if value is None:
            continue
        key = f"k{cell.k}"
        measured[key] = min(measured.get(key, math.inf), value)
    floors = {key: round(value * SAFETY_FACTOR, 6) for key, value in measured.items()}
    provenance = (f"measured {date.today().isoformat()} by `bracketlab repro uk-floor --recalibrate`; "
                  f"floor = {SAFETY_FACTOR} x smallest measured value per k")
    written = save_floors(floors, provenance, measured, path)
    logger.info("recalibrated floors %s written to %s", floors, written)
    return floors


# ================== UK FLOOR ================

def nested_binding(k: int) -> dict[int, float]:
    return {j: NAMED_CONSTANTS[ALPHA_NAMES[(j - 1) % len(ALPHA_NAMES)]] for j in range(1, k)}


def nested_phase(k: int, N: int) -> np.ndarray:
    """e(phi_{k-1}(n)) on [1, N] with the fixed irrational binding."""
    form = realize(nested_bracket_form(k), nested_binding(k))
    return phase(eval_many(form, np.arange(1, N + 1)))


def _norm_cell(cell: NormCell, seed: int, floors: dict[str, float]) -> CellResult:
    report = gowers_norm_interval(nested_phase(cell.k, cell.N), cell.k, method=cell.method,
                                  samples=cell.samples, seed=seed)
    floor = floors.get(f"k{cell.k}")
    measured = report.mc_lower_bound if report.mc_lower_bound is not None else report.norm
    return CellResult(
        cell_id=cell.cell_id, k=cell.k, N=cell.N, value=report.norm, method=report.method.value,
        stderr=report.mc_stderr, lower_bound=report.mc_lower_bound, floor=floor,
        passed=floor is None or measured >= floor,
        details={"ntilde": report.ntilde, "normalizer": report.normalizer},
    )


def _select(config: RunConfig) -> list[NormCell]:
    cells = [c for c in UK_FLOOR_GRID
             if (config.k is None or c.k == config.k) and (not config.n_values or c.N in config.n_values)]
    if not cells:
        raise UsageError(f"no uk-floor cell matches k={config.k}, N={config.n_values}")
    return cells


def _non_decay_notes(cells: list[CellResult]) -> tuple[bool, list[str]]:
    ok = True
    notes = []
    for k in sorted({c.k for c in cells}):
        group = sorted((c for c in cells if c.k == k), key=lambda c: c.N)
        if len(group) < 2:
            continue
        smallest, largest = group[0].value, group[-1].value
        holds = largest >= NON_DECAY_RATIO * smallest
        ok = ok and holds
        notes.append(f"k={k}: U^k at N={group[-1].N} is {largest:.6f} vs {smallest:.6f} at N={group[0].N}"
                     f" ({'no decay' if holds else 'decays'})")
    return ok, notes


# ================== OTHER EXPERIMENTS ================

def _scan_cells(seed: int) -> list[tuple[str, Callable[[], CellResult]]]:
    sqrt2, sqrt3 = NAMED_CONSTANTS["sqrt2"], NAMED_CONSTANTS["sqrt3"]

    def density_sqrt2() -> CellResult:
        N = 100_000
        spec = recurrence_service.recurrence_set(
            [(realize(parse_form("a1*n"), {1: sqrt2}), IntervalSpec.centered(0.1))], N)
        value = recurrence_service.density(spec)
        return CellResult(cell_id="density-sqrt2", N=N, value=value, passed=abs(value - 0.2) <= 0.01)

    def shifted_linear() -> CellResult:
        N = 1000
        spec = recurrence_service.recurrence_set(
            [(realize(parse_form("1/2 + a1*n"), {1: 0.000001}), IntervalSpec.centered(0.1))], N)
        value = recurrence_service.density(spec)
        return CellResult(cell_id="shifted-linear", N=N, value=value, passed=value == 0.0, expected_fail=True,
                          details={"note": "not constant-free: the realisation never recurs"})

    def weak_recurrence() -> CellResult:
        report = recurrence_service.weak_recurrence_check(
            [realize(parse_form("a1*n"), {1: sqrt2})], 0.1, 0.5, 10_000)
        return CellResult(cell_id="weak-recurrence", N=report.N, value=report.density, passed=report.holds)

    def linear_witness() -> CellResult:
        N = 10_000
        rng = make_rng(seed)
        draws = [([sqrt2, sqrt3], 0.1)]
        for _ in range(LINEAR_WITNESS_DRAWS):
            r = int(rng.integers(1, 4))
            draws.append((list(rng.uniform(0, 1, size=r)), float(rng.uniform(0.15, 0.3))))
        sizes, failures = [], 0
        for alphas, delta in draws:
            witness = recurrence_service.linear_recurrence_witness(alphas, delta, N)
            verified = all(bool(np.all(circle_norm(a * witness.astype(float)) < delta)) for a in alphas)
            sizes.append(len(witness))
            if not (len(witness) and verified):
                failures += 1
        return CellResult(cell_id="linear-witness", N=N, value=float(min(sizes)), passed=failures == 0,
                          details={"draws": len(draws), "failures": failures})

    def overflow_witness() -> CellResult:
        N = 30
        phi = realize(parse_form("a1*{1/10*n}"), {1: Fraction(1)})
        B = [n for n in range(1, N + 1) if n % 10 in (3, 4, 5)]
        result = recurrence_service.check_locally_poly(phi, B, 2, CheckMode.STRONG, N=N)
        w = result.witness
        passed = w is not None and (w.n, w.hs, w.derivative_exact) == (6, [-1, -1], "-1")
        return CellResult(cell_id="overflow-witness", N=N, value=w.derivative_value if w else None,
                          passed=passed, details={"witness": w.model_dump() if w else None})

    def strong_set(cell_id: str, text: str) -> CellResult:
        # delta = c_2 and eps = 2 delta
        N, eps = 200, 2 * recurrence_service.c_k(2)
        phi = realize(parse_form(text), {1: sqrt2, 2: sqrt3})
        Js, spec = recurrence_service.weak_to_strong_intervals(phi, eps, N)
        result = recurrence_service.check_locally_poly(phi, spec, 3, CheckMode.STRONG)
        return CellResult(cell_id=cell_id, k=2, N=N, value=float(result.set_size), passed=result.ok,
                          details={"phi": text, "intervals": [str(J) for J in Js],
                                   "tuples_checked": result.tuples_checked, "certified": result.certified})

    return [("density-sqrt2", density_sqrt2), ("shifted-linear", shifted_linear),
            ("weak-recurrence", weak_recurrence), ("linear-witness", linear_witness),
            ("overflow-witness", overflow_witness),
            ("strong-set", lambda: strong_set("strong-set", "a1*n*{a2*n}")),
            ("strong-set-nested", lambda: strong_set("strong-set-nested", "{a1*n*{a2*n}}"))]


def _heisenberg_cells() -> list[tuple[str, Callable[[], CellResult]]]:
    def run(cell_id: str, alpha, beta, n_max: int, mode: NumericMode) -> CellResult:
        try:
            report = nilmanifold_service.heisenberg_orbit_check(alpha, beta, n_max, mode)
        except BracketLabError as e:
            return CellResult(cell_id=cell_id, N=n_max, passed=False, details={"error": e.detail})
        return CellResult(cell_id=cell_id, N=n_max, value=report.max_error, passed=report.passed)

    return [
        ("heisenberg-float", lambda: run("heisenberg-float", NAMED_CONSTANTS["sqrt2"], NAMED_CONSTANTS["sqrt3"],
                                         1000, NumericMode.FLOAT)),
        ("heisenberg-exact", lambda: run("heisenberg-exact", Fraction(1, 2), Fraction(1, 3),
                                         1000, NumericMode.EXACT)),
    ]


def example_sequence() -> PolynomialMapping:
    """[[1, n/2, n^2/5], [0, 1, n/3], [0, 0, 1]] in T_2."""
    n = N_SYMBOL
    return PolynomialMapping(2, 1, {
        GeneratorId(0, 0, 1): n / 2,
        GeneratorId(0, 1, 2): n / 3,
        GeneratorId(0, 0, 2): n**2 / 5,
    })


def _appendix_cells(seed: int) -> list[tuple[str, Callable[[], CellResult]]]:
    def inverses() -> CellResult:
        failures = 0
        for i in range(20):
            rho = nilmanifold_service.random_mapping(3, 1, 3, seed=seed + i)
            if not nilmanifold_service.inverse_report(rho, with_depth=False).product_is_identity:
                failures += 1
        return CellResult(cell_id="inverse", value=float(failures), passed=failures == 0,
                          details={"mappings": 20, "p": 3, "max_degree": 3})

    def depth() -> CellResult:
        rho = nilmanifold_service.random_mapping(2, 1, 1, seed=seed)
        d = nilmanifold_service.triviality_depth(rho)
        hs = nilmanifold_service.shift_symbols(d + 1)
        stable = nilmanifold_service.iterated_derivative(rho, list(reversed(hs))).is_identity
        bounded = d <= nilmanifold_service.depth_bound(max(rho.degree, 1), rho.p)
        return CellResult(cell_id="triviality-depth", value=float(d), passed=stable and bounded)

    def layers() -> CellResult:
        holds = nilmanifold_service.is_poly_sequence(
            example_sequence(), nilmanifold_service.lower_central_filtration(2))
        return CellResult(cell_id="example-sequence", passed=holds)

    return [("inverse", inverses), ("triviality-depth", depth), ("example-sequence", layers)]


# ================== DRIVER ================

def _run_parallel(tasks: list[Callable[[], CellResult]]) -> list[CellResult]:
    with ThreadPoolExecutor(max_workers=max(1, settings.BRACKETLAB_THREADS)) as pool:
        return list(pool.map(lambda task: task(), tasks))


def run_experiment(experiment: Experiment | str, config: RunConfig | None = None) -> ReproReport:
    try:
        experiment = Experiment(experiment)
    except ValueError:
        raise UsageError(f"unknown experiment {experiment!r}; choose from "
                         f"{', '.join(e.value for e in Experiment)}")
    config = config or RunConfig(subcommand="repro")
    config = config.model_copy(update={"extra": {**config.extra, "experiment": experiment.value}})
    started = time.perf_counter()
    floors, provenance = load_floors() if experiment == Experiment.UK_FLOOR else ({}, None)
    notes: list[str] = []

    if experiment == Experiment.UK_FLOOR:
        grid = _select(config)
        logger.info("uk-floor: %d cells on %d threads", len(grid), settings.BRACKETLAB_THREADS)
        cells = _run_parallel([lambda c=c: _norm_cell(c, config.seed, floors) for c in grid])
        ok, notes = _non_decay_notes(cells)
        if not floors:
            notes.append("no pilot floors loaded; floor comparison skipped")
        unmeasured = sorted({f"k{c.k}" for c in cells} & set(floors) - set(load_measured()))
        if unmeasured:
            notes.append(f"floors for {', '.join(unmeasured)} have no pilot measurement; "
                         "rerun with --recalibrate")
        passed = ok and all(c.passed for c in cells)
    else:
        named = {
            Experiment.RECURRENCE_SCAN: lambda: _scan_cells(config.seed),
            Experiment.HEISENBERG: _heisenberg_cells,
            Experiment.APPENDIX_C: lambda: _appendix_cells(config.seed),
        }[experiment]()
        cells = _run_parallel([task for _, task in named])
        passed = all(c.passed for c in cells)
    if experiment == Experiment.UK_FLOOR:
        notes.append("floors are pilot-derived; the asymptotic constants are not quantified")

    report = ReproReport(
        experiment=experiment, config=config, cells=cells, floors=floors, floors_provenance=provenance,
        notes=notes, passed=passed, wall_clock_seconds=time.perf_counter() - started,
    )
    if config.recalibrate:
        report.floors = recalibrate(report)
        report.notes.append("floors recalibrated from this run")
    logger.info("%s finished in %.2fs: %s", experiment.value, report.wall_clock_seconds,
                "pass" if report.passed else "FAIL")
    return report


def replay(report: ReproReport) -> ReproReport:
    """Re-run a report from its recorded configuration."""
    return run_experiment(report.experiment, report.config.model_copy(update={"recalibrate": False}))


def report_to_csv(report: ReproReport, path=None) -> str:
    header = ["cell_id", "k", "N", "value", "method", "stderr", "lower_bound", "floor", "passed", "expected_fail"]
    rows = ([c.cell_id, c.k, c.N, c.value, c.method, c.stderr, c.lower_bound, c.floor, c.passed, c.expected_fail]
            for c in report.cells)
    return write_csv(header, rows, path)
