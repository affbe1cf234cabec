from pathlib import Path

import typer

from app.config.config import settings
from app.routers.common import emit, emit_model, fail, load_form, parse_interval
from app.schemas.recurrence_schema import BudgetMode, CheckerBudget, CheckMode
from app.schemas.run_schema import NumericMode, OutputFormat
from app.services import recurrence_service
from app.services.dsl_service import parse_scalar
from app.utils.errors import BracketLabError, UsageError
from app.utils.utils import write_csv

router = typer.Typer(help="Recurrence sets and local polynomiality checks.", no_args_is_help=True)


def _spec(nus: list[str], intervals: list[str], bind: Path | None, mode: NumericMode, N: int):
    if len(intervals) == 1 and len(nus) > 1:
        intervals = intervals * len(nus)
    if len(intervals) != len(nus):
        raise UsageError("give one --interval per --nu, or a single one for all")
    return recurrence_service.recurrence_set(
        ((load_form(nu, bind, mode), parse_interval(S, mode)) for nu, S in zip(nus, intervals)), N)


@router.command("density")
def density(
    nu: list[str] = typer.Option(..., "--nu", help="Constraint expression; repeat for several."),
    interval: list[str] = typer.Option(..., "--interval", help="'eps' for I_eps or 'lo,hi'."),
    n: list[int] = typer.Option(..., "--n", help="One or more N values."),
    bind: Path | None = typer.Option(None, "--bind"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    floor: float | None = typer.Option(None, "--floor"),
    format: OutputFormat = typer.Option(OutputFormat.JSON, "--format"),
    out: Path | None = typer.Option(None, "--out"),
):
    """|B_N| / N for each N."""
    try:
        report = recurrence_service.density_scan(lambda N: _spec(nu, interval, bind, mode, N), n, floor)
    except BracketLabError as e:
        fail(e)
    emit_model(report, out, format, lambda: recurrence_service.density_scan_csv(report))


@router.command("check")
def check(
    phi: str = typer.Option(..., "--phi"),
    k: int = typer.Option(..., "--k", help="Number of differences."),
    n: int = typer.Option(..., "--n"),
    nu: list[str] = typer.Option([], "--nu", help="Set constraint; the set is [N] when omitted."),
    interval: list[str] = typer.Option([], "--interval"),
    bind: Path | None = typer.Option(None, "--bind"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    check_mode: CheckMode = typer.Option(CheckMode.PLAIN, "--check"),
    delta: str | None = typer.Option(None, "--delta", help="Tolerance for the approx modes."),
    randomized: bool = typer.Option(False, "--randomized"),
    budget: int = typer.Option(settings.CHECKER_MAX_TUPLES, "--budget"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    out: Path | None = typer.Option(None, "--out"),
):
    """Search for a violation of local polynomiality; exit 1 when one is found."""
    try:
        spec = _spec(nu, interval, bind, mode, n)
        result = recurrence_service.check_locally_poly(
            load_form(phi, bind, mode), spec, k, check_mode,
            CheckerBudget(mode=BudgetMode.RANDOMIZED if randomized else BudgetMode.EXHAUSTIVE,
                          max_tuples=budget, seed=seed),
            delta=None if delta is None else parse_scalar(delta, mode),
        )
    except BracketLabError as e:
        fail(e)
    emit_model(result, out)
    if not result.ok:
        raise typer.Exit(code=1)


@router.command("linear")
def linear(
    alpha: list[str] = typer.Option([], "--alpha", help="Frequencies; repeat for several."),
    delta: str = typer.Option(..., "--delta"),
    n: int = typer.Option(..., "--n"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    out: Path | None = typer.Option(None, "--out"),
):
    """CSV of the m in [N] with ||alpha_j m|| < delta from the pigeonhole construction."""
    try:
        alphas = [parse_scalar(a, mode) for a in alpha]
        witness = recurrence_service.linear_recurrence_witness(alphas, parse_scalar(delta, mode), n)
    except BracketLabError as e:
        fail(e)
    emit(write_csv(["n"], ([int(m)] for m in witness)), out)


@router.command("scan")
def scan(
    nu: list[str] = typer.Option(..., "--nu"),
    eps: str = typer.Option(..., "--eps", help="Weak recurrence in I_(1/2-eps)."),
    n: list[int] = typer.Option(..., "--n"),
    lam: float = typer.Option(0.0, "--lambda"),
    bind: Path | None = typer.Option(None, "--bind"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    out: Path | None = typer.Option(None, "--out"),
):
    """Weak-recurrence densities over several N as CSV (N, density)."""
    try:
        nus = [load_form(v, bind, mode) for v in nu]
        threshold = parse_scalar(eps, mode)
        reports = [recurrence_service.weak_recurrence_check(nus, threshold, lam, N) for N in n]
    except BracketLabError as e:
        fail(e)
    emit(write_csv(["N", "density"], ([r.N, r.density] for r in reports)), out)
    if not all(r.holds for r in reports):
        raise typer.Exit(code=1)
