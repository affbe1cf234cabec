from pathlib import Path

import typer

from app.config.config import settings
from app.routers.common import emit_model, fail, run_config
from app.schemas.run_schema import OutputFormat
from app.services import repro_service
from app.utils.errors import BracketLabError


def repro_command(
    experiment: str = typer.Argument(..., help="uk-floor, recurrence-scan, heisenberg or appendixC."),
    k: int | None = typer.Option(None, "--k", help="uk-floor: only the cells with this k."),
    n: list[int] = typer.Option([], "--n", help="uk-floor: only these N."),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    recalibrate: bool = typer.Option(False, "--recalibrate", help="Rewrite the pilot floors from this run."),
    format: OutputFormat = typer.Option(OutputFormat.JSON, "--format"),
    out: Path | None = typer.Option(None, "--out"),
):
    """Run a reproduction grid against the pilot floors; exit 1 on failure."""
    try:
        config = run_config("repro", n_values=n, k=k, seed=seed, recalibrate=recalibrate,
                            out=out, format=format)
        report = repro_service.run_experiment(experiment, config)
    except BracketLabError as e:
        fail(e)
    emit_model(report, out, format, lambda: repro_service.report_to_csv(report))
    if not report.passed:
        raise typer.Exit(code=1)
