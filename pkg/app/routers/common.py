from pathlib import Path
from typing import NoReturn

import typer
from pydantic import BaseModel

from app.models.bracket_models import BracketNode
from app.models.sequence_models import IntervalSpec
from app.schemas.run_schema import NumericMode, OutputFormat, RunConfig
from app.services.bracket_service import realize
from app.services.dsl_service import load_bindings, parse_form, parse_scalar
from app.utils.errors import BracketLabError, UsageError


def load_form(phi: str, bind: Path | None, mode: NumericMode) -> BracketNode:
    binding = load_bindings(bind, mode) if bind else {}
    return realize(parse_form(phi), binding)


def parse_interval(text: str, mode: NumericMode = NumericMode.FLOAT) -> IntervalSpec:
    """``eps`` gives I_eps; ``lo,hi`` gives the open interval (lo, hi)."""
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return IntervalSpec.centered(parse_scalar(parts[0], mode))
        if len(parts) == 2:
            return IntervalSpec(parse_scalar(parts[0], mode), parse_scalar(parts[1], mode))
    except ValueError as e:
        raise UsageError(str(e))
    raise UsageError(f"interval must be 'eps' or 'lo,hi', got {text!r}")


def run_config(subcommand: str, **fields) -> RunConfig:
    known = set(RunConfig.model_fields)
    extra = {k: v for k, v in fields.items() if k not in known and v is not None}
    values = {k: (str(v) if isinstance(v, Path) else v) for k, v in fields.items() if k in known and v is not None}
    return RunConfig(subcommand=subcommand, extra=extra, **values)


def emit(text: str, out: Path | None) -> None:
    if out is None:
        typer.echo(text, nl=not text.endswith("\n"))
    else:
        out.write_text(text)


def emit_model(model: BaseModel, out: Path | None, format: OutputFormat = OutputFormat.JSON, csv_text=None) -> None:
    if format == OutputFormat.CSV:
        if csv_text is None:
            raise UsageError("this command has no CSV output")
        emit(csv_text(), out)
    else:
        emit(model.model_dump_json(indent=2, by_alias=True) + "\n", out)


def fail(e: BracketLabError) -> NoReturn:
    typer.echo(f"error: {e.detail}", err=True)
    raise typer.Exit(code=e.status_code)
