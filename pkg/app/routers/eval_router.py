from pathlib import Path

import numpy as np
import typer

from app.routers.common import emit, fail, load_form
from app.schemas.run_schema import NumericMode
from app.services.bracket_service import eval_many
from app.utils.errors import BracketLabError, UsageError
from app.utils.utils import frac, write_csv


def eval_command(
    phi: str = typer.Option(..., "--phi", help="Bracket form in the DSL, e.g. '{a1*n}'."),
    n: int = typer.Option(..., "--n", help="Evaluate on [1, N]."),
    bind: Path | None = typer.Option(None, "--bind", help="Binding file with a<k> = value lines."),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    out: Path | None = typer.Option(None, "--out"),
):
    """CSV of n, phi(n) and {phi(n)}."""
    try:
        if n < 1:
            raise UsageError(f"--n must be positive, got {n}")
        form = load_form(phi, bind, mode)
        ns = np.arange(1, n + 1)
        values = eval_many(form, ns, mode)
        text = write_csv(["n", "phi", "frac"], ([int(i), v, frac(v)] for i, v in zip(ns, values)))
    except BracketLabError as e:
        fail(e)
    emit(text, out)
