from pathlib import Path

import numpy as np
import typer

from app.config.config import settings
from app.routers.common import emit_model, fail, load_form
from app.schemas.gowers_schema import Method
from app.schemas.run_schema import NumericMode
from app.services.bracket_service import eval_many
from app.services.gowers_service import gowers_norm_interval
from app.utils.errors import BracketLabError, UsageError
from app.utils.utils import phase


def gowers_command(
    n: int = typer.Option(..., "--n"),
    k: int = typer.Option(..., "--k"),
    phi: str | None = typer.Option(None, "--phi", help="Use f = e(phi(n)); the indicator of [N] when omitted."),
    bind: Path | None = typer.Option(None, "--bind"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    method: str = typer.Option("auto", "--method", help="auto, direct, recursive or mc."),
    ntilde: int | None = typer.Option(None, "--ntilde"),
    samples: int | None = typer.Option(None, "--samples"),
    budget: int | None = typer.Option(None, "--budget", help="Override the direct and recursive budgets."),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    out: Path | None = typer.Option(None, "--out"),
):
    """||f||_{U^k[N]} as a JSON report."""
    try:
        try:
            chosen = Method(method)
        except ValueError:
            raise UsageError(f"unknown method {method!r}")
        if budget is not None and budget < 1:
            raise UsageError(f"--budget must be positive, got {budget}")
        if n < 1:
            raise UsageError(f"--n must be positive, got {n}")
        if phi is None:
            values = np.ones(n, dtype=complex)
        else:
            values = phase(eval_many(load_form(phi, bind, mode), np.arange(1, n + 1), mode))
        report = gowers_norm_interval(values, k, ntilde=ntilde, method=chosen, samples=samples, seed=seed,
                                      budget=budget)
    except BracketLabError as e:
        fail(e)
    emit_model(report, out)
