import json
from enum import Enum
from pathlib import Path

import numpy as np
import typer

from app.config.config import settings
from app.routers.common import emit, emit_model, fail, load_form
from app.schemas.nil_schema import MappingPayload
from app.schemas.run_schema import NumericMode
from app.services import nilmanifold_service
from app.services.bracket_service import eval_many
from app.services.dsl_service import parse_scalar
from app.utils.errors import BracketLabError, UsageError
from app.utils.utils import frac_array, write_csv

router = typer.Typer(help="Unitriangular groups, orbits and polynomial mappings.", no_args_is_help=True)


class BasisName(str, Enum):
    X = "X"
    Y = "Y"


@router.command("heisenberg")
def heisenberg(
    alpha: str = typer.Option(..., "--alpha"),
    beta: str = typer.Option(..., "--beta"),
    n: int = typer.Option(1000, "--n"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    out: Path | None = typer.Option(None, "--out"),
):
    """Check that the reduced orbit carries {alpha n [beta n]} in its corner."""
    try:
        report = nilmanifold_service.heisenberg_orbit_check(
            parse_scalar(alpha, mode), parse_scalar(beta, mode), n, mode)
    except BracketLabError as e:
        fail(e)
    emit_model(report, out)


@router.command("orbit")
def orbit(
    alpha: str = typer.Option(..., "--alpha"),
    beta: str = typer.Option(..., "--beta"),
    n: int = typer.Option(..., "--n"),
    basis: BasisName = typer.Option(BasisName.X, "--basis"),
    mode: NumericMode = typer.Option(NumericMode.FLOAT, "--mode"),
    out: Path | None = typer.Option(None, "--out"),
):
    """CSV of the fundamental-domain coordinates of the Heisenberg orbit."""
    try:
        a, b = parse_scalar(alpha, mode), parse_scalar(beta, mode)
        x_basis, y_basis = nilmanifold_service.heisenberg_bases()
        chosen = x_basis if basis == BasisName.X else y_basis
        rows = nilmanifold_service.orbit(lambda m: nilmanifold_service.heisenberg_element(a, b, m), chosen, n)
    except BracketLabError as e:
        fail(e)
    emit(write_csv(["n", "chi1", "chi2", "chi3"], rows), out)


@router.command("discrepancy")
def discrepancy(
    phi: list[str] = typer.Option(..., "--phi", help="One coordinate {phi(n)} per expression."),
    n: int = typer.Option(..., "--n"),
    boxes: int = typer.Option(10, "--boxes"),
    bind: Path | None = typer.Option(None, "--bind"),
    out: Path | None = typer.Option(None, "--out"),
):
    """Box discrepancy of the points ({phi_1(n)}, ..., {phi_m(n)}), n in [N]."""
    try:
        ns = np.arange(1, n + 1)
        coords = np.stack([frac_array(eval_many(load_form(p, bind, NumericMode.FLOAT), ns)) for p in phi], axis=1)
        report = nilmanifold_service.equidistribution_discrepancy(coords, boxes)
    except BracketLabError as e:
        fail(e)
    emit_model(report, out)


@router.command("inverse")
def inverse(
    p: int = typer.Option(3, "--p"),
    k: int = typer.Option(3, "--k", help="Degree of the random mapping."),
    mapping: Path | None = typer.Option(None, "--mapping", help="Mapping JSON instead of a random one."),
    depth: bool = typer.Option(False, "--depth", help="Also compute the triviality depth."),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    out: Path | None = typer.Option(None, "--out"),
):
    """Symbolic inverse of a polynomial mapping into T_p."""
    try:
        if mapping is not None:
            try:
                rho = nilmanifold_service.mapping_from_payload(
                    MappingPayload.model_validate(json.loads(mapping.read_text())))
            except (OSError, ValueError) as e:
                raise UsageError(f"cannot read mapping {mapping}: {e}")
        else:
            rho = nilmanifold_service.random_mapping(p, 1, k, seed=seed)
        report = nilmanifold_service.inverse_report(rho, with_depth=depth)
    except BracketLabError as e:
        fail(e)
    emit_model(report, out)
    if not report.product_is_identity:
        raise typer.Exit(code=1)
