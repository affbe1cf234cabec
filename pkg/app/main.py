import typer

from app.config.config import configure_logging, settings
from app.routers import eval_router, gowers_router, nil_router, recur_router, repro_router

app = typer.Typer(
    name=settings.APP_NAME,
    help="Bracket polynomials, Gowers norms, recurrence sets and nilmanifold coordinates.",
    no_args_is_help=True,
)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level.")):
    configure_logging("DEBUG" if verbose else None)


app.command("eval")(eval_router.eval_command)
app.command("gowers")(gowers_router.gowers_command)
app.add_typer(recur_router.router, name="recur")
app.add_typer(nil_router.router, name="nil")
app.command("repro")(repro_router.repro_command)


if __name__ == "__main__":
    app()
