"""CLI entry point for the recovery package."""

import typer

app = typer.Typer(
    name="recovery",
    help="Recover missing ratings by collaborative filtering and benchmark the estimators",
    add_completion=False,
)

from recovery.commands.complete import app as complete_app  # noqa: E402
from recovery.commands.resample import app as resample_app  # noqa: E402
from recovery.commands.run import app as run_app  # noqa: E402
from recovery.commands.similarity import app as similarity_app  # noqa: E402
from recovery.commands.simulate import app as simulate_app  # noqa: E402

app.add_typer(run_app, name="run")
app.add_typer(complete_app, name="complete")
app.add_typer(simulate_app, name="simulate")
app.add_typer(similarity_app, name="similarity-dump")
app.add_typer(resample_app, name="resample")


def main():
    """Entry point for the recovery CLI."""
    app()


if __name__ == "__main__":
    main()
