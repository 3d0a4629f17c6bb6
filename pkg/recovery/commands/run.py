"""Config-driven cross-validation experiment."""

import sys
from pathlib import Path
from typing import Optional

import typer

from .. import __version__
from ..core.evaluation import cell_seeds, run_experiment
from ..core.ratings import ingest_tidy, read_tidy_csv
from ..engine.config import load_config, resolve_jobs
from ..engine.errors import ExperimentError, RecoveryError
from ..engine.logging import log_step, setup_logging

app = typer.Typer()


@app.callback(invoke_without_command=True)
def run(
    config_file: Path = typer.Option(
        ...,
        "--config",
        "-c",
        help="Experiment config (YAML or JSON)",
    ),
    input_file: Optional[Path] = typer.Option(
        None,
        "--input",
        "-i",
        help="Override the config's input CSV",
    ),
    output_dir: Optional[Path] = typer.Option(
        None,
        "--output",
        "-o",
        help="Override the config's output directory",
    ),
    seed: Optional[int] = typer.Option(
        None,
        "--seed",
        help="Override the config's base seed",
    ),
    jobs: Optional[int] = typer.Option(
        None,
        "--jobs",
        "-j",
        help="Worker threads (default: $RECOVERY_JOBS or CPU count)",
    ),
    clip: Optional[bool] = typer.Option(
        None,
        "--clip/--no-clip",
        help="Clip predictions to the rating scale",
    ),
    log_file: Optional[Path] = typer.Option(
        None,
        "--log",
        help="Write JSONL execution log",
    ),
    verbose: bool = typer.Option(
        False,
        "--verbose",
        "-v",
        help="Enable verbose logging",
    ),
) -> None:
    """Run a masking cross-validation experiment and write its reports."""
    setup_logging(None, verbose)
    try:
        config = load_config(
            config_file,
            {
                "input": input_file,
                "output": output_dir,
                "base_seed": seed,
                "jobs": jobs,
                "clip": clip,
            },
        )
        frame, groups = read_tidy_csv(config.input, config.group_column)
        matrix = ingest_tidy(frame, config.scale_bounds)
        log_step(
            "load",
            {
                "input": config.input,
                "n_users": matrix.n_users,
                "n_items": matrix.n_items,
                "n_observed": matrix.n_observed,
                "scale": [matrix.scale_min, matrix.scale_max],
            },
            log_file,
        )

        plan = config.to_plan(groups)
        workers = resolve_jobs(config.jobs)
        report = run_experiment(matrix, plan, jobs=workers, log_file=log_file, verbose=verbose)

        n_cells = len(plan.estimators) * len(plan.sparsity_levels) * plan.n_iterations
        if len(report.failures) == n_cells:
            first = report.failures.iloc[0]
            raise ExperimentError(
                f"every cell failed; first: estimator={first['estimator']} "
                f"sparsity={first['sparsity']} iteration={first['iteration']}: {first['error']}"
            )

        manifest = {
            "version": __version__,
            "config": config.model_dump(mode="json", exclude={"jobs"}),
            "cell_seeds": cell_seeds(plan),
            "scale": [matrix.scale_min, matrix.scale_max],
        }
        try:
            written = report.write(config.output, manifest)
        except OSError as e:
            raise ExperimentError(f"cannot write reports to {config.output}: {e}") from e
        log_step("write", {"files": [str(p) for p in written]}, log_file)
    except RecoveryError as e:
        print(f"error: {e}", file=sys.stderr)
        raise typer.Exit(e.exit_code)

    if len(report.failures):
        print(f"{len(report.failures)} cell(s) failed; see manifest.json", file=sys.stderr)
    print(config.output)
