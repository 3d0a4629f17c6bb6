"""Change the sample rate of a time-series ratings CSV."""

import sys
from pathlib import Path
from typing import Optional

import typer

from ..core.ratings import ResampleMode, ingest_tidy, read_tidy_csv, resample, to_tidy
from ..engine.errors import RecoveryError
from ..engine.logging import log_step, setup_logging

app = typer.Typer()


@app.callback(invoke_without_command=True)
def resample_series(
    input_file: Path = typer.Option(
        ...,
        "--input",
        "-i",
        help="Tidy CSV whose items are time offsets in seconds",
    ),
    output_file: Path = typer.Option(
        ...,
        "--output",
        "-o",
        help="Where to write the resampled tidy CSV",
    ),
    source_hz: float = typer.Option(..., "--source-hz", help="Sample rate of the input"),
    target_hz: float = typer.Option(..., "--target-hz", help="Sample rate to produce"),
    mode: ResampleMode = typer.Option(
        ResampleMode.MEAN_DOWNSAMPLE,
        "--mode",
        help="Averaging for downsampling, sample-and-hold for upsampling",
    ),
    scale_min: Optional[float] = typer.Option(None, "--scale-min", help="Scale lower bound"),
    scale_max: Optional[float] = typer.Option(None, "--scale-max", help="Scale upper bound"),
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
    """Resample the item (time) axis of every user's series."""
    setup_logging(None, verbose)
    try:
        frame, _ = read_tidy_csv(input_file, group_column=None)
        bounds = (scale_min, scale_max) if scale_min is not None and scale_max is not None else None
        matrix = ingest_tidy(frame, bounds)
        resampled = resample(matrix, source_hz, target_hz, mode)
        to_tidy(resampled).to_csv(output_file, index=False, float_format="%.12g")
        log_step(
            "resample",
            {
                "output": output_file,
                "mode": mode.value,
                "n_items_before": matrix.n_items,
                "n_items_after": resampled.n_items,
            },
            log_file,
        )
    except RecoveryError as e:
        print(f"error: {e}", file=sys.stderr)
        raise typer.Exit(e.exit_code)
