"""Dump the user-user similarity matrix of a tidy CSV."""

import sys
from pathlib import Path
from typing import Optional

import typer

from ..core.ratings import ingest_tidy, read_tidy_csv
from ..core.similarity import SimilarityMetric, compute_similarity, similarity_frame
from ..engine.errors import RecoveryError
from ..engine.logging import log_step, setup_logging

app = typer.Typer()


@app.callback(invoke_without_command=True)
def similarity_dump(
    input_file: Path = typer.Option(
        ...,
        "--input",
        "-i",
        help="Tidy user,item,rating CSV",
    ),
    output_file: Path = typer.Option(
        ...,
        "--output",
        "-o",
        help="Where to write the users x users CSV (blank = undefined)",
    ),
    metric: SimilarityMetric = typer.Option(
        SimilarityMetric.PEARSON,
        "--metric",
        "-m",
        help="Similarity metric",
    ),
    min_overlap: int = typer.Option(
        2,
        "--min-overlap",
        help="Co-rated items required for a defined similarity",
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
    """Compute similarities over co-rated items and write them as a square table."""
    setup_logging(None, verbose)
    try:
        frame, _ = read_tidy_csv(input_file, group_column=None)
        matrix = ingest_tidy(frame)
        sim = compute_similarity(matrix, metric, min_overlap)
        similarity_frame(sim, matrix.user_labels).to_csv(output_file, float_format="%.12g")
        log_step(
            "similarity",
            {
                "output": output_file,
                "metric": metric.value,
                "n_users": matrix.n_users,
                "n_defined": int(sim.defined.sum()),
            },
            log_file,
        )
    except RecoveryError as e:
        print(f"error: {e}", file=sys.stderr)
        raise typer.Exit(e.exit_code)
