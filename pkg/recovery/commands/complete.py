"""Fill in the missing ratings of a tidy CSV with one estimator."""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import pydantic
import typer
import yaml
from pydantic import TypeAdapter

from ..core.estimators import (
    ESTIMATOR_NAMES,
    EstimatorConfig,
    NnmfModel,
    PredictionMatrix,
    clip_predictions,
    fit_estimator,
    predict_all,
)
from ..core.ratings import RatingsMatrix, ingest_tidy, read_tidy_csv
from ..core.serialization import save_model
from ..engine.errors import ConfigError, InvalidValue, RecoveryError
from ..engine.logging import log_step, setup_logging

logger = logging.getLogger(__name__)

app = typer.Typer()

OUTPUT_COLUMNS = ["user", "item", "prediction", "clipped"]


def parse_params(estimator: str, params: List[str]) -> Any:
    """Estimator config from ``KEY=VALUE`` pairs; values are read as YAML scalars."""
    if estimator not in ESTIMATOR_NAMES:
        raise ConfigError(
            f"unknown estimator {estimator!r} (choose from {', '.join(ESTIMATOR_NAMES)})",
            key="estimator",
        )
    fields: Dict[str, Any] = {"name": estimator}
    for param in params:
        key, sep, value = param.partition("=")
        if not sep or not key:
            raise ConfigError(f"expected KEY=VALUE, got {param!r}", key="param")
        fields[key.strip()] = yaml.safe_load(value)
    try:
        return TypeAdapter(EstimatorConfig).validate_python(fields)
    except pydantic.ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][-1]) if error.get("loc") else None
        raise ConfigError(error["msg"], key=key) from e


def prediction_table(matrix: RatingsMatrix, raw: PredictionMatrix, clip: bool) -> pd.DataFrame:
    """Predictions for the cells missing from ``matrix``.

    ``clipped`` is true for the rows whose value was moved onto the scale bounds.
    """
    final = clip_predictions(raw, matrix.scale_min, matrix.scale_max) if clip else raw
    rows, cols = np.nonzero(~matrix.observed)
    return pd.DataFrame(
        {
            "user": np.asarray(matrix.user_labels)[rows],
            "item": np.asarray(matrix.item_labels)[cols],
            "prediction": final.values[rows, cols],
            "clipped": final.values[rows, cols] != raw.values[rows, cols],
        },
        columns=OUTPUT_COLUMNS,
    )


@app.callback(invoke_without_command=True)
def complete(
    input_file: Path = typer.Option(
        ...,
        "--input",
        "-i",
        help="Tidy user,item,rating CSV; absent rows are the missing ratings",
    ),
    output_file: Path = typer.Option(
        ...,
        "--output",
        "-o",
        help="Where to write user,item,prediction,clipped",
    ),
    estimator: str = typer.Option(
        "nnmf_sgd",
        "--estimator",
        "-e",
        help=f"One of: {', '.join(ESTIMATOR_NAMES)}",
    ),
    param: List[str] = typer.Option(
        [],
        "--param",
        "-p",
        help="Estimator hyperparameter as KEY=VALUE (repeatable)",
    ),
    clip: bool = typer.Option(
        False,
        "--clip/--no-clip",
        help="Clip predictions to the rating scale",
    ),
    scale_min: Optional[float] = typer.Option(
        None,
        "--scale-min",
        help="Lower bound of the rating scale (default: observed minimum)",
    ),
    scale_max: Optional[float] = typer.Option(
        None,
        "--scale-max",
        help="Upper bound of the rating scale (default: observed maximum)",
    ),
    seed: int = typer.Option(
        0,
        "--seed",
        help="Random seed for factor initialization and shuffling",
    ),
    save_model_to: Optional[Path] = typer.Option(
        None,
        "--save-model",
        help="Also write the fitted factor model as JSON",
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
    """Predict every user/item pair absent from the input."""
    setup_logging(None, verbose)
    try:
        if (scale_min is None) != (scale_max is None):
            raise ConfigError("--scale-min and --scale-max must be given together")
        config = parse_params(estimator, param)
        frame, _ = read_tidy_csv(input_file, group_column=None)
        bounds = (scale_min, scale_max) if scale_min is not None else None
        matrix = ingest_tidy(frame, bounds)
        log_step(
            "load",
            {"input": input_file, "n_users": matrix.n_users, "n_items": matrix.n_items},
            log_file,
        )

        missing = ~matrix.observed
        if not missing.any():
            logger.warning("input has no missing ratings; writing an empty prediction file")
            pd.DataFrame(columns=OUTPUT_COLUMNS).to_csv(output_file, index=False)
            return

        model = fit_estimator(config, matrix, seed=seed)
        if isinstance(model, NnmfModel):
            log_step(
                "fit",
                {
                    "estimator": config.key,
                    "iterations": model.n_iterations,
                    "final_rmse": model.final_rmse,
                },
                log_file,
            )
        raw = predict_all(model)

        if save_model_to is not None:
            if not isinstance(model, NnmfModel):
                raise InvalidValue(f"--save-model needs a factor model, not {config.name}")
            save_model(model, save_model_to, matrix.user_labels, matrix.item_labels)

        out = prediction_table(matrix, raw, clip)
        out.to_csv(output_file, index=False, float_format="%.12g")
        log_step("complete", {"output": output_file, "n_predictions": len(out)}, log_file)
    except RecoveryError as e:
        print(f"error: {e}", file=sys.stderr)
        raise typer.Exit(e.exit_code)
