"""Masking cross-validation harness and error metrics.

For every (sparsity, iteration) cell a fresh random mask hides a share of the ratings,
every estimator is fitted on the same training view, and error is scored per user on
the hidden cells. Errors are averaged per user over iterations first, then over users.
"""

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, model_validator

from ..engine.errors import (
    DegenerateScale,
    EmptyTestSet,
    InsufficientData,
    InvalidValue,
    MissingLabel,
    ShapeError,
)
from ..engine.logging import log_step
from ..engine.pool import run_tasks
from .estimators import (
    EstimatorConfig,
    PredictionMatrix,
    clip_predictions,
    default_estimators,
    fit_estimator,
    predict_all,
)
from .ratings import ObservationMask, RatingsMatrix, apply_mask, mask_random
from .timeseries import DilationKernel, dilate

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "estimator",
    "sparsity",
    "iteration",
    "user",
    "group",
    "rmse",
    "normalized_error",
    "correlation",
    "train_normalized_error",
    "n_test_cells",
]
SUMMARY_COLUMNS = [
    "estimator",
    "sparsity",
    "normalized_error",
    "ci_low",
    "ci_high",
    "correlation",
    "train_normalized_error",
    "n_users",
    "n_omitted_users",
]
FLOAT_FORMAT = "%.12g"


def default_sparsity_levels() -> List[float]:
    return [round(0.1 * k, 1) for k in range(1, 10)]


def check_sparsity_levels(levels: List[float]) -> List[float]:
    if not levels:
        raise ValueError("at least one sparsity level is required")
    for level in levels:
        if not 0.0 < level < 1.0:
            raise ValueError(f"sparsity {level} is not strictly between 0 and 1")
    if len(set(levels)) != len(levels):
        raise ValueError("sparsity levels must be distinct")
    return levels


SparsityLevels = Annotated[List[float], AfterValidator(check_sparsity_levels)]


class ExperimentPlan(BaseModel):
    """What to sweep: sparsity grid, repetitions, estimators and optional dilation."""

    model_config = ConfigDict(extra="forbid")

    sparsity_levels: SparsityLevels = Field(default_factory=default_sparsity_levels)
    n_iterations: int = Field(10, ge=1)
    estimators: List[EstimatorConfig] = Field(default_factory=default_estimators)
    dilation: Optional[DilationKernel] = None
    base_seed: int = Field(0, ge=0)
    group_labels: Optional[Dict[str, str]] = None
    clip: bool = False
    n_boot: int = Field(1000, ge=1)
    ci_level: float = Field(0.95, gt=0, lt=1)

    @model_validator(mode="after")
    def _unique_estimators(self) -> "ExperimentPlan":
        keys = [e.key for e in self.estimators]
        if not keys:
            raise ValueError("at least one estimator is required")
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        if dupes:
            raise ValueError(f"estimators need distinct labels, repeated: {', '.join(dupes)}")
        return self


def derive_seed(*parts: Any) -> int:
    """32-bit seed from the SHA-256 of the joined parts."""
    text = "|".join(f"{p:.6f}" if isinstance(p, float) else str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


def cell_seed(base_seed: int, sparsity: float, iteration: int) -> int:
    """Mask seed of one grid cell; reproducible in isolation."""
    return derive_seed(base_seed, float(sparsity), iteration)


def rmse(pred: PredictionMatrix, truth: RatingsMatrix, test_cells: np.ndarray) -> float:
    """Root-mean-squared error over the boolean grid ``test_cells``."""
    test_cells = np.asarray(test_cells, dtype=bool)
    if test_cells.shape != truth.shape or pred.values.shape != truth.shape:
        raise ShapeError("predictions, truth and test cells must share a shape")
    if not test_cells.any():
        raise EmptyTestSet("no test cells to score")
    if not truth.observed[test_cells].all():
        raise InvalidValue("truth is missing at some test cells")
    diff = truth.values[test_cells] - pred.values[test_cells]
    return float(np.sqrt(np.mean(diff**2)))


def normalized_error(rmse_value: float, scale_min: float, scale_max: float) -> float:
    """RMSE as a fraction of the rating-scale range; can exceed 1."""
    if not scale_max > scale_min:
        raise DegenerateScale(f"scale [{scale_min}, {scale_max}] has no range")
    return rmse_value / (scale_max - scale_min)


@dataclass(frozen=True)
class UserLevelErrors:
    """Per-user scores for one fit. ``frame`` has one row per user with test cells."""

    frame: pd.DataFrame
    omitted: Tuple[str, ...]


def _row_rmse(pred: np.ndarray, truth: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """RMSE of every row over its own cells; NaN for rows without any."""
    counts = cells.sum(axis=1)
    sq = np.where(cells, truth - pred, 0.0) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(sq.sum(axis=1) / counts)


def _row_pearson(pred: np.ndarray, truth: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Pearson correlation of every row over its own cells.

    NaN for rows with fewer than two cells or no variance on either side.
    """
    counts = cells.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        x_mean = np.where(cells, pred, 0.0).sum(axis=1) / counts
        y_mean = np.where(cells, truth, 0.0).sum(axis=1) / counts
        dx = np.where(cells, pred - x_mean[:, None], 0.0)
        dy = np.where(cells, truth - y_mean[:, None], 0.0)
        cov = (dx * dy).sum(axis=1)
        var = (dx**2).sum(axis=1) * (dy**2).sum(axis=1)
        corr = cov / np.sqrt(var)
    corr[(counts < 2) | ~(var > 0)] = np.nan
    return np.clip(corr, -1.0, 1.0)


def evaluate_user_level(
    pred: PredictionMatrix,
    truth: RatingsMatrix,
    mask: ObservationMask,
    scale: Optional[Tuple[float, float]] = None,
) -> UserLevelErrors:
    """Score every user on their own held-out cells.

    Besides the held-out error, each row carries the Pearson correlation between
    predictions and true ratings on the held-out cells and the normalized error on the
    user's training cells (NaN when a user has none), which shows overfitting.
    Users without held-out cells are left out and listed in ``omitted``.
    """
    if mask.shape != truth.shape or pred.values.shape != truth.shape:
        raise ShapeError("predictions, truth and mask must share a shape")
    scale_min, scale_max = scale if scale is not None else (truth.scale_min, truth.scale_max)
    if not scale_max > scale_min:
        raise DegenerateScale(f"scale [{scale_min}, {scale_max}] has no range")
    test = mask.test
    if not truth.observed[test].all():
        raise InvalidValue("truth is missing at some test cells")

    counts = test.sum(axis=1)
    scored = counts > 0
    errors = _row_rmse(pred.values, truth.values, test)[scored]
    train_errors = _row_rmse(pred.values, truth.values, mask.train)[scored]
    correlation = _row_pearson(pred.values, truth.values, test)[scored]

    users = np.asarray(truth.user_labels)
    span = scale_max - scale_min
    frame = pd.DataFrame(
        {
            "user": users[scored],
            "rmse": errors,
            "normalized_error": errors / span,
            "correlation": correlation,
            "train_normalized_error": train_errors / span,
            "n_test_cells": counts[scored],
        }
    )
    return UserLevelErrors(frame=frame, omitted=tuple(users[~scored]))


def bootstrap_ci(
    per_user_errors: Sequence[float],
    n_boot: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> Tuple[float, float]:
    """Percentile bootstrap CI of the mean, resampling users with replacement."""
    values = np.asarray(per_user_errors, dtype=float)
    if values.size < 2:
        raise InsufficientData(f"bootstrap needs at least 2 users, got {values.size}")
    if not 0.0 < level < 1.0:
        raise InvalidValue(f"level must lie in (0, 1), got {level}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    # resample means cannot leave the data range; bounding absorbs rounding
    return float(max(low, values.min())), float(min(high, values.max()))


@dataclass
class CellResult:
    records: List[Dict[str, Any]] = field(default_factory=list)
    omitted: List[Dict[str, Any]] = field(default_factory=list)
    failure: Optional[Dict[str, Any]] = None


@dataclass
class EvaluationReport:
    """Tidy per-user error records plus the aggregates built from them."""

    records: pd.DataFrame
    omitted: pd.DataFrame
    failures: pd.DataFrame
    plan: ExperimentPlan

    def per_user(self) -> pd.DataFrame:
        """Each user's error averaged over iterations, per estimator and sparsity."""
        grouped = self.records.groupby(["estimator", "sparsity", "user"], sort=False)
        return grouped.agg(
            normalized_error=("normalized_error", "mean"),
            correlation=("correlation", "mean"),
            train_normalized_error=("train_normalized_error", "mean"),
            n_iterations=("iteration", "nunique"),
        ).reset_index()

    def summary(
        self,
        n_boot: Optional[int] = None,
        level: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> pd.DataFrame:
        """Grand mean over users of the per-user means, with a bootstrap CI.

        ``correlation`` averages the users whose correlation is defined.
        ``n_omitted_users`` counts distinct users left out of at least one iteration.
        Bootstrap settings default to the plan's.
        """
        plan = self.plan.model_copy(
            update={
                k: v
                for k, v in {"n_boot": n_boot, "ci_level": level, "base_seed": seed}.items()
                if v is not None
            }
        )
        per_user = self.per_user()
        omitted_users = (
            self.omitted.groupby(["estimator", "sparsity"], sort=False)["user"].nunique()
            if not self.omitted.empty
            else pd.Series(dtype=int)
        )
        rows = []
        for (estimator, sparsity), block in per_user.groupby(
            ["estimator", "sparsity"], sort=False
        ):
            rows.append(
                {
                    "estimator": estimator,
                    "sparsity": sparsity,
                    **_aggregate(block["normalized_error"], plan, estimator, sparsity),
                    "correlation": float(block["correlation"].mean()),
                    "train_normalized_error": float(block["train_normalized_error"].mean()),
                    "n_omitted_users": int(omitted_users.get((estimator, sparsity), 0)),
                }
            )
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def write(self, output_dir: Path, manifest: Dict[str, Any]) -> List[Path]:
        """Write report.csv, summary.csv, manifest.json (and strata.csv with groups)."""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        written = []

        path = output_dir / "report.csv"
        self.records.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        written.append(path)

        path = output_dir / "summary.csv"
        self.summary().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        written.append(path)

        if self.plan.group_labels:
            path = output_dir / "strata.csv"
            stratify_report(self, self.plan.group_labels).to_csv(
                path, index=False, float_format=FLOAT_FORMAT
            )
            written.append(path)

        path = output_dir / "manifest.json"
        document = {
            **manifest,
            "failures": self.failures.to_dict(orient="records"),
            "n_omitted_records": int(len(self.omitted)),
        }
        path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str) + "\n")
        written.append(path)
        return written


def _aggregate(
    errors: pd.Series, plan: ExperimentPlan, *coords: Any
) -> Dict[str, Union[float, int]]:
    values = errors.to_numpy(dtype=float)
    low = high = float("nan")
    if values.size >= 2:
        low, high = bootstrap_ci(
            values, plan.n_boot, plan.ci_level, derive_seed(plan.base_seed, "ci", *coords)
        )
    return {
        "normalized_error": float(values.mean()),
        "ci_low": low,
        "ci_high": high,
        "n_users": int(values.size),
    }


def stratify_report(report: EvaluationReport, group_labels: Dict[str, str]) -> pd.DataFrame:
    """Per-group aggregates. Training is untouched; only the averaging is split."""
    per_user = report.per_user()
    unlabeled = sorted(set(per_user["user"]) - set(group_labels))
    if unlabeled:
        raise MissingLabel(f"no group label for user(s): {', '.join(unlabeled[:5])}")
    per_user["group"] = per_user["user"].map(group_labels)

    rows = []
    for (group, estimator, sparsity), block in per_user.groupby(
        ["group", "estimator", "sparsity"], sort=False
    ):
        rows.append(
            {
                "group": group,
                "estimator": estimator,
                "sparsity": sparsity,
                **_aggregate(block["normalized_error"], report.plan, group, estimator, sparsity),
            }
        )
    columns = ["group", "estimator", "sparsity", "normalized_error", "ci_low", "ci_high", "n_users"]
    return pd.DataFrame(rows, columns=columns)


def _run_cell(
    matrix: RatingsMatrix,
    plan: ExperimentPlan,
    config: Any,
    sparsity: float,
    iteration: int,
    log_file: Optional[Path],
) -> CellResult:
    coords = {"estimator": config.key, "sparsity": sparsity, "iteration": iteration}
    result = CellResult()
    started = time.perf_counter()
    log_step("cell_start", coords, log_file)
    try:
        mask = mask_random(matrix, sparsity, cell_seed(plan.base_seed, sparsity, iteration))
        train = apply_mask(matrix, mask)
        if plan.dilation is not None:
            train, _ = dilate(train, plan.dilation)
        model = fit_estimator(
            config, train, seed=derive_seed(plan.base_seed, sparsity, iteration, config.key)
        )
        pred = predict_all(model)
        if plan.clip:
            pred = clip_predictions(pred, matrix.scale_min, matrix.scale_max)
        scores = evaluate_user_level(pred, matrix, mask)
    except Exception as e:
        result.failure = {**coords, "error": f"{type(e).__name__}: {e}"}
        log_step("cell_failed", result.failure, log_file)
        logger.warning("cell %s failed: %s", coords, e)
        return result

    groups = plan.group_labels or {}
    for row in scores.frame.itertuples(index=False):
        result.records.append(
            {
                **coords,
                "user": row.user,
                "group": groups.get(row.user, ""),
                "rmse": row.rmse,
                "normalized_error": row.normalized_error,
                "correlation": row.correlation,
                "train_normalized_error": row.train_normalized_error,
                "n_test_cells": int(row.n_test_cells),
            }
        )
    result.omitted = [{**coords, "user": user} for user in scores.omitted]
    log_step(
        "cell_done",
        {
            **coords,
            "n_users": len(scores.frame),
            "n_omitted": len(scores.omitted),
            "mean_normalized_error": float(scores.frame["normalized_error"].mean())
            if len(scores.frame)
            else None,
            "seconds": round(time.perf_counter() - started, 3),
        },
        log_file,
    )
    return result


def run_experiment(
    matrix: RatingsMatrix,
    plan: ExperimentPlan,
    jobs: Optional[int] = 1,
    log_file: Optional[Path] = None,
    verbose: bool = False,
) -> EvaluationReport:
    """Sweep every (estimator, sparsity, iteration) cell of the plan.

    Cells run on a worker pool; the result is identical for any number of workers.
    A failing cell is recorded in ``failures`` and the sweep continues.
    """
    tasks = [
        partial(_run_cell, matrix, plan, config, sparsity, iteration, log_file)
        for config in plan.estimators
        for sparsity in plan.sparsity_levels
        for iteration in range(1, plan.n_iterations + 1)
    ]
    logger.info(
        "running %d cells (%d estimators x %d sparsity levels x %d iterations) on %s worker(s)",
        len(tasks),
        len(plan.estimators),
        len(plan.sparsity_levels),
        plan.n_iterations,
        jobs or "default",
    )
    results = run_tasks(tasks, max_workers=jobs, verbose=verbose)

    records = [r for cell in results for r in cell.records]
    omitted = [o for cell in results for o in cell.omitted]
    failures = [cell.failure for cell in results if cell.failure is not None]
    return EvaluationReport(
        records=pd.DataFrame(records, columns=REPORT_COLUMNS),
        omitted=pd.DataFrame(omitted, columns=["estimator", "sparsity", "iteration", "user"]),
        failures=pd.DataFrame(failures, columns=["estimator", "sparsity", "iteration", "error"]),
        plan=plan,
    )


def cell_seeds(plan: ExperimentPlan) -> List[Dict[str, Any]]:
    """Mask seed of every (sparsity, iteration) cell, for the manifest."""
    return [
        {"sparsity": s, "iteration": i, "seed": cell_seed(plan.base_seed, s, i)}
        for s in plan.sparsity_levels
        for i in range(1, plan.n_iterations + 1)
    ]
