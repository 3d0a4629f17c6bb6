"""Collaborative-filtering recovery of missing ratings."""

__version__ = "0.1.0"

from recovery.core.estimators import fit_estimator, predict_all  # noqa: E402
from recovery.core.evaluation import ExperimentPlan, run_experiment  # noqa: E402
from recovery.core.ratings import RatingsMatrix, ingest_tidy, mask_random  # noqa: E402
from recovery.engine.logging import setup_logging  # noqa: E402

__all__ = [
    "ExperimentPlan",
    "RatingsMatrix",
    "fit_estimator",
    "ingest_tidy",
    "mask_random",
    "predict_all",
    "run_experiment",
    "setup_logging",
]
