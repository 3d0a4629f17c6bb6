"""User-user similarity over co-observed items."""

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..engine.errors import InvalidValue
from .ratings import RatingsMatrix


class SimilarityMetric(str, Enum):
    """Supported similarity metrics."""

    PEARSON = "pearson"
    COSINE = "cosine"
    SPEARMAN = "spearman"
    KENDALL = "kendall"


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric users x users similarities; NaN marks an undefined pair."""

    values: np.ndarray
    metric: SimilarityMetric
    min_overlap: int

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


def _cosine(x: np.ndarray, y: np.ndarray) -> float:
    denom = np.sqrt(np.dot(x, x) * np.dot(y, y))
    if denom == 0.0:
        return np.nan
    return float(np.dot(x, y) / denom)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return np.nan
    return _cosine(x - x.mean(), y - y.mean())


def _spearman(x: np.ndarray, y: np.ndarray) -> float:
    return _pearson(stats.rankdata(x), stats.rankdata(y))


def _kendall(x: np.ndarray, y: np.ndarray) -> float:
    with warnings.catch_warnings():
        # constant input: scipy warns and returns nan, which is what we want
        warnings.simplefilter("ignore")
        tau, _ = stats.kendalltau(x, y, variant="b")
    return float(tau)


_METRICS: Dict[SimilarityMetric, Callable[[np.ndarray, np.ndarray], float]] = {
    SimilarityMetric.PEARSON: _pearson,
    SimilarityMetric.COSINE: _cosine,
    SimilarityMetric.SPEARMAN: _spearman,
    SimilarityMetric.KENDALL: _kendall,
}


def compute_similarity(
    matrix: RatingsMatrix,
    metric: Union[SimilarityMetric, str] = SimilarityMetric.PEARSON,
    min_overlap: int = 2,
) -> SimilarityMatrix:
    """Similarity of every pair of users over the items both have rated.

    Pairs sharing fewer than ``min_overlap`` items, or whose co-rated vectors have no
    variance (no norm, for cosine), are left undefined rather than zero.
    """
    metric = SimilarityMetric(metric)
    floor = 1 if metric is SimilarityMetric.COSINE else 2
    if min_overlap < floor:
        raise InvalidValue(f"min_overlap for {metric.value} must be >= {floor}, got {min_overlap}")

    score = _METRICS[metric]
    observed = matrix.observed
    values = matrix.values
    n_users = matrix.n_users
    sims = np.full((n_users, n_users), np.nan)

    for u in range(n_users):
        if observed[u].sum() >= min_overlap:
            sims[u, u] = 1.0
        for v in range(u + 1, n_users):
            shared = observed[u] & observed[v]
            if shared.sum() < min_overlap:
                continue
            s = score(values[u, shared], values[v, shared])
            if np.isfinite(s):
                sims[u, v] = sims[v, u] = min(1.0, max(-1.0, s))

    return SimilarityMatrix(values=sims, metric=metric, min_overlap=min_overlap)


def similarity_frame(sim: SimilarityMatrix, labels: Sequence[str]) -> pd.DataFrame:
    """Labelled users x users table, for dumping to CSV."""
    return pd.DataFrame(sim.values, index=pd.Index(labels, name="user"), columns=list(labels))
