"""Rating estimators: item means, user-user KNN, and non-negative matrix factorization.

Every estimator is fitted on a (possibly masked) RatingsMatrix and predicts the full
users x items grid. Predictions are unbounded unless explicitly clipped.
"""

import logging
from dataclasses import dataclass, field
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..engine.errors import DegenerateScale, DivergedError, EmptyTrainingSet, InvalidValue
from ..engine.kernels import observed_rmse, sgd_epoch
from .ratings import RatingsMatrix
from .similarity import SimilarityMatrix, SimilarityMetric, compute_similarity

logger = logging.getLogger(__name__)


class _EstimatorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    label: Optional[str] = Field(None, description="Name used in reports; defaults to the family name")

    @property
    def key(self) -> str:
        return self.label or self.name  # type: ignore[attr-defined]


class MeanConfig(_EstimatorConfig):
    name: Literal["mean"] = "mean"


class KnnConfig(_EstimatorConfig):
    name: Literal["knn"] = "knn"
    k: int = Field(10, ge=1)
    metric: SimilarityMetric = SimilarityMetric.PEARSON
    min_overlap: int = Field(2, ge=1)


class NnmfSgdConfig(_EstimatorConfig):
    name: Literal["nnmf_sgd"] = "nnmf_sgd"
    f: Optional[int] = Field(None, ge=1, description="Latent factors; None means min(n_users, n_items)")
    gamma: float = Field(0.001, gt=0)
    lambda_bi: float = Field(0.0, ge=0)
    lambda_bu: float = Field(0.0, ge=0)
    lambda_qi: float = Field(0.0, ge=0)
    lambda_pu: float = Field(0.0, ge=0)
    tol: float = Field(1e-6, ge=0)
    max_iters: int = Field(1000, ge=1)
    init: Literal["random", "zeros"] = "random"
    init_scale: Literal["f", "sqrt_f"] = "f"
    clamp: Literal["update", "iteration"] = "update"


class NnmfMultConfig(_EstimatorConfig):
    name: Literal["nnmf_mult"] = "nnmf_mult"
    f: Optional[int] = Field(None, ge=1, description="Latent factors; None means min(n_users, n_items)")
    tol: float = Field(1e-6, ge=0)
    max_iters: int = Field(1000, ge=1)
    init_scale: Literal["f", "sqrt_f"] = "f"
    eps: float = Field(1e-9, gt=0)


EstimatorConfig = Annotated[
    Union[MeanConfig, KnnConfig, NnmfSgdConfig, NnmfMultConfig],
    Field(discriminator="name"),
]

ESTIMATOR_NAMES = ("mean", "knn", "nnmf_sgd", "nnmf_mult")


def default_estimators() -> List[Union[MeanConfig, KnnConfig, NnmfSgdConfig]]:
    """The three estimators compared in the reference analyses, with their defaults."""
    return [MeanConfig(), KnnConfig(), NnmfSgdConfig()]


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """Dense users x items predictions."""

    values: np.ndarray
    clipped: bool = False


@dataclass(frozen=True, eq=False)
class MeanModel:
    """Per-item means with the global mean as fallback. NaN marks an item with no ratings."""

    item_means: np.ndarray
    global_mean: float
    n_users: int

    def item_fallback(self) -> np.ndarray:
        return np.where(np.isnan(self.item_means), self.global_mean, self.item_means)


@dataclass(frozen=True, eq=False)
class KnnModel:
    k: int
    similarity: SimilarityMatrix
    train: RatingsMatrix
    fallback: MeanModel


@dataclass(frozen=True, eq=False)
class NnmfModel:
    """Biased factor model r = mu + b_u + b_i + q_i . p_u - shift.

    ``user_factors`` is n_users x f (rows p_u); ``item_factors`` is f x n_items
    (columns q_i). ``shift`` is what was added to the ratings to make them non-negative.
    """

    mu: float
    user_bias: np.ndarray
    item_bias: np.ndarray
    user_factors: np.ndarray
    item_factors: np.ndarray
    config: Union[NnmfSgdConfig, NnmfMultConfig]
    seed: int
    n_iterations: int
    error_history: Tuple[float, ...] = field(default_factory=tuple)
    shift: float = 0.0

    @property
    def f(self) -> int:
        return self.user_factors.shape[1]

    @property
    def kind(self) -> str:
        return self.config.name

    @property
    def final_rmse(self) -> float:
        return self.error_history[-1] if self.error_history else float("nan")


FittedModel = Union[MeanModel, KnnModel, NnmfModel]


def fit_mean(train: RatingsMatrix) -> MeanModel:
    """Mean of every item's observed ratings, and of all observed ratings."""
    observed = train.observed
    if not observed.any():
        raise EmptyTrainingSet("no observed ratings to fit")
    counts = observed.sum(axis=0)
    sums = np.where(observed, train.values, 0.0).sum(axis=0)
    item_means = np.full(train.n_items, np.nan)
    np.divide(sums, counts, out=item_means, where=counts > 0)
    return MeanModel(
        item_means=item_means,
        global_mean=float(train.values[observed].mean()),
        n_users=train.n_users,
    )


def predict_mean(model: MeanModel) -> PredictionMatrix:
    """Every user gets the item mean (global mean for items nobody rated)."""
    row = model.item_fallback()
    return PredictionMatrix(np.tile(row, (model.n_users, 1)))


def fit_knn(
    train: RatingsMatrix,
    k: int = 10,
    metric: Union[SimilarityMetric, str] = SimilarityMetric.PEARSON,
    min_overlap: int = 2,
) -> KnnModel:
    """User-user neighborhood model on the training observations only."""
    if k < 1:
        raise InvalidValue(f"k must be >= 1, got {k}")
    return KnnModel(
        k=k,
        similarity=compute_similarity(train, metric, min_overlap),
        train=train,
        fallback=fit_mean(train),
    )


def neighbors(model: KnnModel, user: int, item: int) -> np.ndarray:
    """Up to k most similar users with positive similarity who rated ``item``.

    Equal similarities rank the lower user index first.
    """
    sims = model.similarity.values[user]
    candidates = np.flatnonzero(model.train.observed[:, item] & (sims > 0))
    candidates = candidates[candidates != user]
    ranked = candidates[np.lexsort((candidates, -sims[candidates]))]
    return ranked[: model.k]


def predict_knn(model: KnnModel, user: int, item: int) -> float:
    """Similarity-weighted mean of the neighbors' ratings for one cell.

    With no usable neighbor, falls back to the item mean, then to the global mean.
    """
    nbrs = neighbors(model, user, item)
    if nbrs.size:
        weights = model.similarity.values[user, nbrs]
        ratings = model.train.values[nbrs, item]
        return float(np.dot(weights, ratings) / weights.sum())
    item_mean = model.fallback.item_means[item]
    if np.isnan(item_mean):
        return model.fallback.global_mean
    return float(item_mean)


def predict_knn_matrix(model: KnnModel) -> PredictionMatrix:
    """:func:`predict_knn` for every cell, vectorized over items."""
    observed = model.train.observed
    ratings = np.where(observed, model.train.values, 0.0)
    fallback = model.fallback.item_fallback()
    out = np.empty(model.train.shape)

    for u in range(model.train.n_users):
        sims = model.similarity.values[u].copy()
        sims[u] = np.nan
        candidates = np.flatnonzero(sims > 0)
        if candidates.size == 0:
            out[u] = fallback
            continue
        ranked = candidates[np.lexsort((candidates, -sims[candidates]))]
        rated = observed[ranked]
        chosen = rated & (np.cumsum(rated, axis=0) <= model.k)
        weights = sims[ranked][:, None] * chosen
        num = (weights * ratings[ranked]).sum(axis=0)
        den = weights.sum(axis=0)
        has_neighbors = chosen.any(axis=0)
        out[u] = np.where(has_neighbors, num / np.where(has_neighbors, den, 1.0), fallback)

    return PredictionMatrix(out)


def _resolve_factors(f: Optional[int], train: RatingsMatrix) -> int:
    return f if f is not None else min(train.n_users, train.n_items)


def _init_factors(
    rng: np.random.Generator, shape: Tuple[int, int], f: int, init_scale: str
) -> np.ndarray:
    # |N(0, 1)| keeps the draw non-negative; scaled by the factor count
    scale = f if init_scale == "f" else np.sqrt(f)
    return np.abs(rng.standard_normal(shape)) / scale


def fit_nnmf_sgd(
    train: RatingsMatrix,
    config: Optional[NnmfSgdConfig] = None,
    seed: int = 0,
) -> NnmfModel:
    """Biased NNMF trained by projected stochastic gradient descent.

    Each iteration visits the observed ratings in a freshly shuffled order. Every rating
    updates b_i, b_u, q_i and p_u from one shared error, the factor updates reading the
    partner vector's pre-update value. Factors are clamped at zero after every update
    (or once per iteration with ``clamp="iteration"``). Training stops once the observed
    RMSE changes by at most ``tol`` between iterations, or after ``max_iters``.
    """
    config = config or NnmfSgdConfig()
    observed = train.observed
    if not observed.any():
        raise EmptyTrainingSet("no observed ratings to fit")

    users, items = np.nonzero(observed)
    users = users.astype(np.int64)
    items = items.astype(np.int64)
    ratings = np.ascontiguousarray(train.values[users, items])
    f = _resolve_factors(config.f, train)

    mu = float(ratings.mean())
    user_bias = np.zeros(train.n_users)
    item_bias = np.zeros(train.n_items)
    if config.init == "zeros":
        P = np.zeros((train.n_users, f))
        Q = np.zeros((train.n_items, f))
    else:
        rng = np.random.default_rng(seed)
        P = _init_factors(rng, (train.n_users, f), f, config.init_scale)
        Q = _init_factors(rng, (train.n_items, f), f, config.init_scale)

    clamp_each = config.clamp == "update"
    history: List[float] = []
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        order = np.random.default_rng([seed, iteration]).permutation(ratings.size)
        sgd_epoch(
            users, items, ratings, order, mu, user_bias, item_bias, P, Q,
            config.gamma, config.lambda_bi, config.lambda_bu, config.lambda_qi,
            config.lambda_pu, clamp_each,
        )
        if not clamp_each:
            np.maximum(P, 0.0, out=P)
            np.maximum(Q, 0.0, out=Q)
        error = float(observed_rmse(users, items, ratings, mu, user_bias, item_bias, P, Q))
        if not np.isfinite(error):
            raise DivergedError(iteration, error)
        history.append(error)
        if len(history) > 1 and abs(history[-2] - error) <= config.tol:
            break

    logger.debug(
        "nnmf_sgd: f=%d, %d iterations, observed rmse %.6g", f, iteration, history[-1]
    )
    return NnmfModel(
        mu=mu,
        user_bias=user_bias,
        item_bias=item_bias,
        user_factors=P,
        item_factors=np.ascontiguousarray(Q.T),
        config=config,
        seed=seed,
        n_iterations=iteration,
        error_history=tuple(history),
    )


def fit_nnmf_mult(
    train: RatingsMatrix,
    config: Optional[NnmfMultConfig] = None,
    seed: int = 0,
) -> NnmfModel:
    """NNMF by Lee-Seung multiplicative updates, without bias terms.

    The textbook rules expect a complete matrix, so every sweep refills the missing
    cells with the current reconstruction. The fit reproduces observed ratings closely
    but generalizes poorly on sparse data.
    """
    config = config or NnmfMultConfig()
    observed = train.observed
    if not observed.any():
        raise EmptyTrainingSet("no observed ratings to fit")

    lowest = float(train.values[observed].min())
    shift = 0.0
    if lowest < 0:
        shift = -lowest
        logger.warning("nnmf_mult: shifting ratings by %g to make them non-negative", shift)
    target = np.where(observed, train.values + shift, 0.0)

    f = _resolve_factors(config.f, train)
    rng = np.random.default_rng(seed)
    W = _init_factors(rng, (train.n_users, f), f, config.init_scale)
    H = _init_factors(rng, (f, train.n_items), f, config.init_scale)
    eps = config.eps

    history: List[float] = []
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        filled = np.where(observed, target, W @ H)
        H *= (W.T @ filled) / (W.T @ W @ H + eps)
        W *= (filled @ H.T) / (W @ H @ H.T + eps)

        residual = (W @ H - target)[observed]
        error = float(np.sqrt(np.mean(residual**2)))
        if not np.isfinite(error):
            raise DivergedError(iteration, error)
        history.append(error)
        if len(history) > 1 and abs(history[-2] - error) <= config.tol:
            break

    logger.debug(
        "nnmf_mult: f=%d, %d iterations, observed rmse %.6g", f, iteration, history[-1]
    )
    return NnmfModel(
        mu=0.0,
        user_bias=np.zeros(train.n_users),
        item_bias=np.zeros(train.n_items),
        user_factors=W,
        item_factors=H,
        config=config,
        seed=seed,
        n_iterations=iteration,
        error_history=tuple(history),
        shift=shift,
    )


def predict_nnmf(model: NnmfModel) -> PredictionMatrix:
    """mu + b_u + b_i + q_i . p_u for every cell."""
    values = (
        model.mu
        + model.user_bias[:, None]
        + model.item_bias[None, :]
        + model.user_factors @ model.item_factors
        - model.shift
    )
    return PredictionMatrix(values)


def clip_predictions(
    pred: PredictionMatrix, scale_min: float, scale_max: float
) -> PredictionMatrix:
    """Clamp predictions to the rating scale."""
    if not scale_min < scale_max:
        raise DegenerateScale(f"cannot clip to [{scale_min}, {scale_max}]")
    return PredictionMatrix(np.clip(pred.values, scale_min, scale_max), clipped=True)


def fit_estimator(
    config: Union[MeanConfig, KnnConfig, NnmfSgdConfig, NnmfMultConfig],
    train: RatingsMatrix,
    seed: int = 0,
) -> FittedModel:
    """Fit the estimator described by ``config``."""
    if isinstance(config, MeanConfig):
        return fit_mean(train)
    if isinstance(config, KnnConfig):
        return fit_knn(train, config.k, config.metric, config.min_overlap)
    if isinstance(config, NnmfSgdConfig):
        return fit_nnmf_sgd(train, config, seed)
    if isinstance(config, NnmfMultConfig):
        return fit_nnmf_mult(train, config, seed)
    raise InvalidValue(f"unknown estimator config {config!r}")


def predict_all(model: FittedModel) -> PredictionMatrix:
    """Dense predictions from any fitted model."""
    if isinstance(model, MeanModel):
        return predict_mean(model)
    if isinstance(model, KnnModel):
        return predict_knn_matrix(model)
    return predict_nnmf(model)
