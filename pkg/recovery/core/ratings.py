"""Ratings data model: tidy ingestion, pivoting, masking and temporal resampling."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..engine.errors import (
    DuplicateRating,
    InvalidFraction,
    InvalidValue,
    NotTimeSeries,
    NotUniformGrid,
    OutOfScale,
    ShapeError,
)

logger = logging.getLogger(__name__)

TIDY_COLUMNS = ("user", "item", "rating")


class RatingRecord(NamedTuple):
    """A single rating in long ("tidy") form."""

    user_id: str
    item_id: str
    rating: float


class ResampleMode(str, Enum):
    """Temporal resampling modes."""

    MEAN_DOWNSAMPLE = "mean-downsample"
    HOLD_UPSAMPLE = "hold-upsample"


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RatingsMatrix:
    """Users x items ratings; NaN marks a missing rating.

    Rows and columns follow the sorted order of their labels. Instances are immutable
    and can be shared between workers.
    """

    values: np.ndarray
    user_labels: Tuple[str, ...]
    item_labels: Tuple[str, ...]
    scale_min: float
    scale_max: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise ShapeError(f"ratings must be 2-D, got {values.ndim}-D")
        users = tuple(str(u) for u in self.user_labels)
        items = tuple(str(i) for i in self.item_labels)
        if values.shape != (len(users), len(items)):
            raise ShapeError(
                f"values shape {values.shape} does not match "
                f"{len(users)} users x {len(items)} items"
            )
        if len(set(users)) != len(users) or len(set(items)) != len(items):
            raise DuplicateRating("user and item labels must be unique")
        if np.isinf(values).any():
            raise InvalidValue("observed ratings must be finite")
        if not float(self.scale_min) < float(self.scale_max):
            raise OutOfScale(
                f"scale_min ({self.scale_min}) must be below scale_max ({self.scale_max})"
            )
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "user_labels", users)
        object.__setattr__(self, "item_labels", items)
        object.__setattr__(self, "scale_min", float(self.scale_min))
        object.__setattr__(self, "scale_max", float(self.scale_max))

    @property
    def n_users(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def observed(self) -> np.ndarray:
        """Boolean grid, true where a rating is present."""
        return ~np.isnan(self.values)

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    @property
    def scale_range(self) -> float:
        return self.scale_max - self.scale_min

    def with_values(self, values: np.ndarray) -> "RatingsMatrix":
        """Same labels and scale, new ratings grid."""
        return RatingsMatrix(
            values=values,
            user_labels=self.user_labels,
            item_labels=self.item_labels,
            scale_min=self.scale_min,
            scale_max=self.scale_max,
        )

    def equals(self, other: "RatingsMatrix") -> bool:
        """Exact equality, with missing cells comparing equal."""
        return (
            self.user_labels == other.user_labels
            and self.item_labels == other.item_labels
            and self.scale_min == other.scale_min
            and self.scale_max == other.scale_max
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Train/test partition of a ratings matrix.

    ``train`` is true for cells the models may see. ``eligible`` is true for cells that
    held a rating before masking; cells outside it belong to neither train nor test.
    """

    train: np.ndarray
    eligible: np.ndarray
    seed: int
    target_fraction_masked: float

    def __post_init__(self) -> None:
        train = np.array(self.train, dtype=bool, copy=True)
        eligible = np.array(self.eligible, dtype=bool, copy=True)
        if train.shape != eligible.shape:
            raise ShapeError(f"train {train.shape} and eligible {eligible.shape} differ")
        if (train & ~eligible).any():
            raise ShapeError("train cells must be a subset of eligible cells")
        object.__setattr__(self, "train", _readonly(train))
        object.__setattr__(self, "eligible", _readonly(eligible))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.train.shape

    @property
    def test(self) -> np.ndarray:
        """Cells held out for evaluation."""
        return self.eligible & ~self.train

    @property
    def n_masked(self) -> int:
        return int(self.test.sum())


def _is_number(label: str) -> bool:
    try:
        return math.isfinite(float(label))
    except ValueError:
        return False


def sort_labels(labels: Iterable[str]) -> Tuple[str, ...]:
    """Distinct labels in sorted order; numeric when every label parses as a number."""
    unique = list(dict.fromkeys(str(label) for label in labels))
    if unique and all(_is_number(label) for label in unique):
        return tuple(sorted(unique, key=float))
    return tuple(sorted(unique))


def format_time(seconds: float) -> str:
    """Label for a timepoint: integral seconds print without a decimal point."""
    if float(seconds).is_integer():
        return str(int(seconds))
    return f"{seconds:.9g}"


def _as_frame(records: Union[pd.DataFrame, Iterable[RatingRecord]]) -> pd.DataFrame:
    if isinstance(records, pd.DataFrame):
        frame = records.rename(columns={"user_id": "user", "item_id": "item"})
        missing = [c for c in TIDY_COLUMNS if c not in frame.columns]
        if missing:
            raise InvalidValue(f"tidy ratings are missing columns: {', '.join(missing)}")
        frame = frame.loc[:, list(TIDY_COLUMNS)].copy()
    else:
        frame = pd.DataFrame([tuple(r) for r in records], columns=list(TIDY_COLUMNS))
    frame["user"] = frame["user"].astype(str)
    frame["item"] = frame["item"].astype(str)
    return frame


def ingest_tidy(
    records: Union[pd.DataFrame, Iterable[RatingRecord]],
    scale_bounds: Optional[Tuple[float, float]] = None,
) -> RatingsMatrix:
    """Pivot long-form ratings into a users x items matrix.

    Args:
        records: RatingRecords, or a DataFrame with user/item/rating columns
        scale_bounds: Nominal (min, max) of the rating instrument; defaults to the
            observed range

    Returns:
        The ratings matrix; unobserved pairs are missing
    """
    frame = _as_frame(records)
    if frame.empty:
        raise InvalidValue("no ratings to ingest")

    try:
        ratings = frame["rating"].astype(float).to_numpy()
    except (TypeError, ValueError) as e:
        raise InvalidValue(f"ratings must be numeric: {e}") from e
    if not np.isfinite(ratings).all():
        bad = frame.loc[~np.isfinite(ratings)].iloc[0]
        raise InvalidValue(f"non-finite rating for user {bad['user']!r}, item {bad['item']!r}")

    dupes = frame.duplicated(subset=["user", "item"])
    if dupes.any():
        first = frame.loc[dupes].iloc[0]
        raise DuplicateRating(f"duplicate rating for user {first['user']!r}, item {first['item']!r}")

    if scale_bounds is not None:
        scale_min, scale_max = (float(b) for b in scale_bounds)
        if not scale_min < scale_max:
            raise OutOfScale(f"scale bounds ({scale_min}, {scale_max}) are not increasing")
        outside = (ratings < scale_min) | (ratings > scale_max)
        if outside.any():
            raise OutOfScale(
                f"{int(outside.sum())} rating(s) fall outside [{scale_min}, {scale_max}]"
            )
    else:
        scale_min, scale_max = float(ratings.min()), float(ratings.max())
        if not scale_min < scale_max:
            raise OutOfScale(
                "observed ratings span a single value; supply explicit scale bounds"
            )

    users = sort_labels(frame["user"])
    items = sort_labels(frame["item"])
    rows = frame["user"].map({u: k for k, u in enumerate(users)}).to_numpy()
    cols = frame["item"].map({i: k for k, i in enumerate(items)}).to_numpy()
    values = np.full((len(users), len(items)), np.nan)
    values[rows, cols] = ratings
    return RatingsMatrix(values, users, items, scale_min, scale_max)


def to_tidy(matrix: RatingsMatrix) -> pd.DataFrame:
    """Flatten the observed cells back to user/item/rating rows (row-major order)."""
    rows, cols = np.nonzero(matrix.observed)
    return pd.DataFrame(
        {
            "user": [matrix.user_labels[r] for r in rows],
            "item": [matrix.item_labels[c] for c in cols],
            "rating": matrix.values[rows, cols],
        }
    )


def read_tidy_csv(
    path: Path, group_column: Optional[str] = "group"
) -> Tuple[pd.DataFrame, Optional[Dict[str, str]]]:
    """Read a ``user,item,rating[,group]`` CSV.

    Returns:
        The rating rows and, when the group column is present, a user -> group mapping
    """
    try:
        frame = pd.read_csv(path, dtype={"user": str, "item": str})
    except OSError as e:
        raise InvalidValue(f"cannot read {path}: {e.strerror or e}") from e
    except pd.errors.EmptyDataError as e:
        raise InvalidValue(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise InvalidValue(f"{path} is not a valid CSV: {e}") from e
    missing = [c for c in TIDY_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidValue(f"{path}: missing columns {', '.join(missing)}")

    groups = None
    if group_column and group_column in frame.columns:
        labels = frame[["user", group_column]].astype(str).drop_duplicates()
        conflicted = labels["user"].duplicated(keep=False)
        if conflicted.any():
            user = labels.loc[conflicted, "user"].iloc[0]
            raise InvalidValue(f"{path}: user {user!r} carries more than one {group_column!r}")
        groups = dict(zip(labels["user"], labels[group_column]))
    logger.debug("read %d ratings from %s", len(frame), path)
    return frame.loc[:, list(TIDY_COLUMNS)], groups


def masked_count(fraction: float, n_eligible: int) -> int:
    """Number of cells to hide: fraction x eligible, rounded half up."""
    return int(math.floor(fraction * n_eligible + 0.5))


def mask_random(matrix: RatingsMatrix, fraction_masked: float, seed: int) -> ObservationMask:
    """Hide an exact share of the observed cells, chosen uniformly without replacement.

    Cells that were already missing are neither train nor test.
    """
    if not 0.0 < fraction_masked < 1.0:
        raise InvalidFraction(f"fraction_masked must lie in (0, 1), got {fraction_masked}")
    eligible = matrix.observed
    candidates = np.flatnonzero(eligible)
    n_mask = masked_count(fraction_masked, candidates.size)

    rng = np.random.default_rng(seed)
    hidden = rng.choice(candidates, size=n_mask, replace=False)
    train = eligible.copy()
    train.flat[hidden] = False
    return ObservationMask(train, eligible, seed, fraction_masked)


def apply_mask(matrix: RatingsMatrix, mask: ObservationMask) -> RatingsMatrix:
    """Copy of ``matrix`` with every non-train cell missing."""
    if matrix.shape != mask.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match matrix shape {matrix.shape}")
    values = matrix.values.copy()
    values[~mask.train] = np.nan
    return matrix.with_values(values)


def time_index(matrix: RatingsMatrix) -> np.ndarray:
    """Item labels as seconds."""
    try:
        times = np.array([float(label) for label in matrix.item_labels])
    except ValueError as e:
        raise NotTimeSeries(f"item labels are not time offsets: {e}") from e
    if not np.isfinite(times).all():
        raise NotTimeSeries("item labels must be finite time offsets")
    return times


def check_uniform_grid(matrix: RatingsMatrix, sample_rate_hz: float) -> np.ndarray:
    """Time index of ``matrix``, verified to step by exactly one sample."""
    times = time_index(matrix)
    if times.size > 1:
        steps = np.diff(times)
        if not np.allclose(steps, 1.0 / sample_rate_hz, rtol=1e-6, atol=1e-9):
            raise NotUniformGrid(
                f"items are not a uniform {sample_rate_hz} Hz grid "
                f"(steps between {steps.min():g} and {steps.max():g} s)"
            )
    return times


def resample(
    matrix: RatingsMatrix,
    source_hz: float,
    target_hz: float,
    mode: Union[ResampleMode, str],
) -> RatingsMatrix:
    """Change the sample rate of a time-series ratings matrix.

    ``mean-downsample`` averages the non-missing ratings falling in each target bin (a
    bin is missing only when all its members are); the final partial bin is kept.
    ``hold-upsample`` repeats every rating across the finer grid.
    """
    mode = ResampleMode(mode)
    if source_hz <= 0 or target_hz <= 0:
        raise InvalidValue(f"sample rates must be positive, got {source_hz} and {target_hz}")
    times = check_uniform_grid(matrix, source_hz)
    t0 = times[0]

    if mode is ResampleMode.MEAN_DOWNSAMPLE:
        if target_hz > source_hz:
            raise InvalidValue("mean-downsample needs target_hz <= source_hz")
        bins = np.floor((times - t0) * target_hz + 1e-9).astype(int)
        binned = pd.DataFrame(matrix.values.T).groupby(bins).mean()
        values = binned.to_numpy().T
        new_times = t0 + binned.index.to_numpy() / target_hz
    else:
        if target_hz < source_hz:
            raise InvalidValue("hold-upsample needs target_hz >= source_hz")
        n_new = int(round(times.size * target_hz / source_hz))
        steps = np.arange(n_new)
        source_idx = np.minimum(
            np.floor(steps * source_hz / target_hz + 1e-9).astype(int), times.size - 1
        )
        values = matrix.values[:, source_idx]
        new_times = t0 + steps / target_hz

    return RatingsMatrix(
        values=values,
        user_labels=matrix.user_labels,
        item_labels=tuple(format_time(t) for t in new_times),
        scale_min=matrix.scale_min,
        scale_max=matrix.scale_max,
    )
