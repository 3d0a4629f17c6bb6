import math

import numpy as np
import pandas as pd
import pytest

from conftest import random_matrix
from recovery.core.ratings import (
    ObservationMask,
    RatingRecord,
    RatingsMatrix,
    apply_mask,
    check_uniform_grid,
    ingest_tidy,
    mask_random,
    masked_count,
    read_tidy_csv,
    resample,
    sort_labels,
    time_index,
    to_tidy,
)
from recovery.engine.errors import (
    DuplicateRating,
    InvalidFraction,
    InvalidValue,
    NotTimeSeries,
    NotUniformGrid,
    OutOfScale,
    ShapeError,
)


def series(values, times=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    times = times if times is not None else range(values.shape[1])
    return RatingsMatrix(
        values=values,
        user_labels=[f"u{u}" for u in range(values.shape[0])],
        item_labels=[str(t) for t in times],
        scale_min=0.0,
        scale_max=100.0,
    )


def test_ingest_pivots_and_sorts(small_matrix):
    assert small_matrix.user_labels == ("alice", "bob", "carol")
    assert small_matrix.item_labels == ("a", "b", "c")
    assert small_matrix.values[0, 0] == 4.0
    assert small_matrix.values[1, 2] == 1.0
    assert np.isnan(small_matrix.values[0, 2])
    assert small_matrix.n_observed == 6
    assert (small_matrix.scale_min, small_matrix.scale_max) == (1.0, 5.0)


def test_ingest_records_and_default_bounds():
    matrix = ingest_tidy(
        [RatingRecord("x", "1", 2.0), RatingRecord("y", "1", 7.0), RatingRecord("x", "2", 3.0)]
    )
    assert (matrix.scale_min, matrix.scale_max) == (2.0, 7.0)
    assert matrix.shape == (2, 2)


def test_numeric_labels_sort_numerically():
    assert sort_labels(["10", "2", "1", "1.5"]) == ("1", "1.5", "2", "10")
    assert sort_labels(["10", "2", "b"]) == ("10", "2", "b")


def test_duplicate_rating_rejected(small_frame):
    frame = pd.concat([small_frame, small_frame.iloc[[0]]])
    with pytest.raises(DuplicateRating):
        ingest_tidy(frame)


def test_out_of_scale_rejected(small_frame):
    with pytest.raises(OutOfScale):
        ingest_tidy(small_frame, (1.0, 4.0))
    with pytest.raises(OutOfScale):
        ingest_tidy(small_frame, (5.0, 1.0))


def test_single_valued_data_needs_bounds():
    records = [RatingRecord("x", "a", 3.0), RatingRecord("y", "a", 3.0)]
    with pytest.raises(OutOfScale):
        ingest_tidy(records)
    assert ingest_tidy(records, (1, 5)).n_observed == 2


def test_non_finite_rating_rejected():
    with pytest.raises(InvalidValue):
        ingest_tidy([RatingRecord("x", "a", float("nan")), RatingRecord("y", "a", 1.0)])
    with pytest.raises(InvalidValue):
        ingest_tidy([])


def test_matrix_invariants():
    with pytest.raises(ShapeError):
        RatingsMatrix(np.zeros((2, 2)), ("a",), ("x", "y"), 0, 1)
    with pytest.raises(DuplicateRating):
        RatingsMatrix(np.zeros((2, 1)), ("a", "a"), ("x",), 0, 1)
    with pytest.raises(InvalidValue):
        RatingsMatrix(np.array([[np.inf]]), ("a",), ("x",), 0, 1)
    with pytest.raises(OutOfScale):
        RatingsMatrix(np.zeros((1, 1)), ("a",), ("x",), 1, 1)


def test_values_are_read_only(small_matrix):
    with pytest.raises(ValueError):
        small_matrix.values[0, 0] = 1.0


@pytest.mark.parametrize("seed", range(5))
def test_tidy_round_trip(seed):
    matrix = random_matrix(seed, density=0.8)
    again = ingest_tidy(to_tidy(matrix), (matrix.scale_min, matrix.scale_max))
    assert again.equals(matrix)


def test_read_tidy_csv_groups(tmp_path):
    path = tmp_path / "ratings.csv"
    path.write_text("user,item,rating,group\n01,a,1,g1\n01,b,2,g1\n02,a,3,g2\n")
    frame, groups = read_tidy_csv(path)
    assert list(frame.columns) == ["user", "item", "rating"]
    assert groups == {"01": "g1", "02": "g2"}
    assert read_tidy_csv(path, group_column=None)[1] is None


def test_read_tidy_csv_conflicting_groups(tmp_path):
    path = tmp_path / "ratings.csv"
    path.write_text("user,item,rating,group\n1,a,1,g1\n1,b,2,g2\n")
    with pytest.raises(InvalidValue):
        read_tidy_csv(path)


@pytest.mark.parametrize(
    "content, message",
    [(None, "cannot read"), ("", "empty"), ('user,item,rating\n"a,x,1\n', "not a valid CSV")],
)
def test_read_tidy_csv_unreadable(tmp_path, content, message):
    path = tmp_path / "ratings.csv"
    if content is not None:
        path.write_text(content)
    with pytest.raises(InvalidValue, match=message):
        read_tidy_csv(path)


@pytest.mark.parametrize("fraction", [round(0.1 * k, 1) for k in range(1, 10)])
def test_mask_counts_are_exact(fraction):
    matrix = random_matrix(11, n_users=9, n_items=13, density=0.7)
    mask = mask_random(matrix, fraction, seed=5)
    n = matrix.n_observed
    assert mask.n_masked == math.floor(fraction * n + 0.5) == masked_count(fraction, n)
    assert not (mask.train & mask.test).any()
    assert np.array_equal(mask.train | mask.test, matrix.observed)


def test_mask_leaves_missing_cells_out(small_matrix):
    mask = mask_random(small_matrix, 0.5, seed=1)
    missing = ~small_matrix.observed
    assert not mask.train[missing].any()
    assert not mask.test[missing].any()


def test_mask_is_seeded():
    matrix = random_matrix(2, n_users=10, n_items=10, density=0.9)
    a = mask_random(matrix, 0.3, seed=7)
    b = mask_random(matrix, 0.3, seed=7)
    c = mask_random(matrix, 0.3, seed=8)
    assert np.array_equal(a.train, b.train)
    assert not np.array_equal(a.train, c.train)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_mask_fraction_bounds(small_matrix, fraction):
    with pytest.raises(InvalidFraction):
        mask_random(small_matrix, fraction, seed=0)


def test_mask_train_must_be_eligible():
    with pytest.raises(ShapeError):
        ObservationMask(np.array([[True]]), np.array([[False]]), 0, 0.5)


def test_apply_mask_is_bit_exact():
    matrix = random_matrix(4)
    mask = mask_random(matrix, 0.4, seed=2)
    train = apply_mask(matrix, mask)
    assert np.array_equal(train.values[mask.train], matrix.values[mask.train])
    assert np.isnan(train.values[~mask.train]).all()
    assert train.n_observed == int(mask.train.sum())


def test_apply_mask_shape_mismatch(small_matrix):
    other = mask_random(random_matrix(0), 0.5, seed=0)
    with pytest.raises(ShapeError):
        apply_mask(small_matrix, other)


def test_time_index(small_matrix):
    assert list(time_index(series([[1, 2, 3]]))) == [0.0, 1.0, 2.0]
    with pytest.raises(NotTimeSeries):
        time_index(small_matrix)


def test_uniform_grid_check():
    check_uniform_grid(series([[1, 2, 3]], times=["0", "0.5", "1"]), 2.0)
    with pytest.raises(NotUniformGrid):
        check_uniform_grid(series([[1, 2, 3]], times=["0", "1", "3"]), 1.0)


def test_mean_downsample_keeps_partial_bin():
    matrix = series([[1, 3, np.nan, 6, 9]], times=["0", "0.5", "1", "1.5", "2"])
    out = resample(matrix, 2.0, 1.0, "mean-downsample")
    assert out.item_labels == ("0", "1", "2")
    assert np.allclose(out.values, [[2.0, 6.0, 9.0]])


def test_mean_downsample_all_missing_bin():
    matrix = series([[1, 3, np.nan, np.nan]], times=["0", "0.5", "1", "1.5"])
    out = resample(matrix, 2.0, 1.0, "mean-downsample")
    assert out.values[0, 0] == 2.0
    assert np.isnan(out.values[0, 1])


def test_hold_upsample_repeats_samples():
    matrix = series([[1, np.nan, 3]])
    out = resample(matrix, 1.0, 2.0, "hold-upsample")
    assert out.item_labels == ("0", "0.5", "1", "1.5", "2", "2.5")
    assert np.array_equal(out.values, [[1, 1, np.nan, np.nan, 3, 3]], equal_nan=True)


def test_resample_round_trip_length():
    matrix = series([np.arange(7, dtype=float)])
    down = resample(matrix, 1.0, 0.5, "mean-downsample")
    up = resample(down, 0.5, 1.0, "hold-upsample")
    assert abs(up.n_items - matrix.n_items) <= 1


def test_resample_rejects_bad_rates():
    matrix = series([[1, 2, 3]])
    with pytest.raises(InvalidValue):
        resample(matrix, 0.0, 1.0, "mean-downsample")
    with pytest.raises(InvalidValue):
        resample(matrix, 1.0, 2.0, "mean-downsample")
    with pytest.raises(InvalidValue):
        resample(matrix, 1.0, 0.5, "hold-upsample")
