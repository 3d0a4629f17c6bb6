import numpy as np
import pandas as pd
import pytest

from recovery.core.ratings import RatingsMatrix, ingest_tidy
from recovery.core.simulate import ClusterSpec, simulate_clusters


def random_matrix(seed, n_users=8, n_items=12, density=0.6, low=1.0, high=5.0, integer=False):
    """Random ratings with roughly ``density`` of the cells observed."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(low, high, size=(n_users, n_items))
    if integer:
        values = np.round(values)
    values[rng.random((n_users, n_items)) >= density] = np.nan
    return RatingsMatrix(
        values=values,
        user_labels=[f"u{u:02d}" for u in range(n_users)],
        item_labels=[f"i{i:02d}" for i in range(n_items)],
        scale_min=low,
        scale_max=high,
    )


def cluster_matrix(n_groups=2, users_per_group=20, n_items=100, seed=0, **options):
    frame = simulate_clusters(
        ClusterSpec(
            n_groups=n_groups,
            users_per_group=users_per_group,
            n_items=n_items,
            seed=seed,
            **options,
        )
    )
    return ingest_tidy(frame, (0.0, 100.0)), frame


@pytest.fixture
def small_frame():
    return pd.DataFrame.from_records(
        [
            ("alice", "a", 4.0),
            ("alice", "b", 2.0),
            ("bob", "a", 5.0),
            ("bob", "c", 1.0),
            ("carol", "b", 3.0),
            ("carol", "c", 2.0),
        ],
        columns=["user", "item", "rating"],
    )


@pytest.fixture
def small_matrix(small_frame):
    return ingest_tidy(small_frame, (1.0, 5.0))


@pytest.fixture
def two_clusters():
    return cluster_matrix(n_groups=2, users_per_group=10, n_items=30, seed=3)
