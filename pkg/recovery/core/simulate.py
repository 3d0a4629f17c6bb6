"""Cluster-structured synthetic ratings.

Users in a group share one latent item profile and add independent gaussian noise.
With ``anticorrelated`` every odd group mirrors the group before it, so the two
groups disagree item by item.
"""

from typing import List, Literal, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ClusterSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_groups: int = Field(2, ge=1)
    users_per_group: Union[int, List[int]] = 20
    n_items: int = Field(100, ge=1)
    noise_sd: float = Field(5.0, ge=0)
    seed: int = Field(0, ge=0)
    scale_min: float = 0.0
    scale_max: float = 100.0
    profile: Literal["uniform", "sinusoid"] = "uniform"
    period_seconds: float = Field(120.0, gt=0)
    anticorrelated: bool = True

    @model_validator(mode="after")
    def _check(self) -> "ClusterSpec":
        if not self.scale_min < self.scale_max:
            raise ValueError("scale_min must be below scale_max")
        sizes = self.group_sizes
        if len(sizes) != self.n_groups:
            raise ValueError(f"users_per_group lists {len(sizes)} sizes for {self.n_groups} groups")
        if min(sizes) < 1:
            raise ValueError("every group needs at least one user")
        return self

    @property
    def group_sizes(self) -> List[int]:
        if isinstance(self.users_per_group, int):
            return [self.users_per_group] * self.n_groups
        return list(self.users_per_group)


def _profile(spec: ClusterSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.profile == "uniform":
        return rng.uniform(spec.scale_min, spec.scale_max, spec.n_items)
    mid = (spec.scale_min + spec.scale_max) / 2.0
    amplitude = 0.4 * (spec.scale_max - spec.scale_min)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(spec.n_items, dtype=float)
    return mid + amplitude * np.sin(2.0 * np.pi * t / spec.period_seconds + phase)


def simulate_clusters(spec: ClusterSpec) -> pd.DataFrame:
    """Dense tidy ratings with a ``group`` column.

    Returns:
        DataFrame with columns user, item, rating, group; ratings clipped to the scale.
        Sinusoid items are labelled by their offset in whole seconds.
    """
    rng = np.random.default_rng(spec.seed)
    profiles: List[np.ndarray] = []
    for g in range(spec.n_groups):
        if spec.anticorrelated and g % 2 == 1:
            profiles.append(spec.scale_min + spec.scale_max - profiles[g - 1])
        else:
            profiles.append(_profile(spec, rng))

    n_users = sum(spec.group_sizes)
    user_width = max(3, len(str(n_users - 1)))
    if spec.profile == "sinusoid":
        items = [str(j) for j in range(spec.n_items)]
    else:
        item_width = max(3, len(str(spec.n_items - 1)))
        items = [f"i{j:0{item_width}d}" for j in range(spec.n_items)]

    frames = []
    user = 0
    for g, size in enumerate(spec.group_sizes):
        noise = rng.normal(0.0, spec.noise_sd, size=(size, spec.n_items))
        ratings = np.clip(profiles[g] + noise, spec.scale_min, spec.scale_max)
        labels = [f"u{u:0{user_width}d}" for u in range(user, user + size)]
        user += size
        frames.append(
            pd.DataFrame(
                {
                    "user": np.repeat(labels, spec.n_items),
                    "item": np.tile(items, size),
                    "rating": ratings.ravel(),
                    "group": f"g{g}",
                }
            )
        )
    return pd.concat(frames, ignore_index=True)
