"""Kernel dilation of sparse time-series ratings.

Each observed rating is spread to the missing timepoints around it; a timepoint
covered by several observations gets their kernel-weighted average. Only the
training view is ever dilated, so held-out ratings cannot leak into the fill.
"""

from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from .ratings import RatingsMatrix, check_uniform_grid

__all__ = ["DilationKernel", "KernelShape", "check_uniform_grid", "dilate"]


class KernelShape(str, Enum):
    BOXCAR = "boxcar"
    GAUSSIAN = "gaussian"


class DilationKernel(BaseModel):
    """Dilation window.

    ``width_seconds`` is the full window for a boxcar; for a gaussian it is the
    truncation window, four standard deviations wide.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    shape: KernelShape = KernelShape.BOXCAR
    width_seconds: int = Field(..., ge=1)
    sample_rate_hz: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _at_least_one_sample(self) -> "DilationKernel":
        if self.width_samples < 1:
            raise ValueError(
                f"width {self.width_seconds}s at {self.sample_rate_hz} Hz is under one sample"
            )
        return self

    @property
    def width_samples(self) -> int:
        return int(round(self.width_seconds * self.sample_rate_hz))

    @property
    def half_width(self) -> int:
        return self.width_samples // 2

    def weights(self) -> np.ndarray:
        offsets = np.arange(-self.half_width, self.half_width + 1, dtype=float)
        if self.shape is KernelShape.BOXCAR:
            return np.ones_like(offsets)
        sigma = self.width_samples / 4.0
        return np.exp(-0.5 * (offsets / sigma) ** 2)


def dilate(train: RatingsMatrix, kernel: DilationKernel) -> Tuple[RatingsMatrix, np.ndarray]:
    """Fill missing timepoints near observed ratings.

    Args:
        train: Training view (mask already applied); items on a uniform time grid
        kernel: Window shape and width

    Returns:
        The dilated matrix, and a boolean grid that is true for pseudo-observations
        (cells filled by dilation). Originally observed values are left untouched and
        cells outside every window stay missing.
    """
    check_uniform_grid(train, kernel.sample_rate_hz)

    observed = train.observed
    weights = kernel.weights()
    sources = np.where(observed, train.values, 0.0)

    weighted = ndimage.convolve1d(sources, weights, axis=1, mode="constant", cval=0.0)
    coverage = ndimage.convolve1d(
        observed.astype(float), weights, axis=1, mode="constant", cval=0.0
    )
    pseudo = ~observed & (coverage > 0)

    # a weighted mean lies between the smallest and largest source it averages;
    # bounding it keeps constant neighborhoods exact under rounding
    size = weights.size
    low = ndimage.minimum_filter1d(
        np.where(observed, train.values, np.inf), size, axis=1, mode="constant", cval=np.inf
    )
    high = ndimage.maximum_filter1d(
        np.where(observed, train.values, -np.inf), size, axis=1, mode="constant", cval=-np.inf
    )

    values = train.values.copy()
    filled = weighted[pseudo] / coverage[pseudo]
    values[pseudo] = np.clip(filled, low[pseudo], high[pseudo])
    return train.with_values(values), pseudo
