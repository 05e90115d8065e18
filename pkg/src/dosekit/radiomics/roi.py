"""ROI preparation: Z-score normalization and fixed-bin-count gray-level
discretization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


def zscore_normalize(patch: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """(x - mean) / std over the full patch (mask is not used for the
    statistics; it is accepted for interface symmetry)."""
    patch = np.asarray(patch, dtype=np.float64)
    mu = patch.mean()
    sd = patch.std()
    if sd <= 0.0:
        raise DataError("cannot Z-score a constant patch")
    return (patch - mu) / sd


@dataclass(frozen=True)
class RoiSample:
    """Discretized ROI: intensities, mask, and integer gray levels.

    ``levels`` holds values in 1..n_bins inside the mask and 0 outside.
    """

    image: np.ndarray
    mask: np.ndarray
    levels: np.ndarray
    n_bins: int
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.mask.sum() < 1:
            raise DataError("RoiSample mask is empty")
        inside = self.levels[self.mask]
        if inside.min() < 1 or inside.max() > self.n_bins:
            raise DataError("discretized levels out of range")

    @property
    def masked_values(self) -> np.ndarray:
        return self.image[self.mask]

    @property
    def n_voxels(self) -> int:
        return int(self.mask.sum())


def discretize_fixed_bins(patch: np.ndarray, mask: np.ndarray, bins: int = 32,
                          spacing=(1.0, 1.0, 1.0)) -> RoiSample:
    """Fixed-bin-count discretization over the masked intensity range.

    level = min(bins, floor(bins * (x - min) / (max - min)) + 1); a
    constant ROI maps entirely to level 1.
    """
    patch = np.asarray(patch, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < 1:
        raise DataError("cannot discretize an empty mask")
    vals = patch[mask]
    lo, hi = vals.min(), vals.max()
    levels = np.zeros(patch.shape, dtype=np.int32)
    if hi > lo:
        scaled = np.floor(bins * (patch - lo) / (hi - lo)).astype(np.int32) + 1
        levels[mask] = np.minimum(scaled[mask], bins)
    else:
        levels[mask] = 1
    return RoiSample(patch, mask, levels, bins, tuple(spacing))
