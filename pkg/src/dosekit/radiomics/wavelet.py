"""One-level separable 3D Haar decomposition (orthonormal, +/- 1/sqrt(2)).

Sub-bands LLL..HHH live at half resolution; odd axes are extended by
edge replication before pairing, so even-dimension inputs conserve
energy exactly. Band letters follow the axis order of the value array:
first letter = z, second = y, third = x.
"""

from __future__ import annotations

import itertools

import numpy as np

WAVELET_BAND_NAMES = ["".join(b) for b in itertools.product("LH", repeat=3)]

_SQRT2 = np.sqrt(2.0)


def _pair_axis(data: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    if data.shape[axis] % 2 == 1:
        edge = np.take(data, [-1], axis=axis)
        data = np.concatenate([data, edge], axis=axis)
    even = np.take(data, np.arange(0, data.shape[axis], 2), axis=axis)
    odd = np.take(data, np.arange(1, data.shape[axis], 2), axis=axis)
    lo = (even + odd) / _SQRT2
    hi = (even - odd) / _SQRT2
    return lo, hi


def wavelet_decompose(volume: np.ndarray) -> dict[str, np.ndarray]:
    """8 half-resolution sub-bands keyed 'LLL'..'HHH'."""
    volume = np.asarray(volume, dtype=np.float64)
    bands = {"": volume}
    for axis in range(3):
        new: dict[str, np.ndarray] = {}
        for key, data in bands.items():
            lo, hi = _pair_axis(data, axis)
            new[key + "L"] = lo
            new[key + "H"] = hi
        bands = new
    return bands


def downsample_mask(mask: np.ndarray) -> np.ndarray:
    """Nearest-neighbor mask for the half-resolution grid.

    Falls back to any-in-block pooling if plain subsampling empties the
    mask (tiny masks at odd positions would otherwise lose all voxels).
    """
    mask = np.asarray(mask, dtype=bool)
    padded = mask
    for axis in range(3):
        if padded.shape[axis] % 2 == 1:
            edge = np.take(padded, [-1], axis=axis)
            padded = np.concatenate([padded, edge], axis=axis)
    nn = padded[0::2, 0::2, 0::2]
    if nn.any():
        return nn
    z, y, x = padded.shape
    blocks = padded.reshape(z // 2, 2, y // 2, 2, x // 2, 2)
    return blocks.any(axis=(1, 3, 5))
