"""Intensity preprocessing chain: HU conversion, windowing, smoothing,
normalization, and isotropic resampling.

The chain order is fixed: HU conversion -> clip to [-1200, 600] HU ->
3x3x3 Gaussian smoothing (sigma 0.5) -> affine normalization to [0, 1].
Normalization always uses the clip-window bounds, never per-volume
min/max, so intensities stay comparable across subjects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import correlate1d

from .errors import ConfigError, DataError
from .volume import CtVolume, IntensityUnit, NoduleMask


@dataclass(frozen=True)
class PreprocessConfig:
    hu_slope: float = 1.0
    hu_intercept: float = -1024.0
    window_lo: float = -1200.0
    window_hi: float = 600.0
    gaussian_kernel: tuple[int, int, int] = (3, 3, 3)
    gaussian_sigma: float = 0.5
    target_spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.window_lo >= self.window_hi:
            raise ConfigError("window_lo must be < window_hi")
        if self.gaussian_sigma <= 0:
            raise ConfigError("gaussian_sigma must be > 0")
        if any(k < 1 or k % 2 == 0 for k in self.gaussian_kernel):
            raise ConfigError("gaussian kernel dims must be odd and >= 1")
        if any(s <= 0 for s in self.target_spacing):
            raise ConfigError("target_spacing must be positive")


def hu_convert(v: CtVolume, slope: float, intercept: float) -> CtVolume:
    """Rescale raw stored values to Hounsfield units: out = slope*in + intercept."""
    if v.unit is not IntensityUnit.RAW:
        raise DataError(f"hu_convert expects RawDicom input, got {v.unit.value}")
    out = slope * v.values.astype(np.float32) + np.float32(intercept)
    return v.with_values(out.astype(np.float32), unit=IntensityUnit.HU)


def clip_window(v: CtVolume, lo: float, hi: float) -> CtVolume:
    if lo >= hi:
        raise ConfigError(f"invalid clip window [{lo}, {hi}]")
    if v.unit is not IntensityUnit.HU:
        raise DataError("clip_window expects HU input")
    out = np.clip(v.values, lo, hi).astype(np.float32)
    return v.with_values(out)


def gaussian_taps(radius: int, sigma: float) -> np.ndarray:
    """Discrete Gaussian taps exp(-k^2 / 2 sigma^2), normalized to sum 1."""
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(k**2) / (2.0 * sigma**2))
    return g / g.sum()


def gaussian_smooth_3d(v: CtVolume, cfg: PreprocessConfig) -> CtVolume:
    """Separable Gaussian convolution with edge replication at the borders.

    Refuses to run twice on the same volume (the ``smoothed`` flag); the
    filter is part of a once-only preprocessing chain.
    """
    if v.smoothed:
        raise DataError("volume is already smoothed; refusing double application")
    kz, ky, kx = cfg.gaussian_kernel[2], cfg.gaussian_kernel[1], cfg.gaussian_kernel[0]
    out = v.values.astype(np.float64)
    for axis, ksize in ((0, kz), (1, ky), (2, kx)):
        taps = gaussian_taps(ksize // 2, cfg.gaussian_sigma)
        out = correlate1d(out, taps, axis=axis, mode="nearest")
    return v.with_values(out.astype(np.float32), smoothed=True)


def normalize_unit(v: CtVolume, cfg: PreprocessConfig) -> CtVolume:
    """Fixed affine map from the clip window onto [0, 1]."""
    if v.unit is not IntensityUnit.HU:
        raise DataError("normalize_unit expects HU input")
    span = cfg.window_hi - cfg.window_lo
    if span <= 0:
        raise ConfigError("degenerate normalization window")
    out = (v.values - cfg.window_lo) / span
    out = np.clip(out, 0.0, 1.0).astype(np.float32)
    return v.with_values(out, unit=IntensityUnit.NORMALIZED)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------


def _output_dims(in_dims, in_spacing, target_spacing):
    return tuple(
        max(1, int(np.floor(d * s / t + 0.5)))
        for d, s, t in zip(in_dims, in_spacing, target_spacing)
    )


def _axis_coords(n_out: int, in_spacing: float, out_spacing: float, n_in: int):
    # first voxel centers aligned; clamp = edge replication beyond the grid
    x = np.arange(n_out) * (out_spacing / in_spacing)
    return np.clip(x, 0.0, n_in - 1.0)


def _cubic_resample_axis(data: np.ndarray, axis: int, coords: np.ndarray) -> np.ndarray:
    n = data.shape[axis]
    if n == 1:
        return np.take(data, np.zeros(len(coords), dtype=int), axis=axis)
    knots = np.arange(n, dtype=np.float64)
    # not-a-knot needs >= 4 points; natural is still exact for linear data
    bc = "not-a-knot" if n >= 4 else "natural"
    spline = CubicSpline(knots, data, axis=axis, bc_type=bc)
    return spline(coords)


def resample_isotropic(v: CtVolume, target_spacing=(1.0, 1.0, 1.0)) -> CtVolume:
    """Tri-cubic resampling onto the target grid (spline per axis).

    Output dims are round(in_dims * in_spacing / target); first voxel
    centers are aligned and out-of-range queries replicate the edge.
    """
    if any(t <= 0 for t in target_spacing):
        raise ConfigError("target spacing must be positive")
    if np.allclose(v.spacing, target_spacing, rtol=0.0, atol=1e-12):
        return v
    nx, ny, nz = v.dims
    ox, oy, oz = _output_dims((nx, ny, nz), v.spacing, target_spacing)
    data = v.values.astype(np.float64)
    # values axes are (z, y, x); spacing tuples are (x, y, z)
    for axis, n_out, s_in, s_out, n_in in (
        (0, oz, v.spacing[2], target_spacing[2], nz),
        (1, oy, v.spacing[1], target_spacing[1], ny),
        (2, ox, v.spacing[0], target_spacing[0], nx),
    ):
        coords = _axis_coords(n_out, s_in, s_out, n_in)
        data = _cubic_resample_axis(data, axis, coords)
    return CtVolume(
        data.astype(np.float32),
        spacing=tuple(target_spacing),
        origin=v.origin,
        unit=v.unit,
        smoothed=v.smoothed,
    )


def resample_mask(mask: NoduleMask, target_spacing=(1.0, 1.0, 1.0)) -> NoduleMask:
    """Nearest-neighbor resampling; preserves binarity."""
    v = mask.volume
    if np.allclose(v.spacing, target_spacing, rtol=0.0, atol=1e-12):
        return mask
    nx, ny, nz = v.dims
    ox, oy, oz = _output_dims((nx, ny, nz), v.spacing, target_spacing)
    idx = []
    for n_out, s_in, s_out, n_in in (
        (oz, v.spacing[2], target_spacing[2], nz),
        (oy, v.spacing[1], target_spacing[1], ny),
        (ox, v.spacing[0], target_spacing[0], nx),
    ):
        coords = _axis_coords(n_out, s_in, s_out, n_in)
        idx.append(np.round(coords).astype(int))
    out = v.values[np.ix_(idx[0], idx[1], idx[2])]
    vol = CtVolume(
        out.astype(v.values.dtype),
        spacing=tuple(target_spacing),
        origin=v.origin,
        unit=v.unit,
    )
    return NoduleMask(vol, nodule_id=mask.nodule_id, malignancy_score=mask.malignancy_score)


def preprocess_volume(v: CtVolume, cfg: PreprocessConfig, normalize: bool = False) -> CtVolume:
    """Run the full chain. With normalize=False the output stays in HU
    (the form the degradation stage expects)."""
    out = v
    if out.unit is IntensityUnit.RAW:
        out = hu_convert(out, cfg.hu_slope, cfg.hu_intercept)
    out = clip_window(out, cfg.window_lo, cfg.window_hi)
    if not out.smoothed:
        out = gaussian_smooth_3d(out, cfg)
        out = clip_window(out, cfg.window_lo, cfg.window_hi)
    if normalize:
        out = normalize_unit(out, cfg)
    return out
