"""Parallel-beam Radon transform and filtered back-projection.

Geometry: angles evenly spaced over [0, pi), detector offsets centered
on the image center, all lengths in image-pixel units. The forward
projection rotates the image with bilinear sampling and sums along the
ray direction; FBP applies a band-limited Ram-Lak filter per projection
row and back-projects with linear detector interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import affine_transform

from .errors import ConfigError, DataError
from .volume import IntensityUnit, read_container, write_container


@dataclass(frozen=True)
class ProjectionGeometry:
    n_angles: int
    n_detectors: int
    detector_spacing: float = 1.0
    assume_in_circle: bool = True

    def __post_init__(self):
        if self.n_angles < 1:
            raise ConfigError("n_angles must be >= 1")
        if self.n_detectors < 2:
            raise ConfigError("n_detectors must be >= 2")
        if self.detector_spacing <= 0:
            raise ConfigError("detector_spacing must be > 0")

    @property
    def angles(self) -> np.ndarray:
        return np.linspace(0.0, np.pi, self.n_angles, endpoint=False)

    @property
    def detector_offsets(self) -> np.ndarray:
        j = np.arange(self.n_detectors, dtype=np.float64)
        return (j - (self.n_detectors - 1) / 2.0) * self.detector_spacing


def default_geometry(image_side: int, assume_in_circle: bool = True) -> ProjectionGeometry:
    """ceil(pi/2 * side) angles rounded up to a multiple of 4; odd detector
    count covering the image diagonal."""
    n_angles = int(np.ceil(np.pi / 2.0 * image_side))
    n_angles += (-n_angles) % 4
    n_det = int(np.ceil(image_side * np.sqrt(2.0)))
    if n_det % 2 == 0:
        n_det += 1
    return ProjectionGeometry(n_angles, n_det, 1.0, assume_in_circle)


@dataclass(frozen=True)
class Sinogram:
    geometry: ProjectionGeometry
    values: np.ndarray  # (n_angles, n_detectors)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.geometry.n_angles, self.geometry.n_detectors):
            raise DataError(
                f"sinogram shape {v.shape} does not match geometry "
                f"({self.geometry.n_angles}, {self.geometry.n_detectors})"
            )
        if not np.all(np.isfinite(v)):
            raise DataError("sinogram contains non-finite values")
        object.__setattr__(self, "values", v)


def _pad_to_square(image: np.ndarray) -> np.ndarray:
    h, w = image.shape
    if h == w:
        return image
    n = max(h, w)
    out = np.zeros((n, n), dtype=image.dtype)
    r0 = (n - h) // 2
    c0 = (n - w) // 2
    out[r0 : r0 + h, c0 : c0 + w] = image
    return out


def radon(image: np.ndarray, geom: ProjectionGeometry, pixel_size: float = 1.0) -> Sinogram:
    """Line integrals values[theta, s] over a square (or zero-padded) image.

    For each angle the image is resampled onto the rotated (s, t) grid
    with bilinear interpolation (zero outside the support) and summed
    along t at unit-pixel steps; the sum is scaled by pixel_size so the
    output is a physical path integral when pixel_size is in mm.
    """
    img = _pad_to_square(np.asarray(image, dtype=np.float64))
    if not np.all(np.isfinite(img)):
        raise DataError("radon input contains non-finite values")
    n = img.shape[0]
    required = float(n) if geom.assume_in_circle else float(n) * np.sqrt(2.0)
    if geom.n_detectors * geom.detector_spacing < required - 1.0:
        raise ConfigError(
            f"{geom.n_detectors} detectors at spacing {geom.detector_spacing} "
            f"cannot cover support {required:.1f} px"
        )
    c = (n - 1) / 2.0
    ds = geom.detector_spacing
    m_s = (geom.n_detectors - 1) / 2.0
    n_t = int(np.ceil(n * np.sqrt(2.0))) + 1
    m_t = (n_t - 1) / 2.0
    out = np.empty((geom.n_angles, geom.n_detectors), dtype=np.float64)
    for k, theta in enumerate(geom.angles):
        ct, st = np.cos(theta), np.sin(theta)
        # input (y, x) of rotated-grid point (i_s, i_t):
        #   y = c + s*sin + t*cos,  x = c + s*cos - t*sin
        matrix = np.array([[ds * st, ct], [ds * ct, -st]])
        offset = np.array([c - m_s * ds * st - m_t * ct, c - m_s * ds * ct + m_t * st])
        rotated = affine_transform(
            img,
            matrix,
            offset=offset,
            output_shape=(geom.n_detectors, n_t),
            order=1,
            mode="constant",
            cval=0.0,
            prefilter=False,
        )
        out[k] = rotated.sum(axis=1)
    return Sinogram(geom, out * pixel_size)


def ramp_kernel(size: int) -> np.ndarray:
    """Band-limited Ram-Lak kernel on a circular grid of the given size.

    Unit-spacing taps: 1/4 at offset 0, 0 at even offsets, -1/(pi k)^2 at
    odd offsets.
    """
    kern = np.zeros(size, dtype=np.float64)
    kern[0] = 0.25
    odd = np.arange(1, size // 2 + 1, 2)
    vals = -1.0 / (np.pi * odd) ** 2
    kern[odd] = vals
    kern[-odd] = vals
    return kern


def ramp_filter(sino: Sinogram) -> Sinogram:
    """Frequency-domain Ram-Lak filtering of each detector row.

    Rows are padded to the next power of two >= 2 * n_detectors with
    edge replication (projections of in-circle objects decay to zero at
    the row ends, so this matches zero-padding there, while constant
    rows stay constant). The DC bin of the filter response is forced to
    zero, so the filter passes no mean: constant rows map to zero.
    """
    n = sino.geometry.n_detectors
    size = 1 << int(np.ceil(np.log2(2 * n)))
    kern = ramp_kernel(size)
    resp = np.fft.rfft(kern).real
    resp[0] = 0.0
    rows = sino.values
    pad_right = (size - n + 1) // 2
    pad_left = size - n - pad_right
    padded = np.concatenate(
        [
            rows,
            np.repeat(rows[:, -1:], pad_right, axis=1),
            np.repeat(rows[:, :1], pad_left, axis=1),
        ],
        axis=1,
    )
    spec = np.fft.rfft(padded, axis=1)
    filtered = np.fft.irfft(spec * resp[None, :], size, axis=1)[:, :n]
    return Sinogram(sino.geometry, filtered / sino.geometry.detector_spacing)


def inscribed_circle_mask(n: int, margin: float = 0.0) -> np.ndarray:
    c = (n - 1) / 2.0
    y, x = np.mgrid[0:n, 0:n]
    r = (n - 1) / 2.0 - margin
    return (x - c) ** 2 + (y - c) ** 2 <= r**2


def fbp(sino: Sinogram, out_size: int, pixel_size: float = 1.0) -> np.ndarray:
    """Filtered back-projection onto an out_size^2 grid.

    Scaled by pi / n_angles so fbp(radon(f)) approximates f; divided by
    pixel_size to undo the forward scaling. Pixels outside the inscribed
    circle are zeroed when the geometry assumes in-circle support.
    """
    geom = sino.geometry
    span = geom.n_detectors * geom.detector_spacing
    if span < out_size - 1:
        raise ConfigError(
            f"detector coverage {span:.1f} px cannot reconstruct {out_size} px image"
        )
    filt = ramp_filter(sino).values
    c = (out_size - 1) / 2.0
    y, x = np.mgrid[0:out_size, 0:out_size]
    xc = (x - c).astype(np.float64).ravel()
    yc = (y - c).astype(np.float64).ravel()
    offsets = geom.detector_offsets
    accum = np.zeros(out_size * out_size, dtype=np.float64)
    for k, theta in enumerate(geom.angles):
        s_val = xc * np.cos(theta) + yc * np.sin(theta)
        accum += np.interp(s_val, offsets, filt[k], left=0.0, right=0.0)
    img = accum.reshape(out_size, out_size) * (np.pi / geom.n_angles)
    if geom.assume_in_circle:
        img = np.where(inscribed_circle_mask(out_size), img, 0.0)
    return img / pixel_size


# ---------------------------------------------------------------------------
# serialization (same container format as volumes, one-slice payload)
# ---------------------------------------------------------------------------


def save_sinogram(sino: Sinogram, path) -> None:
    extra = {
        "Sinogram": "True",
        "DetectorSpacing": repr(float(sino.geometry.detector_spacing)),
        "AssumeInCircle": "True" if sino.geometry.assume_in_circle else "False",
    }
    arr = sino.values.astype(np.float32)[None, :, :]  # (1, n_angles, n_det)
    write_container(path, arr, extra=extra, unit=IntensityUnit.RAW)


def load_sinogram(path) -> Sinogram:
    arr, header = read_container(path)
    if header.get("Sinogram") != "True":
        raise DataError(f"{path}: not a sinogram container")
    if arr.shape[0] != 1:
        raise DataError(f"{path}: sinogram payload must be a single slice")
    geom = ProjectionGeometry(
        n_angles=arr.shape[1],
        n_detectors=arr.shape[2],
        detector_spacing=float(header.get("DetectorSpacing", "1.0")),
        assume_in_circle=header.get("AssumeInCircle", "True") == "True",
    )
    return Sinogram(geom, arr[0].astype(np.float64))
