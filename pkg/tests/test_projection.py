import numpy as np
import pytest

from dosekit.errors import ConfigError
from dosekit.phantom import shepp_logan
from dosekit.projection import (
    ProjectionGeometry,
    Sinogram,
    default_geometry,
    fbp,
    inscribed_circle_mask,
    load_sinogram,
    radon,
    ramp_filter,
    ramp_kernel,
    save_sinogram,
)


def disk_image(n=128, r=40.0, antialias=True):
    c = (n - 1) / 2.0
    y, x = np.mgrid[0:n, 0:n]
    dist = np.sqrt((x - c) ** 2 + (y - c) ** 2)
    if antialias:
        return np.clip(r + 0.5 - dist, 0.0, 1.0)
    return (dist <= r).astype(np.float64)


def test_zero_image_zero_sinogram():
    geom = default_geometry(32)
    sino = radon(np.zeros((32, 32)), geom)
    assert np.all(sino.values == 0.0)


def test_disk_chord_lengths():
    # analytic chord 2*sqrt(r^2 - s^2); the two tangent detectors are
    # excluded because the chord derivative is unbounded there
    n, r = 128, 40.0
    geom = default_geometry(n)
    sino = radon(disk_image(n, r), geom)
    offs = geom.detector_offsets
    chord = 2.0 * np.sqrt(np.maximum(r**2 - offs**2, 0.0))
    interior = np.abs(offs) <= r - 1.0
    err = np.abs(sino.values[:, interior] - chord[None, interior])
    assert err.max() < 2.0


def test_circular_symmetry():
    # smooth rotationally symmetric image: every angle row must agree
    n = 96
    c = (n - 1) / 2.0
    y, x = np.mgrid[0:n, 0:n]
    blob = np.exp(-((x - c) ** 2 + (y - c) ** 2) / (2 * 12.0**2))
    geom = default_geometry(n)
    sino = radon(blob, geom)
    spread = sino.values.max(axis=0) - sino.values.min(axis=0)
    assert spread.max() / sino.values.max() < 1e-3


def test_radon_linearity():
    rng = np.random.default_rng(0)
    geom = default_geometry(32)
    x = rng.random((32, 32))
    y = rng.random((32, 32))
    a = 2.7
    lhs = radon(a * x + y, geom).values
    rhs = a * radon(x, geom).values + radon(y, geom).values
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * max(1.0, np.abs(rhs).max())


def test_radon_mass_consistency():
    # in-circle image: every angle integrates to the image mass
    n = 64
    img = disk_image(n, 18.0)
    geom = default_geometry(n)
    sino = radon(img, geom)
    sums = sino.values.sum(axis=1) * geom.detector_spacing
    assert (sums.max() - sums.min()) / sums.mean() < 0.005
    assert abs(sums.mean() - img.sum()) / img.sum() < 0.005


def test_radon_pixel_size_scaling():
    geom = default_geometry(32)
    img = disk_image(32, 10.0)
    s1 = radon(img, geom, pixel_size=1.0).values
    s2 = radon(img, geom, pixel_size=0.5).values
    assert np.allclose(s2, 0.5 * s1)


def test_radon_pads_nonsquare():
    geom = default_geometry(32)
    img = np.ones((20, 32))
    sino = radon(img, geom)
    assert sino.values.shape == (geom.n_angles, geom.n_detectors)


def test_geometry_coverage_guard():
    with pytest.raises(ConfigError):
        radon(np.ones((64, 64)), ProjectionGeometry(10, 16))


def test_ramp_kernel_closed_form():
    kern = ramp_kernel(16)
    assert kern[0] == 0.25
    for k in (1, 3, 5, 7):
        assert kern[k] == pytest.approx(-1.0 / (np.pi * k) ** 2)
        assert kern[-k] == pytest.approx(-1.0 / (np.pi * k) ** 2)
    for k in (2, 4, 6):
        assert kern[k] == 0.0


def test_ramp_filter_kills_dc():
    geom = ProjectionGeometry(4, 33)
    sino = Sinogram(geom, np.full((4, 33), 3.0))
    out = ramp_filter(sino)
    assert np.abs(out.values).max() < 1e-6 * 3.0


def test_ramp_filter_impulse_is_kernel():
    # generous padding keeps the band-limit truncation residual below the
    # closed-form comparison tolerance
    geom = ProjectionGeometry(1, 257)
    row = np.zeros((1, 257))
    row[0, 128] = 1.0
    out = ramp_filter(Sinogram(geom, row)).values[0]
    mid = 128
    for k in range(-10, 11):
        if k == 0:
            expected = 0.25
        elif k % 2 == 0:
            expected = 0.0
        else:
            expected = -1.0 / (np.pi * k) ** 2
        assert out[mid + k] == pytest.approx(expected, abs=1e-6)


def test_ramp_filter_linearity():
    rng = np.random.default_rng(1)
    geom = ProjectionGeometry(3, 41)
    x = rng.random((3, 41))
    y = rng.random((3, 41))
    a, b = 1.7, -0.6
    lhs = ramp_filter(Sinogram(geom, a * x + b * y)).values
    rhs = a * ramp_filter(Sinogram(geom, x)).values + b * ramp_filter(Sinogram(geom, y)).values
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_fbp_round_trip_shepp_logan():
    n = 256
    img = shepp_logan(n)
    geom = ProjectionGeometry(360, 363)
    rec = fbp(radon(img, geom), n)
    mask = inscribed_circle_mask(n, margin=1)
    rmse = np.sqrt(np.mean((rec[mask] - img[mask]) ** 2))
    nrmse = rmse / (img[mask].max() - img[mask].min())
    assert nrmse < 0.05


def test_fbp_disk_mean():
    n = 128
    img = disk_image(n, 40.0)
    geom = default_geometry(n)
    rec = fbp(radon(img, geom), n)
    c = (n - 1) / 2.0
    y, x = np.mgrid[0:n, 0:n]
    inside = (x - c) ** 2 + (y - c) ** 2 <= 35.0**2
    assert abs(rec[inside].mean() - 1.0) < 0.03


def test_fbp_linearity():
    rng = np.random.default_rng(2)
    geom = default_geometry(32)
    sino = radon(rng.random((32, 32)), geom)
    a = 3.3
    scaled = Sinogram(geom, a * sino.values)
    assert np.allclose(fbp(scaled, 32), a * fbp(sino, 32))


def test_fbp_zeroes_outside_circle():
    geom = default_geometry(32)
    rec = fbp(radon(np.ones((32, 32)), geom), 32)
    outside = ~inscribed_circle_mask(32)
    assert np.all(rec[outside] == 0.0)


def test_round_trip_error_monotone_in_angles():
    n = 128
    img = shepp_logan(n)
    mask = inscribed_circle_mask(n, margin=1)
    errors = []
    for n_angles in (45, 90, 180, 360):
        geom = ProjectionGeometry(n_angles, 183)
        rec = fbp(radon(img, geom), n)
        errors.append(np.sqrt(np.mean((rec[mask] - img[mask]) ** 2)))
    assert errors[0] > errors[1] > errors[2] > errors[3]


def test_default_geometry_rules():
    geom = default_geometry(96)
    assert geom.n_angles % 4 == 0
    assert geom.n_angles >= np.pi / 2 * 96
    assert geom.n_detectors % 2 == 1
    assert geom.n_detectors >= 96 * np.sqrt(2)


def test_sinogram_serialization(tmp_path):
    geom = default_geometry(32)
    sino = radon(disk_image(32, 10.0), geom)
    save_sinogram(sino, tmp_path / "s.vol")
    loaded = load_sinogram(tmp_path / "s.vol")
    assert loaded.geometry == geom
    assert np.allclose(loaded.values, sino.values, atol=1e-6)
