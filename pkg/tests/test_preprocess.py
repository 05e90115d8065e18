import numpy as np
import pytest

from dosekit.errors import ConfigError, DataError
from dosekit.preprocess import (
    PreprocessConfig,
    clip_window,
    gaussian_smooth_3d,
    gaussian_taps,
    hu_convert,
    normalize_unit,
    preprocess_volume,
    resample_isotropic,
    resample_mask,
)
from dosekit.volume import CtVolume, IntensityUnit, NoduleMask

CFG = PreprocessConfig()


def raw(values):
    return CtVolume(np.asarray(values, dtype=np.float32), unit=IntensityUnit.RAW)


def hu(values, spacing=(1.0, 1.0, 1.0)):
    return CtVolume(np.asarray(values, dtype=np.float32), spacing=spacing,
                    unit=IntensityUnit.HU)


def test_hu_convert_water():
    v = hu_convert(raw(np.full((1, 1, 1), 1024.0)), 1.0, -1024.0)
    assert v.values[0, 0, 0] == 0.0
    assert v.unit is IntensityUnit.HU


def test_hu_convert_air():
    v = hu_convert(raw(np.zeros((1, 1, 1))), 1.0, -1024.0)
    assert v.values[0, 0, 0] == -1024.0


def test_hu_convert_slope():
    v = hu_convert(raw(np.full((1, 1, 1), 100.0)), 2.0, -1000.0)
    assert v.values[0, 0, 0] == -800.0


def test_hu_convert_wrong_unit():
    with pytest.raises(DataError):
        hu_convert(hu(np.zeros((1, 1, 1))), 1.0, 0.0)


def test_clip_window_cases():
    v = hu(np.array([[[-2000.0, 3000.0, 0.0]]]))
    out = clip_window(v, -1200.0, 600.0)
    assert out.values.tolist() == [[[-1200.0, 600.0, 0.0]]]


def test_clip_invalid_window():
    with pytest.raises(ConfigError):
        clip_window(hu(np.zeros((1, 1, 1))), 10.0, -10.0)


def test_gaussian_constant_preserved():
    v = hu(np.full((5, 5, 5), 77.0))
    out = gaussian_smooth_3d(v, CFG)
    assert np.allclose(out.values, 77.0, atol=1e-4)
    assert out.smoothed


def test_gaussian_impulse_center_weight():
    # closed-form taps: g(k) = exp(-k^2 / (2 sigma^2)), normalized; the
    # separable center response is w0^3
    vol = np.zeros((7, 7, 7), dtype=np.float32)
    vol[3, 3, 3] = 1.0
    out = gaussian_smooth_3d(hu(vol), CFG)
    g = np.exp(-np.array([1.0, 0.0, 1.0]) / (2 * 0.5**2))
    w0 = g[1] / g.sum()
    assert out.values[3, 3, 3] == pytest.approx(w0**3, abs=1e-7)


def test_gaussian_mass_conserved_interior_impulse():
    vol = np.zeros((7, 7, 7), dtype=np.float32)
    vol[3, 3, 3] = 1.0
    out = gaussian_smooth_3d(hu(vol), CFG)
    assert float(out.values.sum()) == pytest.approx(1.0, abs=1e-6)


def test_gaussian_double_application_forbidden():
    v = gaussian_smooth_3d(hu(np.zeros((3, 3, 3))), CFG)
    with pytest.raises(DataError):
        gaussian_smooth_3d(v, CFG)


def test_gaussian_taps_normalized():
    taps = gaussian_taps(2, 0.9)
    assert taps.sum() == pytest.approx(1.0)
    assert taps.shape == (5,)


def test_normalize_endpoints():
    v = hu(np.array([[[-1200.0, 600.0, -300.0]]]))
    out = normalize_unit(v, CFG)
    assert out.values.tolist() == [[[0.0, 1.0, 0.5]]]
    assert out.unit is IntensityUnit.NORMALIZED


def test_clip_then_normalize_covers_unit_interval():
    rng = np.random.default_rng(0)
    v = hu(rng.normal(0, 2000, size=(4, 6, 6)))
    out = normalize_unit(clip_window(v, CFG.window_lo, CFG.window_hi), CFG)
    assert out.values.min() >= 0.0 and out.values.max() <= 1.0
    assert np.all(np.isfinite(out.values))


def test_clip_idempotent():
    rng = np.random.default_rng(1)
    v = hu(rng.normal(0, 2000, size=(3, 4, 4)))
    once = clip_window(v, -1200, 600)
    twice = clip_window(once, -1200, 600)
    assert np.array_equal(once.values, twice.values)


def test_resample_identity_when_isotropic():
    rng = np.random.default_rng(2)
    v = hu(rng.normal(size=(4, 5, 6)))
    out = resample_isotropic(v, (1.0, 1.0, 1.0))
    assert out is v


def test_resample_constant_volume():
    v = hu(np.full((4, 4, 4), 5.0), spacing=(2.0, 2.0, 2.0))
    out = resample_isotropic(v, (1.0, 1.0, 1.0))
    assert out.dims == (8, 8, 8)
    assert np.allclose(out.values, 5.0, atol=1e-6)


def test_resample_linear_ramp_midpoints():
    # cubic interpolation reproduces linear data exactly
    nx = 9
    ramp = np.tile(np.arange(nx, dtype=np.float32) * 10.0, (5, 5, 1))
    v = hu(ramp, spacing=(2.0, 2.0, 2.0))
    out = resample_isotropic(v, (1.0, 1.0, 1.0))
    x_mm = np.arange(out.dims[0]) * 1.0
    expected = np.clip(x_mm / 2.0, 0, nx - 1) * 10.0
    assert np.allclose(out.values[2, 2, :], expected, atol=1e-6)


def test_resample_mask_binary_preserved():
    arr = np.zeros((6, 6, 6), dtype=np.int16)
    arr[2:4, 2:4, 2:4] = 1
    mask = NoduleMask(CtVolume(arr, spacing=(2.0, 2.0, 2.0), unit=IntensityUnit.RAW),
                      "n0", 2.0)
    out = resample_mask(mask, (1.0, 1.0, 1.0))
    assert set(np.unique(out.volume.values)) <= {0, 1}
    assert out.volume.dims == (12, 12, 12)


def test_full_chain_no_nan():
    rng = np.random.default_rng(3)
    v = raw(rng.integers(0, 3000, size=(4, 8, 8)).astype(np.float32))
    out = preprocess_volume(v, CFG, normalize=True)
    assert np.all(np.isfinite(out.values))
    assert out.unit is IntensityUnit.NORMALIZED
    assert 0.0 <= out.values.min() and out.values.max() <= 1.0


def test_chain_idempotent_from_hu_stage():
    rng = np.random.default_rng(4)
    v = hu(rng.normal(-300, 400, size=(4, 8, 8)))
    once = preprocess_volume(v, CFG)
    # second pass must not change values: window clip is idempotent and the
    # smoothing flag forbids re-smoothing
    again = preprocess_volume(once, CFG)
    assert np.array_equal(once.values, again.values)
