import numpy as np
import pytest

from dosekit.errors import ConfigError
from dosekit.phantom import (
    EllipsoidSpec,
    NoduleSpec,
    PhantomSpec,
    generate_phantom,
    shepp_logan,
    thorax_spec,
)


def test_shepp_logan_basic_properties():
    img = shepp_logan(128)
    assert img.shape == (128, 128)
    assert img.max() <= 1.0 + 1e-9
    assert img[0, 0] == 0.0  # corners outside the head


def test_phantom_determinism():
    spec = thorax_spec(dims=(64, 64, 24), n_benign=2, n_malignant=1, seed=42, radius_range_mm=(2.5, 3.5))
    v1, m1 = generate_phantom(spec, seed=42)
    v2, m2 = generate_phantom(spec, seed=42)
    assert np.array_equal(v1.values, v2.values)
    assert all(np.array_equal(a.array, b.array) for a, b in zip(m1, m2))


def test_phantom_seed_changes_volume():
    spec1 = thorax_spec(dims=(64, 64, 24), n_benign=1, n_malignant=1, seed=1, radius_range_mm=(2.5, 3.5))
    spec2 = thorax_spec(dims=(64, 64, 24), n_benign=1, n_malignant=1, seed=2, radius_range_mm=(2.5, 3.5))
    v1, _ = generate_phantom(spec1, seed=1)
    v2, _ = generate_phantom(spec2, seed=2)
    assert not np.array_equal(v1.values, v2.values)


def test_sphere_nodule_voxel_count():
    r = 6.0
    spec = PhantomSpec(
        dims=(40, 40, 40),
        components=[EllipsoidSpec((20, 20, 20), (19, 19, 19), -800.0)],
        nodules=[
            NoduleSpec(center_mm=(20.0, 20.0, 20.0), radius_mm=r, kind="benign",
                       irregularity=0.0, malignancy_score=2.0)
        ],
    )
    _, masks = generate_phantom(spec, seed=5)
    count = masks[0].array.sum()
    # the membership rule includes a mild random axis anisotropy (+-15/25%),
    # so the analytic ball volume is matched loosely
    expected = 4.0 / 3.0 * np.pi * r**3
    assert abs(count - expected) / expected < 0.30


def test_sphere_voxel_count_exact_tolerance():
    # direct digitized ball through the membership rule with spikes disabled
    # and no anisotropy is covered by the shape module; here we check the
    # end-to-end mask is within 5% when anisotropy is suppressed by seed search
    from dosekit.phantom import _nodule_membership
    from dosekit.rng import derive_rng

    class _FixedRng:
        def uniform(self, lo, hi, size=None):
            return np.zeros(size) if size else 0.0

        def integers(self, lo, hi):
            return lo

        def normal(self, size=None):
            return np.zeros(size)

    spec = NoduleSpec(center_mm=(20.0, 20.0, 20.0), radius_mm=7.0, kind="benign",
                      irregularity=0.0)
    member = _nodule_membership(spec, (1.0, 1.0, 1.0), (40, 40, 40), _FixedRng())
    expected = 4.0 / 3.0 * np.pi * 7.0**3
    assert abs(member.sum() - expected) / expected < 0.05


def test_nodule_masks_disjoint():
    spec = thorax_spec(dims=(96, 96, 40), n_benign=3, n_malignant=2, seed=11)
    _, masks = generate_phantom(spec, seed=11)
    assert len(masks) == 5
    total = np.zeros_like(masks[0].array, dtype=int)
    for m in masks:
        total += m.array
    assert total.max() <= 1


def test_malignant_labels_and_scores():
    spec = thorax_spec(dims=(96, 96, 40), n_benign=2, n_malignant=2, seed=3)
    _, masks = generate_phantom(spec, seed=3)
    labels = [m.label.value for m in masks]
    assert labels.count("Malignant") == 2
    assert labels.count("NonMalignant") == 2
    assert all(m.malignancy_score != 4.0 for m in masks)


def test_empty_spec_rejected():
    with pytest.raises(ConfigError):
        PhantomSpec(dims=(8, 8, 8), components=[], nodules=[])


def test_phantom_hu_plausible():
    spec = thorax_spec(dims=(64, 64, 24), n_benign=1, n_malignant=1, seed=9, radius_range_mm=(2.5, 3.5))
    v, masks = generate_phantom(spec, seed=9)
    assert v.values.min() >= -1200.0
    assert v.values.max() <= 600.0
    # nodules sit in lung parenchyma: mask interior must be much denser
    for m in masks:
        assert v.values[m.array].mean() > -400.0
