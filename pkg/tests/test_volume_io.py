import numpy as np
import pytest

from dosekit.errors import DataError
from dosekit.volume import (
    CtVolume,
    DatasetManifest,
    IntensityUnit,
    ManifestRecord,
    NoduleMask,
    classify_malignancy,
    load_manifest,
    load_mask,
    load_volume,
    save_manifest,
    save_mask,
    save_volume,
)


def make_volume(values, unit=IntensityUnit.HU, spacing=(1.0, 1.0, 1.0)):
    return CtVolume(np.asarray(values, dtype=np.float32), spacing=spacing, unit=unit)


def test_header_size_consistency(tmp_path):
    path = tmp_path / "v.vol"
    arr = np.arange(32, dtype=np.int16).reshape(2, 4, 4)
    v = CtVolume(arr, unit=IntensityUnit.RAW)
    save_volume(v, path)
    loaded = load_volume(path)
    assert loaded.dims == (4, 4, 2)
    assert loaded.values.dtype == np.int16


@pytest.mark.parametrize("unit", [IntensityUnit.RAW, IntensityUnit.HU, IntensityUnit.NORMALIZED])
def test_round_trip_bit_exact(tmp_path, unit):
    rng = np.random.default_rng(7)
    if unit is IntensityUnit.NORMALIZED:
        vals = rng.random((3, 5, 4), dtype=np.float32)
    else:
        vals = rng.normal(0, 300, size=(3, 5, 4)).astype(np.float32)
    v = CtVolume(vals, spacing=(0.7, 0.8, 2.5), origin=(1.0, -2.0, 3.0), unit=unit)
    path = tmp_path / "v.vol"
    save_volume(v, path)
    loaded = load_volume(path)
    assert np.array_equal(loaded.values, v.values)
    assert loaded.values.tobytes() == v.values.tobytes()
    assert loaded.spacing == v.spacing
    assert loaded.origin == v.origin
    assert loaded.unit == unit


def test_single_slice_round_trip(tmp_path):
    v = make_volume(np.ones((1, 4, 4)) * 100.0)
    save_volume(v, tmp_path / "s.vol")
    assert np.array_equal(load_volume(tmp_path / "s.vol").values, v.values)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "v.vol"
    save_volume(make_volume(np.zeros((2, 4, 4))), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-1])
    with pytest.raises(DataError):
        load_volume(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(DataError):
        load_volume(tmp_path / "absent.vol")


def test_malformed_header_rejected(tmp_path):
    path = tmp_path / "v.vol"
    path.write_bytes(b"NDims = 3\nDimSize 4 4 2\nElementDataFile = LOCAL\n")
    with pytest.raises(DataError):
        load_volume(path)


def test_sidecar_payload(tmp_path):
    v = make_volume(np.arange(8, dtype=np.float32).reshape(2, 2, 2))
    save_volume(v, tmp_path / "v.vol")
    raw = (tmp_path / "v.vol").read_bytes()
    split = raw.index(b"ElementDataFile = LOCAL\n")
    header = raw[:split] + b"ElementDataFile = v.raw\n"
    payload = raw[split + len(b"ElementDataFile = LOCAL\n"):]
    (tmp_path / "v2.vol").write_bytes(header)
    (tmp_path / "v.raw").write_bytes(payload)
    loaded = load_volume(tmp_path / "v2.vol")
    assert np.array_equal(loaded.values, v.values)


def test_normalized_bounds_enforced():
    with pytest.raises(DataError):
        CtVolume(np.full((1, 2, 2), 1.5, dtype=np.float32), unit=IntensityUnit.NORMALIZED)


def test_mask_round_trip(tmp_path):
    arr = np.zeros((3, 4, 4), dtype=np.int16)
    arr[1, 1:3, 1:3] = 1
    mask = NoduleMask(CtVolume(arr, unit=IntensityUnit.RAW), "n3", 4.6)
    save_mask(mask, tmp_path / "m.vol")
    loaded = load_mask(tmp_path / "m.vol")
    assert np.array_equal(loaded.array, mask.array)
    assert loaded.nodule_id == "n3"
    assert loaded.label.value == "Malignant"


def test_malignancy_rule():
    assert classify_malignancy(4.5).value == "Malignant"
    assert classify_malignancy(3.2).value == "NonMalignant"
    with pytest.raises(DataError):
        classify_malignancy(4.0)


def test_empty_mask_rejected():
    with pytest.raises(DataError):
        NoduleMask(CtVolume(np.zeros((2, 2, 2), dtype=np.int16), unit=IntensityUnit.RAW))


def test_manifest_round_trip(tmp_path):
    records = [
        ManifestRecord("s0", "v0.vol", ("m0.vol", "m1.vol"), "SDCT", 240.0),
        ManifestRecord("s1", "v1.vol", ("m2.vol",), "LDCT", 40.0),
    ]
    manifest = DatasetManifest(records)
    save_manifest(manifest, tmp_path / "m.csv")
    loaded = load_manifest(tmp_path / "m.csv")
    assert loaded.records == records


def test_manifest_dose_class_rule():
    with pytest.raises(DataError):
        ManifestRecord("s0", "v.vol", (), "SDCT", 40.0)
    with pytest.raises(DataError):
        ManifestRecord("s0", "v.vol", (), "LDCT", 200.0)


def test_manifest_duplicate_paths_rejected():
    with pytest.raises(DataError):
        DatasetManifest(
            [
                ManifestRecord("s0", "v.vol", ("m.vol",), "SDCT", 240.0),
                ManifestRecord("s1", "v.vol", ("m2.vol",), "SDCT", 240.0),
            ]
        )
