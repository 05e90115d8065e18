"""CT volume data model, MetaImage-style file I/O, and dataset manifests.

Volumes are stored as a text header followed by a raw little-endian
payload. Header keys follow the MetaImage convention (NDims, DimSize,
ElementSpacing, Offset, ElementType, ElementDataFile) with a few
extension keys (IntensityUnit, Smoothed, Sinogram, nodule metadata).
``ElementDataFile = LOCAL`` means the payload follows the header in the
same file; anything else is a sidecar filename relative to the header.

Array layout: ``values`` is a slice-major ``(nz, ny, nx)`` numpy array,
i.e. x varies fastest in the payload, matching the raw MetaImage layout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError

_ELEMENT_TYPES = {"int16": np.int16, "float32": np.float32}


class IntensityUnit(str, Enum):
    RAW = "RawDicom"
    HU = "HU"
    NORMALIZED = "Normalized"


class NoduleLabel(str, Enum):
    NON_MALIGNANT = "NonMalignant"
    MALIGNANT = "Malignant"


def classify_malignancy(score: float) -> NoduleLabel:
    """Label rule: score > 4 is malignant, < 4 non-malignant, == 4 excluded."""
    if score > 4.0:
        return NoduleLabel.MALIGNANT
    if score < 4.0:
        return NoduleLabel.NON_MALIGNANT
    raise DataError("malignancy score of exactly 4 belongs to neither class")


@dataclass(frozen=True)
class CtVolume:
    """Immutable 3D scalar grid with spacing metadata.

    values: (nz, ny, nx) array, float32 or int16
    spacing: (sx, sy, sz) mm per voxel
    origin: (ox, oy, oz) world position of the first voxel center, mm
    """

    values: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    unit: IntensityUnit = IntensityUnit.HU
    smoothed: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise DataError(f"volume must be 3D, got shape {v.shape}")
        if min(v.shape) < 1:
            raise DataError("all dims must be >= 1")
        if any(s <= 0 for s in self.spacing):
            raise DataError(f"spacing must be positive, got {self.spacing}")
        if not np.all(np.isfinite(v)):
            raise DataError("volume contains non-finite values")
        if self.unit is IntensityUnit.NORMALIZED:
            if v.min() < 0.0 or v.max() > 1.0:
                raise DataError("Normalized volume has values outside [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz) voxel counts."""
        nz, ny, nx = self.values.shape
        return (nx, ny, nz)

    def with_values(self, values, unit=None, smoothed=None) -> "CtVolume":
        return replace(
            self,
            values=values,
            unit=self.unit if unit is None else unit,
            smoothed=self.smoothed if smoothed is None else smoothed,
        )

    def same_geometry(self, other: "CtVolume") -> bool:
        return (
            self.values.shape == other.values.shape
            and np.allclose(self.spacing, other.spacing)
            and np.allclose(self.origin, other.origin)
        )


@dataclass(frozen=True)
class NoduleMask:
    """Binary nodule mask on the same grid as its parent volume."""

    volume: CtVolume
    nodule_id: str = "n0"
    malignancy_score: float = 2.0

    def __post_init__(self):
        v = self.volume.values
        uniq = np.unique(v)
        if not np.all(np.isin(uniq, (0, 1))):
            raise DataError("mask values must be binary {0, 1}")
        if v.sum() < 1:
            raise DataError("mask has no foreground voxels")

    @property
    def label(self) -> NoduleLabel:
        return classify_malignancy(self.malignancy_score)

    @property
    def array(self) -> np.ndarray:
        return self.volume.values.astype(bool)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.volume.spacing


# ---------------------------------------------------------------------------
# container read/write
# ---------------------------------------------------------------------------

_HEADER_ORDER = [
    "NDims",
    "DimSize",
    "ElementSpacing",
    "Offset",
    "ElementType",
    "IntensityUnit",
    "Smoothed",
]


def _format_floats(vals) -> str:
    return " ".join(repr(float(v)) for v in vals)


def write_container(path, array: np.ndarray, extra: dict | None = None,
                    spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
                    unit=IntensityUnit.HU, smoothed=False) -> None:
    """Write a (nz, ny, nx) array as header + raw LE payload (inline)."""
    arr = np.asarray(array)
    if arr.dtype == np.int16:
        etype = "int16"
    else:
        arr = arr.astype(np.float32, copy=False)
        etype = "float32"
    nz, ny, nx = arr.shape
    lines = {
        "NDims": "3",
        "DimSize": f"{nx} {ny} {nz}",
        "ElementSpacing": _format_floats(spacing),
        "Offset": _format_floats(origin),
        "ElementType": etype,
        "IntensityUnit": unit.value,
        "Smoothed": "True" if smoothed else "False",
    }
    header = "".join(f"{k} = {lines[k]}\n" for k in _HEADER_ORDER)
    for k, v in (extra or {}).items():
        header += f"{k} = {v}\n"
    header += "ElementDataFile = LOCAL\n"
    payload = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)


def read_container(path) -> tuple[np.ndarray, dict]:
    """Read header + payload; returns ((nz, ny, nx) array, header dict)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such volume file: {path}")
    raw = path.read_bytes()
    header: dict[str, str] = {}
    pos = 0
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise DataError(f"{path}: header missing ElementDataFile terminator")
        try:
            line = raw[pos:nl].decode("ascii")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: malformed header line") from exc
        pos = nl + 1
        if "=" not in line:
            raise DataError(f"{path}: malformed header line {line!r}")
        key, _, val = line.partition("=")
        header[key.strip()] = val.strip()
        if key.strip() == "ElementDataFile":
            break

    for req in ("NDims", "DimSize", "ElementSpacing", "ElementType"):
        if req not in header:
            raise DataError(f"{path}: header missing {req}")
    if header["NDims"] != "3":
        raise DataError(f"{path}: only NDims = 3 supported")
    try:
        nx, ny, nz = (int(t) for t in header["DimSize"].split())
    except ValueError as exc:
        raise DataError(f"{path}: bad DimSize {header['DimSize']!r}") from exc
    etype = header["ElementType"]
    if etype not in _ELEMENT_TYPES:
        raise DataError(f"{path}: unsupported ElementType {etype!r}")
    dtype = np.dtype(_ELEMENT_TYPES[etype]).newbyteorder("<")

    datafile = header["ElementDataFile"]
    if datafile == "LOCAL":
        payload = raw[pos:]
    else:
        sidecar = path.parent / datafile
        if not sidecar.exists():
            raise DataError(f"{path}: sidecar payload {datafile!r} not found")
        payload = sidecar.read_bytes()
    expected = nx * ny * nz * dtype.itemsize
    if len(payload) != expected:
        raise DataError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(nz, ny, nx)
    return arr, header


def _parse_geometry(header, path):
    try:
        spacing = tuple(float(t) for t in header["ElementSpacing"].split())
        origin = tuple(float(t) for t in header.get("Offset", "0 0 0").split())
    except ValueError as exc:
        raise DataError(f"{path}: bad spacing/offset") from exc
    if len(spacing) != 3 or len(origin) != 3:
        raise DataError(f"{path}: spacing/offset must have 3 components")
    return spacing, origin


def save_volume(volume: CtVolume, path, extra: dict | None = None) -> None:
    write_container(
        path,
        volume.values,
        extra=extra,
        spacing=volume.spacing,
        origin=volume.origin,
        unit=volume.unit,
        smoothed=volume.smoothed,
    )


def load_volume(path) -> CtVolume:
    arr, header = read_container(path)
    spacing, origin = _parse_geometry(header, path)
    unit = IntensityUnit(header.get("IntensityUnit", "HU"))
    smoothed = header.get("Smoothed", "False") == "True"
    # copy so the volume owns writable, native-order memory
    return CtVolume(np.ascontiguousarray(arr), spacing, origin, unit, smoothed)


def save_mask(mask: NoduleMask, path) -> None:
    extra = {
        "NoduleId": mask.nodule_id,
        "MalignancyScore": repr(float(mask.malignancy_score)),
    }
    write_container(
        path,
        mask.volume.values.astype(np.int16),
        extra=extra,
        spacing=mask.volume.spacing,
        origin=mask.volume.origin,
        unit=IntensityUnit.RAW,
    )


def load_mask(path) -> NoduleMask:
    arr, header = read_container(path)
    spacing, origin = _parse_geometry(header, path)
    vol = CtVolume(
        np.ascontiguousarray(arr).astype(np.int16),
        spacing,
        origin,
        IntensityUnit.RAW,
    )
    return NoduleMask(
        vol,
        nodule_id=header.get("NoduleId", "n0"),
        malignancy_score=float(header.get("MalignancyScore", "2.0")),
    )


# ---------------------------------------------------------------------------
# dataset manifest
# ---------------------------------------------------------------------------

LDCT_TUBE_CURRENT_MAX_MA = 80.0

_MANIFEST_FIELDS = ["subject_id", "volume_path", "mask_paths", "dose_class", "tube_current_mA"]


@dataclass(frozen=True)
class ManifestRecord:
    subject_id: str
    volume_path: str
    mask_paths: tuple[str, ...]
    dose_class: str  # "SDCT" | "LDCT"
    tube_current_mA: float

    def __post_init__(self):
        expected = "LDCT" if self.tube_current_mA <= LDCT_TUBE_CURRENT_MAX_MA else "SDCT"
        if self.dose_class != expected:
            raise DataError(
                f"{self.subject_id}: dose_class {self.dose_class} inconsistent "
                f"with tube current {self.tube_current_mA} mA"
            )


@dataclass
class DatasetManifest:
    records: list[ManifestRecord] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            for p in (rec.volume_path, *rec.mask_paths):
                if p in seen:
                    raise DataError(f"duplicate path in manifest: {p}")
                seen.add(p)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_MANIFEST_FIELDS)
        for rec in manifest:
            writer.writerow(
                [
                    rec.subject_id,
                    rec.volume_path,
                    ";".join(rec.mask_paths),
                    rec.dose_class,
                    repr(float(rec.tube_current_mA)),
                ]
            )


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such manifest: {path}")
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _MANIFEST_FIELDS:
            raise DataError(f"{path}: unexpected manifest header {reader.fieldnames}")
        for row in reader:
            masks = tuple(p for p in row["mask_paths"].split(";") if p)
            records.append(
                ManifestRecord(
                    subject_id=row["subject_id"],
                    volume_path=row["volume_path"],
                    mask_paths=masks,
                    dose_class=row["dose_class"],
                    tube_current_mA=float(row["tube_current_mA"]),
                )
            )
    return DatasetManifest(records)
