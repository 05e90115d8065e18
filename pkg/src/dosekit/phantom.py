"""Synthetic phantoms: a classic head phantom for reconstruction tests
and a thorax slab with embedded nodules as a desk-scale dataset source.

Nodule classes follow a simple imaging convention: "malignant-like"
nodules have spiculated margins (lobed radial perturbation of an
ellipsoid) and a homogeneous soft-tissue interior, while "benign-like"
nodules are smooth ellipsoids carrying bright calcification speckle, so
the two classes are separable through both shape and texture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .rng import derive_rng
from .volume import CtVolume, IntensityUnit, NoduleMask

# (x0, y0, a, b, phi_deg, value): standard 10-ellipse head phantom with
# the usual high-contrast value variant.
_SHEPP_LOGAN_ELLIPSES = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.606, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
]


def shepp_logan(n: int) -> np.ndarray:
    """n x n head phantom on [-1, 1]^2, values in [0, 1]."""
    coords = (np.arange(n) - (n - 1) / 2.0) / (n / 2.0)
    x = coords[None, :]
    y = coords[:, None]
    img = np.zeros((n, n), dtype=np.float64)
    for x0, y0, a, b, phi_deg, val in _SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
        yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    return img


# ---------------------------------------------------------------------------
# thorax phantom
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoduleSpec:
    center_mm: tuple[float, float, float]
    radius_mm: float
    kind: str  # "benign" | "malignant"
    base_hu: float = -20.0
    irregularity: float = 0.0  # relative spike amplitude for spiculated margins
    speckle_fraction: float = 0.0  # calcification speckle volume fraction
    malignancy_score: float = 2.0


@dataclass(frozen=True)
class EllipsoidSpec:
    center_mm: tuple[float, float, float]
    semi_axes_mm: tuple[float, float, float]
    hu: float


@dataclass
class PhantomSpec:
    """One synthetic subject: body components plus nodules."""

    dims: tuple[int, int, int] = (96, 96, 40)  # (nx, ny, nz)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    background_hu: float = -1000.0
    components: list[EllipsoidSpec] = field(default_factory=list)
    nodules: list[NoduleSpec] = field(default_factory=list)

    def __post_init__(self):
        if not self.components and not self.nodules:
            raise ConfigError("phantom spec lists no components or nodules")


def _grids_mm(dims, spacing):
    nx, ny, nz = dims
    sx, sy, sz = spacing
    x = np.arange(nx) * sx
    y = np.arange(ny) * sy
    z = np.arange(nz) * sz
    return np.meshgrid(z, y, x, indexing="ij")  # arrays shaped (nz, ny, nx)


def _paint_ellipsoid(vol, grids, spec: EllipsoidSpec):
    zz, yy, xx = grids
    cx, cy, cz = spec.center_mm
    ax, ay, az = spec.semi_axes_mm
    inside = ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 + ((zz - cz) / az) ** 2 <= 1.0
    vol[inside] = spec.hu
    return inside


def _spike_profile(dirs: np.ndarray, lobes: np.ndarray, sharpness: float) -> np.ndarray:
    """Sum of von Mises-Fisher style lobes over unit directions (m, 3)."""
    bump = np.zeros(dirs.shape[0])
    for u in lobes:
        bump += np.exp(sharpness * (dirs @ u - 1.0))
    return bump


def _nodule_membership(spec: NoduleSpec, spacing, dims, rng) -> np.ndarray:
    """Binary membership of a (possibly spiculated) nodule on the full grid."""
    sx, sy, sz = spacing
    nx, ny, nz = dims
    cx, cy, cz = spec.center_mm
    # local bounding box with allowance for spikes (radial factor stays
    # below 1 + 1.7 * irregularity, see the lobe profile)
    reach = spec.radius_mm * (1.0 + 2.0 * spec.irregularity) + max(sx, sy, sz)
    x0, x1 = max(0, int((cx - reach) / sx)), min(nx - 1, int(np.ceil((cx + reach) / sx)))
    y0, y1 = max(0, int((cy - reach) / sy)), min(ny - 1, int(np.ceil((cy + reach) / sy)))
    z0, z1 = max(0, int((cz - reach) / sz)), min(nz - 1, int(np.ceil((cz + reach) / sz)))
    xs = np.arange(x0, x1 + 1) * sx - cx
    ys = np.arange(y0, y1 + 1) * sy - cy
    zs = np.arange(z0, z1 + 1) * sz - cz
    zzl, yyl, xxl = np.meshgrid(zs, ys, xs, indexing="ij")
    # mild random anisotropy so benign nodules are ellipsoids, not spheres
    axis_scale = 1.0 + rng.uniform(-0.15, 0.25, size=3)
    r2 = (xxl / axis_scale[0]) ** 2 + (yyl / axis_scale[1]) ** 2 + (zzl / axis_scale[2]) ** 2
    dist = np.sqrt(r2)
    radius = np.full(dist.shape, spec.radius_mm)
    if spec.irregularity > 0:
        n_lobes = int(rng.integers(6, 11))
        lobes = rng.normal(size=(n_lobes, 3))
        lobes /= np.linalg.norm(lobes, axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            dirs = np.stack([xxl, yyl, zzl], axis=-1)
            norms = np.linalg.norm(dirs, axis=-1, keepdims=True)
            dirs = np.where(norms > 0, dirs / np.maximum(norms, 1e-12), 0.0)
        bump = _spike_profile(dirs.reshape(-1, 3), lobes, sharpness=12.0).reshape(dist.shape)
        radius = spec.radius_mm * (1.0 + spec.irregularity * (2.0 * bump - 0.5))
    inside_local = dist <= radius
    full = np.zeros((nz, ny, nx), dtype=bool)
    full[z0 : z1 + 1, y0 : y1 + 1, x0 : x1 + 1] = inside_local
    return full


def _speckle_field(mask: np.ndarray, fraction: float, rng) -> np.ndarray:
    """Clustered bright speckle covering roughly `fraction` of the mask."""
    noise = rng.random(mask.shape)
    # smooth the noise a little so speckle forms small clumps
    sm = noise.copy()
    for axis in range(3):
        sm = (np.roll(sm, 1, axis) + sm + np.roll(sm, -1, axis)) / 3.0
    vals = sm[mask]
    if vals.size == 0:
        return np.zeros_like(mask)
    thr = np.quantile(vals, 1.0 - fraction)
    out = np.zeros_like(mask)
    out[mask] = sm[mask] > thr
    return out


def generate_phantom(spec: PhantomSpec, seed: int) -> tuple[CtVolume, list[NoduleMask]]:
    """Deterministic phantom volume plus exact per-nodule masks."""
    rng = derive_rng(seed, "phantom")
    nx, ny, nz = spec.dims
    vol = np.full((nz, ny, nx), spec.background_hu, dtype=np.float64)
    grids = _grids_mm(spec.dims, spec.spacing)
    for comp in spec.components:
        _paint_ellipsoid(vol, grids, comp)

    masks: list[NoduleMask] = []
    occupied = np.zeros_like(vol, dtype=bool)
    for i, nod in enumerate(spec.nodules):
        sub_rng = derive_rng(seed, "nodule", i)
        member = _nodule_membership(nod, spec.spacing, spec.dims, sub_rng)
        member &= ~occupied
        if member.sum() < 1:
            raise DataError(f"nodule {i} produced an empty mask (overlap or out of volume)")
        occupied |= member
        vol[member] = nod.base_hu
        if nod.speckle_fraction > 0:
            speckle = _speckle_field(member, nod.speckle_fraction, sub_rng)
            vol[speckle] = nod.base_hu + 320.0
        mask_vol = CtVolume(
            member.astype(np.int16),
            spacing=spec.spacing,
            origin=(0.0, 0.0, 0.0),
            unit=IntensityUnit.RAW,
        )
        masks.append(
            NoduleMask(mask_vol, nodule_id=f"n{i}", malignancy_score=nod.malignancy_score)
        )

    ct = CtVolume(
        vol.astype(np.float32),
        spacing=spec.spacing,
        origin=(0.0, 0.0, 0.0),
        unit=IntensityUnit.HU,
    )
    return ct, masks


# ---------------------------------------------------------------------------
# randomized thorax subjects
# ---------------------------------------------------------------------------


def thorax_spec(dims=(96, 96, 48), spacing=(1.0, 1.0, 1.0),
                n_benign=3, n_malignant=1, seed=0,
                radius_range_mm=(3.5, 5.5)) -> PhantomSpec:
    """Randomized thorax slab: body + two lungs + spine, nodules in the lungs."""
    rng = derive_rng(seed, "thorax")
    nx, ny, nz = dims
    sx, sy, sz = spacing
    cx, cy, cz = nx * sx / 2.0, ny * sy / 2.0, nz * sz / 2.0
    body_a = 0.44 * nx * sx * (1.0 + rng.uniform(-0.04, 0.04))
    body_b = 0.37 * ny * sy * (1.0 + rng.uniform(-0.04, 0.04))
    body = EllipsoidSpec((cx, cy, cz), (body_a, body_b, nz * sz), 30.0)
    lung_dx = 0.205 * nx * sx
    lung_a = 0.175 * nx * sx
    lung_b = 0.27 * ny * sy
    lung_c = 0.47 * nz * sz
    lungs = [
        EllipsoidSpec((cx - lung_dx, cy, cz), (lung_a, lung_b, lung_c), -820.0),
        EllipsoidSpec((cx + lung_dx, cy, cz), (lung_a, lung_b, lung_c), -820.0),
    ]
    spine = EllipsoidSpec((cx, cy + 0.27 * ny * sy, cz), (0.06 * nx * sx, 0.05 * ny * sy, nz * sz), 400.0)

    nodules: list[NoduleSpec] = []
    placed: list[tuple[np.ndarray, float]] = []
    kinds = ["benign"] * n_benign + ["malignant"] * n_malignant
    for k, kind in enumerate(kinds):
        lung = lungs[int(rng.integers(0, 2))]
        radius = float(rng.uniform(*radius_range_mm))
        # spiculated margins reach beyond the nominal radius
        reach = radius * (1.8 if kind == "malignant" else 1.3) + 1.5
        if np.any(np.array(lung.semi_axes_mm) - reach <= 0):
            raise ConfigError(
                f"lung semi-axes {lung.semi_axes_mm} too small for nodule reach {reach:.1f} mm"
            )
        pos = None
        for spacing_factor in (1.6, 1.2, 1.0, 0.8):
            for _attempt in range(500):
                q = rng.uniform(-1.0, 1.0, size=3)
                if np.dot(q, q) > 1.0:
                    continue
                cand = np.array(lung.center_mm) + q * (np.array(lung.semi_axes_mm) - reach)
                if all(
                    np.linalg.norm(cand - p) > (radius + r) * spacing_factor + 2.0
                    for p, r in placed
                ):
                    pos = cand
                    break
            if pos is not None:
                break
        if pos is None:
            raise DataError("could not place nodule without overlap; reduce count or size")
        placed.append((pos, radius))
        if kind == "malignant":
            nodules.append(
                NoduleSpec(
                    center_mm=tuple(pos),
                    radius_mm=radius,
                    kind=kind,
                    base_hu=float(rng.uniform(-10.0, 40.0)),
                    irregularity=float(rng.uniform(0.18, 0.40)),
                    speckle_fraction=0.0,
                    malignancy_score=float(rng.uniform(4.2, 5.0)),
                )
            )
        else:
            nodules.append(
                NoduleSpec(
                    center_mm=tuple(pos),
                    radius_mm=radius,
                    kind=kind,
                    base_hu=float(rng.uniform(-80.0, -30.0)),
                    irregularity=float(rng.uniform(0.0, 0.06)),
                    speckle_fraction=float(rng.uniform(0.10, 0.20)),
                    malignancy_score=float(rng.uniform(1.5, 3.5)),
                )
            )
    return PhantomSpec(
        dims=dims,
        spacing=spacing,
        background_hu=-1000.0,
        components=[body, *lungs, spine],
        nodules=nodules,
    )


# ---------------------------------------------------------------------------
# JSON dataset spec
# ---------------------------------------------------------------------------


def load_dataset_spec(path) -> dict:
    """Dataset-level phantom description (JSON).

    Keys: n_subjects, dims [nx,ny,nz], spacing [sx,sy,sz],
    benign_per_subject, malignant_per_subject, tube_current_mA.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such phantom spec: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    spec = {
        "n_subjects": int(raw.get("n_subjects", 8)),
        "dims": tuple(raw.get("dims", (96, 96, 40))),
        "spacing": tuple(raw.get("spacing", (1.0, 1.0, 1.0))),
        "benign_per_subject": int(raw.get("benign_per_subject", 3)),
        "malignant_per_subject": int(raw.get("malignant_per_subject", 1)),
        "tube_current_mA": float(raw.get("tube_current_mA", 240.0)),
    }
    if spec["n_subjects"] < 1:
        raise ConfigError("n_subjects must be >= 1")
    if len(spec["dims"]) != 3 or len(spec["spacing"]) != 3:
        raise ConfigError("dims and spacing must have 3 components")
    if spec["dims"][0] != spec["dims"][1]:
        raise ConfigError("phantom slices must be square (nx == ny)")
    return spec
