"""Full feature extraction for one (image, mask) pair.

Pipeline: isotropic resampling -> patch crop around the mask -> Z-score
-> shape features on the original mask, then first-order + five texture
families on the original patch and each of the 8 Haar sub-bands. With
the default configuration this yields 14 + 9 * 93 = 851 features in a
fixed, config-reproducible order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..preprocess import resample_isotropic, resample_mask
from ..volume import CtVolume, NoduleMask
from .firstorder import FIRSTORDER_FEATURE_NAMES, firstorder_features
from .roi import discretize_fixed_bins, zscore_normalize
from .shape import SHAPE_FEATURE_NAMES, shape_features
from .texture import (
    GLCM_FEATURE_NAMES,
    GLDM_FEATURE_NAMES,
    GLRLM_FEATURE_NAMES,
    GLSZM_FEATURE_NAMES,
    NGTDM_FEATURE_NAMES,
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
    ngtdm_features,
)
from .wavelet import WAVELET_BAND_NAMES, downsample_mask, wavelet_decompose

_INTENSITY_CLASSES = [
    ("firstorder", FIRSTORDER_FEATURE_NAMES, firstorder_features),
    ("glcm", GLCM_FEATURE_NAMES, glcm_features),
    ("glrlm", GLRLM_FEATURE_NAMES, glrlm_features),
    ("glszm", GLSZM_FEATURE_NAMES, glszm_features),
    ("ngtdm", NGTDM_FEATURE_NAMES, ngtdm_features),
    ("gldm", GLDM_FEATURE_NAMES, gldm_features),
]


@dataclass(frozen=True)
class ExtractionConfig:
    bins: int = 32
    target_spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    wavelet: bool = True
    patch_margin: int = 2  # voxels of context kept around the mask bbox


def image_filters(config: ExtractionConfig) -> list[str]:
    filters = ["original"]
    if config.wavelet:
        filters += [f"wavelet-{band}" for band in WAVELET_BAND_NAMES]
    return filters


def feature_schema(config: ExtractionConfig) -> list[str]:
    """Ordered feature names; a pure function of the configuration."""
    names = [f"original_shape_{f}" for f in SHAPE_FEATURE_NAMES]
    for filt in image_filters(config):
        for cls, feats, _ in _INTENSITY_CLASSES:
            names.extend(f"{filt}_{cls}_{f}" for f in feats)
    return names


def schema_hash(config: ExtractionConfig) -> str:
    payload = json.dumps(
        {"features": feature_schema(config), "bins": config.bins,
         "target_spacing": list(config.target_spacing)},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _crop_patch(values: np.ndarray, mask: np.ndarray, margin: int):
    idx = np.argwhere(mask)
    lo = np.maximum(idx.min(axis=0) - margin, 0)
    hi = np.minimum(idx.max(axis=0) + margin + 1, mask.shape)
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    return values[sl], mask[sl]


def extract_all(image: CtVolume, mask: NoduleMask, config: ExtractionConfig | None = None
                ) -> dict[str, float]:
    """851-feature vector (default config); deterministic and finite."""
    config = config or ExtractionConfig()
    if image.values.shape != mask.volume.values.shape:
        raise DataError("image and mask grids differ")
    vol = resample_isotropic(image, config.target_spacing)
    msk = resample_mask(mask, config.target_spacing)

    patch, patch_mask = _crop_patch(
        vol.values.astype(np.float64), msk.array, config.patch_margin
    )
    patch = zscore_normalize(patch)

    out: dict[str, float] = {}
    for name, value in shape_features(msk.array, spacing=msk.spacing).items():
        out[f"original_shape_{name}"] = value

    banks: list[tuple[str, np.ndarray, np.ndarray]] = [("original", patch, patch_mask)]
    if config.wavelet:
        bands = wavelet_decompose(patch)
        band_mask = downsample_mask(patch_mask)
        for band in WAVELET_BAND_NAMES:
            banks.append((f"wavelet-{band}", bands[band], band_mask))

    for filt, data, m in banks:
        roi = discretize_fixed_bins(data, m, bins=config.bins, spacing=config.target_spacing)
        for cls, feats, fn in _INTENSITY_CLASSES:
            values = fn(roi)
            for f in feats:
                v = float(values[f])
                if not np.isfinite(v):
                    raise DataError(f"non-finite feature {filt}_{cls}_{f}")
                out[f"{filt}_{cls}_{f}"] = v

    expected = feature_schema(config)
    if list(out.keys()) != expected:
        raise DataError("extracted features do not match schema order")
    return out
