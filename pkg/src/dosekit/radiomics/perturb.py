"""ROI perturbations used for stability analysis and minority-class
augmentation: volume-targeted dilation/erosion and random contour noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion, generate_binary_structure, label

from ..errors import ConfigError, DataError
from ..rng import derive_rng

PERTURBATION_MODES = ("dilate", "erode", "contour_noise")

_CROSS = generate_binary_structure(3, 1)  # 6-connectivity ball
_FULL = generate_binary_structure(3, 3)  # 26-connectivity for components


@dataclass(frozen=True)
class PerturbationSpec:
    mode: str
    magnitude: float = 0.15  # target relative volume change for dilate/erode
    flip_probability: float = 0.3  # boundary flip chance for contour noise
    seed: int = 0

    def __post_init__(self):
        if self.mode not in PERTURBATION_MODES:
            raise ConfigError(f"unknown perturbation mode {self.mode!r}")
        if not 0.0 < self.magnitude < 0.5:
            raise ConfigError("magnitude must lie in (0, 0.5)")


def _iterate_morphology(mask: np.ndarray, magnitude: float, grow: bool) -> np.ndarray:
    base_volume = mask.sum()
    current = mask
    for _ in range(64):
        if grow:
            nxt = binary_dilation(current, _CROSS)
        else:
            nxt = binary_erosion(current, _CROSS, border_value=0)
            if nxt.sum() == 0:
                # erosion would empty the mask; stop at the last usable state
                return current
        current = nxt
        if abs(int(current.sum()) - base_volume) / base_volume >= magnitude:
            return current
    return current


def perturb_roi(mask: np.ndarray, spec: PerturbationSpec) -> np.ndarray:
    """Deterministic perturbed copy of a binary mask (never empty)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < 1:
        raise DataError("cannot perturb an empty mask")
    if spec.mode == "dilate":
        return _iterate_morphology(mask, spec.magnitude, grow=True)
    if spec.mode == "erode":
        return _iterate_morphology(mask, spec.magnitude, grow=False)

    rng = derive_rng(spec.seed, "contour")
    inner = mask & ~binary_erosion(mask, _CROSS, border_value=0)
    outer = binary_dilation(mask, _CROSS) & ~mask
    boundary = inner | outer
    flips = boundary & (rng.random(mask.shape) < spec.flip_probability)
    noisy = mask ^ flips
    if noisy.sum() == 0:
        return mask
    labels, n = label(noisy, structure=_FULL)
    if n <= 1:
        return noisy
    sizes = np.bincount(labels.ravel())[1:]
    keep = int(np.argmax(sizes)) + 1
    return labels == keep
