"""First-order (histogram) intensity features of a masked ROI.

Moments use population (biased) normalization. Entropy and uniformity
are computed on the fixed-bin-count discretized histogram; everything
else uses the continuous intensities. Degenerate cases (zero variance)
map skewness and kurtosis to 0.
"""

from __future__ import annotations

import numpy as np

from .roi import RoiSample

FIRSTORDER_FEATURE_NAMES = [
    "energy",
    "total_energy",
    "entropy",
    "minimum",
    "percentile10",
    "percentile90",
    "maximum",
    "mean",
    "median",
    "interquartile_range",
    "range",
    "mean_absolute_deviation",
    "robust_mean_absolute_deviation",
    "root_mean_squared",
    "skewness",
    "kurtosis",
    "variance",
    "uniformity",
]


def firstorder_features(roi: RoiSample) -> dict[str, float]:
    x = roi.masked_values
    n = x.size
    voxel_vol = float(np.prod(roi.spacing))
    mean = float(x.mean())
    var = float(x.var())
    sd = np.sqrt(var)
    p10, p25, median, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])

    hist = np.bincount(roi.levels[roi.mask], minlength=roi.n_bins + 1)[1:]
    p = hist[hist > 0] / n
    entropy = float(-(p * np.log2(p)).sum())
    uniformity = float((p**2).sum())

    robust = x[(x >= p10) & (x <= p90)]
    rmad = float(np.abs(robust - robust.mean()).mean()) if robust.size else 0.0

    skewness = float(((x - mean) ** 3).mean() / sd**3) if sd > 0 else 0.0
    kurtosis = float(((x - mean) ** 4).mean() / var**2) if var > 0 else 0.0

    energy = float((x**2).sum())
    return {
        "energy": energy,
        "total_energy": energy * voxel_vol,
        "entropy": entropy,
        "minimum": float(x.min()),
        "percentile10": float(p10),
        "percentile90": float(p90),
        "maximum": float(x.max()),
        "mean": mean,
        "median": float(median),
        "interquartile_range": float(p75 - p25),
        "range": float(x.max() - x.min()),
        "mean_absolute_deviation": float(np.abs(x - mean).mean()),
        "robust_mean_absolute_deviation": rmad,
        "root_mean_squared": float(np.sqrt((x**2).mean())),
        "skewness": skewness,
        "kurtosis": kurtosis,
        "variance": var,
        "uniformity": uniformity,
    }
