"""Gray-level texture-matrix features over discretized 3D ROIs.

All five families use distance-1 26-connectivity (13 unique direction
offsets plus their negatives where relevant). Co-occurrence and
run-length matrices are symmetrized/accumulated per direction and then
averaged over the 13 directions; zone, tone-difference, and dependence
matrices are direction-free.

Degenerate-value policy (constant or single-voxel ROIs): correlation-
type features map to 1, ratios with a zero denominator map to 0, and
coarseness saturates at 1e6. These mappings keep every feature finite
on every valid ROI.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate, label

from .roi import RoiSample

COARSENESS_CAP = 1e6

# unique direction offsets (dz, dy, dx): first nonzero component positive
OFFSETS_13 = [
    (0, 0, 1),
    (0, 1, -1),
    (0, 1, 0),
    (0, 1, 1),
    (1, -1, -1),
    (1, -1, 0),
    (1, -1, 1),
    (1, 0, -1),
    (1, 0, 0),
    (1, 0, 1),
    (1, 1, -1),
    (1, 1, 0),
    (1, 1, 1),
]

GLCM_FEATURE_NAMES = [
    "autocorrelation",
    "joint_average",
    "cluster_prominence",
    "cluster_shade",
    "cluster_tendency",
    "contrast",
    "correlation",
    "difference_average",
    "difference_entropy",
    "difference_variance",
    "inverse_difference",
    "inverse_difference_normalized",
    "inverse_difference_moment",
    "inverse_difference_moment_normalized",
    "inverse_variance",
    "joint_energy",
    "joint_entropy",
    "imc1",
    "imc2",
    "mcc",
    "maximum_probability",
    "sum_average",
    "sum_entropy",
    "sum_squares",
]

GLRLM_FEATURE_NAMES = [
    "short_run_emphasis",
    "long_run_emphasis",
    "gray_level_non_uniformity",
    "gray_level_non_uniformity_normalized",
    "run_length_non_uniformity",
    "run_length_non_uniformity_normalized",
    "run_percentage",
    "gray_level_variance",
    "run_variance",
    "run_entropy",
    "low_gray_level_run_emphasis",
    "high_gray_level_run_emphasis",
    "short_run_low_gray_level_emphasis",
    "short_run_high_gray_level_emphasis",
    "long_run_low_gray_level_emphasis",
    "long_run_high_gray_level_emphasis",
]

GLSZM_FEATURE_NAMES = [
    "small_area_emphasis",
    "large_area_emphasis",
    "gray_level_non_uniformity",
    "gray_level_non_uniformity_normalized",
    "size_zone_non_uniformity",
    "size_zone_non_uniformity_normalized",
    "zone_percentage",
    "gray_level_variance",
    "zone_variance",
    "zone_entropy",
    "low_gray_level_zone_emphasis",
    "high_gray_level_zone_emphasis",
    "small_area_low_gray_level_emphasis",
    "small_area_high_gray_level_emphasis",
    "large_area_low_gray_level_emphasis",
    "large_area_high_gray_level_emphasis",
]

NGTDM_FEATURE_NAMES = [
    "coarseness",
    "contrast",
    "busyness",
    "complexity",
    "strength",
]

GLDM_FEATURE_NAMES = [
    "small_dependence_emphasis",
    "large_dependence_emphasis",
    "gray_level_non_uniformity",
    "dependence_non_uniformity",
    "dependence_non_uniformity_normalized",
    "gray_level_variance",
    "dependence_variance",
    "dependence_entropy",
    "low_gray_level_emphasis",
    "high_gray_level_emphasis",
    "small_dependence_low_gray_level_emphasis",
    "small_dependence_high_gray_level_emphasis",
    "large_dependence_low_gray_level_emphasis",
    "large_dependence_high_gray_level_emphasis",
]


def _offset_slices(shape, off):
    src, dst = [], []
    for n, o in zip(shape, off):
        if o >= 0:
            src.append(slice(0, n - o))
            dst.append(slice(o, n))
        else:
            src.append(slice(-o, n))
            dst.append(slice(0, n + o))
    return tuple(src), tuple(dst)


def _entropy2(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


# ---------------------------------------------------------------------------
# GLCM
# ---------------------------------------------------------------------------


def glcm_matrix(roi: RoiSample) -> np.ndarray:
    """Symmetrized co-occurrence counts averaged over the 13 directions."""
    ng = roi.n_bins
    lv = roi.levels
    mask = roi.mask
    total = np.zeros((ng, ng), dtype=np.float64)
    for off in OFFSETS_13:
        src, dst = _offset_slices(lv.shape, off)
        valid = mask[src] & mask[dst]
        if not valid.any():
            continue
        li = lv[src][valid] - 1
        lj = lv[dst][valid] - 1
        counts = np.bincount(li * ng + lj, minlength=ng * ng).reshape(ng, ng)
        total += counts + counts.T
    if total.sum() == 0:
        # no voxel pairs (single-voxel ROI): behaves like a constant ROI
        lone = int(lv[mask][0]) - 1
        total[lone, lone] = 1.0
    return total / len(OFFSETS_13)


def glcm_features(roi: RoiSample) -> dict[str, float]:
    P = glcm_matrix(roi)
    p = P / P.sum()
    ng = p.shape[0]
    i = np.arange(1, ng + 1, dtype=np.float64)
    ii = i[:, None]
    jj = i[None, :]
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float((i * px).sum())
    mu_y = float((i * py).sum())
    sig_x = float(np.sqrt(((i - mu_x) ** 2 * px).sum()))
    sig_y = float(np.sqrt(((i - mu_y) ** 2 * py).sum()))

    # diagonal / cross-diagonal marginals
    ks_sum = np.arange(2, 2 * ng + 1, dtype=np.float64)
    p_sum = np.zeros(ks_sum.size)
    ks_diff = np.arange(0, ng, dtype=np.float64)
    p_diff = np.zeros(ks_diff.size)
    sum_idx = (ii + jj - 2).astype(int)
    diff_idx = np.abs(ii - jj).astype(int)
    np.add.at(p_sum, sum_idx.ravel(), p.ravel())
    np.add.at(p_diff, diff_idx.ravel(), p.ravel())

    eps = np.finfo(np.float64).eps
    hx = _entropy2(px)
    hy = _entropy2(py)
    hxy = _entropy2(p.ravel())
    pxy_outer = px[:, None] * py[None, :]
    hxy1 = float(-(p * np.log2(pxy_outer + eps)).sum())
    hxy2 = float(-(pxy_outer * np.log2(pxy_outer + eps)).sum())

    corr_num = float((ii * jj * p).sum()) - mu_x * mu_y
    correlation = corr_num / (sig_x * sig_y) if sig_x > 0 and sig_y > 0 else 1.0

    imc1 = (hxy - hxy1) / max(hx, hy) if max(hx, hy) > 0 else 0.0
    imc2 = float(np.sqrt(max(1.0 - np.exp(-2.0 * (hxy2 - hxy)), 0.0)))

    present = px > 0
    if present.sum() > 1:
        p_sub = p[np.ix_(present, present)]
        px_sub = px[present]
        q = (p_sub / px_sub[:, None]) @ (p_sub / px_sub[:, None]).T
        # Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k)); symmetric form above
        # uses py == px (symmetric GLCM)
        eigs = np.sort(np.real(np.linalg.eigvals(q)))
        mcc = float(np.sqrt(max(eigs[-2], 0.0))) if eigs.size > 1 else 1.0
    else:
        mcc = 1.0

    diff_avg = float((ks_diff * p_diff).sum())
    off_diag = ~np.eye(ng, dtype=bool)
    inv_var = float((p[off_diag] / (ii - jj)[off_diag] ** 2).sum())

    return {
        "autocorrelation": float((ii * jj * p).sum()),
        "joint_average": mu_x,
        "cluster_prominence": float(((ii + jj - mu_x - mu_y) ** 4 * p).sum()),
        "cluster_shade": float(((ii + jj - mu_x - mu_y) ** 3 * p).sum()),
        "cluster_tendency": float(((ii + jj - mu_x - mu_y) ** 2 * p).sum()),
        "contrast": float(((ii - jj) ** 2 * p).sum()),
        "correlation": correlation,
        "difference_average": diff_avg,
        "difference_entropy": _entropy2(p_diff),
        "difference_variance": float(((ks_diff - diff_avg) ** 2 * p_diff).sum()),
        "inverse_difference": float((p / (1.0 + np.abs(ii - jj))).sum()),
        "inverse_difference_normalized": float((p / (1.0 + np.abs(ii - jj) / ng)).sum()),
        "inverse_difference_moment": float((p / (1.0 + (ii - jj) ** 2)).sum()),
        "inverse_difference_moment_normalized": float(
            (p / (1.0 + (ii - jj) ** 2 / ng**2)).sum()
        ),
        "inverse_variance": inv_var,
        "joint_energy": float((p**2).sum()),
        "joint_entropy": hxy,
        "imc1": imc1,
        "imc2": imc2,
        "mcc": mcc,
        "maximum_probability": float(p.max()),
        "sum_average": float((ks_sum * p_sum).sum()),
        "sum_entropy": _entropy2(p_sum),
        "sum_squares": float(((ii - mu_x) ** 2 * p).sum()),
    }


# ---------------------------------------------------------------------------
# GLRLM
# ---------------------------------------------------------------------------


def _runs_along(levels: np.ndarray, mask: np.ndarray, off) -> np.ndarray:
    """(level, run length) counts for a single direction."""
    shape = levels.shape
    coords = np.indices(shape).reshape(3, -1)
    steps = np.full(coords.shape[1], np.iinfo(np.int64).max, dtype=np.int64)
    for axis, o in enumerate(off):
        if o == 1:
            steps = np.minimum(steps, coords[axis])
        elif o == -1:
            steps = np.minimum(steps, shape[axis] - 1 - coords[axis])
    anchor = coords - steps[None, :] * np.asarray(off)[:, None]
    line_id = np.ravel_multi_index(anchor, shape)
    order = np.lexsort((steps, line_id))
    lv = levels.reshape(-1)[order]
    valid = mask.reshape(-1)[order]
    line = line_id[order]

    same = valid[1:] & valid[:-1] & (line[1:] == line[:-1]) & (lv[1:] == lv[:-1])
    starts = valid.copy()
    starts[1:] &= ~same
    run_id = np.cumsum(starts) - 1
    lengths = np.bincount(run_id[valid])
    run_levels = lv[starts]

    max_len = max(shape)
    out = np.zeros((int(levels.max()), max_len), dtype=np.float64)
    np.add.at(out, (run_levels - 1, lengths - 1), 1.0)
    return out


def glrlm_matrix(roi: RoiSample) -> np.ndarray:
    ng = roi.n_bins
    max_len = max(roi.levels.shape)
    total = np.zeros((ng, max_len), dtype=np.float64)
    for off in OFFSETS_13:
        runs = _runs_along(roi.levels, roi.mask, off)
        total[: runs.shape[0], : runs.shape[1]] += runs
    return total / len(OFFSETS_13)


def _ij_emphasis_features(P: np.ndarray, n_voxels: int, prefix_i: str, prefix_j: str,
                          pct_name: str) -> dict[str, float]:
    """Shared feature formulas for (gray level i, size/length j) matrices."""
    total = P.sum()
    p = P / total
    ng, nl = P.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, nl + 1, dtype=np.float64)[None, :]
    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    mu_i = float((i.ravel() * pi).sum())
    mu_j = float((j.ravel() * pj).sum())
    return {
        f"short_{prefix_j}_emphasis": float((p / j**2).sum()),
        f"long_{prefix_j}_emphasis": float((p * j**2).sum()),
        f"{prefix_i}_non_uniformity": float((P.sum(axis=1) ** 2).sum() / total),
        f"{prefix_i}_non_uniformity_normalized": float((pi**2).sum()),
        f"{prefix_j}_non_uniformity": float((P.sum(axis=0) ** 2).sum() / total),
        f"{prefix_j}_non_uniformity_normalized": float((pj**2).sum()),
        pct_name: float(total / n_voxels),
        f"{prefix_i}_variance": float((((i - mu_i) ** 2) * p).sum()),
        f"{prefix_j}_variance": float((((j - mu_j) ** 2) * p).sum()),
        f"{prefix_j}_entropy": _entropy2(p.ravel()),
        f"low_{prefix_i}_emphasis": float((p / i**2).sum()),
        f"high_{prefix_i}_emphasis": float((p * i**2).sum()),
        f"short_{prefix_j}_low_{prefix_i}_emphasis": float((p / (i**2 * j**2)).sum()),
        f"short_{prefix_j}_high_{prefix_i}_emphasis": float((p * i**2 / j**2).sum()),
        f"long_{prefix_j}_low_{prefix_i}_emphasis": float((p * j**2 / i**2).sum()),
        f"long_{prefix_j}_high_{prefix_i}_emphasis": float((p * i**2 * j**2).sum()),
    }


def glrlm_features(roi: RoiSample) -> dict[str, float]:
    P = glrlm_matrix(roi)
    f = _ij_emphasis_features(P, roi.n_voxels, "gray_level", "run", "run_percentage")
    return {
        "short_run_emphasis": f["short_run_emphasis"],
        "long_run_emphasis": f["long_run_emphasis"],
        "gray_level_non_uniformity": f["gray_level_non_uniformity"],
        "gray_level_non_uniformity_normalized": f["gray_level_non_uniformity_normalized"],
        "run_length_non_uniformity": f["run_non_uniformity"],
        "run_length_non_uniformity_normalized": f["run_non_uniformity_normalized"],
        "run_percentage": f["run_percentage"],
        "gray_level_variance": f["gray_level_variance"],
        "run_variance": f["run_variance"],
        "run_entropy": f["run_entropy"],
        "low_gray_level_run_emphasis": f["low_gray_level_emphasis"],
        "high_gray_level_run_emphasis": f["high_gray_level_emphasis"],
        "short_run_low_gray_level_emphasis": f["short_run_low_gray_level_emphasis"],
        "short_run_high_gray_level_emphasis": f["short_run_high_gray_level_emphasis"],
        "long_run_low_gray_level_emphasis": f["long_run_low_gray_level_emphasis"],
        "long_run_high_gray_level_emphasis": f["long_run_high_gray_level_emphasis"],
    }


# ---------------------------------------------------------------------------
# GLSZM
# ---------------------------------------------------------------------------


def glszm_matrix(roi: RoiSample) -> np.ndarray:
    ng = roi.n_bins
    structure = np.ones((3, 3, 3), dtype=bool)  # 26-connectivity zones
    max_size = roi.n_voxels
    P = np.zeros((ng, max_size), dtype=np.float64)
    for level in np.unique(roi.levels[roi.mask]):
        labels, n_zones = label(roi.levels == level, structure=structure)
        if n_zones == 0:
            continue
        sizes = np.bincount(labels.ravel())[1:]
        np.add.at(P, (int(level) - 1, sizes - 1), 1.0)
    return P


def glszm_features(roi: RoiSample) -> dict[str, float]:
    P = glszm_matrix(roi)
    f = _ij_emphasis_features(P, roi.n_voxels, "gray_level", "zone", "zone_percentage")
    return {
        "small_area_emphasis": f["short_zone_emphasis"],
        "large_area_emphasis": f["long_zone_emphasis"],
        "gray_level_non_uniformity": f["gray_level_non_uniformity"],
        "gray_level_non_uniformity_normalized": f["gray_level_non_uniformity_normalized"],
        "size_zone_non_uniformity": f["zone_non_uniformity"],
        "size_zone_non_uniformity_normalized": f["zone_non_uniformity_normalized"],
        "zone_percentage": f["zone_percentage"],
        "gray_level_variance": f["gray_level_variance"],
        "zone_variance": f["zone_variance"],
        "zone_entropy": f["zone_entropy"],
        "low_gray_level_zone_emphasis": f["low_gray_level_emphasis"],
        "high_gray_level_zone_emphasis": f["high_gray_level_emphasis"],
        "small_area_low_gray_level_emphasis": f["short_zone_low_gray_level_emphasis"],
        "small_area_high_gray_level_emphasis": f["short_zone_high_gray_level_emphasis"],
        "large_area_low_gray_level_emphasis": f["long_zone_low_gray_level_emphasis"],
        "large_area_high_gray_level_emphasis": f["long_zone_high_gray_level_emphasis"],
    }


# ---------------------------------------------------------------------------
# NGTDM
# ---------------------------------------------------------------------------


def ngtdm_table(roi: RoiSample) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-level (n_i, s_i) over voxels that have at least one in-mask
    neighbor; returns (n, s, n_valid_voxels)."""
    kernel = np.ones((3, 3, 3), dtype=np.float64)
    kernel[1, 1, 1] = 0.0
    maskf = roi.mask.astype(np.float64)
    neigh_sum = correlate(roi.levels * maskf, kernel, mode="constant", cval=0.0)
    neigh_cnt = correlate(maskf, kernel, mode="constant", cval=0.0)
    usable = roi.mask & (neigh_cnt > 0)
    ng = roi.n_bins
    n = np.zeros(ng, dtype=np.float64)
    s = np.zeros(ng, dtype=np.float64)
    if usable.any():
        lv = roi.levels[usable].astype(np.float64)
        avg = neigh_sum[usable] / neigh_cnt[usable]
        np.add.at(n, (lv - 1).astype(int), 1.0)
        np.add.at(s, (lv - 1).astype(int), np.abs(lv - avg))
    return n, s, int(usable.sum())


def ngtdm_features(roi: RoiSample) -> dict[str, float]:
    n, s, nvp = ngtdm_table(roi)
    if nvp == 0:
        return {
            "coarseness": COARSENESS_CAP,
            "contrast": 0.0,
            "busyness": 0.0,
            "complexity": 0.0,
            "strength": 0.0,
        }
    p = n / nvp
    present = np.where(n > 0)[0]
    i_vals = (present + 1).astype(np.float64)
    p_p = p[present]
    s_p = s[present]
    ngp = present.size

    denom_coarse = float((p_p * s_p).sum())
    coarseness = 1.0 / denom_coarse if denom_coarse > 0 else COARSENESS_CAP
    coarseness = min(coarseness, COARSENESS_CAP)

    if ngp > 1:
        di = i_vals[:, None] - i_vals[None, :]
        pp = p_p[:, None] * p_p[None, :]
        contrast = float((pp * di**2).sum()) / (ngp * (ngp - 1)) * (s_p.sum() / nvp)
        busy_den = float(np.abs(i_vals[:, None] * p_p[:, None] - i_vals[None, :] * p_p[None, :]).sum())
        busyness = denom_coarse / busy_den if busy_den > 0 else 0.0
        psps = p_p[:, None] * s_p[:, None] + p_p[None, :] * s_p[None, :]
        complexity = float(
            (np.abs(di) * psps / (p_p[:, None] + p_p[None, :])).sum()
        ) / nvp
        strength_num = float(((p_p[:, None] + p_p[None, :]) * di**2).sum())
        s_total = float(s_p.sum())
        strength = strength_num / s_total if s_total > 0 else 0.0
    else:
        contrast = busyness = complexity = strength = 0.0

    return {
        "coarseness": coarseness,
        "contrast": float(contrast),
        "busyness": float(busyness),
        "complexity": float(complexity),
        "strength": float(strength),
    }


# ---------------------------------------------------------------------------
# GLDM
# ---------------------------------------------------------------------------


def gldm_matrix(roi: RoiSample, alpha: int = 0) -> np.ndarray:
    """Dependence matrix: P[i-1, j-1] counts in-mask voxels of level i
    whose dependence size is j = 1 + (number of 26-neighbors within alpha)."""
    lv = roi.levels
    mask = roi.mask
    dep = np.zeros(lv.shape, dtype=np.int32)
    offsets = OFFSETS_13 + [tuple(-o for o in off) for off in OFFSETS_13]
    for off in offsets:
        src, dst = _offset_slices(lv.shape, off)
        contrib = (mask[src] & mask[dst] & (np.abs(lv[src] - lv[dst]) <= alpha)).astype(np.int32)
        dep[dst] += contrib
    ng = roi.n_bins
    max_dep = 27
    P = np.zeros((ng, max_dep), dtype=np.float64)
    li = lv[mask] - 1
    dj = dep[mask]  # dependence size j - 1
    np.add.at(P, (li, dj), 1.0)
    return P


def gldm_features(roi: RoiSample) -> dict[str, float]:
    P = gldm_matrix(roi)
    f = _ij_emphasis_features(P, roi.n_voxels, "gray_level", "dependence", "_pct")
    return {
        "small_dependence_emphasis": f["short_dependence_emphasis"],
        "large_dependence_emphasis": f["long_dependence_emphasis"],
        "gray_level_non_uniformity": f["gray_level_non_uniformity"],
        "dependence_non_uniformity": f["dependence_non_uniformity"],
        "dependence_non_uniformity_normalized": f["dependence_non_uniformity_normalized"],
        "gray_level_variance": f["gray_level_variance"],
        "dependence_variance": f["dependence_variance"],
        "dependence_entropy": f["dependence_entropy"],
        "low_gray_level_emphasis": f["low_gray_level_emphasis"],
        "high_gray_level_emphasis": f["high_gray_level_emphasis"],
        "small_dependence_low_gray_level_emphasis": f["short_dependence_low_gray_level_emphasis"],
        "small_dependence_high_gray_level_emphasis": f["short_dependence_high_gray_level_emphasis"],
        "large_dependence_low_gray_level_emphasis": f["long_dependence_low_gray_level_emphasis"],
        "large_dependence_high_gray_level_emphasis": f["long_dependence_high_gray_level_emphasis"],
    }
