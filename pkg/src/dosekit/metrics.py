"""Paired image-quality metrics and distributional metrics over patch
embeddings.

MAE / SSIM / MS-SSIM compare paired images. FID and KID compare sets of
images through an embedding: here a documented handcrafted embedder
(mean-pooled patch + intensity histogram + radial power spectrum) stands
in for a learned feature extractor. The metric math itself (Frechet
distance between Gaussians, unbiased polynomial-kernel MMD^2) is exact,
and the embedder is pluggable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ConfigError, DataError
from .preprocess import gaussian_taps
from .volume import CtVolume, IntensityUnit

# standard 5-scale MS-SSIM exponents
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def mae(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def _ssim_maps(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0):
    """Per-window luminance and contrast-structure maps (valid region)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < window:
        raise DataError(f"image {a.shape} smaller than SSIM window {window}")
    taps = gaussian_taps(window // 2, sigma)

    def smooth(img):
        out = correlate1d(img, taps, axis=0, mode="constant")
        out = correlate1d(out, taps, axis=1, mode="constant")
        m = window // 2
        return out[m:-m, m:-m]

    mu_a = smooth(a)
    mu_b = smooth(b)
    va = smooth(a * a) - mu_a**2
    vb = smooth(b * b) - mu_b**2
    cov = smooth(a * b) - mu_a * mu_b
    c1 = (k1 * L) ** 2
    c2 = (k2 * L) ** 2
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (va + vb + c2)
    return lum, cs


def ssim(a, b, window=11, k1=0.01, k2=0.03, L=1.0) -> float:
    """Mean local SSIM with a Gaussian window (sigma 1.5)."""
    lum, cs = _ssim_maps(a, b, window=window, k1=k1, k2=k2, L=L)
    return float(np.mean(lum * cs))


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h2, w2 = h - h % 2, w - w % 2
    img = img[:h2, :w2]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def ms_ssim(a, b, scales=5, weights=MS_SSIM_WEIGHTS, window=11) -> float:
    """Multi-scale SSIM: per-scale mean contrast-structure terms, luminance
    at the coarsest scale, dyadic 2x2-mean downsampling between scales.

    If the images are too small for the requested scale count the number
    of scales is reduced with a warning.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    max_scales = 0
    side = min(a.shape)
    while side >= window and max_scales < scales:
        max_scales += 1
        side //= 2
    if max_scales == 0:
        raise DataError(f"image {a.shape} smaller than SSIM window {window}")
    if max_scales < scales:
        warnings.warn(
            f"ms_ssim: reducing scales {scales} -> {max_scales} for shape {a.shape}",
            stacklevel=2,
        )
        scales = max_scales
    weights = np.asarray(weights[:scales], dtype=np.float64)
    weights = weights / weights.sum()

    result = 1.0
    ca, cb = a, b
    for level in range(scales):
        lum, cs = _ssim_maps(ca, cb, window=window)
        mean_cs = max(float(np.mean(cs)), 0.0)
        if level == scales - 1:
            mean_lum = max(float(np.mean(lum)), 0.0)
            result *= mean_lum ** weights[level] * mean_cs ** weights[level]
        else:
            result *= mean_cs ** weights[level]
            ca = _downsample2(ca)
            cb = _downsample2(cb)
    return float(result)


# ---------------------------------------------------------------------------
# patches and embeddings
# ---------------------------------------------------------------------------


@dataclass
class PatchSet:
    patches: np.ndarray  # (n, size, size), values in [0, 1]
    sources: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        p = np.asarray(self.patches, dtype=np.float64)
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise DataError("patches must be (n, size, size)")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise DataError("patch values must lie in [0, 1]")
        self.patches = p

    @property
    def size(self) -> int:
        return self.patches.shape[1]

    def __len__(self):
        return self.patches.shape[0]


def center_crop_patches(volume: CtVolume, size: int = 128, subject_id: str = "s0") -> PatchSet:
    """One centered size^2 patch per axial slice. The crop offset is
    floor((dim - size) / 2) on each axis."""
    if volume.unit is not IntensityUnit.NORMALIZED:
        raise DataError("center_crop_patches expects a Normalized volume")
    nz, ny, nx = volume.values.shape
    if ny < size or nx < size:
        raise DataError(f"slice {ny}x{nx} smaller than patch size {size}")
    r0 = (ny - size) // 2
    c0 = (nx - size) // 2
    patches = volume.values[:, r0 : r0 + size, c0 : c0 + size].astype(np.float64)
    return PatchSet(patches, [(subject_id, z) for z in range(nz)])


@dataclass(frozen=True)
class EmbedderSpec:
    """Default handcrafted embedder: 8x8 mean-pooled patch (64 dims) +
    32-bin intensity histogram + 32-bin radial log-power spectrum."""

    pool_grid: int = 8
    hist_bins: int = 32
    spectrum_bins: int = 32

    @property
    def embedder_id(self) -> str:
        return f"meanpool{self.pool_grid}-hist{self.hist_bins}-spectrum{self.spectrum_bins}-v1"

    @property
    def dim(self) -> int:
        return self.pool_grid**2 + self.hist_bins + self.spectrum_bins


def _radial_spectrum(patch: np.ndarray, bins: int) -> np.ndarray:
    n = patch.shape[0]
    power = np.abs(np.fft.fft2(patch)) ** 2 / patch.size
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    r = np.sqrt(fx**2 + fy**2) / (np.sqrt(2.0) * 0.5)  # normalized to [0, 1]
    idx = np.minimum((r * bins).astype(int), bins - 1)
    sums = np.bincount(idx.ravel(), weights=power.ravel(), minlength=bins)
    counts = np.bincount(idx.ravel(), minlength=bins)
    mean_power = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return np.log1p(mean_power)


def embed_patches(patchset: PatchSet, embedder: EmbedderSpec | None = None) -> np.ndarray:
    """(n, d) embedding matrix; deterministic, row order = patch order."""
    if len(patchset) == 0:
        raise DataError("cannot embed an empty patch set")
    spec = embedder or EmbedderSpec()
    size = patchset.size
    if size % spec.pool_grid != 0:
        raise ConfigError(f"patch size {size} not divisible by pool grid {spec.pool_grid}")
    block = size // spec.pool_grid
    rows = []
    for patch in patchset.patches:
        pooled = patch.reshape(spec.pool_grid, block, spec.pool_grid, block).mean(axis=(1, 3))
        hist, _ = np.histogram(patch, bins=spec.hist_bins, range=(0.0, 1.0))
        hist = hist / patch.size
        spectrum = _radial_spectrum(patch, spec.spectrum_bins)
        rows.append(np.concatenate([pooled.ravel(), hist, spectrum]))
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# distributional metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingStats:
    mu: np.ndarray  # (d,)
    sigma: np.ndarray  # (d, d), symmetric PSD
    n: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise DataError("sigma shape does not match mu")
        if self.n < 2:
            raise DataError("EmbeddingStats needs n >= 2")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise DataError("non-finite embedding statistics")
        if np.max(np.abs(sigma - sigma.T)) > 1e-10:
            raise DataError("sigma is not symmetric")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.size


def gaussian_stats(embeddings: np.ndarray) -> EmbeddingStats:
    """Sample mean and unbiased covariance of an (n, d) embedding matrix."""
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 2:
        raise DataError("gaussian_stats needs an (n >= 2, d) matrix")
    mu = e.mean(axis=0)
    centered = e - mu
    sigma = centered.T @ centered / (e.shape[0] - 1)
    sigma = 0.5 * (sigma + sigma.T)
    return EmbeddingStats(mu, sigma, e.shape[0])


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD matrix square root via eigendecomposition with
    negative-eigenvalue clamping."""
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(s1: EmbeddingStats, s2: EmbeddingStats, eps: float = 1e-10) -> float:
    """Frechet distance between the Gaussian summaries of two embeddings.

    trace(sqrtm(sigma1 sigma2)) is evaluated through the symmetric
    product sqrt(sigma1) sigma2 sqrt(sigma1), which has the same
    spectrum, so only symmetric eigendecompositions are needed.
    """
    if s1.dim != s2.dim:
        raise DataError(f"embedding dims differ: {s1.dim} vs {s2.dim}")
    reg = eps * np.eye(s1.dim)
    sigma1 = s1.sigma + reg
    sigma2 = s2.sigma + reg
    root1 = sqrtm_psd(sigma1)
    inner = root1 @ sigma2 @ root1
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    tr_sqrt = np.sum(np.sqrt(np.clip(vals, 0.0, None)))
    diff = s1.mu - s2.mu
    value = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * tr_sqrt)
    if value < -1e-6:
        raise DataError(f"FID evaluated to {value}, below numerical tolerance")
    return max(value, 0.0)


def polynomial_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """k(a, b) = (a.b / d + 1)^3 for rows of x against rows of y."""
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    """Unbiased MMD^2 estimator with the cubic polynomial kernel."""
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise DataError("mmd2_unbiased needs at least 2 samples per set")
    kxx = polynomial_kernel(x, x)
    kyy = polynomial_kernel(y, y)
    kxy = polynomial_kernel(x, y)
    sum_xx = kxx.sum() - np.trace(kxx)
    sum_yy = kyy.sum() - np.trace(kyy)
    return float(sum_xx / (m * (m - 1)) + sum_yy / (n * (n - 1)) - 2.0 * kxy.mean())


def kid(e1: np.ndarray, e2: np.ndarray, subset_size: int = 100, n_subsets: int = 10,
        rng: np.random.Generator | None = None) -> tuple[float, float]:
    """KID as mean +/- std of unbiased MMD^2 over random equal-size subsets."""
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    n1, n2 = e1.shape[0], e2.shape[0]
    if n1 < 2 or n2 < 2:
        raise DataError("kid needs at least 2 samples per set")
    if subset_size > min(n1, n2):
        warnings.warn(
            f"kid: shrinking subset_size {subset_size} -> {min(n1, n2)}", stacklevel=2
        )
        subset_size = min(n1, n2)
    rng = rng or np.random.default_rng(0)
    values = np.empty(n_subsets)
    for i in range(n_subsets):
        idx1 = rng.choice(n1, size=subset_size, replace=False)
        idx2 = rng.choice(n2, size=subset_size, replace=False)
        values[i] = mmd2_unbiased(e1[idx1], e2[idx2])
    return float(values.mean()), float(values.std())
