"""Sinogram-domain dose degradation.

Two noise models are supported, both applied to line-integral data:

* ``simple``: quantum + electronic noise via a Poisson draw on the
  transmitted flux plus additive Gaussian readout noise, followed by the
  log transform back to line integrals.
* ``physics``: direct noise insertion that scales the incident photon
  number by a dose factor ``a`` and adds zero-mean Gaussian noise whose
  variance follows the transmitted-flux statistics, including an
  electronic-noise term.

A full volume is degraded slice by slice: project, inject noise,
reconstruct. Each slice owns an independent RNG substream keyed by
(seed, subject, slice), so results do not depend on worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .projection import ProjectionGeometry, Sinogram, default_geometry, fbp, radon
from .rng import derive_rng
from .volume import CtVolume, IntensityUnit

# linear attenuation of water (mm^-1) used to map HU <-> attenuation
MU_WATER_MM = 0.0192867


@dataclass(frozen=True)
class SimpleNoiseParams:
    I0_ld: float = 2.5e4  # simulated low-dose incident flux (photons)
    m_e: float = 0.0  # electronic noise mean
    sigma_e2: float = 10.0  # electronic noise variance
    epsilon_floor: float = 0.1  # clamp for the log argument

    def __post_init__(self):
        if self.I0_ld <= 0:
            raise ConfigError("I0_ld must be > 0")
        if self.sigma_e2 < 0:
            raise ConfigError("sigma_e2 must be >= 0")
        if self.epsilon_floor <= 0:
            raise ConfigError("epsilon_floor must be > 0")


@dataclass(frozen=True)
class PhysicsNoiseParams:
    a: float = 0.25  # dose scaling factor
    N0A: float = 1.0e5  # incident photon flux of the higher-dose scan
    Ne: float = 10.0  # electronic noise parameter

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise ConfigError("dose factor a must satisfy 0 < a <= 1")
        if self.N0A <= 0:
            raise ConfigError("N0A must be > 0")
        if self.Ne < 0:
            raise ConfigError("Ne must be >= 0")


def degrade_sinogram_simple(p_sd: Sinogram, params: SimpleNoiseParams,
                            rng: np.random.Generator) -> Sinogram:
    """Low-dose line integrals from Poisson + Gaussian detector statistics.

    d = Poisson(I0 * exp(-p)) + Normal(m_e, sigma_e^2)
    out = log(I0 / max(d, epsilon_floor))
    """
    p = p_sd.values
    lam = params.I0_ld * np.exp(-p)
    detected = rng.poisson(lam).astype(np.float64)
    detected += rng.normal(params.m_e, np.sqrt(params.sigma_e2), size=p.shape)
    detected = np.maximum(detected, params.epsilon_floor)
    return Sinogram(p_sd.geometry, np.log(params.I0_ld / detected))


def physics_noise_std(P_A: np.ndarray, params: PhysicsNoiseParams) -> np.ndarray:
    """Analytic per-element noise standard deviation of the physics model."""
    a, n0, ne = params.a, params.N0A, params.Ne
    flux = np.exp(P_A) / n0
    var = (1.0 - a) / a * flux * (1.0 + (1.0 + a) / a * ne * flux)
    return np.sqrt(var)


def degrade_sinogram_physics(P_A: Sinogram, params: PhysicsNoiseParams,
                             rng: np.random.Generator) -> Sinogram:
    """Dose-scaled noise insertion: P_B = P_A + std(P_A) * x, x ~ N(0, 1)."""
    if params.a == 1.0:
        # zero noise scale; return the input bit-identically
        return Sinogram(P_A.geometry, P_A.values.copy())
    x = rng.standard_normal(P_A.values.shape)
    return Sinogram(P_A.geometry, P_A.values + physics_noise_std(P_A.values, params) * x)


# ---------------------------------------------------------------------------
# volume pipeline
# ---------------------------------------------------------------------------

METHOD_SIMPLE = "simple"
METHOD_PHYSICS = "physics"


@dataclass(frozen=True)
class DegradeConfig:
    method: str = METHOD_PHYSICS
    geometry: ProjectionGeometry | None = None  # None -> default for slice size
    simple: SimpleNoiseParams = SimpleNoiseParams()
    physics: PhysicsNoiseParams = PhysicsNoiseParams()
    window: tuple[float, float] = (-1200.0, 600.0)
    mu_water_mm: float = MU_WATER_MM
    seed: int = 0

    def __post_init__(self):
        if self.method not in (METHOD_SIMPLE, METHOD_PHYSICS):
            raise ConfigError(f"unknown degradation method {self.method!r}")
        if self.window[0] >= self.window[1]:
            raise ConfigError("invalid HU window")


def hu_to_attenuation(slice_hu: np.ndarray, mu_water: float, pixel_mm: float) -> np.ndarray:
    """HU -> per-pixel linear attenuation, clamped at zero (air)."""
    mu = mu_water * (1.0 + slice_hu / 1000.0)
    return np.maximum(mu, 0.0) * pixel_mm


def attenuation_to_hu(slice_mu: np.ndarray, mu_water: float, pixel_mm: float) -> np.ndarray:
    return (slice_mu / pixel_mm / mu_water - 1.0) * 1000.0


def degrade_slice(slice_hu: np.ndarray, cfg: DegradeConfig,
                  geom: ProjectionGeometry, rng: np.random.Generator) -> np.ndarray:
    mu = hu_to_attenuation(slice_hu, cfg.mu_water_mm, 1.0)
    sino = radon(mu, geom)
    if cfg.method == METHOD_SIMPLE:
        noisy = degrade_sinogram_simple(sino, cfg.simple, rng)
    else:
        noisy = degrade_sinogram_physics(sino, cfg.physics, rng)
    recon = fbp(noisy, slice_hu.shape[0])
    out = attenuation_to_hu(recon, cfg.mu_water_mm, 1.0)
    return np.clip(out, cfg.window[0], cfg.window[1])


def degrade_volume(v: CtVolume, cfg: DegradeConfig, subject_id: str = "s0",
                   workers: int = 1) -> CtVolume:
    """Slice-wise radon -> noise -> FBP over a preprocessed HU volume.

    Output is bit-identical for a fixed (cfg.seed, subject_id),
    regardless of worker count.
    """
    if v.unit is not IntensityUnit.HU:
        raise DataError("degrade_volume expects an HU volume")
    nz, ny, nx = v.values.shape
    if ny != nx:
        raise DataError("degrade_volume expects square axial slices")
    geom = cfg.geometry if cfg.geometry is not None else default_geometry(nx)
    out = np.empty_like(v.values, dtype=np.float32)

    def run(z: int) -> None:
        rng = derive_rng(cfg.seed, subject_id, z)
        out[z] = degrade_slice(v.values[z].astype(np.float64), cfg, geom, rng)

    if workers <= 1:
        for z in range(nz):
            run(z)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(nz)))
    return v.with_values(out)
