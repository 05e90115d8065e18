from .extract import ExtractionConfig, extract_all, feature_schema, schema_hash
from .firstorder import firstorder_features
from .perturb import PERTURBATION_MODES, PerturbationSpec, perturb_roi
from .roi import RoiSample, discretize_fixed_bins, zscore_normalize
from .shape import shape_features
from .texture import (
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
    ngtdm_features,
)
from .wavelet import wavelet_decompose

__all__ = [
    "ExtractionConfig",
    "extract_all",
    "feature_schema",
    "schema_hash",
    "firstorder_features",
    "PERTURBATION_MODES",
    "PerturbationSpec",
    "perturb_roi",
    "RoiSample",
    "discretize_fixed_bins",
    "zscore_normalize",
    "shape_features",
    "glcm_features",
    "gldm_features",
    "glrlm_features",
    "glszm_features",
    "ngtdm_features",
    "wavelet_decompose",
]
