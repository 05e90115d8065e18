"""dosekit: simulate low-dose CT from standard-dose volumes and benchmark
the result with image metrics and a radiomics nodule-classification
pipeline."""

__version__ = "0.1.0"
