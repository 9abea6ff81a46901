"""
Evaluation metrics: SSIM, Gaussian fits, Frechet distance, embedders and the model report.
"""

from .embedders import (
    Embedder,
    SpectralEmbedder,
    load_embeddings,
    save_embeddings,
    spectral_embedder,
)
from .evaluate import (
    EvaluationConfig,
    EvaluationReport,
    PairMetrics,
    evaluate_model,
    fad_from_files,
    write_report,
)
from .frechet import GaussianStats, fit_gaussian, frechet_distance
from .ssim import ssim, ssim_map
