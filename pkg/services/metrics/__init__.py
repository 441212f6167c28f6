# services/metrics/__init__.py
from services.metrics.evaluation import (
    build_histogram, compare_models, compare_runs, evaluate_phases, evaluate_run, load_phase_report
)
from services.metrics.fid import (
    Embedder, InceptionEmbedder, ProjectionEmbedder, build_embedder, fid, frechet_distance
)
from services.metrics.similarity import mae, ncc, rmse, ssim

__all__ = [
    'Embedder', 'InceptionEmbedder', 'ProjectionEmbedder', 'build_embedder', 'build_histogram',
    'compare_models', 'compare_runs', 'evaluate_phases', 'evaluate_run', 'fid', 'frechet_distance',
    'load_phase_report', 'mae', 'ncc', 'rmse', 'ssim',
]
