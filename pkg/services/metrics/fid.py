# services/metrics/fid.py
import logging
import os
from typing import Optional, Protocol, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.models import inception_v3

from config import active_config
from models.errors import ConfigError, DataError, DimensionError, MissingArtifactError
from models.types import EmbedderConfig
from services.dataset.edges import luminance
from utils.image_io import resize_image

logger = logging.getLogger(__name__)

# relative tolerance for negative eigenvalues produced by round-off
EIGEN_TOLERANCE = 1e-8

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class Embedder(Protocol):
    dim: int

    def embed(self, images: Sequence[np.ndarray]) -> np.ndarray:
        ...


def _psd_sqrt(matrix: np.ndarray, what: str) -> np.ndarray:
    """Square root of a symmetric PSD matrix through its eigendecomposition."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    tolerance = EIGEN_TOLERANCE * max(1.0, float(np.max(np.abs(eigvals))))
    if eigvals.min() < -tolerance:
        raise DataError(f"{what} is not positive semi-definite (eigenvalue {eigvals.min():.3e})")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """
    Fréchet distance between Gaussian fits of two feature sets.

    The trace term uses Tr((Σa Σb)^½) = Tr((Σa^½ Σb Σa^½)^½), evaluated on
    the symmetrized product.

    Args:
        feats_a: n_a × d features
        feats_b: n_b × d features

    Returns:
        float: Distance, >= 0

    Raises:
        DataError: If a set has fewer than 2 samples or a covariance is not PSD
    """
    a = np.atleast_2d(np.asarray(feats_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(feats_b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"Feature dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    for name, feats in (('first', a), ('second', b)):
        if feats.shape[0] < 2:
            raise DataError(f"The {name} set has {feats.shape[0]} samples; covariance needs at least 2")
        if feats.shape[0] < feats.shape[1] + 1:
            logger.warning(f"The {name} set has {feats.shape[0]} samples for {feats.shape[1]}-d features; "
                           f"the covariance estimate is rank deficient")

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))

    sqrt_a = _psd_sqrt(cov_a, 'First covariance')
    product = sqrt_a @ cov_b @ sqrt_a
    product = (product + product.T) / 2
    eigvals = np.linalg.eigvalsh(product)
    tolerance = EIGEN_TOLERANCE * max(1.0, float(np.max(np.abs(eigvals))))
    if eigvals.min() < -tolerance:
        raise DataError(f"Covariance product is not positive semi-definite (eigenvalue {eigvals.min():.3e})")
    trace_covmean = float(np.sum(np.sqrt(np.clip(eigvals, 0.0, None))))

    diff = mu_a - mu_b
    distance = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_covmean)
    return max(distance, 0.0)


def fid(set_a: Sequence[np.ndarray], set_b: Sequence[np.ndarray], embedder: Embedder) -> float:
    """FID between two image sets under the given embedder."""
    return frechet_distance(embedder.embed(set_a), embedder.embed(set_b))


class ProjectionEmbedder:
    """
    Deterministic offline embedder: 16×16 grayscale thumbnail times a fixed
    Gaussian projection.
    """

    def __init__(self, dim: int = 16, seed: int = 0, side: int = 16):
        self.dim = dim
        self.side = side
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((side * side, dim)) / side

    def embed(self, images: Sequence[np.ndarray]) -> np.ndarray:
        rows = []
        for image in images:
            gray = luminance(image)[:, :, 0] if image.ndim == 3 else image
            rows.append(resize_image(gray, self.side).reshape(-1))
        if not rows:
            return np.zeros((0, self.dim))
        return np.stack(rows) @ self.projection


class InceptionEmbedder:
    """
    Pooled 2048-d Inception-v3 features; weights are read from a local file.

    Args:
        weights_path: torchvision inception_v3 state_dict
        batch_size: Images per forward pass
    """

    dim = 2048

    def __init__(self, weights_path: str, batch_size: int = 32, device: Optional[torch.device] = None):
        if not os.path.exists(weights_path):
            raise MissingArtifactError(f"Inception weights not found: {weights_path}")
        self.device = device or torch.device('cpu')
        self.batch_size = batch_size
        model = inception_v3(weights=None, aux_logits=True, init_weights=False)
        model.load_state_dict(torch.load(weights_path, map_location='cpu'))
        model.fc = nn.Identity()
        self.model = model.eval().to(self.device)
        self.mean = torch.tensor(IMAGENET_MEAN, device=self.device).view(1, 3, 1, 1)
        self.std = torch.tensor(IMAGENET_STD, device=self.device).view(1, 3, 1, 1)
        logger.info(f"Loaded Inception weights from {weights_path}")

    def embed(self, images: Sequence[np.ndarray]) -> np.ndarray:
        feats = []
        with torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                chunk = np.stack(images[start:start + self.batch_size]).transpose(0, 3, 1, 2)
                x = torch.from_numpy(np.ascontiguousarray(chunk, dtype=np.float32)).to(self.device)
                x = F.interpolate(x, size=(299, 299), mode='bilinear', align_corners=False)
                feats.append(self.model((x - self.mean) / self.std).double().cpu().numpy())
        if not feats:
            return np.zeros((0, self.dim))
        return np.concatenate(feats)


def build_embedder(config: EmbedderConfig) -> Embedder:
    """Embedder named by the run configuration."""
    if config.kind == 'projection':
        return ProjectionEmbedder(config.dim, config.seed)
    if config.kind == 'inception':
        weights = config.weights_path or active_config.INCEPTION_WEIGHTS
        if not weights:
            raise ConfigError("Inception embedder needs embedder.weights_path or INPAINT_INCEPTION_WEIGHTS")
        return InceptionEmbedder(weights)
    raise ConfigError(f"Unknown embedder kind '{config.kind}'")
