# services/metrics/similarity.py
import numpy as np
import torch
import torch.nn.functional as F

from models.errors import DegenerateInputError, DimensionError
from services.dataset.edges import luminance
from utils.validators import require_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _pair(a: np.ndarray, b: np.ndarray):
    require_same_shape(a, b)
    return np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference over all pixels and channels."""
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all pixels and channels."""
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def _gaussian_window(size: int, sigma: float) -> torch.Tensor:
    coords = torch.arange(size, dtype=torch.float64) - size // 2
    g = torch.exp(-coords ** 2 / (2 * sigma ** 2))
    g = g / g.sum()
    return torch.outer(g, g).view(1, 1, size, size)


def _gray(image: np.ndarray) -> np.ndarray:
    if image.ndim == 3 and image.shape[2] == 3:
        return luminance(image)[:, :, 0]
    if image.ndim == 3:
        return image[:, :, 0]
    return image


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    Mean structural similarity of the BT.601 luminance of two images.

    Local statistics use an 11×11 Gaussian window (sigma 1.5) over every
    position where the window fits entirely inside the image.

    Args:
        a: H×W×3 (or gray) image in [0,1]
        b: Image of the same shape

    Returns:
        float: SSIM in [-1, 1]

    Raises:
        DimensionError: If shapes differ or the image is smaller than the window
    """
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    x = torch.from_numpy(np.ascontiguousarray(_gray(a)))[None, None]
    y = torch.from_numpy(np.ascontiguousarray(_gray(b)))[None, None]
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    mu_x = F.conv2d(x, window)
    mu_y = F.conv2d(y, window)
    var_x = F.conv2d(x * x, window) - mu_x ** 2
    var_y = F.conv2d(y * y, window) - mu_y ** 2
    cov_xy = F.conv2d(x * y, window) - mu_x * mu_y

    ssim_map = ((2 * mu_x * mu_y + SSIM_C1) * (2 * cov_xy + SSIM_C2)) / \
               ((mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2))
    return float(ssim_map.mean())


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """
    Global zero-mean normalized cross-correlation.

    Raises:
        DegenerateInputError: If either image has zero variance
    """
    a, b = _pair(a, b)
    da = a - a.mean()
    db = b - b.mean()
    energy_a = np.sum(da * da)
    energy_b = np.sum(db * db)
    if energy_a == 0.0 or energy_b == 0.0:
        raise DegenerateInputError("NCC is undefined for a constant image")
    return float(np.sum(da * db) / np.sqrt(energy_a * energy_b))


METRIC_FUNCTIONS = {
    'RMSE': rmse,
    'MAE': mae,
    'SSIM': ssim,
    'NCC': ncc,
}
