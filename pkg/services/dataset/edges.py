# services/dataset/edges.py
import logging
from typing import Optional

import numpy as np
from skimage import feature

from models.errors import DataError
from utils.validators import require_rgb

logger = logging.getLogger(__name__)

# ITU-R BT.601 luma weights
BT601_WEIGHTS = np.array([0.299, 0.587, 0.114])


def luminance(image: np.ndarray) -> np.ndarray:
    """
    Grayscale version of an RGB image.

    Args:
        image: H×W×3 array in [0,1]

    Returns:
        np.ndarray: H×W×1 luminance
    """
    require_rgb(image)
    return (image @ BT601_WEIGHTS)[:, :, np.newaxis]


def canny_edges(gray: np.ndarray, sigma: float = 2.0, low: float = 0.1, high: float = 0.2,
                valid: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Binary Canny edge map of a grayscale image.

    Gaussian smoothing at `sigma`, Sobel gradient magnitude, non-maximum
    suppression and hysteresis between `low` and `high` (absolute thresholds on
    the gradient of a [0,1] image).

    Args:
        gray: H×W or H×W×1 array in [0,1]
        sigma: Gaussian smoothing scale
        low: Lower hysteresis threshold
        high: Upper hysteresis threshold
        valid: Optional boolean H×W region; pixels outside it never become edges
            and do not leak smoothing into the region

    Returns:
        np.ndarray: uint8 H×W map with values in {0,1}
    """
    if gray.ndim == 3:
        gray = gray[:, :, 0]
    if not np.all(np.isfinite(gray)):
        raise DataError("Canny input contains non-finite values")
    if not 0.0 < low < high:
        raise DataError(f"Canny thresholds must satisfy 0 < low < high, got low={low}, high={high}")
    edges = feature.canny(gray, sigma=sigma, low_threshold=low, high_threshold=high,
                          mask=None if valid is None else valid.astype(bool), mode='nearest')
    return edges.astype(np.uint8)
