# utils/validators.py
from typing import Tuple

import numpy as np

from models.errors import DimensionError, DataError


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str = 'images') -> None:
    """Raise DimensionError unless both arrays share a shape."""
    if a.shape != b.shape:
        raise DimensionError(f"Shape mismatch between {what}: {a.shape} vs {b.shape}")


def require_spatial(image: np.ndarray, hw: Tuple[int, int], what: str = 'image') -> None:
    """Raise DimensionError unless the leading two axes equal `hw`."""
    if tuple(image.shape[:2]) != tuple(hw):
        raise DimensionError(f"{what} is {image.shape[:2]}, expected {tuple(hw)}")


def require_unit_range(image: np.ndarray, what: str = 'image') -> None:
    """Raise DataError for non-finite values or values outside [0,1]."""
    if not np.all(np.isfinite(image)):
        raise DataError(f"{what} contains non-finite values")
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise DataError(f"{what} values must lie in [0,1], got [{image.min()}, {image.max()}]")


def require_rgb(image: np.ndarray, what: str = 'image') -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f"{what} must be H×W×3, got {image.shape}")
