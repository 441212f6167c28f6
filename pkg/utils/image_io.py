# utils/image_io.py
import io
import logging
import os
from typing import Optional

import numpy as np
from PIL import Image

from models.errors import MissingArtifactError

logger = logging.getLogger(__name__)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0,1] float image to 8 bits with round-half-up."""
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def quantize(image: np.ndarray) -> np.ndarray:
    """Round-trip an image through 8-bit storage precision."""
    return to_uint8(image).astype(np.float64) / 255.0


def load_image(path: str, grayscale: bool = False) -> np.ndarray:
    """
    Load a PNG as a float64 array in [0,1].

    Args:
        path: Image file path
        grayscale: Decode as a single luminance channel (H×W) instead of RGB (H×W×3)

    Returns:
        np.ndarray: Decoded image
    """
    if not os.path.exists(path):
        raise MissingArtifactError(f"Image not found: {path}")
    with Image.open(path) as img:
        img = img.convert('L' if grayscale else 'RGB')
        return np.asarray(img, dtype=np.float64) / 255.0


def encode_png(image: np.ndarray) -> bytes:
    """Encode a [0,1] image (H×W, H×W×1 or H×W×3) as PNG bytes without metadata chunks."""
    data = to_uint8(image)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    buffer = io.BytesIO()
    Image.fromarray(data).save(buffer, format='PNG')
    return buffer.getvalue()


def save_image(path: str, image: np.ndarray) -> str:
    """Write a [0,1] image as an 8-bit PNG through a temporary file."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, 'wb') as f:
        f.write(encode_png(image))
    os.replace(tmp_path, path)
    logger.debug(f"Saved image {path}")
    return path


def resize_image(image: np.ndarray, size: int, nearest: bool = False) -> np.ndarray:
    """
    Resize to size×size; bilinear for imagery, nearest-neighbour for masks.

    Args:
        image: H×W or H×W×3 array in [0,1]
        size: Output side length
        nearest: Use nearest-neighbour interpolation

    Returns:
        np.ndarray: Resized float64 image
    """
    if image.shape[0] == size and image.shape[1] == size:
        return image
    resample = Image.NEAREST if nearest else Image.BILINEAR
    resized = Image.fromarray(to_uint8(image)).resize((size, size), resample=resample)
    return np.asarray(resized, dtype=np.float64) / 255.0


def list_images(directory: str, extension: Optional[str] = '.png') -> list:
    """Sorted list of image paths in a directory."""
    if not os.path.isdir(directory):
        raise MissingArtifactError(f"Directory not found: {directory}")
    names = sorted(n for n in os.listdir(directory)
                   if extension is None or n.lower().endswith(extension))
    return [os.path.join(directory, n) for n in names]
