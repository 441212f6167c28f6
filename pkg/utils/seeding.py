# utils/seeding.py
import logging
import os
import random

import numpy as np
import torch

from config import active_config

logger = logging.getLogger(__name__)


def seed_everything(seed: int) -> torch.Generator:
    """
    Seed python, numpy and torch, and return a torch.Generator for data order.

    Args:
        seed: Integer seed

    Returns:
        torch.Generator: Generator seeded with the same value
    """
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    if active_config.DETERMINISTIC:
        os.environ.setdefault('CUBLAS_WORKSPACE_CONFIG', ':4096:8')
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.backends.cudnn.benchmark = False
    generator = torch.Generator()
    generator.manual_seed(seed)
    logger.debug(f"Seeded RNGs with {seed}")
    return generator


def get_device() -> torch.device:
    """Compute device selected through INPAINT_DEVICE."""
    device = active_config.DEVICE
    if device.startswith('cuda') and not torch.cuda.is_available():
        logger.warning(f"Device {device} requested but CUDA is unavailable; using cpu")
        device = 'cpu'
    return torch.device(device)
