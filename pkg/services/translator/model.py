# services/translator/model.py
import copy
import logging
import os
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
import torch

from models.errors import ConfigError, DimensionError
from models.types import TranslatorConfig
from services.dataset.samples import to_image, to_tensor
from services.networks import PatchDiscriminator, init_weights
from services.translator.networks import PatchSampleMLP, ResnetTranslator
from utils.checkpoints import load_archive, save_archive
from utils.image_io import list_images, load_image, save_image
from utils.validators import require_rgb

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'translator'


@dataclass
class TranslatorCheckpoint:
    generator: ResnetTranslator
    discriminator: PatchDiscriminator
    projection_head: PatchSampleMLP
    config: TranslatorConfig
    seed: int
    step_count: int
    image_size: int

    @property
    def hyperparams(self) -> dict:
        return {'channels_base': self.config.channels_base, 'nce_weight': self.config.nce_weight,
                'adv_weight': self.config.adv_weight, 'num_patches': self.config.num_patches,
                'temperature': self.config.temperature}

    def modules(self):
        return self.generator, self.discriminator, self.projection_head

    def copy(self) -> 'TranslatorCheckpoint':
        return copy.deepcopy(self)

    def header(self) -> dict:
        return {
            'kind': CHECKPOINT_KIND,
            'seed': self.seed,
            'step_count': self.step_count,
            'hyperparams': asdict(self.config),
            'image_size': self.image_size,
        }


def build_translator(config: TranslatorConfig, seed: int, image_size: int) -> TranslatorCheckpoint:
    """Freshly initialised translator; the generator starts as the identity."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        generator = ResnetTranslator(config.channels_base, config.residual_blocks)
        discriminator = PatchDiscriminator(3, config.channels_base)
        init_weights(discriminator)
        channels = [generator.feature_channels[i] for i in config.nce_layers]
        projection_head = PatchSampleMLP(channels, projection_dim=4 * config.channels_base)
    return TranslatorCheckpoint(generator=generator, discriminator=discriminator,
                                projection_head=projection_head, config=config, seed=seed,
                                step_count=0, image_size=image_size)


def move_translator(checkpoint: TranslatorCheckpoint, device: torch.device) -> TranslatorCheckpoint:
    for module in checkpoint.modules():
        module.to(device)
    return checkpoint


def translate(checkpoint: TranslatorCheckpoint, image: np.ndarray) -> np.ndarray:
    """
    Translate one night image into the day domain.

    Args:
        checkpoint: Trained translator
        image: H×W×3 image in [0,1] at the training size

    Returns:
        np.ndarray: H×W×3 image in [0,1]
    """
    require_rgb(image, 'translator input')
    if image.shape[:2] != (checkpoint.image_size, checkpoint.image_size):
        raise DimensionError(
            f"Translator expects {checkpoint.image_size}x{checkpoint.image_size} input, "
            f"got {image.shape[0]}x{image.shape[1]}")
    device = next(checkpoint.generator.parameters()).device
    with torch.no_grad():
        out = checkpoint.generator(to_tensor(image).unsqueeze(0).to(device))
    return np.clip(to_image(out[0]), 0.0, 1.0)


def translate_batch(checkpoint: TranslatorCheckpoint, source_dir: str, output_dir: str) -> List[str]:
    """Translate every PNG in source_dir into output_dir under the same file name."""
    written = []
    for path in list_images(source_dir):
        target = os.path.join(output_dir, os.path.basename(path))
        save_image(target, translate(checkpoint, load_image(path)))
        written.append(target)
    logger.info(f"Translated {len(written)} images from {source_dir} into {output_dir}")
    return written


def save_translator(path: str, checkpoint: TranslatorCheckpoint) -> str:
    params = {
        'generator': checkpoint.generator.state_dict(),
        'discriminator': checkpoint.discriminator.state_dict(),
        'projection_head': checkpoint.projection_head.state_dict(),
    }
    return save_archive(path, checkpoint.header(), params)


def load_translator(path: str, device: Optional[torch.device] = None) -> TranslatorCheckpoint:
    """
    Load a translator checkpoint archive.

    Raises:
        MissingArtifactError: If the file does not exist
        ConfigError: If the archive holds a different model kind
    """
    header, params = load_archive(path)
    if header.get('kind') != CHECKPOINT_KIND:
        raise ConfigError(f"{path} is a '{header.get('kind')}' checkpoint, expected '{CHECKPOINT_KIND}'")
    checkpoint = build_translator(TranslatorConfig(**header['hyperparams']), header['seed'],
                                  header['image_size'])
    checkpoint.generator.load_state_dict(params['generator'])
    checkpoint.discriminator.load_state_dict(params['discriminator'])
    checkpoint.projection_head.load_state_dict(params['projection_head'])
    checkpoint.step_count = header['step_count']
    if device is not None:
        move_translator(checkpoint, device)
    logger.info(f"Loaded translator checkpoint {path} ({header['step_count']} steps)")
    return checkpoint
