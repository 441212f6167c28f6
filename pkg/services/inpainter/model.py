# services/inpainter/model.py
import copy
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import torch

from models.errors import ConfigError, DimensionError
from models.types import InpainterConfig, MaskedNightSample
from services.dataset.samples import to_image, to_tensor
from services.inpainter.networks import (
    EdgeGenerator, InpaintGenerator, build_edge_discriminator, build_inpaint_discriminator
)
from services.networks import PatchDiscriminator
from utils.checkpoints import load_archive, save_archive

logger = logging.getLogger(__name__)

INPAINTER_STAGES = ('edge', 'inpaint', 'joint')
CHECKPOINT_KIND = 'inpainter'


@dataclass
class EdgeModelState:
    """Edge hallucination generator, its discriminator and hyperparameters."""
    generator: EdgeGenerator
    discriminator: PatchDiscriminator
    hyperparams: Dict[str, float]
    image_size: int
    threshold: float = 0.5


@dataclass
class InpaintModelState:
    """Image completion generator, its discriminator and hyperparameters."""
    generator: InpaintGenerator
    discriminator: PatchDiscriminator
    hyperparams: Dict[str, float]
    image_size: int


@dataclass
class InpainterCheckpoint:
    """
    Both inpainter models plus training provenance.

    `training_stage_completed` is None for a freshly initialised checkpoint.
    """
    edge_model: EdgeModelState
    inpaint_model: InpaintModelState
    training_stage_completed: Optional[str]
    seed: int
    step_count: int
    config: InpainterConfig
    image_size: int
    stage_steps: Dict[str, int] = field(default_factory=dict)

    def copy(self) -> 'InpainterCheckpoint':
        return copy.deepcopy(self)

    def header(self) -> dict:
        return {
            'kind': CHECKPOINT_KIND,
            'stage': self.training_stage_completed,
            'seed': self.seed,
            'step_count': self.step_count,
            'stage_steps': dict(self.stage_steps),
            'hyperparams': asdict(self.config),
            'image_size': self.image_size,
        }


def _edge_hyperparams(config: InpainterConfig) -> Dict[str, float]:
    return {'channels_base': config.channels_base, 'adv_weight': config.adv_weight,
            'feat_match_weight': config.feat_match_weight}


def _inpaint_hyperparams(config: InpainterConfig) -> Dict[str, float]:
    return {'channels_base': config.channels_base, 'adv_weight': config.adv_weight,
            'l1_weight': config.l1_weight}


def build_inpainter(config: InpainterConfig, seed: int, image_size: int) -> InpainterCheckpoint:
    """
    Freshly initialised inpainter; parameters depend only on (config, seed).

    Args:
        config: Inpainter hyperparameters
        seed: Initialisation seed
        image_size: Side length the models will be trained at

    Returns:
        InpainterCheckpoint: Untrained checkpoint
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        edge = EdgeModelState(
            generator=EdgeGenerator(config.channels_base, config.residual_blocks),
            discriminator=build_edge_discriminator(config.channels_base),
            hyperparams=_edge_hyperparams(config),
            image_size=image_size,
            threshold=config.edge_threshold,
        )
        inpaint = InpaintModelState(
            generator=InpaintGenerator(config.channels_base, config.residual_blocks),
            discriminator=build_inpaint_discriminator(config.channels_base),
            hyperparams=_inpaint_hyperparams(config),
            image_size=image_size,
        )
    return InpainterCheckpoint(edge_model=edge, inpaint_model=inpaint, training_stage_completed=None,
                               seed=seed, step_count=0, config=config, image_size=image_size)


def _device_of(module: torch.nn.Module) -> torch.device:
    return next(module.parameters()).device


def _batch(array: np.ndarray, device: torch.device) -> torch.Tensor:
    return to_tensor(np.asarray(array, dtype=np.float64)).unsqueeze(0).to(device)


def _require_size(image_size: int, shape: Tuple[int, int], what: str) -> None:
    if tuple(shape) != (image_size, image_size):
        raise DimensionError(f"{what} expects {image_size}x{image_size} input, got {shape[0]}x{shape[1]}")


def merge_edges(predicted: torch.Tensor, edge_partial: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Predicted edges inside the hole, known edges outside it."""
    return predicted * mask + edge_partial * (1 - mask)


def hallucinate_edges(state: EdgeModelState, sample: MaskedNightSample) -> np.ndarray:
    """
    Complete the edge map of a masked sample.

    Known edges are pasted back outside the hole; inside it the generator output
    is thresholded.

    Args:
        state: Edge model
        sample: Masked sample at the model's size

    Returns:
        np.ndarray: uint8 H×W edge map with values in {0,1}
    """
    _require_size(state.image_size, sample.shape, 'Edge model')
    device = _device_of(state.generator)
    with torch.no_grad():
        soft = state.generator(_batch(sample.gray, device), _batch(sample.edge_partial, device),
                               _batch(sample.mask.grid, device))
    predicted = (soft[0, 0].cpu().numpy() >= state.threshold).astype(np.uint8)
    return np.where(sample.mask.grid == 1, predicted, sample.edge_partial).astype(np.uint8)


def complete_image(state: InpaintModelState, sample: MaskedNightSample, full_edge: np.ndarray) -> np.ndarray:
    """
    Fill the hole of a masked sample guided by a complete edge map.

    Args:
        state: Inpaint model
        sample: Masked sample at the model's size
        full_edge: H×W edge map covering the whole image

    Returns:
        np.ndarray: H×W×3 image in [0,1]; known pixels are the sample's own
    """
    _require_size(state.image_size, sample.shape, 'Inpaint model')
    if full_edge.shape[:2] != sample.shape:
        raise DimensionError(f"Edge map {full_edge.shape[:2]} does not match sample {sample.shape}")
    device = _device_of(state.generator)
    with torch.no_grad():
        raw = state.generator(_batch(sample.incomplete_night, device), _batch(full_edge, device))
    generated = np.clip(to_image(raw[0]), 0.0, 1.0)
    return np.where(sample.mask.grid[:, :, np.newaxis] == 1, generated, sample.incomplete_night)


def inpaint(checkpoint: InpainterCheckpoint, sample: MaskedNightSample) -> Tuple[np.ndarray, np.ndarray]:
    """Hallucinate edges then complete the image; returns (full_edge, completed image)."""
    full_edge = hallucinate_edges(checkpoint.edge_model, sample)
    return full_edge, complete_image(checkpoint.inpaint_model, sample, full_edge)


def l1_term(state: InpaintModelState, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
    """Weighted L1 reconstruction term of the inpaint stage for a tensor batch."""
    edge = merge_edges(batch['edge_gt'], batch['edge_partial'], batch['mask'])
    raw = state.generator(batch['incomplete'], edge)
    return state.hyperparams['l1_weight'] * torch.mean(torch.abs(raw - batch['ground_truth']))


def save_inpainter(path: str, checkpoint: InpainterCheckpoint) -> str:
    """Write the checkpoint archive; save -> load -> save gives identical bytes."""
    params = {
        'edge_generator': checkpoint.edge_model.generator.state_dict(),
        'edge_discriminator': checkpoint.edge_model.discriminator.state_dict(),
        'inpaint_generator': checkpoint.inpaint_model.generator.state_dict(),
        'inpaint_discriminator': checkpoint.inpaint_model.discriminator.state_dict(),
    }
    return save_archive(path, checkpoint.header(), params)


def load_inpainter(path: str, device: Optional[torch.device] = None) -> InpainterCheckpoint:
    """
    Load an inpainter checkpoint archive.

    Raises:
        MissingArtifactError: If the file does not exist
        ConfigError: If the archive holds a different model kind
    """
    header, params = load_archive(path)
    if header.get('kind') != CHECKPOINT_KIND:
        raise ConfigError(f"{path} is a '{header.get('kind')}' checkpoint, expected '{CHECKPOINT_KIND}'")
    config = InpainterConfig(**header['hyperparams'])
    checkpoint = build_inpainter(config, header['seed'], header['image_size'])
    checkpoint.edge_model.generator.load_state_dict(params['edge_generator'])
    checkpoint.edge_model.discriminator.load_state_dict(params['edge_discriminator'])
    checkpoint.inpaint_model.generator.load_state_dict(params['inpaint_generator'])
    checkpoint.inpaint_model.discriminator.load_state_dict(params['inpaint_discriminator'])
    checkpoint.training_stage_completed = header['stage']
    checkpoint.step_count = header['step_count']
    checkpoint.stage_steps = dict(header['stage_steps'])
    if device is not None:
        move_inpainter(checkpoint, device)
    logger.info(f"Loaded inpainter checkpoint {path} (stage {header['stage']}, {header['step_count']} steps)")
    return checkpoint


def move_inpainter(checkpoint: InpainterCheckpoint, device: torch.device) -> InpainterCheckpoint:
    for module in (checkpoint.edge_model.generator, checkpoint.edge_model.discriminator,
                   checkpoint.inpaint_model.generator, checkpoint.inpaint_model.discriminator):
        module.to(device)
    return checkpoint
