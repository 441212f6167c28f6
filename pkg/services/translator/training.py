# services/translator/training.py
import logging
from typing import Dict, Iterator, Optional

import torch
from torch.utils.data import DataLoader

from models.errors import DataError, DimensionError, TrainingDivergedError
from models.types import TranslatorConfig
from services.dataset.samples import ImageFolder
from services.networks import lsgan_loss
from services.translator.losses import patch_contrastive_loss, sample_patches
from services.translator.model import TranslatorCheckpoint, build_translator, move_translator
from utils.artifact_helpers import LossLog
from utils.seeding import get_device, seed_everything

logger = logging.getLogger(__name__)

STAGE_NAME = 'translator'


def _cycle(loader: DataLoader) -> Iterator[torch.Tensor]:
    while True:
        for batch in loader:
            yield batch


def _domain(directory: str, name: str) -> ImageFolder:
    folder = ImageFolder(directory)
    if len(folder) == 0:
        raise DataError(f"{name} domain {directory} contains no images")
    return folder


def nce_loss(checkpoint: TranslatorCheckpoint, source: torch.Tensor, output: torch.Tensor,
             patch_generator: torch.Generator) -> torch.Tensor:
    """Patch contrastive loss averaged over the configured encoder layers."""
    config = checkpoint.config
    feats_src = checkpoint.generator.encode(source, config.nce_layers)
    feats_out = checkpoint.generator.encode(output, config.nce_layers)
    total = 0.0
    for index, (src, out) in enumerate(zip(feats_src, feats_out)):
        src_patches, patch_ids = sample_patches(src, config.num_patches, generator=patch_generator)
        out_patches, _ = sample_patches(out, config.num_patches, patch_ids=patch_ids)
        keys = checkpoint.projection_head(index, src_patches).detach()
        queries = checkpoint.projection_head(index, out_patches)
        total = total + patch_contrastive_loss(keys, queries, config.temperature)
    return total / len(feats_src)


def train_translator(source_dir: str, target_dir: str, config: TranslatorConfig, *, seed: int,
                     loss_path: Optional[str] = None) -> TranslatorCheckpoint:
    """
    Train the night -> day translator on unpaired image folders.

    Source and target batches are drawn by independent seeded samplers, so no
    pairing between the two folders is assumed.

    Args:
        source_dir: Source-domain PNGs
        target_dir: Target-domain PNGs
        config: Translator hyperparameters
        seed: Seed for initialisation, sampling and patch locations
        loss_path: Where to write the loss CSV

    Returns:
        TranslatorCheckpoint: Trained translator on the cpu

    Raises:
        DataError: If a domain is empty or image sizes differ
        TrainingDivergedError: If a loss term becomes non-finite
    """
    source = _domain(source_dir, 'Source')
    target = _domain(target_dir, 'Target')
    image_size = source[0].shape[-1]
    for folder, name in ((source, 'source'), (target, 'target')):
        shape = tuple(folder[0].shape[-2:])
        if shape != (image_size, image_size):
            raise DimensionError(f"{name} images are {shape}, expected {image_size}x{image_size}")

    checkpoint = build_translator(config, seed, image_size)
    seed_everything(seed)
    source_order, target_order, patch_generator = (torch.Generator(), torch.Generator(), torch.Generator())
    source_order.manual_seed(seed + 1)
    target_order.manual_seed(seed + 2)
    patch_generator.manual_seed(seed + 3)

    device = get_device()
    move_translator(checkpoint, device)
    source_batches = _cycle(DataLoader(source, batch_size=min(config.batch_size, len(source)),
                                       shuffle=True, generator=source_order, num_workers=0))
    target_batches = _cycle(DataLoader(target, batch_size=min(config.batch_size, len(target)),
                                       shuffle=True, generator=target_order, num_workers=0))

    betas = (config.beta1, config.beta2)
    gen_params = list(checkpoint.generator.parameters()) + list(checkpoint.projection_head.parameters())
    opt_g = torch.optim.Adam(gen_params, lr=config.lr, betas=betas)
    opt_d = torch.optim.Adam(checkpoint.discriminator.parameters(), lr=config.lr, betas=betas)
    log = LossLog()

    logger.info(f"Training translator for {config.steps} steps ({len(source)} source, {len(target)} target images)")
    for step in range(1, config.steps + 1):
        x = next(source_batches).to(device)
        y = next(target_batches).to(device)
        fake = checkpoint.generator(x)

        real_logits, _ = checkpoint.discriminator(y)
        fake_logits, _ = checkpoint.discriminator(fake.detach())
        d_loss = (lsgan_loss(real_logits, True) + lsgan_loss(fake_logits, False)) / 2
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        fake_logits, _ = checkpoint.discriminator(fake)
        adv = config.adv_weight * lsgan_loss(fake_logits, True)
        nce = config.nce_weight * nce_loss(checkpoint, x, fake, patch_generator)
        opt_g.zero_grad()
        (adv + nce).backward()
        opt_g.step()

        losses: Dict[str, float] = {'translator_d': d_loss.item(), 'translator_g_adv': adv.item(),
                                    'translator_nce': nce.item()}
        bad = log.non_finite(losses)
        if bad is not None:
            if loss_path:
                log.record(step, losses)
                log.save(loss_path)
            raise TrainingDivergedError(STAGE_NAME, step, bad[0], bad[1])
        if step % config.log_every == 0 or step == config.steps:
            log.record(step, losses)
            summary = ', '.join(f"{k}={v:.4f}" for k, v in sorted(losses.items()))
            logger.info(f"[{STAGE_NAME}] step {step}/{config.steps}: {summary}")

    if loss_path:
        log.save(loss_path)
    move_translator(checkpoint, torch.device('cpu'))
    checkpoint.step_count = config.steps
    return checkpoint
