# services/translator/__init__.py
from services.translator.losses import contrastive_from_similarities, patch_contrastive_loss, sample_patches
from services.translator.model import (
    TranslatorCheckpoint, build_translator, load_translator, save_translator, translate, translate_batch
)
from services.translator.training import train_translator

__all__ = [
    'TranslatorCheckpoint', 'build_translator', 'contrastive_from_similarities', 'load_translator',
    'patch_contrastive_loss', 'sample_patches', 'save_translator', 'train_translator', 'translate',
    'translate_batch',
]
