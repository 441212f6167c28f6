# services/inpainter/__init__.py
from services.inpainter.model import (
    EdgeModelState, InpaintModelState, InpainterCheckpoint, build_inpainter, complete_image,
    hallucinate_edges, inpaint, l1_term, load_inpainter, save_inpainter
)
from services.inpainter.training import fit_inpainter, train_inpainter

__all__ = [
    'EdgeModelState', 'InpaintModelState', 'InpainterCheckpoint', 'build_inpainter',
    'complete_image', 'fit_inpainter', 'hallucinate_edges', 'inpaint', 'l1_term',
    'load_inpainter', 'save_inpainter', 'train_inpainter',
]
