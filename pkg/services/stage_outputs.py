# services/stage_outputs.py
import logging

import numpy as np

from models.types import Mask, StageOutputs
from services.run_layout import RunLayout
from utils.image_io import load_image, save_image

logger = logging.getLogger(__name__)


def save_stage_outputs(layout: RunLayout, outputs: StageOutputs) -> None:
    """Persist the three phase images and the mask (white = missing) of one sample."""
    save_image(layout.output_path('input', outputs.pair_id), outputs.input_image)
    save_image(layout.output_path('intermediate', outputs.pair_id), outputs.intermediate_image)
    save_image(layout.output_path('final', outputs.pair_id), outputs.final_image)
    save_image(layout.output_path('mask', outputs.pair_id), outputs.mask.grid.astype(np.float64))


def load_stage_outputs(layout: RunLayout, pair_id: str) -> StageOutputs:
    """Decode the persisted phase images of one sample."""
    mask = load_image(layout.output_path('mask', pair_id), grayscale=True) > 0.5
    return StageOutputs(
        pair_id=pair_id,
        input_image=load_image(layout.output_path('input', pair_id)),
        intermediate_image=load_image(layout.output_path('intermediate', pair_id)),
        final_image=load_image(layout.output_path('final', pair_id)),
        mask=Mask(mask.astype(np.uint8)),
    )
