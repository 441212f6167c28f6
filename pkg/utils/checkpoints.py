# utils/checkpoints.py
import io
import json
import logging
import os
from typing import Any, Dict, Tuple

import torch

from models.errors import MissingArtifactError
from utils.artifact_helpers import canonical_json

logger = logging.getLogger(__name__)


def _cpu_state(state_dict: Dict[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
    return {k: v.detach().cpu().contiguous().clone() for k, v in state_dict.items()}


def save_archive(path: str, header: Dict[str, Any], params: Dict[str, Dict[str, torch.Tensor]]) -> str:
    """
    Save a checkpoint archive: canonical JSON header plus named parameter sets.

    Args:
        path: Destination file
        header: JSON-serializable metadata
        params: Mapping of module name to state_dict

    Returns:
        str: The destination path
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    payload = {
        'header': canonical_json(header),
        'params': {name: _cpu_state(state) for name, state in sorted(params.items())},
    }
    # serialized in memory so the bytes do not depend on the file name
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, 'wb') as f:
        f.write(buffer.getvalue())
    os.replace(tmp_path, path)
    logger.info(f"Saved checkpoint {path}")
    return path


def load_archive(path: str) -> Tuple[Dict[str, Any], Dict[str, Dict[str, torch.Tensor]]]:
    """Load a checkpoint archive written by save_archive."""
    if not os.path.exists(path):
        raise MissingArtifactError(f"Checkpoint not found: {path}")
    payload = torch.load(path, map_location='cpu')
    return json.loads(payload['header']), payload['params']
