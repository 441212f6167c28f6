# utils/artifact_helpers.py
import csv
import hashlib
import io
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Sequence

from models.errors import MissingArtifactError

logger = logging.getLogger(__name__)


def canonical_json(data: Any) -> str:
    """Serialize with sorted keys and a trailing newline so equal data gives equal bytes."""
    return json.dumps(data, sort_keys=True, indent=2) + '\n'


def atomic_write_text(path: str, text: str) -> str:
    """
    Write text through a temporary file and rename it into place.

    Args:
        path: Destination path
        text: File content

    Returns:
        str: The destination path
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    os.replace(tmp_path, path)
    return path


def atomic_write_json(path: str, data: Any) -> str:
    """Write canonical JSON atomically."""
    atomic_write_text(path, canonical_json(data))
    logger.debug(f"Wrote {path}")
    return path


def load_json(path: str) -> Any:
    """
    Load a JSON artifact.

    Raises:
        MissingArtifactError: If the file does not exist
    """
    if not os.path.exists(path):
        raise MissingArtifactError(f"Required file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str) -> str:
    """Content hash of a file, streamed in 1 MiB chunks."""
    if not os.path.exists(path):
        raise MissingArtifactError(f"Cannot hash missing file: {path}")
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_json(data: Any) -> str:
    return sha256_bytes(canonical_json(data).encode('utf-8'))


def format_float(value: float) -> str:
    """repr-precision float text, stable across runs."""
    return repr(float(value))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Write a CSV file atomically; floats are written at full precision."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path: str) -> List[Dict[str, str]]:
    if not os.path.exists(path):
        raise MissingArtifactError(f"Required file not found: {path}")
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


class LossLog:
    """
    Collects (step, loss_name, value) records during training.

    Records are kept in memory and written once per stage so the CSV on disk is
    always complete.
    """

    HEADER = ('step', 'loss_name', 'value')

    def __init__(self):
        self.rows: List[tuple] = []

    def record(self, step: int, losses: Dict[str, float]) -> None:
        for name in sorted(losses):
            self.rows.append((int(step), name, float(losses[name])))

    def non_finite(self, losses: Dict[str, float]):
        """First (name, value) pair that is NaN or infinite, or None."""
        for name in sorted(losses):
            if not math.isfinite(losses[name]):
                return name, losses[name]
        return None

    def save(self, path: str) -> str:
        write_csv(path, self.HEADER, self.rows)
        logger.info(f"Wrote {len(self.rows)} loss records to {path}")
        return path
