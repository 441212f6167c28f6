# models/errors.py


class InpaintingError(Exception):
    """Base class for every error the toolkit raises on purpose."""
    category = 'internal'
    exit_code = 1


class ConfigError(InpaintingError):
    """Run configuration is missing keys or holds invalid values."""
    category = 'config'
    exit_code = 3


class MissingArtifactError(InpaintingError):
    """A file the requested step depends on is not in the run directory."""
    category = 'missing_artifact'
    exit_code = 4


class DataError(InpaintingError):
    """Input imagery, masks or ids violate a data contract."""
    category = 'data'
    exit_code = 5


class DimensionError(DataError):
    """Array shapes disagree or an image has an unusable size."""


class DegenerateInputError(DataError):
    """Input is valid in shape but the requested measure is undefined for it."""


class DuplicateIdError(DataError):
    """Pair ids are expected to be unique."""


class MissingGroundTruthError(DataError):
    """Ground-truth images are missing for some pair ids."""

    def __init__(self, missing_ids):
        self.missing_ids = sorted(missing_ids)
        super().__init__(f"Missing ground truth for ids: {', '.join(self.missing_ids)}")


class TrainingDivergedError(InpaintingError):
    """A logged loss term became NaN or infinite."""
    category = 'training_diverged'
    exit_code = 6

    def __init__(self, stage: str, step: int, loss_name: str, value: float):
        self.stage = stage
        self.step = step
        self.loss_name = loss_name
        self.value = value
        super().__init__(f"Non-finite loss in stage '{stage}' at step {step}: {loss_name}={value}")


class StageOrderError(InpaintingError):
    """A training stage ran without its prerequisite, or checkpoints do not match the order."""
    category = 'stage_order'
    exit_code = 7
