# models/types.py
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.errors import DimensionError

ORDERS = ('M1', 'M2')
PHASES = ('Pre', 'Intermediate', 'Post')
PER_SAMPLE_METRICS = ('RMSE', 'MAE', 'SSIM', 'NCC')
ALL_METRICS = PER_SAMPLE_METRICS + ('FID',)

LOWER_BETTER = 'lower_better'
HIGHER_BETTER = 'higher_better'

METRIC_DIRECTIONS = {
    'RMSE': LOWER_BETTER,
    'MAE': LOWER_BETTER,
    'SSIM': HIGHER_BETTER,
    'NCC': HIGHER_BETTER,
    'FID': LOWER_BETTER,
}

HISTOGRAM_RANGES = {
    'RMSE': (0.0, 1.0),
    'MAE': (0.0, 1.0),
    'SSIM': (-1.0, 1.0),
    'NCC': (-1.0, 1.0),
}


@dataclass
class ScenePair:
    """Registered night image and day ground truth of one scene, H×W×3 in [0,1]."""
    id: str
    night: np.ndarray
    day: np.ndarray

    def __post_init__(self):
        if self.night.shape != self.day.shape:
            raise DimensionError(
                f"Pair {self.id}: night {self.night.shape} and day {self.day.shape} differ")


@dataclass
class Mask:
    """Binary H×W grid, 1 = missing pixel, 0 = known pixel."""
    grid: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.uint8)
        if self.grid.ndim != 2:
            raise DimensionError(f"Mask grid must be 2-D, got shape {self.grid.shape}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grid.shape

    @property
    def coverage(self) -> float:
        return float(self.grid.sum()) / float(self.grid.size)


@dataclass
class MaskedNightSample:
    """
    Masked input with every auxiliary channel the inpainter consumes.

    `ground_truth` is the complete image that supervises the inpainter; for the
    inpaint-first order it is the complete night image.
    """
    pair_id: str
    incomplete_night: np.ndarray
    mask: Mask
    gray: np.ndarray
    edge_partial: np.ndarray
    edge_gt: np.ndarray
    ground_truth: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape


@dataclass
class DatasetManifest:
    train_ids: List[str]
    val_ids: List[str]
    test_ids: List[str]
    mask_assignment: Dict[str, str]
    seed: int
    image_size: int
    day_side: str = 'left'
    fill: float = 1.0
    missing_is_dark: bool = True
    layout: str = 'composite'

    @property
    def all_ids(self) -> List[str]:
        return self.train_ids + self.val_ids + self.test_ids

    def split(self, name: str) -> List[str]:
        return {'train': self.train_ids, 'val': self.val_ids, 'test': self.test_ids}[name]


@dataclass
class StageOutputs:
    """Per-sample images kept for the three evaluation phases."""
    pair_id: str
    input_image: np.ndarray
    intermediate_image: np.ndarray
    final_image: np.ndarray
    mask: Mask


@dataclass
class MetricValue:
    name: str
    value: Optional[float]

    @property
    def direction(self) -> str:
        return METRIC_DIRECTIONS[self.name]


@dataclass
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> Dict[str, List[float]]:
        return {'bin_edges': [float(e) for e in self.bin_edges],
                'counts': [int(c) for c in self.counts]}


@dataclass
class PhaseReport:
    phase: str
    per_sample: Dict[str, Dict[str, float]]
    fid: Optional[float]
    summary: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    histograms: Dict[str, Histogram] = field(default_factory=dict)

    @property
    def ids(self) -> List[str]:
        return sorted(self.per_sample)


@dataclass
class DataConfig:
    pairs_dir: str
    masks_dir: str
    layout: str = 'composite'
    day_side: str = 'left'
    missing_is_dark: bool = True


@dataclass
class Seeds:
    data: int = 0
    stage1: int = 1
    stage2: int = 2


@dataclass
class CannyParams:
    sigma: float = 2.0
    low: float = 0.1
    high: float = 0.2


@dataclass
class InpainterConfig:
    channels_base: int = 32
    residual_blocks: int = 4
    adv_weight: float = 0.1
    feat_match_weight: float = 10.0
    l1_weight: float = 100.0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 8
    edge_steps: int = 2000
    inpaint_steps: int = 2000
    joint_steps: int = 2000
    edge_threshold: float = 0.5
    log_every: int = 10

    def steps_for(self, stage: str) -> int:
        return {'edge': self.edge_steps, 'inpaint': self.inpaint_steps,
                'joint': self.joint_steps}[stage]


@dataclass
class TranslatorConfig:
    channels_base: int = 32
    residual_blocks: int = 4
    nce_weight: float = 1.0
    adv_weight: float = 1.0
    num_patches: int = 64
    temperature: float = 0.07
    nce_layers: List[int] = field(default_factory=lambda: [1, 2])
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 4
    steps: int = 3000
    log_every: int = 10


@dataclass
class EmbedderConfig:
    kind: str = 'projection'
    dim: int = 16
    seed: int = 0
    weights_path: Optional[str] = None


@dataclass
class AblationConfig:
    max_iterations: int = 8
    pair_id: Optional[str] = None


@dataclass
class PipelineConfig:
    """Effective run configuration; serialized next to every artifact it produces."""
    data: DataConfig
    order: str = 'M1'
    image_size: int = 64
    fill: float = 1.0
    seeds: Seeds = field(default_factory=Seeds)
    canny: CannyParams = field(default_factory=CannyParams)
    inpainter: InpainterConfig = field(default_factory=InpainterConfig)
    translator: TranslatorConfig = field(default_factory=TranslatorConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    @property
    def stage1_config(self):
        return self.inpainter if self.order == 'M1' else self.translator

    @property
    def stage2_config(self):
        return self.translator if self.order == 'M1' else self.inpainter
