# models/schemas.py
from marshmallow import (Schema, fields, validate, validates_schema, ValidationError,
                         post_load, pre_load, pre_dump, EXCLUDE)
from typing import Dict, Any

from models.types import (
    ORDERS, AblationConfig, CannyParams, DataConfig, DatasetManifest, EmbedderConfig,
    InpainterConfig, PipelineConfig, Seeds, TranslatorConfig
)

_positive_int = validate.Range(min=1)
_non_negative_int = validate.Range(min=0)
_unit_interval = validate.Range(min=0.0, max=1.0)


class DataSchema(Schema):
    """Validation schema for raw data locations."""
    pairs_dir = fields.String(required=True)
    masks_dir = fields.String(required=True)
    layout = fields.String(load_default='composite', validate=validate.OneOf(['composite', 'split']))
    day_side = fields.String(load_default='left', validate=validate.OneOf(['left', 'right']))
    missing_is_dark = fields.Boolean(load_default=True)

    @post_load
    def make_config(self, data: Dict[str, Any], **kwargs) -> DataConfig:
        return DataConfig(**data)


class SeedsSchema(Schema):
    """Validation schema for the per-stage seeds."""
    data = fields.Integer(load_default=0)
    stage1 = fields.Integer(load_default=1)
    stage2 = fields.Integer(load_default=2)

    @post_load
    def make_seeds(self, data: Dict[str, Any], **kwargs) -> Seeds:
        return Seeds(**data)


class CannySchema(Schema):
    """Validation schema for Canny parameters."""
    sigma = fields.Float(load_default=2.0, validate=validate.Range(min=0.0))
    low = fields.Float(load_default=0.1, validate=validate.Range(min=0.0, min_inclusive=False))
    high = fields.Float(load_default=0.2, validate=validate.Range(min=0.0, min_inclusive=False))

    @validates_schema
    def validate_thresholds(self, data: Dict[str, Any], **kwargs) -> None:
        """Hysteresis needs low < high."""
        if data['low'] >= data['high']:
            raise ValidationError("canny.low must be smaller than canny.high")

    @post_load
    def make_params(self, data: Dict[str, Any], **kwargs) -> CannyParams:
        return CannyParams(**data)


class InpainterConfigSchema(Schema):
    """Validation schema for the edge-guided inpainter hyperparameters."""
    channels_base = fields.Integer(load_default=32, validate=_positive_int)
    residual_blocks = fields.Integer(load_default=4, validate=_non_negative_int)
    adv_weight = fields.Float(load_default=0.1, validate=validate.Range(min=0.0))
    feat_match_weight = fields.Float(load_default=10.0, validate=validate.Range(min=0.0))
    l1_weight = fields.Float(load_default=100.0, validate=validate.Range(min=0.0))
    lr = fields.Float(load_default=2e-4, validate=validate.Range(min=0.0, min_inclusive=False))
    beta1 = fields.Float(load_default=0.5, validate=_unit_interval)
    beta2 = fields.Float(load_default=0.999, validate=_unit_interval)
    batch_size = fields.Integer(load_default=8, validate=_positive_int)
    edge_steps = fields.Integer(load_default=2000, validate=_non_negative_int)
    inpaint_steps = fields.Integer(load_default=2000, validate=_non_negative_int)
    joint_steps = fields.Integer(load_default=2000, validate=_non_negative_int)
    edge_threshold = fields.Float(load_default=0.5, validate=_unit_interval)
    log_every = fields.Integer(load_default=10, validate=_positive_int)

    @post_load
    def make_config(self, data: Dict[str, Any], **kwargs) -> InpainterConfig:
        return InpainterConfig(**data)


class TranslatorConfigSchema(Schema):
    """Validation schema for the contrastive translator hyperparameters."""
    channels_base = fields.Integer(load_default=32, validate=_positive_int)
    residual_blocks = fields.Integer(load_default=4, validate=_non_negative_int)
    nce_weight = fields.Float(load_default=1.0, validate=validate.Range(min=0.0))
    adv_weight = fields.Float(load_default=1.0, validate=validate.Range(min=0.0))
    num_patches = fields.Integer(load_default=64, validate=validate.Range(min=2))
    temperature = fields.Float(load_default=0.07, validate=validate.Range(min=0.0, min_inclusive=False))
    nce_layers = fields.List(fields.Integer(validate=validate.OneOf([0, 1, 2])),
                             load_default=lambda: [1, 2], validate=validate.Length(min=1))
    lr = fields.Float(load_default=2e-4, validate=validate.Range(min=0.0, min_inclusive=False))
    beta1 = fields.Float(load_default=0.5, validate=_unit_interval)
    beta2 = fields.Float(load_default=0.999, validate=_unit_interval)
    batch_size = fields.Integer(load_default=4, validate=_positive_int)
    steps = fields.Integer(load_default=3000, validate=_non_negative_int)
    log_every = fields.Integer(load_default=10, validate=_positive_int)

    @post_load
    def make_config(self, data: Dict[str, Any], **kwargs) -> TranslatorConfig:
        return TranslatorConfig(**data)


class EmbedderSchema(Schema):
    """Validation schema for the FID feature extractor."""
    kind = fields.String(load_default='projection', validate=validate.OneOf(['projection', 'inception']))
    dim = fields.Integer(load_default=16, validate=_positive_int)
    seed = fields.Integer(load_default=0)
    weights_path = fields.String(load_default=None, allow_none=True)

    @post_load
    def make_config(self, data: Dict[str, Any], **kwargs) -> EmbedderConfig:
        return EmbedderConfig(**data)


class AblationSchema(Schema):
    """Validation schema for the dilation sweep."""
    max_iterations = fields.Integer(load_default=8, validate=_positive_int)
    pair_id = fields.String(load_default=None, allow_none=True)

    @post_load
    def make_config(self, data: Dict[str, Any], **kwargs) -> AblationConfig:
        return AblationConfig(**data)


def _nested_default(schema_cls):
    return lambda: schema_cls().load({})


class PipelineConfigSchema(Schema):
    """Main validation schema for a run configuration file."""
    order = fields.String(load_default='M1', validate=validate.OneOf(ORDERS))
    image_size = fields.Integer(load_default=64, validate=validate.Range(min=16))
    fill = fields.Float(load_default=1.0, validate=_unit_interval)
    data = fields.Nested(DataSchema, required=True)
    seeds = fields.Nested(SeedsSchema, load_default=_nested_default(SeedsSchema))
    canny = fields.Nested(CannySchema, load_default=_nested_default(CannySchema))
    inpainter = fields.Nested(InpainterConfigSchema, load_default=_nested_default(InpainterConfigSchema))
    translator = fields.Nested(TranslatorConfigSchema, load_default=_nested_default(TranslatorConfigSchema))
    embedder = fields.Nested(EmbedderSchema, load_default=_nested_default(EmbedderSchema))
    ablation = fields.Nested(AblationSchema, load_default=_nested_default(AblationSchema))

    @pre_load
    def normalize_order(self, data: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        """Accept m1/m2 as written on the command line."""
        if isinstance(data.get('order'), str):
            data = dict(data, order=data['order'].upper())
        return data

    @validates_schema
    def validate_image_size(self, data: Dict[str, Any], **kwargs) -> None:
        """Generators downsample twice, so the side must divide by 4."""
        if data.get('image_size', 64) % 4:
            raise ValidationError("image_size must be divisible by 4", 'image_size')

    @post_load
    def make_config(self, data: Dict[str, Any], **kwargs) -> PipelineConfig:
        return PipelineConfig(**data)


class SplitsSchema(Schema):
    train = fields.List(fields.String(), required=True)
    val = fields.List(fields.String(), required=True)
    test = fields.List(fields.String(), required=True)


class ManifestSchema(Schema):
    """Validation schema for the dataset manifest written by `prepare`."""

    class Meta:
        unknown = EXCLUDE
        ordered = True

    seed = fields.Integer(required=True)
    image_size = fields.Integer(required=True, validate=_positive_int)
    day_side = fields.String(required=True, validate=validate.OneOf(['left', 'right']))
    fill = fields.Float(required=True, validate=_unit_interval)
    missing_is_dark = fields.Boolean(load_default=True)
    layout = fields.String(load_default='composite', validate=validate.OneOf(['composite', 'split']))
    splits = fields.Nested(SplitsSchema, required=True)
    mask_assignment = fields.Dict(keys=fields.String(), values=fields.String(), required=True)

    @validates_schema
    def validate_disjoint(self, data: Dict[str, Any], **kwargs) -> None:
        """Train, val and test ids must not overlap, and every id needs a mask."""
        splits = data['splits']
        seen = set()
        for name in ('train', 'val', 'test'):
            overlap = seen.intersection(splits[name])
            if overlap:
                raise ValidationError(f"ids appear in more than one split: {sorted(overlap)}", 'splits')
            seen.update(splits[name])
        unassigned = seen.difference(data['mask_assignment'])
        if unassigned:
            raise ValidationError(f"ids without a mask: {sorted(unassigned)}", 'mask_assignment')

    @pre_dump
    def flatten_manifest(self, manifest: DatasetManifest, **kwargs) -> Dict[str, Any]:
        return {
            'seed': manifest.seed,
            'image_size': manifest.image_size,
            'day_side': manifest.day_side,
            'fill': manifest.fill,
            'missing_is_dark': manifest.missing_is_dark,
            'layout': manifest.layout,
            'splits': {'train': manifest.train_ids, 'val': manifest.val_ids, 'test': manifest.test_ids},
            'mask_assignment': manifest.mask_assignment,
        }

    @post_load
    def make_manifest(self, data: Dict[str, Any], **kwargs) -> DatasetManifest:
        splits = data.pop('splits')
        return DatasetManifest(train_ids=splits['train'], val_ids=splits['val'],
                               test_ids=splits['test'], **data)
