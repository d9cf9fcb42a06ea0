"""Configuration management: run config sections, environment overrides and the key=value file."""
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from loguru import logger
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..errors import ConfigError
from .helpers import empty_to_none, format_value, parse_list, strictly_increasing

DEFAULT_DECODE_CLIP = math.log(1000.0 / 16)
TOP_LEVEL_KEYS = ("log_level", "log_file")

FloatList = Annotated[List[float], BeforeValidator(parse_list)]
IntList = Annotated[List[int], BeforeValidator(parse_list)]
IntRange = Annotated[Tuple[int, int], BeforeValidator(parse_list)]
OptionalPath = Annotated[Optional[str], BeforeValidator(empty_to_none)]


class AnchorConfig(BaseModel):
    """Anchor grid and RPN assignment thresholds."""

    model_config = ConfigDict(extra="forbid")

    base_stride: int = Field(default=8, gt=0, description="Feature stride in pixels")
    scales: FloatList = Field(
        default=[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        description="Anchor side in units of base_stride",
    )
    aspect_ratios: FloatList = Field(default=[1.0], description="Anchor h/w ratios")
    pos_iou: float = Field(default=0.7, ge=0.0, le=1.0)
    neg_iou: float = Field(default=0.3, ge=0.0, le=1.0)

    @field_validator("scales")
    @classmethod
    def validate_scales(cls, v):
        if not v:
            raise ValueError("At least one anchor scale must be specified")
        if any(s <= 0 for s in v):
            raise ValueError("Anchor scales must be positive")
        if not strictly_increasing(v):
            raise ValueError("Anchor scales must be strictly increasing")
        return v

    @field_validator("aspect_ratios")
    @classmethod
    def validate_ratios(cls, v):
        if not v:
            raise ValueError("At least one aspect ratio must be specified")
        if any(r <= 0 for r in v):
            raise ValueError("Aspect ratios must be positive")
        return v

    @model_validator(mode="after")
    def validate_thresholds(self):
        if self.neg_iou > self.pos_iou:
            raise ValueError("neg_iou must not exceed pos_iou")
        return self

    @property
    def num_anchors(self) -> int:
        return len(self.scales) * len(self.aspect_ratios)


class TrainConfig(BaseModel):
    """Optimizer, sampling and architecture settings for a training run."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    learning_rate: float = Field(default=0.005, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=5e-4, ge=0.0)
    iterations: int = Field(default=3000, ge=0)
    rpn_batch: int = Field(default=256, ge=1)
    rfcn_batch: int = Field(default=128, ge=1)
    ohem_ratio: int = Field(default=3, ge=1)
    ohem_stages: Literal["both", "rpn", "rfcn"] = "both"
    atrous: bool = True
    k: int = Field(default=3, ge=1, description="Position-sensitive pooling grid size")
    num_classes: int = Field(default=1, ge=1, description="Foreground classes")
    lambda_reg: float = Field(default=1.0, ge=0.0)
    roi_pos_iou: float = Field(default=0.5, ge=0.0, le=1.0)
    roi_neg_lo: float = Field(default=0.1, ge=0.0, le=1.0)
    rpn_pre_nms_top: int = Field(default=600, ge=1)
    rpn_post_nms_top: int = Field(default=128, ge=1)
    rpn_nms_thresh: float = Field(default=0.7, ge=0.0, le=1.0)
    append_gt_rois: bool = True
    head_delta_stds: FloatList = Field(default=[0.1, 0.1, 0.2, 0.2])
    decode_clip: float = Field(default=DEFAULT_DECODE_CLIP, gt=0.0)
    freeze_stem_layers: int = Field(default=0, ge=0, le=6)
    freeze_box_weights: bool = False
    grad_clip_norm: float = Field(default=10.0, ge=0.0)
    log_every: int = Field(default=50, ge=1)

    @field_validator("head_delta_stds")
    @classmethod
    def validate_stds(cls, v):
        if len(v) != 4 or any(s <= 0 for s in v):
            raise ValueError("head_delta_stds must be four positive values")
        return v

    @model_validator(mode="after")
    def validate_roi_band(self):
        if self.roi_neg_lo > self.roi_pos_iou:
            raise ValueError("roi_neg_lo must not exceed roi_pos_iou")
        return self

    @property
    def feature_stride(self) -> int:
        return 8 if self.atrous else 16

    def ohem_enabled(self, stage: str) -> bool:
        return self.ohem_stages in ("both", stage)


class DetectConfig(BaseModel):
    """Inference-time proposal and output filtering."""

    model_config = ConfigDict(extra="forbid")

    score_thresh: float = Field(default=0.05, ge=0.0)
    nms_thresh: float = Field(default=0.3, ge=0.0, le=1.0)
    rpn_pre_nms_top: int = Field(default=600, ge=1)
    rpn_post_nms_top: int = Field(default=100, ge=1)
    rpn_nms_thresh: float = Field(default=0.7, ge=0.0, le=1.0)
    min_size: float = Field(default=0.0, ge=0.0)


class PyramidConfig(BaseModel):
    """Multi-scale training sizes and the test-time image pyramid."""

    model_config = ConfigDict(extra="forbid")

    train_short_sides: IntList = Field(default=[96, 128])
    test_scales: FloatList = Field(default=[0.5, 1.0, 2.0])
    merge_nms_thresh: float = Field(default=0.3, ge=0.0, le=1.0)
    workers: int = Field(default=1, ge=1)

    @field_validator("train_short_sides", "test_scales")
    @classmethod
    def validate_positive(cls, v):
        if not v:
            raise ValueError("At least one value must be specified")
        if any(s <= 0 for s in v):
            raise ValueError("Values must be positive")
        return v


class DatasetSpec(BaseModel):
    """Synthetic dataset parameters."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    count: int = Field(default=500, ge=0)
    image_size: int = Field(default=128, ge=8)
    targets_per_image: IntRange = (1, 4)
    target_size: IntRange = (4, 32)
    clutter: int = Field(default=3, ge=0, description="Maximum clutter rectangles per image")

    @field_validator("targets_per_image")
    @classmethod
    def validate_targets(cls, v):
        lo, hi = v
        if lo < 0 or hi < lo:
            raise ValueError("targets_per_image must be a non-empty range of counts")
        return v

    @model_validator(mode="after")
    def validate_sizes(self):
        lo, hi = self.target_size
        if lo < 1 or hi < lo:
            raise ValueError("target_size must be a non-empty range of positive sizes")
        if hi > self.image_size:
            raise ValueError("target_size upper bound exceeds image_size")
        return self


class EvalConfig(BaseModel):
    """Matching, curve checkpoints, difficulty buckets and benchmark targets."""

    model_config = ConfigDict(extra="forbid")

    iou_thresh: float = Field(default=0.5, ge=0.0, le=1.0)
    fp_checkpoints: IntList = Field(default=[10, 50, 100])
    hard_max_side: float = Field(default=8.0, gt=0.0)
    medium_max_side: float = Field(default=16.0, gt=0.0)
    bench_test_count: int = Field(default=100, ge=1)
    bench_min_easy_ap: float = Field(default=0.85, ge=0.0, le=1.0)
    bench_min_hard_ap: float = Field(default=0.5, ge=0.0, le=1.0)
    bench_min_weight_std: float = Field(default=1e-3, ge=0.0)

    @field_validator("fp_checkpoints")
    @classmethod
    def validate_checkpoints(cls, v):
        if any(c < 0 for c in v):
            raise ValueError("FP checkpoints must be non-negative")
        return sorted(v)

    @model_validator(mode="after")
    def validate_buckets(self):
        if self.medium_max_side < self.hard_max_side:
            raise ValueError("medium_max_side must be at least hard_max_side")
        return self


class PathsConfig(BaseModel):
    """File locations used by the commands."""

    model_config = ConfigDict(extra="forbid")

    data_dir: str = "data"
    train_annotations: OptionalPath = None
    checkpoint: str = "checkpoints/model.psd"
    loss_log: str = "checkpoints/loss.csv"


class RunConfig(BaseSettings):
    """Configuration settings for a Face R-FCN run."""

    anchors: AnchorConfig = Field(default_factory=AnchorConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    detect: DetectConfig = Field(default_factory=DetectConfig)
    pyramid: PyramidConfig = Field(default_factory=PyramidConfig)
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    log_level: str = "INFO"
    log_file: OptionalPath = None

    model_config = SettingsConfigDict(
        env_prefix="FACE_RFCN_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @model_validator(mode="after")
    def validate_stride(self):
        expected = self.train.feature_stride
        if self.anchors.base_stride != expected:
            raise ValueError(
                f"anchors.base_stride={self.anchors.base_stride} does not match the network "
                f"feature stride {expected} (train.atrous={self.train.atrous})"
            )
        return self


def section_names() -> List[str]:
    return [name for name in RunConfig.model_fields if name not in TOP_LEVEL_KEYS]


def _section_model(name: str) -> type:
    return RunConfig.model_fields[name].annotation


def parse_config_text(text: str) -> Tuple[Dict[str, Any], Dict[Tuple[str, ...], int]]:
    """Parse ``section.key = value`` lines into nested values plus a key -> line number map."""
    values: Dict[str, Any] = {}
    lines: Dict[Tuple[str, ...], int] = {}
    sections = section_names()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got '{raw.strip()}'", line_no)

        key, value = (part.strip() for part in line.split("=", 1))
        if "." in key:
            section, field = key.split(".", 1)
            if section not in sections:
                raise ConfigError(f"unknown section '{section}' in '{raw.strip()}'", line_no)
            if field not in _section_model(section).model_fields:
                raise ConfigError(f"unknown key '{key}' in '{raw.strip()}'", line_no)
            if (section, field) in lines:
                raise ConfigError(f"duplicate key '{key}'", line_no)
            values.setdefault(section, {})[field] = value
            lines[(section, field)] = line_no
        else:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"unknown key '{key}' in '{raw.strip()}'", line_no)
            values[key] = value
            lines[(key,)] = line_no

    return values, lines


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Build a RunConfig from an optional run config file, the environment and defaults."""
    values: Dict[str, Any] = {}
    lines: Dict[Tuple[str, ...], int] = {}

    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {config_path}")
        values, lines = parse_config_text(config_path.read_text(encoding="utf-8"))
        logger.debug(f"Read {len(lines)} config keys from {config_path}")

    try:
        return RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(str(part) for part in error["loc"])
        line_no = None
        for length in range(len(loc), 0, -1):
            if loc[:length] in lines:
                line_no = lines[loc[:length]]
                break
        where = ".".join(loc) if loc else "config"
        raise ConfigError(f"{where}: {error['msg']}", line_no) from e


def render_run_config(config: RunConfig) -> str:
    """Render every setting of ``config`` in the run config file syntax."""
    out = ["# face-rfcn run configuration"]
    for key in TOP_LEVEL_KEYS:
        out.append(f"{key} = {format_value(getattr(config, key))}")
    for section in section_names():
        out.append("")
        model = getattr(config, section)
        for field in type(model).model_fields:
            out.append(f"{section}.{field} = {format_value(getattr(model, field))}")
    return "\n".join(out) + "\n"


def write_run_config(config: RunConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(render_run_config(config), encoding="utf-8")
