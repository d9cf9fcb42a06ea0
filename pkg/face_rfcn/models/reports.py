"""Pydantic models for training reports and evaluation results."""
import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class LossReport(BaseModel):
    """Losses of one training step."""

    cls_loss: float
    reg_loss: float
    total: float
    n_pos: int = Field(..., ge=0)
    n_neg: int = Field(..., ge=0)
    lambda_reg: float = Field(default=1.0, ge=0.0)
    rpn_cls: float = 0.0
    rpn_reg: float = 0.0
    head_cls: float = 0.0
    head_reg: float = 0.0

    @classmethod
    def combine(
        cls,
        rpn_cls: float,
        rpn_reg: float,
        head_cls: float,
        head_reg: float,
        n_pos: int,
        n_neg: int,
        lambda_reg: float,
    ) -> "LossReport":
        cls_loss = rpn_cls + head_cls
        reg_loss = rpn_reg + head_reg
        return cls(
            cls_loss=cls_loss,
            reg_loss=reg_loss,
            total=cls_loss + lambda_reg * reg_loss,
            n_pos=n_pos,
            n_neg=n_neg,
            lambda_reg=lambda_reg,
            rpn_cls=rpn_cls,
            rpn_reg=rpn_reg,
            head_cls=head_cls,
            head_reg=head_reg,
        )

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.cls_loss, self.reg_loss, self.total))

    def log_line(self, step: int) -> str:
        return f"{step},{self.cls_loss!r},{self.reg_loss!r},{self.total!r}"


class MatchResult(BaseModel):
    """Greedy matching of one image's detections, in descending score order, to its gts."""

    scores: List[float] = Field(default_factory=list, description="Detection scores, descending")
    true_positive: List[bool] = Field(default_factory=list, description="Per-detection TP flag")
    matched_gt: List[Optional[int]] = Field(
        default_factory=list, description="Gt index per detection"
    )
    gt_matched: List[bool] = Field(default_factory=list, description="Per-gt matched flag")

    @model_validator(mode="after")
    def validate_counts(self):
        if not (len(self.scores) == len(self.true_positive) == len(self.matched_gt)):
            raise ValueError("Per-detection lists must have equal length")
        matched = [g for g in self.matched_gt if g is not None]
        if len(matched) != len(set(matched)):
            raise ValueError("A ground truth can be matched at most once")
        if sum(self.true_positive) != sum(self.gt_matched):
            raise ValueError("TP count must equal matched gt count")
        return self

    @property
    def num_tp(self) -> int:
        return sum(self.true_positive)

    @property
    def num_fp(self) -> int:
        return len(self.true_positive) - self.num_tp

    @property
    def num_gts(self) -> int:
        return len(self.gt_matched)


class Curve(BaseModel):
    """Ordered (x, y) sweep points plus scalar summaries."""

    kind: str = Field(..., description="'pr' or 'roc'")
    x_label: str
    y_label: str
    points: List[Tuple[float, float]] = Field(default_factory=list)
    summary: Dict[str, float] = Field(default_factory=dict)


class BucketResult(BaseModel):
    """Evaluation of one difficulty bucket."""

    name: str
    num_gts: int
    ap: Optional[float] = None
    recall: Optional[float] = None


class EvalSummary(BaseModel):
    """Dataset-level evaluation summary written next to the curve files."""

    iou_thresh: float
    num_images: int
    num_detections: int
    buckets: List[BucketResult] = Field(default_factory=list)
    tpr_at_fp: Dict[str, float] = Field(default_factory=dict)

    def bucket(self, name: str) -> Optional[BucketResult]:
        for result in self.buckets:
            if result.name == name:
                return result
        return None


class BenchReport(BaseModel):
    """Outcome of the desk-scale benchmark."""

    iterations: int
    train_images: int
    test_images: int
    single_scale: EvalSummary
    pyramid: EvalSummary
    cls_weight_std: float = Field(..., description="Std of the class-branch position weights")
    uniform_ap: Optional[float] = Field(
        default=None, description="All-bucket AP with class-branch weights frozen at uniform"
    )
    warnings: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.warnings
