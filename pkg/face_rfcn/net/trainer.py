"""Approximate joint training of the RPN and the position-sensitive heads."""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..errors import TrainingDivergedError
from ..inference.pyramid import resize_for_training
from ..models import Label, LossReport, Sample
from ..ops.anchors import assign_anchors, assign_rois, generate_anchors
from ..ops.geometry import encode_boxes
from ..ops.losses import smooth_l1, softmax_ce, softmax_ce_per_sample
from ..ops.ohem import select_hard_examples, select_random_examples
from ..ops.pooling import (
    ps_avg_pool_backward,
    ps_avg_pool_forward,
    psroi_pool_backward_batch,
    psroi_pool_forward_batch,
)
from ..utils.config import AnchorConfig, PyramidConfig, RunConfig, TrainConfig
from .network import NetworkOutput, NetworkSpec, NetworkState, backward, build_network, forward
from .proposals import (
    flatten_rpn_deltas,
    flatten_rpn_logits,
    propose,
    unflatten_rpn_deltas,
    unflatten_rpn_logits,
)

LOSS_LOG_HEADER = "step,cls_loss,reg_loss,total"


@dataclass
class StepTargets:
    """Sampled training targets of one step; constants for the backward pass."""

    rpn_index: np.ndarray
    rpn_labels: np.ndarray
    rpn_reg_index: np.ndarray
    rpn_reg_targets: np.ndarray
    rois: np.ndarray
    roi_labels: np.ndarray
    roi_reg_index: np.ndarray
    roi_reg_targets: np.ndarray

    @property
    def n_pos(self) -> int:
        return int(np.sum(self.rpn_labels > 0) + np.sum(self.roi_labels > 0))

    @property
    def n_neg(self) -> int:
        return int(np.sum(self.rpn_labels == 0) + np.sum(self.roi_labels == 0))


def _sample(
    labels: np.ndarray,
    losses: np.ndarray,
    use_ohem: bool,
    ratio: int,
    batch_cap: int,
    rng: np.random.Generator,
) -> np.ndarray:
    if use_ohem:
        return select_hard_examples(labels, losses, ratio, batch_cap, rng)
    return select_random_examples(labels, ratio, batch_cap, rng)


def build_targets(
    state: NetworkState,
    image: np.ndarray,
    gts: np.ndarray,
    anchor_cfg: AnchorConfig,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> Tuple[StepTargets, NetworkOutput]:
    """
    Forward pass, anchor and RoI assignment, proposals and hard example selection.

    Returns:
        (targets, forward output); the output can be reused by loss_and_gradients
    """
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    output = forward(image, state)
    feature_h, feature_w = output.feature_shape
    _, height, width = image.shape
    stride = state.spec.feature_stride
    k = state.spec.k

    anchors = generate_anchors(anchor_cfg, feature_h, feature_w)
    anchor_labels = assign_anchors(anchors, gts, anchor_cfg.pos_iou, anchor_cfg.neg_iou)

    candidates = np.flatnonzero(anchor_labels.labels != Label.IGNORE)
    cand_labels = anchor_labels.labels[candidates]
    cand_losses = softmax_ce_per_sample(
        flatten_rpn_logits(output.rpn_logits)[candidates], cand_labels
    )
    picked = _sample(
        cand_labels, cand_losses, cfg.ohem_enabled("rpn"), cfg.ohem_ratio, cfg.rpn_batch, rng
    )
    rpn_index = candidates[picked]
    rpn_labels = anchor_labels.labels[rpn_index].astype(np.int64)
    rpn_reg_index = rpn_index[rpn_labels == Label.POSITIVE]
    rpn_reg_targets = encode_boxes(
        gts[anchor_labels.matched[rpn_reg_index]], anchors[rpn_reg_index]
    )

    proposals = propose(
        output.rpn_logits,
        output.rpn_deltas,
        anchors,
        cfg.rpn_pre_nms_top,
        cfg.rpn_post_nms_top,
        cfg.rpn_nms_thresh,
        (height, width),
        max_log_ratio=cfg.decode_clip,
    )
    rois = proposals.boxes
    if cfg.append_gt_rois and len(gts):
        rois = np.concatenate([rois, gts], axis=0)

    roi_assignment = assign_rois(rois, gts, cfg.roi_pos_iou, cfg.roi_neg_lo)
    candidates = np.flatnonzero(roi_assignment.labels != Label.IGNORE)
    cand_labels = roi_assignment.labels[candidates]
    if len(candidates):
        pooled = psroi_pool_forward_batch(output.cls_maps, rois[candidates], k, 1.0 / stride)
        logits = ps_avg_pool_forward(pooled, state.cls_weights)
        cand_losses = softmax_ce_per_sample(logits, cand_labels)
    else:
        cand_losses = np.zeros(0, dtype=np.float64)
    picked = _sample(
        cand_labels, cand_losses, cfg.ohem_enabled("rfcn"), cfg.ohem_ratio, cfg.rfcn_batch, rng
    )
    roi_index = candidates[picked]
    roi_labels = roi_assignment.labels[roi_index].astype(np.int64)
    roi_reg_index = np.flatnonzero(roi_labels == Label.POSITIVE)
    sampled_rois = rois[roi_index]
    roi_reg_targets = encode_boxes(
        gts[roi_assignment.matched[roi_index[roi_reg_index]]], sampled_rois[roi_reg_index]
    ) / np.asarray(cfg.head_delta_stds, dtype=np.float64)

    targets = StepTargets(
        rpn_index=rpn_index,
        rpn_labels=rpn_labels,
        rpn_reg_index=rpn_reg_index,
        rpn_reg_targets=rpn_reg_targets,
        rois=sampled_rois,
        roi_labels=roi_labels,
        roi_reg_index=roi_reg_index,
        roi_reg_targets=roi_reg_targets,
    )
    logger.debug(
        f"Targets: {len(rpn_index)} anchors ({len(rpn_reg_index)} pos), "
        f"{len(roi_index)} RoIs ({len(roi_reg_index)} pos) from {len(proposals.boxes)} proposals"
    )
    return targets, output


def loss_and_gradients(
    state: NetworkState,
    image: np.ndarray,
    targets: StepTargets,
    lambda_reg: float = 1.0,
    output: Optional[NetworkOutput] = None,
) -> LossReport:
    """
    Loss of ``state`` on fixed targets; parameter gradients are accumulated into ``state``.

    Proposal coordinates are constants: no gradient reaches the RPN through the RoIs.
    """
    if output is None:
        output = forward(image, state)
    k = state.spec.k
    scale = 1.0 / state.spec.feature_stride

    logits = flatten_rpn_logits(output.rpn_logits)
    rpn_cls, grad = softmax_ce(logits[targets.rpn_index], targets.rpn_labels)
    grad_logits = np.zeros_like(logits)
    np.add.at(grad_logits, targets.rpn_index, grad)

    deltas = flatten_rpn_deltas(output.rpn_deltas)
    rpn_reg, grad = smooth_l1(deltas[targets.rpn_reg_index], targets.rpn_reg_targets)
    grad_deltas = np.zeros_like(deltas)
    np.add.at(grad_deltas, targets.rpn_reg_index, lambda_reg * grad)

    head_cls, head_reg = 0.0, 0.0
    grad_cls_maps = np.zeros_like(output.cls_maps)
    grad_box_maps = np.zeros_like(output.box_maps)
    if len(targets.rois):
        pooled = psroi_pool_forward_batch(output.cls_maps, targets.rois, k, scale)
        head_logits = ps_avg_pool_forward(pooled, state.cls_weights)
        head_cls, grad = softmax_ce(head_logits, targets.roi_labels)
        grad_pooled, grad_w = ps_avg_pool_backward(grad, pooled, state.cls_weights)
        state.cls_weights.grad_w += grad_w
        grad_cls_maps = psroi_pool_backward_batch(
            grad_pooled, targets.rois, k, scale, output.cls_maps.shape
        )

    if len(targets.roi_reg_index):
        pos_rois = targets.rois[targets.roi_reg_index]
        pooled = psroi_pool_forward_batch(output.box_maps, pos_rois, k, scale)
        head_deltas = ps_avg_pool_forward(pooled, state.box_weights)
        head_reg, grad = smooth_l1(head_deltas, targets.roi_reg_targets)
        grad_pooled, grad_w = ps_avg_pool_backward(lambda_reg * grad, pooled, state.box_weights)
        state.box_weights.grad_w += grad_w
        grad_box_maps = psroi_pool_backward_batch(
            grad_pooled, pos_rois, k, scale, output.box_maps.shape
        )

    backward(
        state,
        output,
        unflatten_rpn_logits(grad_logits, output.rpn_logits.shape),
        unflatten_rpn_deltas(grad_deltas, output.rpn_deltas.shape),
        grad_cls_maps,
        grad_box_maps,
    )
    return LossReport.combine(
        rpn_cls, rpn_reg, head_cls, head_reg, targets.n_pos, targets.n_neg, lambda_reg
    )


def gradient_norm(state: NetworkState) -> float:
    total = sum(float(np.sum(p.grad * p.grad)) for p in state.parameters() if not p.frozen)
    return float(np.sqrt(total))


def sgd_update(state: NetworkState, cfg: TrainConfig) -> None:
    """
    Momentum SGD: v = momentum * v + lr * (g + wd * p); p -= v.

    Weight decay applies to convolution kernels only. Frozen parameters are left untouched.
    """
    clip = 1.0
    if cfg.grad_clip_norm > 0:
        norm = gradient_norm(state)
        if norm > cfg.grad_clip_norm:
            clip = cfg.grad_clip_norm / norm
            logger.debug(f"Clipping gradient norm {norm:.4g} to {cfg.grad_clip_norm}")

    for param in state.parameters():
        if param.frozen:
            continue
        decay = cfg.weight_decay if param.name.endswith(".weight") else 0.0
        step = cfg.learning_rate * (clip * param.grad + decay * param.value)
        param.momentum[...] = cfg.momentum * param.momentum + step
        param.value[...] -= param.momentum


def train_step(
    image: np.ndarray,
    gts: np.ndarray,
    state: NetworkState,
    anchor_cfg: AnchorConfig,
    cfg: TrainConfig,
    rng: np.random.Generator,
    step: int = 0,
) -> LossReport:
    """
    One training iteration on one image.

    Raises:
        TrainingDivergedError: the loss is not finite; the state is left un-updated
    """
    state.zero_grad()
    targets, output = build_targets(state, image, gts, anchor_cfg, cfg, rng)
    report = loss_and_gradients(state, image, targets, cfg.lambda_reg, output)
    if not report.is_finite():
        logger.error(f"Non-finite loss at step {step}: {report}")
        raise TrainingDivergedError(step, report)
    sgd_update(state, cfg)
    return report


def init_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0])


def train_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1])


class Trainer:
    """Runs ``train.iterations`` steps over a sample set with multi-scale training resize."""

    def __init__(self, config: RunConfig, state: Optional[NetworkState] = None):
        self.config = config
        self.train_cfg: TrainConfig = config.train
        self.anchor_cfg: AnchorConfig = config.anchors
        self.pyramid_cfg: PyramidConfig = config.pyramid
        if state is None:
            spec = NetworkSpec.from_config(config.anchors, config.train)
            state = build_network(spec, init_rng(self.train_cfg.seed))
        state.freeze(self.train_cfg.freeze_stem_layers, self.train_cfg.freeze_box_weights)
        self.state = state
        self.rng = train_rng(self.train_cfg.seed)

    def _schedule(self, num_samples: int):
        """Sample indices for every step, one fresh permutation per pass."""
        step = 0
        while step < self.train_cfg.iterations:
            for index in self.rng.permutation(num_samples):
                if step >= self.train_cfg.iterations:
                    return
                yield step, int(index)
                step += 1

    def run(
        self, samples: Sequence[Sample], loss_log: Optional[Union[str, Path]] = None
    ) -> NetworkState:
        """
        Train on ``samples``; writes one ``step,cls_loss,reg_loss,total`` line per step.

        Raises:
            TrainingDivergedError: a step produced a non-finite loss
        """
        iterations = self.train_cfg.iterations
        if iterations and not samples:
            raise ValueError("Cannot train on an empty sample set")

        log_handle = None
        if loss_log is not None:
            Path(loss_log).parent.mkdir(parents=True, exist_ok=True)
            log_handle = open(loss_log, "w", encoding="utf-8")
            log_handle.write(LOSS_LOG_HEADER + "\n")

        logger.info(f"Training {iterations} iterations on {len(samples)} samples")
        try:
            for step, index in self._schedule(len(samples)):
                sample = samples[index]
                resized = resize_for_training(
                    sample.image,
                    sample.gts,
                    self.pyramid_cfg.train_short_sides,
                    self.rng,
                    stride=self.state.spec.feature_stride,
                )
                report = train_step(
                    resized.image,
                    resized.gts,
                    self.state,
                    self.anchor_cfg,
                    self.train_cfg,
                    self.rng,
                    step,
                )
                if log_handle is not None:
                    log_handle.write(report.log_line(step) + "\n")
                if (step + 1) % self.train_cfg.log_every == 0:
                    logger.info(
                        f"step {step + 1}/{iterations}: total={report.total:.4f} "
                        f"cls={report.cls_loss:.4f} reg={report.reg_loss:.4f}"
                    )
        finally:
            if log_handle is not None:
                log_handle.close()

        logger.info("Training finished")
        return self.state
