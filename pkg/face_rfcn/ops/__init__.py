"""Numeric kernels: geometry, anchors, pooling, losses and hard example mining."""
from .anchors import AnchorLabels, assign_anchors, assign_rois, generate_anchors
from .geometry import (
    batched_nms,
    box_iou,
    clip_boxes,
    decode,
    decode_boxes,
    encode,
    encode_boxes,
    iou,
    nms,
    nms_indices,
)
from .losses import smooth_l1, softmax, softmax_ce, softmax_ce_per_sample
from .ohem import ohem_select, select_hard_examples, select_random_examples
from .pooling import (
    PoolWeights,
    global_average_pool,
    ps_avg_pool_backward,
    ps_avg_pool_forward,
    psroi_pool_backward,
    psroi_pool_backward_batch,
    psroi_pool_forward,
    psroi_pool_forward_batch,
)

__all__ = [
    "AnchorLabels",
    "assign_anchors",
    "assign_rois",
    "generate_anchors",
    "batched_nms",
    "box_iou",
    "clip_boxes",
    "decode",
    "decode_boxes",
    "encode",
    "encode_boxes",
    "iou",
    "nms",
    "nms_indices",
    "smooth_l1",
    "softmax",
    "softmax_ce",
    "softmax_ce_per_sample",
    "ohem_select",
    "select_hard_examples",
    "select_random_examples",
    "PoolWeights",
    "global_average_pool",
    "ps_avg_pool_backward",
    "ps_avg_pool_forward",
    "psroi_pool_backward",
    "psroi_pool_backward_batch",
    "psroi_pool_forward",
    "psroi_pool_forward_batch",
]
