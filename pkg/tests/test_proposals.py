"""Tests for RPN output layout and proposal generation."""
import math

import numpy as np
import pytest

from face_rfcn.errors import ShapeError
from face_rfcn.net import propose
from face_rfcn.net.proposals import (
    flatten_rpn_deltas,
    flatten_rpn_logits,
    unflatten_rpn_deltas,
    unflatten_rpn_logits,
)
from face_rfcn.ops.anchors import generate_anchors
from face_rfcn.ops.geometry import decode_boxes

from . import oracles


def reference_proposals(logits, deltas, anchors, pre, post, thresh, shape):
    """Step-by-step pipeline over flattened rows."""
    height, width = shape
    rows = []
    boxes = decode_boxes(deltas, anchors, clip_window=shape)
    for i, (l0, l1) in enumerate(logits):
        score = 1.0 / (1.0 + math.exp(l0 - l1))
        x1, y1, x2, y2 = boxes[i]
        assert 0 <= x1 <= x2 <= width and 0 <= y1 <= y2 <= height
        if x2 - x1 > 0 and y2 - y1 > 0:
            rows.append((score, i))
    rows.sort(key=lambda r: (-r[0], r[1]))
    rows = rows[:pre]
    ranked = [i for _, i in rows]
    keep = oracles.greedy_nms(boxes[ranked], [s for s, _ in rows], thresh)
    return [ranked[k] for k in keep][:post]


class TestLayout:
    """Channel layout of RPN outputs."""

    def test_flatten_order(self):
        a, h, w = 3, 2, 4
        logits = np.zeros((2 * a, h, w))
        logits[2 * 2 + 1, 1, 3] = 7.0
        flat = flatten_rpn_logits(logits)
        assert flat.shape == (h * w * a, 2)
        assert flat[(1 * w + 3) * a + 2, 1] == 7.0

    def test_round_trip(self, rng):
        logits = rng.normal(size=(6, 3, 5))
        deltas = rng.normal(size=(12, 3, 5))
        np.testing.assert_array_equal(
            unflatten_rpn_logits(flatten_rpn_logits(logits), logits.shape), logits
        )
        np.testing.assert_array_equal(
            unflatten_rpn_deltas(flatten_rpn_deltas(deltas), deltas.shape), deltas
        )


class TestPropose:
    """Decode, filter, rank and suppress."""

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_reference(self, seed, anchor_cfg):
        rng = np.random.default_rng(seed)
        anchors = generate_anchors(anchor_cfg, 4, 5)
        logits = rng.normal(size=(6, 4, 5))
        deltas = rng.normal(scale=0.3, size=(12, 4, 5))
        result = propose(logits, deltas, anchors, 40, 15, 0.6, (32, 40))
        expected = reference_proposals(
            flatten_rpn_logits(logits),
            flatten_rpn_deltas(deltas),
            anchors,
            40,
            15,
            0.6,
            (32, 40),
        )
        assert result.anchor_index.tolist() == expected
        assert (np.diff(result.scores) <= 0).all()

    def test_boxes_inside_image(self, rng, anchor_cfg):
        anchors = generate_anchors(anchor_cfg, 3, 3)
        result = propose(
            rng.normal(size=(6, 3, 3)), rng.normal(size=(12, 3, 3)), anchors, 100, 100, 0.7,
            (24, 24),
        )
        assert len(result.boxes) > 0
        assert (result.boxes[:, [0, 1]] >= 0).all()
        assert (result.boxes[:, 2] <= 24).all() and (result.boxes[:, 3] <= 24).all()

    def test_post_nms_cap(self, rng, anchor_cfg):
        anchors = generate_anchors(anchor_cfg, 4, 4)
        result = propose(
            rng.normal(size=(6, 4, 4)), np.zeros((12, 4, 4)), anchors, 48, 5, 1.0, (32, 32)
        )
        assert len(result.boxes) == 5

    def test_min_size_filter(self, anchor_cfg):
        anchors = generate_anchors(anchor_cfg, 2, 2)
        result = propose(
            np.zeros((6, 2, 2)), np.zeros((12, 2, 2)), anchors, 100, 100, 1.0, (16, 16),
            min_size=10.0,
        )
        widths = result.boxes[:, 2] - result.boxes[:, 0]
        heights = result.boxes[:, 3] - result.boxes[:, 1]
        assert (widths > 10).all() and (heights > 10).all()

    def test_anchor_mismatch(self, anchor_cfg):
        anchors = generate_anchors(anchor_cfg, 2, 2)
        with pytest.raises(ShapeError):
            propose(np.zeros((6, 3, 3)), np.zeros((12, 3, 3)), anchors, 10, 10, 0.7, (24, 24))
