"""Shared fixtures: small configs, a tiny network and a synthetic sample set."""
import os

import numpy as np
import pytest

from face_rfcn.data import generate
from face_rfcn.net import NetworkSpec, build_network
from face_rfcn.utils.config import (
    AnchorConfig,
    DatasetSpec,
    DetectConfig,
    EvalConfig,
    PyramidConfig,
    RunConfig,
    TrainConfig,
)


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep FACE_RFCN_* variables and any .env in the checkout out of the tests."""
    for key in list(os.environ):
        if key.startswith("FACE_RFCN_"):
            monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def anchor_cfg():
    """Three square anchors per cell on the stride-8 grid."""
    return AnchorConfig(base_stride=8, scales=[1.0, 2.0, 4.0])


@pytest.fixture
def train_cfg():
    return TrainConfig(
        rpn_batch=32,
        rfcn_batch=16,
        rpn_pre_nms_top=60,
        rpn_post_nms_top=20,
        log_every=1,
    )


@pytest.fixture
def tiny_spec():
    return NetworkSpec(
        k=3,
        num_anchors=3,
        backbone_channels=(4, 4, 6, 6, 6, 8),
        head_width=8,
    )


@pytest.fixture
def tiny_state(tiny_spec):
    return build_network(tiny_spec, np.random.default_rng(0))


@pytest.fixture
def dataset_spec():
    return DatasetSpec(
        seed=7,
        count=3,
        image_size=32,
        targets_per_image=(1, 2),
        target_size=(8, 14),
        clutter=1,
    )


@pytest.fixture
def samples(dataset_spec):
    return generate(dataset_spec)


@pytest.fixture
def small_config(dataset_spec, anchor_cfg, train_cfg):
    """A full run config that trains and detects in seconds."""
    return RunConfig(
        anchors=anchor_cfg,
        train=train_cfg.model_copy(update={"iterations": 2}),
        detect=DetectConfig(rpn_pre_nms_top=60, rpn_post_nms_top=20),
        pyramid=PyramidConfig(train_short_sides=[32], test_scales=[1.0, 2.0]),
        dataset=dataset_spec,
        eval=EvalConfig(bench_test_count=2, fp_checkpoints=[0, 1, 5]),
    )
