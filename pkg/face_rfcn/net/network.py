"""
Tiny fully convolutional detector: a six-convolution backbone shared by an RPN head and the
position-sensitive R-FCN heads.

Score maps:
    rpn_logits  (2A, Hf, Wf)          channel a * 2 + c, c = 0 background, 1 face
    rpn_deltas  (4A, Hf, Wf)          channel a * 4 + d
    cls_maps    (k^2 (C + 1), Hf, Wf) bin j owns channels j (C + 1) .. (j + 1)(C + 1) - 1
    box_maps    (k^2 4, Hf, Wf)       bin j owns channels 4 j .. 4 j + 3
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import ShapeError
from ..ops.pooling import PoolWeights
from ..utils.config import AnchorConfig, TrainConfig
from .layers import ConvLayer

HEAD_INIT_STD = 0.01


class NetworkSpec(BaseModel):
    """Architecture of a NetworkState; stored in checkpoint headers."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(default=3, ge=1)
    num_classes: int = Field(default=1, ge=1)
    num_anchors: int = Field(default=7, ge=1)
    atrous: bool = True
    in_channels: int = Field(default=3, ge=1)
    backbone_channels: Tuple[int, ...] = (16, 16, 32, 32, 32, 64)
    backbone_strides: Tuple[int, ...] = (2, 1, 2, 1, 2)
    head_width: int = Field(default=64, ge=1)

    @field_validator("backbone_strides")
    @classmethod
    def validate_strides(cls, v, info):
        channels = info.data.get("backbone_channels", ())
        if len(v) != len(channels) - 1:
            raise ValueError("backbone_strides covers every backbone layer except the last")
        return v

    @classmethod
    def from_config(cls, anchors: AnchorConfig, train: TrainConfig) -> "NetworkSpec":
        return cls(
            k=train.k,
            num_classes=train.num_classes,
            num_anchors=anchors.num_anchors,
            atrous=train.atrous,
        )

    @property
    def feature_stride(self) -> int:
        stride = int(np.prod(self.backbone_strides))
        return stride if self.atrous else stride * 2

    @property
    def cls_channels(self) -> int:
        return self.k * self.k * (self.num_classes + 1)

    @property
    def box_channels(self) -> int:
        return self.k * self.k * 4


class Parameter(NamedTuple):
    name: str
    value: np.ndarray
    grad: np.ndarray
    momentum: np.ndarray
    frozen: bool


@dataclass
class NetworkOutput:
    """Score maps of one forward pass plus the activations the backward pass needs."""

    rpn_logits: np.ndarray
    rpn_deltas: np.ndarray
    cls_maps: np.ndarray
    box_maps: np.ndarray
    caches: Dict[str, tuple] = field(default_factory=dict, repr=False)

    def __iter__(self):
        return iter((self.rpn_logits, self.rpn_deltas, self.cls_maps, self.box_maps))

    @property
    def feature_shape(self) -> Tuple[int, int]:
        return self.rpn_logits.shape[1], self.rpn_logits.shape[2]


@dataclass
class NetworkState:
    """Layers, position weights and optimizer buffers of one detector."""

    spec: NetworkSpec
    backbone: List[ConvLayer]
    rpn_conv: ConvLayer
    rpn_cls: ConvLayer
    rpn_bbox: ConvLayer
    head_conv: ConvLayer
    cls_conv: ConvLayer
    box_conv: ConvLayer
    cls_weights: PoolWeights
    box_weights: PoolWeights

    @property
    def layers(self) -> List[ConvLayer]:
        return [
            *self.backbone,
            self.rpn_conv,
            self.rpn_cls,
            self.rpn_bbox,
            self.head_conv,
            self.cls_conv,
            self.box_conv,
        ]

    def parameters(self) -> Iterator[Parameter]:
        """Every learnable tensor in a fixed order."""
        for layer in self.layers:
            yield Parameter(
                f"{layer.name}.weight", layer.kernel, layer.grad_kernel, layer.momentum_kernel,
                layer.frozen,
            )
            yield Parameter(
                f"{layer.name}.bias", layer.bias, layer.grad_bias, layer.momentum_bias, layer.frozen
            )
        for name, weights in (("cls_pool", self.cls_weights), ("box_pool", self.box_weights)):
            yield Parameter(
                f"{name}.w", weights.w, weights.grad_w, weights.momentum, weights.frozen
            )

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()
        self.cls_weights.zero_grad()
        self.box_weights.zero_grad()

    def freeze(self, stem_layers: int = 0, box_weights: bool = False) -> None:
        """Freeze the first ``stem_layers`` backbone convolutions and optionally the box weights."""
        if stem_layers > len(self.backbone):
            raise ValueError(f"Cannot freeze {stem_layers} of {len(self.backbone)} backbone layers")
        for i, layer in enumerate(self.backbone):
            layer.frozen = i < stem_layers
        self.box_weights.frozen = box_weights
        if stem_layers or box_weights:
            logger.info(f"Frozen: {stem_layers} stem layers, box weights={box_weights}")

    @property
    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())


def build_network(spec: NetworkSpec, rng: np.random.Generator) -> NetworkState:
    """Initialize a network from ``spec``; all draws come from ``rng`` in layer order."""
    channels = (spec.in_channels, *spec.backbone_channels)
    backbone = []
    for i, stride in enumerate(spec.backbone_strides):
        backbone.append(
            ConvLayer.initialize(
                f"conv{i + 1}", channels[i], channels[i + 1], 3, rng, stride=stride, padding=1
            )
        )

    last = len(spec.backbone_strides)
    if spec.atrous:
        last_stage = dict(stride=1, dilation=2, padding=2)
    else:
        last_stage = dict(stride=2, dilation=1, padding=1)
    backbone.append(
        ConvLayer.initialize(
            f"conv{last + 1}", channels[last], channels[last + 1], 3, rng, **last_stage
        )
    )

    feat = spec.backbone_channels[-1]
    width = spec.head_width
    a = spec.num_anchors
    state = NetworkState(
        spec=spec,
        backbone=backbone,
        rpn_conv=ConvLayer.initialize("rpn_conv", feat, width, 3, rng, padding=1),
        rpn_cls=ConvLayer.initialize(
            "rpn_cls", width, 2 * a, 1, rng, std=HEAD_INIT_STD, relu=False
        ),
        rpn_bbox=ConvLayer.initialize(
            "rpn_bbox", width, 4 * a, 1, rng, std=HEAD_INIT_STD, relu=False
        ),
        head_conv=ConvLayer.initialize("head_conv", feat, width, 1, rng),
        cls_conv=ConvLayer.initialize(
            "cls_conv", width, spec.cls_channels, 1, rng, std=HEAD_INIT_STD, relu=False
        ),
        box_conv=ConvLayer.initialize(
            "box_conv", width, spec.box_channels, 1, rng, std=HEAD_INIT_STD, relu=False
        ),
        cls_weights=PoolWeights.uniform(spec.k * spec.k),
        box_weights=PoolWeights.uniform(spec.k * spec.k),
    )
    logger.debug(
        f"Built network: stride {spec.feature_stride}, atrous={spec.atrous}, "
        f"{state.num_parameters} parameters"
    )
    return state


def forward(image: np.ndarray, state: NetworkState) -> NetworkOutput:
    """
    Run the backbone and all heads on one (3, H, W) image.

    Raises:
        ShapeError: H or W is not divisible by the feature stride
    """
    stride = state.spec.feature_stride
    if image.ndim != 3 or image.shape[0] != state.spec.in_channels:
        raise ShapeError(f"Expected a ({state.spec.in_channels}, H, W) image, got {image.shape}")
    _, height, width = image.shape
    if height % stride or width % stride:
        raise ShapeError(f"Image size {height}x{width} is not divisible by stride {stride}")

    caches: Dict[str, tuple] = {}
    x = np.asarray(image, dtype=np.float64)
    for layer in state.backbone:
        x, caches[layer.name] = layer.forward(x)
    features = x

    rpn_hidden, caches["rpn_conv"] = state.rpn_conv.forward(features)
    rpn_logits, caches["rpn_cls"] = state.rpn_cls.forward(rpn_hidden)
    rpn_deltas, caches["rpn_bbox"] = state.rpn_bbox.forward(rpn_hidden)

    head_hidden, caches["head_conv"] = state.head_conv.forward(features)
    cls_maps, caches["cls_conv"] = state.cls_conv.forward(head_hidden)
    box_maps, caches["box_conv"] = state.box_conv.forward(head_hidden)

    return NetworkOutput(rpn_logits, rpn_deltas, cls_maps, box_maps, caches)


def backward(
    state: NetworkState,
    output: NetworkOutput,
    grad_rpn_logits: Optional[np.ndarray] = None,
    grad_rpn_deltas: Optional[np.ndarray] = None,
    grad_cls_maps: Optional[np.ndarray] = None,
    grad_box_maps: Optional[np.ndarray] = None,
) -> None:
    """Accumulate parameter gradients from score-map gradients (missing ones count as zero)."""
    caches = output.caches

    def _or_zeros(grad, like):
        return np.zeros_like(like) if grad is None else grad

    grad_rpn_hidden = state.rpn_cls.backward(
        _or_zeros(grad_rpn_logits, output.rpn_logits), caches["rpn_cls"]
    )
    grad_rpn_hidden += state.rpn_bbox.backward(
        _or_zeros(grad_rpn_deltas, output.rpn_deltas), caches["rpn_bbox"]
    )
    grad_features = state.rpn_conv.backward(grad_rpn_hidden, caches["rpn_conv"])

    grad_head_hidden = state.cls_conv.backward(
        _or_zeros(grad_cls_maps, output.cls_maps), caches["cls_conv"]
    )
    grad_head_hidden += state.box_conv.backward(
        _or_zeros(grad_box_maps, output.box_maps), caches["box_conv"]
    )
    grad_features += state.head_conv.backward(grad_head_hidden, caches["head_conv"])

    first_trainable = next(
        (i for i, layer in enumerate(state.backbone) if not layer.frozen), len(state.backbone)
    )
    grad = grad_features
    for i in range(len(state.backbone) - 1, first_trainable - 1, -1):
        layer = state.backbone[i]
        grad = layer.backward(grad, caches[layer.name], need_input_grad=i > first_trainable)
