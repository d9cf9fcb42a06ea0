"""Tiny R-FCN detector: layers, network, proposals, training, inference and checkpoints."""
from .checkpoint import load_checkpoint, save_checkpoint
from .detector import Detector, detect
from .layers import ConvLayer, conv2d_backward, conv2d_forward
from .network import NetworkOutput, NetworkSpec, NetworkState, backward, build_network, forward
from .proposals import Proposals, propose
from .trainer import StepTargets, Trainer, build_targets, loss_and_gradients, sgd_update, train_step

__all__ = [
    "load_checkpoint",
    "save_checkpoint",
    "Detector",
    "detect",
    "ConvLayer",
    "conv2d_backward",
    "conv2d_forward",
    "NetworkOutput",
    "NetworkSpec",
    "NetworkState",
    "backward",
    "build_network",
    "forward",
    "Proposals",
    "propose",
    "StepTargets",
    "Trainer",
    "build_targets",
    "loss_and_gradients",
    "sgd_update",
    "train_step",
]
