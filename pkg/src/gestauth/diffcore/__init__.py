"""Minimal reverse-mode differentiation for the gesture models."""

from .checkpoint import load_into, read_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    GRU, Concat, Conv1d, Dense, Flatten, MaxPool1d, Module, ReLU, Sequential,
    Sigmoid, Tanh, Upsample1d, build_layer,
)
from .losses import attach_loss, bce_loss, weighted_bce
from .optim import Adam
from .tensor import Tensor, concat, repeat_time

__all__ = [
    "Adam", "Concat", "Conv1d", "Dense", "Flatten", "GRU", "GradCheckReport",
    "MaxPool1d", "Module", "ReLU", "Sequential", "Sigmoid", "Tanh", "Tensor",
    "Upsample1d", "attach_loss", "bce_loss", "build_layer", "concat", "grad_check",
    "load_into", "read_checkpoint", "repeat_time", "save_checkpoint", "weighted_bce",
]
