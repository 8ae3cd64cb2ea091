"""Authentication classifiers: five neural architectures and a random forest."""

from .architectures import (
    ARCH_NAMES, ArchitectureError, ArchSpec, AuthNet, build_architecture, complexmix_stem,
)
from .forest import ForestSpec, RandomForest, rf_predict, train_random_forest
from .training import AuthTask, TrainConfig, build_auth_task, predict_proba, train_classifier

__all__ = [
    "ARCH_NAMES", "ArchSpec", "ArchitectureError", "AuthNet", "AuthTask", "ForestSpec",
    "RandomForest", "TrainConfig", "build_architecture", "build_auth_task", "complexmix_stem",
    "predict_proba", "rf_predict", "train_classifier", "train_random_forest",
]
