"""Kernel distance between trajectories and the dynamics that generated them."""
from .core import (
    ClassModel,
    DynafitClassifier,
    OneClassDetector,
    classify,
    detect,
    fit_class_model,
    fit_threshold,
    test_distances,
    train_distances,
)
from .kernels import (
    Gaussian,
    KernelSpec,
    LogisticMap,
    Polynomial,
    TruncatedLogistic,
    cross_gram,
    eval_kernel,
    flatten,
    gram,
)
from .persistence import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "ClassModel",
    "DynafitClassifier",
    "OneClassDetector",
    "classify",
    "detect",
    "fit_class_model",
    "fit_threshold",
    "test_distances",
    "train_distances",
    "Gaussian",
    "KernelSpec",
    "LogisticMap",
    "Polynomial",
    "TruncatedLogistic",
    "cross_gram",
    "eval_kernel",
    "flatten",
    "gram",
    "load_model",
    "save_model",
]
