from .base import (
    EarlyStopper,
    ModelError,
    NotFittedError,
    TokenClassifier,
    TrainingTrace,
    predict_sentence,
)
from .cnn import CnnClassifier, CnnConfig, WindowInstance, build_cnn, extract_windows
from .rnn import DivergedError, RnnClassifier, RnnConfig, build_rnn
from .svm import KERNELS, SvmClassifier, SvmConfig, build_svm

__all__ = [
    "EarlyStopper",
    "ModelError",
    "NotFittedError",
    "TokenClassifier",
    "TrainingTrace",
    "predict_sentence",
    "CnnClassifier",
    "CnnConfig",
    "WindowInstance",
    "build_cnn",
    "extract_windows",
    "DivergedError",
    "RnnClassifier",
    "RnnConfig",
    "build_rnn",
    "KERNELS",
    "SvmClassifier",
    "SvmConfig",
    "build_svm",
]
