"""SVM token classifier on static 300-d word vectors.

A classical per-token baseline: each token is represented by its word
vector alone, classified by an SVM with one of four kernels at library
default hyperparameters.  Deterministic: fitting twice on identical data
yields identical predictions, so a single run per kernel suffices.
"""

from __future__ import annotations

import json
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.svm import SVC

from ..featurize import WordVectors
from .base import ModelError, NotFittedError, TokenClassifier, TrainingTrace

KERNELS = ("linear", "polynomial", "rbf", "sigmoid")
_SKLEARN_KERNEL = {"linear": "linear", "polynomial": "poly",
                   "rbf": "rbf", "sigmoid": "sigmoid"}


@dataclass(frozen=True)
class SvmConfig:
    kernel: str = "linear"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ModelError(
                f"unknown kernel {self.kernel!r}; choose from {KERNELS}"
            )


class SvmClassifier(TokenClassifier):
    def __init__(self, config: SvmConfig, word_vectors: WordVectors | None = None):
        self.config = config
        self.word_vectors = word_vectors or WordVectors()
        self.svc = SVC(kernel=_SKLEARN_KERNEL[config.kernel])
        self.fitted = False

    def _features(self, sentences) -> np.ndarray:
        return np.array(
            [self.word_vectors[t.text] for s in sentences for t in s.tokens]
        )

    def fit(self, train, validation=None, patience=400, max_epochs=5000, seed=1):
        # no early stopping: train on everything supplied (train + validation)
        sentences = list(train) + (list(validation) if validation else [])
        x = self._features(sentences)
        y = np.array([t.label for s in sentences for t in s.tokens])
        if len(set(y)) < 2:
            raise ModelError("SVM training data needs both classes")
        self.svc.fit(x, y)
        self.fitted = True
        return TrainingTrace(val_f1=[], best_epoch=1, stopped_epoch=1)

    def predict_proba(self, sentences):
        """Hard decisions as {0.0, 1.0}; the SVM emits no probabilities."""
        if not self.fitted:
            raise NotFittedError("classifier has not been fitted")
        preds = self.svc.predict(self._features(sentences)).astype(np.float64)
        out, offset = [], 0
        for s in sentences:
            out.append(preds[offset:offset + len(s)])
            offset += len(s)
        return out

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "config.json").write_text(
            json.dumps({"family": "svm", "kernel": self.config.kernel})
        )
        with (directory / "svc.pkl").open("wb") as f:
            pickle.dump(self.svc, f)

    @classmethod
    def load(cls, directory, word_vectors=None):
        directory = Path(directory)
        meta = json.loads((directory / "config.json").read_text())
        clf = cls(SvmConfig(kernel=meta["kernel"]), word_vectors=word_vectors)
        with (directory / "svc.pkl").open("rb") as f:
            clf.svc = pickle.load(f)
        clf.fitted = True
        return clf


def build_svm(config: SvmConfig, word_vectors: WordVectors | None = None):
    return SvmClassifier(config, word_vectors=word_vectors)
