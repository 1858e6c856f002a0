"""Shared classifier interface, early stopping, and prediction helpers."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from ..corpus import Sentence


class ModelError(ValueError):
    pass


class NotFittedError(RuntimeError):
    pass


class EarlyStopper:
    """Patience-based stopping on a validation metric.

    An improvement is a strict increase by more than `min_delta`; ties do
    not reset patience.  Training halts once the number of epochs since the
    best exceeds `patience`, and the best epoch's checkpoint is retained.
    """

    def __init__(self, patience: int, min_delta: float = 1e-6):
        if patience < 1:
            raise ModelError("patience must be >= 1")
        self.patience = patience
        self.min_delta = min_delta
        self.epoch = 0
        self.best_epoch = 0
        self.best_value = -np.inf
        self.epochs_since_best = 0

    def update(self, value: float) -> bool:
        """Record one epoch's metric; returns True when training should stop."""
        self.epoch += 1
        if value > self.best_value + self.min_delta:
            self.best_value = value
            self.best_epoch = self.epoch
            self.epochs_since_best = 0
        else:
            self.epochs_since_best += 1
        return self.epochs_since_best > self.patience

    @property
    def improved(self) -> bool:
        return self.epochs_since_best == 0


@dataclass
class TrainingTrace:
    """Per-epoch validation metric history for one fit."""

    val_f1: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0


class TokenClassifier(abc.ABC):
    """A per-token binary trigger classifier."""

    @abc.abstractmethod
    def fit(
        self,
        train: list[Sentence],
        validation: list[Sentence] | None = None,
        patience: int = 400,
        max_epochs: int = 5000,
        seed: int = 1,
    ) -> TrainingTrace:
        ...

    @abc.abstractmethod
    def predict_proba(self, sentences: list[Sentence]) -> list[np.ndarray]:
        """Per-sentence arrays of per-token trigger probabilities in [0,1]."""
        ...

    @abc.abstractmethod
    def save(self, directory) -> None:
        ...


def predict_sentence(
    classifier: TokenClassifier, sentence: Sentence, threshold: float = 0.5
) -> list[int]:
    """Threshold per-token probabilities into binary labels (>= is a trigger)."""
    (probs,) = classifier.predict_proba([sentence])
    return [int(p >= threshold) for p in probs]
