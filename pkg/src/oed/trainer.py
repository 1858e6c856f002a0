"""Seeded multi-trial experiment execution.

A trial = one model variant trained with one seed: split, fit with early
stopping, evaluate the best-on-validation checkpoint on train / validation /
test, and persist the result.  An experiment is a variant grid crossed with
a consecutive seed range; results are persisted incrementally so an
interrupted run can be resumed without re-executing completed trials.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import corpus
from .corpus import Dataset, SplitSpec, split
from .evalstats import ConfusionCounts, confusion
from .featurize import HashedContextEncoder, WordVectors
from .models import (
    CnnConfig,
    RnnConfig,
    SvmConfig,
    build_cnn,
    build_rnn,
    build_svm,
)


class TrainerError(RuntimeError):
    pass


class ConfigMismatchError(TrainerError):
    """Resume directory was produced by a different configuration."""


@dataclass(frozen=True)
class VariantSpec:
    """One model variant of an experiment grid."""

    id: str
    model: str  # "rnn" | "cnn" | "svm"
    params: dict = field(default_factory=dict)

    _RNN_KEYS = {"features", "arch", "dropout_p", "l1", "l2", "batch_size",
                 "learning_rate"}
    _CNN_KEYS = {"window", "filters_per_size", "filter_sizes", "dropout_p",
                 "norm_cap", "batch_size", "entity_dim", "position_dim",
                 "use_entity", "use_position", "learning_rate"}
    _SVM_KEYS = {"kernel"}

    def __post_init__(self):
        allowed = {
            "rnn": self._RNN_KEYS, "cnn": self._CNN_KEYS, "svm": self._SVM_KEYS
        }.get(self.model)
        if allowed is None:
            raise TrainerError(f"unknown model family {self.model!r}")
        unknown = set(self.params) - allowed
        if unknown:
            raise TrainerError(
                f"variant {self.id!r}: unknown keys {sorted(unknown)}"
            )

    def model_config(self):
        p = dict(self.params)
        if self.model == "rnn":
            kwargs = {}
            if "features" in p:
                kwargs["feature_set"] = p.pop("features")
            if "arch" in p:
                kwargs["hidden_units"] = tuple(p.pop("arch"))
            kwargs.update(p)
            return RnnConfig(**kwargs)
        if self.model == "cnn":
            if "filter_sizes" in p:
                p["filter_sizes"] = tuple(p["filter_sizes"])
            return CnnConfig(**p)
        return SvmConfig(**p)


@dataclass(frozen=True)
class TrialConfig:
    variant: VariantSpec
    seed: int
    patience: int = 400
    max_epochs: int = 5000
    validation_fraction: float = 0.2
    deterministic: bool = True
    fixed_split: bool = False  # split with seed 1 regardless of trial seed

    def __post_init__(self):
        if self.patience < 1:
            raise TrainerError("patience must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    variants: tuple[VariantSpec, ...]
    seeds: tuple[int, ...]
    trainval_path: str
    test_path: str | None = None
    patience: int = 400
    max_epochs: int = 5000
    validation_fraction: float = 0.2
    deterministic: bool = True
    fixed_split: bool = False
    encoder_radius: int = 2
    word_vectors_path: str | None = None

    def __post_init__(self):
        if not self.variants:
            raise TrainerError("experiment needs at least one variant")
        if list(self.seeds) != list(range(1, len(self.seeds) + 1)):
            raise TrainerError("seeds must be consecutive from 1")
        ids = [v.id for v in self.variants]
        if len(set(ids)) != len(ids):
            raise TrainerError("variant ids must be unique")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "variants": [
                {"id": v.id, "model": v.model, "params": v.params}
                for v in self.variants
            ],
            "seeds": list(self.seeds),
            "trainval_path": self.trainval_path,
            "test_path": self.test_path,
            "patience": self.patience,
            "max_epochs": self.max_epochs,
            "validation_fraction": self.validation_fraction,
            "deterministic": self.deterministic,
            "fixed_split": self.fixed_split,
            "encoder_radius": self.encoder_radius,
            "word_vectors_path": self.word_vectors_path,
        }

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class TrialResult:
    variant: str
    seed: int
    best_epoch: int
    stopped_epoch: int
    confusion: dict[str, ConfusionCounts]
    wall_seconds: float

    def to_json(self) -> str:
        rec = {
            "variant": self.variant,
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "confusion": {
                k: {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn}
                for k, c in sorted(self.confusion.items())
            },
            "wall_seconds": self.wall_seconds,
        }
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrialResult":
        rec = json.loads(text)
        return cls(
            variant=rec["variant"],
            seed=rec["seed"],
            best_epoch=rec["best_epoch"],
            stopped_epoch=rec["stopped_epoch"],
            confusion={
                k: ConfusionCounts(**v) for k, v in rec["confusion"].items()
            },
            wall_seconds=rec["wall_seconds"],
        )


def _seed_everything(seed: int, deterministic: bool):
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def _counts(model, sentences) -> ConfusionCounts:
    probs = np.concatenate(model.predict_proba(list(sentences)))
    gold = np.concatenate([np.array(s.labels) for s in sentences])
    return confusion(probs, gold)


def run_trial(
    cfg: TrialConfig,
    trainval: Dataset,
    test: Dataset | None = None,
    encoder=None,
    word_vectors: WordVectors | None = None,
) -> TrialResult:
    """Train one variant with one seed and evaluate its best checkpoint."""
    _seed_everything(cfg.seed, cfg.deterministic)
    start = time.monotonic()
    encoder = encoder or HashedContextEncoder()
    model_config = cfg.variant.model_config()

    if cfg.variant.model == "svm":
        # deterministic, no early stopping: train on train+validation
        model = build_svm(model_config, word_vectors=word_vectors)
        model.fit(list(trainval.sentences), seed=cfg.seed)
        counts = {"train": _counts(model, trainval.sentences)}
        best_epoch = stopped_epoch = 1
    else:
        split_seed = 1 if cfg.fixed_split else cfg.seed
        train, val = split(
            trainval,
            SplitSpec(seed=split_seed,
                      validation_fraction=cfg.validation_fraction),
        )
        if cfg.variant.model == "rnn":
            model = build_rnn(model_config, train, encoder=encoder,
                              word_vectors=word_vectors)
        else:
            model = build_cnn(model_config, train, word_vectors=word_vectors)
        trace = model.fit(
            list(train.sentences), list(val.sentences),
            patience=cfg.patience, max_epochs=cfg.max_epochs, seed=cfg.seed,
        )
        counts = {
            "train": _counts(model, train.sentences),
            "validation": _counts(model, val.sentences),
        }
        best_epoch, stopped_epoch = trace.best_epoch, trace.stopped_epoch

    if test is not None and len(test):
        counts["test"] = _counts(model, test.sentences)

    wall = 0.0 if cfg.deterministic else time.monotonic() - start
    return TrialResult(
        variant=cfg.variant.id,
        seed=cfg.seed,
        best_epoch=best_epoch,
        stopped_epoch=stopped_epoch,
        confusion=counts,
        wall_seconds=wall,
    )


def _trial_path(out_dir: Path, variant_id: str, seed: int) -> Path:
    return out_dir / f"trial-{variant_id}-{seed}.json"


def _load_data(cfg: ExperimentConfig):
    trainval = corpus.load_dataset(cfg.trainval_path, partition="trainval")
    test = (
        corpus.load_dataset(cfg.test_path, partition="test")
        if cfg.test_path else None
    )
    return trainval, test


def run_experiment(cfg: ExperimentConfig, out_dir,
                   resume: bool = False) -> list[TrialResult]:
    """Execute the variant x seed grid, persisting each result as it lands.

    Trial failures are recorded (trial-<variant>-<seed>.failed.json) without
    aborting sibling trials; failed trials are retried on resume.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / "experiment.json"
    if marker.exists():
        stored = json.loads(marker.read_text())
        if stored.get("hash") != cfg.hash():
            raise ConfigMismatchError(
                f"directory {out_dir} was produced by a different config "
                f"(hash {stored.get('hash')!r} != {cfg.hash()!r})"
            )
    else:
        marker.write_text(
            json.dumps({"hash": cfg.hash(), "config": cfg.to_dict()},
                       sort_keys=True, indent=2)
        )

    trainval, test = _load_data(cfg)
    encoder = HashedContextEncoder(radius=cfg.encoder_radius)
    word_vectors = (
        WordVectors(cfg.word_vectors_path) if cfg.word_vectors_path
        else WordVectors()
    )

    results = []
    for variant in cfg.variants:
        for seed in cfg.seeds:
            path = _trial_path(out_dir, variant.id, seed)
            if path.exists():
                results.append(TrialResult.from_json(path.read_text()))
                continue
            trial_cfg = TrialConfig(
                variant=variant, seed=seed, patience=cfg.patience,
                max_epochs=cfg.max_epochs,
                validation_fraction=cfg.validation_fraction,
                deterministic=cfg.deterministic, fixed_split=cfg.fixed_split,
            )
            try:
                result = run_trial(trial_cfg, trainval, test,
                                   encoder=encoder, word_vectors=word_vectors)
            except Exception as e:  # record and keep going
                failed = path.with_suffix(".failed.json")
                failed.write_text(json.dumps(
                    {"variant": variant.id, "seed": seed, "error": str(e)}
                ))
                continue
            tmp = path.with_suffix(".tmp")
            tmp.write_text(result.to_json())
            tmp.replace(path)
            failed = path.with_suffix(".failed.json")
            if failed.exists():
                failed.unlink()
            results.append(result)
    return results


def resume_experiment(cfg: ExperimentConfig, out_dir) -> list[TrialResult]:
    """Re-run only the trials missing from a partial run directory."""
    out_dir = Path(out_dir)
    if not (out_dir / "experiment.json").exists():
        raise TrainerError(f"{out_dir} holds no experiment to resume")
    return run_experiment(cfg, out_dir, resume=True)


def load_results(out_dir) -> list[TrialResult]:
    """Parse every completed trial record in an output directory."""
    out_dir = Path(out_dir)
    results = []
    for path in sorted(out_dir.glob("trial-*.json")):
        if path.name.endswith(".failed.json"):
            continue
        results.append(TrialResult.from_json(path.read_text()))
    return results
