"""Bidirectional LSTM token classifier.

Per token, the configured feature set is embedded/concatenated into a single
vector, passed through dropout, a stack of Bi-LSTM layers (architecture
written as an ordered hidden-unit list, e.g. (100, 15, 5)), and a one-unit
sigmoid dense layer.  Frozen vector features (Sp, B, S) enter directly;
categorical features (P, T, D, E) and words (W) go through trainable
embedding tables, with W initialized from pretrained vectors.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..corpus import Sentence
from ..evalstats import confusion, metrics
from ..featurize import (
    CATEGORICAL_KINDS,
    VECTOR_KINDS,
    FeatureKind,
    HashedContextEncoder,
    TagVocabulary,
    WordVectors,
    concat_dim,
    featurize_sentence,
    format_feature_set,
    parse_feature_expr,
)
from .base import EarlyStopper, ModelError, NotFittedError, TokenClassifier, TrainingTrace


class DivergedError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class RnnConfig:
    hidden_units: tuple[int, ...] = (15,)
    dropout_p: float = 0.1
    l1: float = 0.001
    l2: float = 0.001
    feature_set: str = "all"
    batch_size: int = 32
    learning_rate: float = 1e-3

    def __post_init__(self):
        if not self.hidden_units:
            raise ModelError("hidden_units must be non-empty")
        if any(h <= 0 for h in self.hidden_units):
            raise ModelError("hidden_units must be strictly positive")
        kinds = parse_feature_expr(self.feature_set)
        if FeatureKind.PO in kinds:
            raise ModelError("the sequence model never uses the position feature")

    @property
    def kinds(self) -> frozenset[FeatureKind]:
        return parse_feature_expr(self.feature_set)

    @property
    def input_dim(self) -> int:
        return concat_dim(self.kinds)


# deterministic feature ordering for concatenation
_KIND_ORDER = list(FeatureKind)


def _ordered(kinds, subset):
    return [k for k in _KIND_ORDER if k in kinds and k in subset]


class _RnnNet(nn.Module):
    def __init__(self, config: RnnConfig, table_sizes: dict[str, int],
                 word_init: np.ndarray | None):
        super().__init__()
        kinds = config.kinds
        self.vec_kinds = _ordered(kinds, VECTOR_KINDS)
        self.emb_kinds = _ordered(kinds, CATEGORICAL_KINDS | {FeatureKind.W})
        self.embeddings = nn.ModuleDict()
        for kind in self.emb_kinds:
            emb = nn.Embedding(table_sizes[kind.label], kind.dim, padding_idx=0)
            if kind is FeatureKind.W and word_init is not None:
                with torch.no_grad():
                    emb.weight.copy_(torch.as_tensor(word_init, dtype=torch.float32))
            self.embeddings[kind.label] = emb
        self.dropout = nn.Dropout(config.dropout_p)
        self.lstms = nn.ModuleList()
        width = config.input_dim
        for units in config.hidden_units:
            self.lstms.append(
                nn.LSTM(width, units, batch_first=True, bidirectional=True)
            )
            width = 2 * units
        self.dense = nn.Linear(width, 1)

    def forward(self, vec, cats):
        # vec: [B, T, frozen_dim] or None; cats: {label: [B, T] int64}
        parts = []
        if vec is not None:
            parts.append(vec)
        for kind in self.emb_kinds:
            parts.append(self.embeddings[kind.label](cats[kind.label]))
        x = torch.cat(parts, dim=-1)
        x = self.dropout(x)
        for lstm in self.lstms:
            x, _ = lstm(x)
        return self.dense(x).squeeze(-1)  # logits [B, T]

    def regularization(self, l1: float, l2: float) -> torch.Tensor:
        reg = torch.zeros((), dtype=torch.float32)
        for lstm in self.lstms:
            for name, p in lstm.named_parameters():
                if "weight" in name:
                    reg = reg + l1 * p.abs().sum() + l2 * (p ** 2).sum()
        return reg


class RnnClassifier(TokenClassifier):
    def __init__(
        self,
        config: RnnConfig,
        vocabs: dict[FeatureKind, TagVocabulary] | None = None,
        word_vocab: dict[str, int] | None = None,
        encoder=None,
        word_vectors: WordVectors | None = None,
        cache=None,
    ):
        self.config = config
        self.kinds = config.kinds
        self.vocabs = vocabs or {}
        self.word_vocab = word_vocab
        self.encoder = encoder
        self.cache = cache
        missing = [
            k.label for k in _ordered(self.kinds, CATEGORICAL_KINDS)
            if k not in self.vocabs
        ]
        if missing:
            raise ModelError(f"missing tag vocabularies for {missing}")
        if FeatureKind.W in self.kinds and word_vocab is None:
            raise ModelError("feature W requires a word vocabulary")
        if self.kinds & VECTOR_KINDS and encoder is None:
            raise ModelError(
                f"features {format_feature_set(self.kinds & VECTOR_KINDS)} "
                "require a contextual encoder"
            )

        table_sizes = {k.label: self.vocabs[k].size
                       for k in _ordered(self.kinds, CATEGORICAL_KINDS)}
        word_init = None
        if FeatureKind.W in self.kinds:
            table_sizes["W"] = max(word_vocab.values(), default=1) + 1
            wv = word_vectors or WordVectors()
            word_init = wv.embedding_matrix(word_vocab)
        self.net = _RnnNet(config, table_sizes, word_init)
        self.fitted = False
        self._feat_cache: dict[str, tuple] = {}

    # -- featurization ----------------------------------------------------

    def _sentence_arrays(self, s: Sentence):
        hit = self._feat_cache.get(s.id)
        if hit is not None:
            return hit
        bundles = featurize_sentence(
            s, self.kinds, encoder=self.encoder, vocabs=self.vocabs,
            word_vocab=self.word_vocab, cache=self.cache,
        )
        vec_kinds = _ordered(self.kinds, VECTOR_KINDS)
        if vec_kinds:
            vec = np.stack([
                np.concatenate([b.vectors[k] for k in vec_kinds]) for b in bundles
            ]).astype(np.float32)
        else:
            vec = None
        cats = {
            k.label: np.array([b.indices[k] for b in bundles], dtype=np.int64)
            for k in _ordered(self.kinds, CATEGORICAL_KINDS | {FeatureKind.W})
        }
        labels = np.array(s.labels, dtype=np.float32)
        arrays = (vec, cats, labels)
        self._feat_cache[s.id] = arrays
        return arrays

    def _collate(self, sentences: list[Sentence]):
        items = [self._sentence_arrays(s) for s in sentences]
        max_len = max(len(s) for s in sentences)
        n = len(sentences)
        vec_dim = items[0][0].shape[1] if items[0][0] is not None else 0
        vec = (
            torch.zeros(n, max_len, vec_dim) if vec_dim else None
        )
        cats = {
            label: torch.zeros(n, max_len, dtype=torch.int64)
            for label in items[0][1]
        }
        labels = torch.zeros(n, max_len)
        mask = torch.zeros(n, max_len)
        for i, (v, c, y) in enumerate(items):
            t = len(y)
            if vec is not None:
                vec[i, :t] = torch.as_tensor(v)
            for label, idx in c.items():
                cats[label][i, :t] = torch.as_tensor(idx)
            labels[i, :t] = torch.as_tensor(y)
            mask[i, :t] = 1.0
        return vec, cats, labels, mask

    # -- training ---------------------------------------------------------

    def fit(self, train, validation=None, patience=400, max_epochs=5000, seed=1):
        torch.manual_seed(seed)
        rng = np.random.default_rng(seed)
        monitor = list(validation) if validation else list(train)
        train = list(train)
        opt = torch.optim.Adam(self.net.parameters(), lr=self.config.learning_rate)
        bce = nn.BCEWithLogitsLoss(reduction="none")
        stopper = EarlyStopper(patience)
        trace = TrainingTrace()
        best_state = copy.deepcopy(self.net.state_dict())
        bs = self.config.batch_size

        for _epoch in range(1, max_epochs + 1):
            self.net.train()
            order = rng.permutation(len(train))
            for start in range(0, len(train), bs):
                batch = [train[i] for i in order[start:start + bs]]
                vec, cats, labels, mask = self._collate(batch)
                opt.zero_grad()
                logits = self.net(vec, cats)
                loss = (bce(logits, labels) * mask).sum() / mask.sum()
                loss = loss + self.net.regularization(self.config.l1, self.config.l2)
                if not torch.isfinite(loss):
                    raise DivergedError(
                        f"non-finite loss at epoch {_epoch}: {loss.item()}"
                    )
                loss.backward()
                opt.step()

            self.fitted = True
            val_f1 = self._f1(monitor)
            trace.val_f1.append(val_f1)
            stop = stopper.update(val_f1)
            if stopper.improved:
                best_state = copy.deepcopy(self.net.state_dict())
            if stop:
                break

        self.net.load_state_dict(best_state)
        trace.best_epoch = stopper.best_epoch
        trace.stopped_epoch = stopper.epoch
        return trace

    def _f1(self, sentences) -> float:
        probs = np.concatenate(self.predict_proba(sentences))
        gold = np.concatenate([np.array(s.labels) for s in sentences])
        return metrics(confusion(probs, gold)).f1_std

    # -- inference --------------------------------------------------------

    def predict_proba(self, sentences):
        if not self.fitted:
            raise NotFittedError("classifier has not been fitted")
        self.net.eval()
        out = []
        bs = self.config.batch_size
        with torch.no_grad():
            for start in range(0, len(sentences), bs):
                batch = sentences[start:start + bs]
                vec, cats, _, mask = self._collate(batch)
                probs = torch.sigmoid(self.net(vec, cats))
                for i, s in enumerate(batch):
                    out.append(probs[i, :len(s)].numpy().astype(np.float64))
        return out

    # -- persistence ------------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "family": "rnn",
            "config": {
                "hidden_units": list(self.config.hidden_units),
                "dropout_p": self.config.dropout_p,
                "l1": self.config.l1,
                "l2": self.config.l2,
                "feature_set": self.config.feature_set,
                "batch_size": self.config.batch_size,
                "learning_rate": self.config.learning_rate,
            },
            "vocabs": {
                k.label: v.index for k, v in self.vocabs.items()
            },
            "word_vocab": self.word_vocab,
            "encoder": getattr(self.encoder, "name", None),
        }
        (directory / "config.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2)
        )
        params = {name: p.detach().numpy() for name, p in
                  self.net.state_dict().items()}
        for name, arr in sorted(params.items()):
            np.save(directory / f"{name}.npy", arr)

    @classmethod
    def load(cls, directory, encoder=None, cache=None):
        directory = Path(directory)
        meta = json.loads((directory / "config.json").read_text())
        config = RnnConfig(
            hidden_units=tuple(meta["config"]["hidden_units"]),
            dropout_p=meta["config"]["dropout_p"],
            l1=meta["config"]["l1"],
            l2=meta["config"]["l2"],
            feature_set=meta["config"]["feature_set"],
            batch_size=meta["config"]["batch_size"],
            learning_rate=meta["config"]["learning_rate"],
        )
        vocabs = {
            FeatureKind.from_label(label): TagVocabulary(
                kind=FeatureKind.from_label(label), index=index
            )
            for label, index in meta["vocabs"].items()
        }
        if encoder is None and meta.get("encoder"):
            encoder = HashedContextEncoder(name=meta["encoder"])
        clf = cls(config, vocabs=vocabs, word_vocab=meta["word_vocab"],
                  encoder=encoder, cache=cache)
        state = {
            name: torch.as_tensor(np.load(directory / f"{name}.npy"))
            for name in clf.net.state_dict()
        }
        clf.net.load_state_dict(state)
        clf.fitted = True
        return clf


def build_rnn(config: RnnConfig, train_dataset, encoder=None,
              word_vectors=None, cache=None) -> RnnClassifier:
    """Build a sequence classifier with vocabularies from the training data."""
    from ..featurize import build_tag_vocab, build_word_vocab

    kinds = config.kinds
    vocabs = {
        k: build_tag_vocab(train_dataset, k)
        for k in kinds & CATEGORICAL_KINDS
    }
    word_vocab = (
        build_word_vocab(train_dataset) if FeatureKind.W in kinds else None
    )
    return RnnClassifier(
        config, vocabs=vocabs, word_vocab=word_vocab, encoder=encoder,
        word_vectors=word_vectors, cache=cache,
    )
