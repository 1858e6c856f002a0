"""Windowed CNN baseline token classifier.

Each token becomes one fixed-width window instance centered on it, with
boundary slots filled by a padding sentinel.  Per slot, word / entity /
relative-position embeddings are concatenated, the window is convolved with
150 filters each of widths 2-5, max-pooled over time, and a dropout + dense
sigmoid layer makes the per-token prediction.  Embedding rows are renormed
to a max Euclidean norm after every optimizer step.
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
    PAD_INDEX,
    PAD_TOKEN,
    UNK_INDEX,
    FeatureKind,
    TagVocabulary,
    WordVectors,
    build_tag_vocab,
    build_word_vocab,
)
from .base import EarlyStopper, ModelError, NotFittedError, TokenClassifier, TrainingTrace
from .rnn import DivergedError


@dataclass(frozen=True)
class CnnConfig:
    window: int = 5
    filters_per_size: int = 150
    filter_sizes: tuple[int, ...] = (2, 3, 4, 5)
    dropout_p: float = 0.5
    norm_cap: float = 3.0
    batch_size: int = 50
    entity_dim: int = 50
    position_dim: int = 50
    use_entity: bool = True
    use_position: bool = True
    learning_rate: float = 1e-3

    WORD_DIM = 300

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ModelError(f"window must be odd and >= 1, got {self.window}")
        if self.window == 1 and self.use_position:
            raise ModelError("window size 1 excludes the position embedding")
        too_wide = [k for k in self.filter_sizes if k > self.window]
        if too_wide:
            raise ModelError(
                f"filter wider than window: sizes {too_wide} vs window {self.window}"
            )

    @property
    def token_dim(self) -> int:
        return (
            self.WORD_DIM
            + (self.entity_dim if self.use_entity else 0)
            + (self.position_dim if self.use_position else 0)
        )

    @property
    def total_filters(self) -> int:
        return self.filters_per_size * len(self.filter_sizes)


@dataclass(frozen=True)
class WindowInstance:
    sentence_id: str
    center: int
    texts: tuple[str, ...]          # window slots; PAD_TOKEN out of range
    entity_tags: tuple[str, ...]    # window slots; "" for padding
    positions: tuple[int, ...]      # relative positions -w//2 .. w//2
    label: int
    pad_count: int


def extract_windows(sentence: Sentence, window: int) -> list[WindowInstance]:
    """One instance per token, boundary slots padded."""
    if window < 1 or window % 2 == 0:
        raise ModelError(f"window must be odd and >= 1, got {window}")
    half = window // 2
    n = len(sentence)
    out = []
    for center in range(n):
        texts, ents, pads = [], [], 0
        for off in range(-half, half + 1):
            j = center + off
            if 0 <= j < n:
                texts.append(sentence.tokens[j].text)
                ents.append(sentence.tokens[j].entity_tag)
            else:
                texts.append(PAD_TOKEN)
                ents.append("")
                pads += 1
        out.append(
            WindowInstance(
                sentence_id=sentence.id,
                center=center,
                texts=tuple(texts),
                entity_tags=tuple(ents),
                positions=tuple(range(-half, half + 1)),
                label=sentence.tokens[center].label,
                pad_count=pads,
            )
        )
    return out


class _CnnNet(nn.Module):
    def __init__(self, config: CnnConfig, n_words: int, n_entities: int,
                 word_init: np.ndarray | None):
        super().__init__()
        self.config = config
        self.word_emb = nn.Embedding(n_words, config.WORD_DIM, padding_idx=PAD_INDEX)
        if word_init is not None:
            with torch.no_grad():
                self.word_emb.weight.copy_(
                    torch.as_tensor(word_init, dtype=torch.float32)
                )
        self.entity_emb = (
            nn.Embedding(n_entities, config.entity_dim, padding_idx=PAD_INDEX)
            if config.use_entity else None
        )
        self.position_emb = (
            nn.Embedding(config.window, config.position_dim)
            if config.use_position else None
        )
        self.convs = nn.ModuleList(
            nn.Conv1d(config.token_dim, config.filters_per_size, k)
            for k in config.filter_sizes
        )
        self.dropout = nn.Dropout(config.dropout_p)
        self.dense = nn.Linear(config.total_filters, 1)

    def forward(self, words, entities, positions):
        # all inputs [B, W] int64
        parts = [self.word_emb(words)]
        if self.entity_emb is not None:
            parts.append(self.entity_emb(entities))
        if self.position_emb is not None:
            parts.append(self.position_emb(positions))
        x = torch.cat(parts, dim=-1).permute(0, 2, 1)  # [B, token_dim, W]
        pooled = [conv(x).max(dim=2).values for conv in self.convs]
        feats = torch.relu(torch.cat(pooled, dim=1))
        return self.dense(self.dropout(feats)).squeeze(-1)  # logits [B]

    def clamp_norms(self, cap: float):
        """Max-norm constraint on embedding rows, applied after each update."""
        with torch.no_grad():
            tables = [self.word_emb]
            if self.entity_emb is not None:
                tables.append(self.entity_emb)
            if self.position_emb is not None:
                tables.append(self.position_emb)
            for emb in tables:
                norms = emb.weight.norm(dim=1, keepdim=True)
                scale = torch.clamp(norms, max=cap) / norms.clamp(min=1e-12)
                emb.weight.mul_(scale)


class CnnClassifier(TokenClassifier):
    def __init__(self, config: CnnConfig, word_vocab: dict[str, int],
                 entity_vocab: TagVocabulary | None = None,
                 word_vectors: WordVectors | None = None):
        if config.use_entity and entity_vocab is None:
            raise ModelError("use_entity requires an entity vocabulary")
        self.config = config
        self.word_vocab = word_vocab
        self.entity_vocab = entity_vocab
        n_words = max(word_vocab.values(), default=1) + 1
        wv = word_vectors or WordVectors()
        word_init = wv.embedding_matrix(word_vocab)
        self.net = _CnnNet(
            config, n_words,
            entity_vocab.size if entity_vocab else 0,
            word_init,
        )
        self.fitted = False

    def _window_arrays(self, sentences):
        words, ents, poss, labels = [], [], [], []
        half = self.config.window // 2
        for s in sentences:
            for w in extract_windows(s, self.config.window):
                words.append([
                    PAD_INDEX if t == PAD_TOKEN
                    else self.word_vocab.get(t, UNK_INDEX)
                    for t in w.texts
                ])
                if self.config.use_entity:
                    ents.append([
                        PAD_INDEX if e == "" else self.entity_vocab[e]
                        for e in w.entity_tags
                    ])
                poss.append([p + half for p in w.positions])
                labels.append(w.label)
        return (
            torch.as_tensor(np.array(words), dtype=torch.int64),
            torch.as_tensor(np.array(ents), dtype=torch.int64)
            if self.config.use_entity else torch.zeros(len(words), 1, dtype=torch.int64),
            torch.as_tensor(np.array(poss), dtype=torch.int64),
            torch.as_tensor(np.array(labels), dtype=torch.float32),
        )

    def fit(self, train, validation=None, patience=400, max_epochs=5000, seed=1):
        torch.manual_seed(seed)
        rng = np.random.default_rng(seed)
        monitor = list(validation) if validation else list(train)
        words, ents, poss, labels = self._window_arrays(list(train))
        n = len(labels)
        opt = torch.optim.Adam(self.net.parameters(), lr=self.config.learning_rate)
        bce = nn.BCEWithLogitsLoss()
        stopper = EarlyStopper(patience)
        trace = TrainingTrace()
        best_state = copy.deepcopy(self.net.state_dict())
        bs = self.config.batch_size

        for _epoch in range(1, max_epochs + 1):
            self.net.train()
            order = rng.permutation(n)
            for start in range(0, n, bs):
                idx = torch.as_tensor(order[start:start + bs])
                opt.zero_grad()
                logits = self.net(words[idx], ents[idx], poss[idx])
                loss = bce(logits, labels[idx])
                if not torch.isfinite(loss):
                    raise DivergedError(
                        f"non-finite loss at epoch {_epoch}: {loss.item()}"
                    )
                loss.backward()
                opt.step()
                self.net.clamp_norms(self.config.norm_cap)

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

    def predict_proba(self, sentences):
        if not self.fitted:
            raise NotFittedError("classifier has not been fitted")
        self.net.eval()
        words, ents, poss, _ = self._window_arrays(sentences)
        out = []
        with torch.no_grad():
            probs = torch.sigmoid(self.net(words, ents, poss)).numpy()
        offset = 0
        for s in sentences:
            out.append(probs[offset:offset + len(s)].astype(np.float64))
            offset += len(s)
        return out

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "family": "cnn",
            "config": {
                "window": self.config.window,
                "filters_per_size": self.config.filters_per_size,
                "filter_sizes": list(self.config.filter_sizes),
                "dropout_p": self.config.dropout_p,
                "norm_cap": self.config.norm_cap,
                "batch_size": self.config.batch_size,
                "entity_dim": self.config.entity_dim,
                "position_dim": self.config.position_dim,
                "use_entity": self.config.use_entity,
                "use_position": self.config.use_position,
                "learning_rate": self.config.learning_rate,
            },
            "word_vocab": self.word_vocab,
            "entity_vocab": self.entity_vocab.index if self.entity_vocab else None,
        }
        (directory / "config.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2)
        )
        for name, p in sorted(self.net.state_dict().items()):
            np.save(directory / f"{name}.npy", p.detach().numpy())

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        meta = json.loads((directory / "config.json").read_text())
        c = meta["config"]
        config = CnnConfig(
            window=c["window"], filters_per_size=c["filters_per_size"],
            filter_sizes=tuple(c["filter_sizes"]), dropout_p=c["dropout_p"],
            norm_cap=c["norm_cap"], batch_size=c["batch_size"],
            entity_dim=c["entity_dim"], position_dim=c["position_dim"],
            use_entity=c["use_entity"], use_position=c["use_position"],
            learning_rate=c["learning_rate"],
        )
        entity_vocab = (
            TagVocabulary(kind=FeatureKind.E, index=meta["entity_vocab"])
            if meta["entity_vocab"] is not None else None
        )
        clf = cls(config, word_vocab=meta["word_vocab"], entity_vocab=entity_vocab)
        state = {
            name: torch.as_tensor(np.load(directory / f"{name}.npy"))
            for name in clf.net.state_dict()
        }
        clf.net.load_state_dict(state)
        clf.fitted = True
        return clf


def build_cnn(config: CnnConfig, train_dataset,
              word_vectors: WordVectors | None = None) -> CnnClassifier:
    """Build a window classifier with vocabularies from the training data."""
    word_vocab = build_word_vocab(train_dataset)
    entity_vocab = (
        build_tag_vocab(train_dataset, FeatureKind.E) if config.use_entity else None
    )
    return CnnClassifier(config, word_vocab=word_vocab,
                         entity_vocab=entity_vocab, word_vectors=word_vectors)
