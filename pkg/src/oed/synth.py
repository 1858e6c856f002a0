"""Synthetic corpus generators.

The real news-derived dataset is licensed and not redistributable, so every
test and demo runs on synthetic sentences that exercise the same structure:
tokenized sentences with POS / dependency / entity tags and sparse binary
trigger labels.
"""

from __future__ import annotations

import numpy as np

from .corpus import Dataset, Sentence, Token

_FILLER = [
    "the", "a", "of", "in", "on", "market", "bank", "country", "government",
    "economy", "report", "analyst", "week", "year", "price", "rate",
    "investor", "official", "policy", "measure", "region", "currency",
    "minister", "statement", "figure", "growth", "sector", "trade",
]
_TRIGGERS = ["collapse", "devaluation", "riot", "earthquake", "recession"]
_POS = ["NOUN", "VERB", "ADJ", "DET", "ADP"]
_TAG = ["NN", "VB", "JJ", "DT", "IN"]
_DEP = ["nsubj", "dobj", "det", "prep", "amod"]
_ENTS = ["O", "O", "O", "B-GPE", "B-ORG", "I-ORG"]


def _token(rng, text: str, label: int) -> Token:
    i = rng.integers(len(_POS))
    ent = _ENTS[rng.integers(len(_ENTS))]
    if ent.startswith("I-"):
        ent = "B-" + ent[2:]  # keep spans trivially well-formed
    return Token(
        text=text,
        label=label,
        pos_simple=_POS[i],
        pos_detailed=_TAG[i],
        dep_rel=_DEP[rng.integers(len(_DEP))],
        entity_tag=ent,
    )


def random_fixture(n: int = 40, seed: int = 7, prefix: str = "s") -> Dataset:
    """Random tagged sentences with ~10% trigger tokens."""
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n):
        length = int(rng.integers(4, 15))
        tokens = []
        for _ in range(length):
            if rng.random() < 0.1:
                text = _TRIGGERS[rng.integers(len(_TRIGGERS))]
                label = 1
            else:
                text = _FILLER[rng.integers(len(_FILLER))]
                label = 0
            tokens.append(_token(rng, text, label))
        sentences.append(Sentence(id=f"{prefix}{i}", tokens=tuple(tokens)))
    return Dataset(sentences=tuple(sentences))


def separable_corpus(n: int = 20, seed: int = 3, prefix: str = "sep") -> Dataset:
    """Trigger label is fully determined by the token text (separable)."""
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n):
        length = int(rng.integers(5, 10))
        tokens = [
            _token(rng, _FILLER[rng.integers(len(_FILLER))], 0)
            for _ in range(length)
        ]
        # plant 1-2 trigger words
        for _ in range(int(rng.integers(1, 3))):
            pos = int(rng.integers(length))
            tokens[pos] = _token(rng, _TRIGGERS[rng.integers(len(_TRIGGERS))], 1)
        sentences.append(Sentence(id=f"{prefix}{i}", tokens=tuple(tokens)))
    return Dataset(sentences=tuple(sentences))


def marker_corpus(
    n: int = 60,
    seed: int = 11,
    prefix: str = "mk",
    target: str = "crisis",
    marker: str = "currently",
    min_gap: int = 6,
) -> Dataset:
    """Context-determined labels: the ambiguous target word is a trigger iff
    a marker word appears much earlier in the sentence.

    The marker sits in the first two positions and the target at least
    `min_gap` tokens in, so a narrow-radius contextual word vector of the
    target cannot see the marker but a whole-sentence embedding can.  Half
    the sentences carry the marker.
    """
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n):
        positive = i % 2 == 0
        length = int(rng.integers(12, 17))
        tokens = [
            _token(rng, _FILLER[rng.integers(len(_FILLER))], 0)
            for _ in range(length)
        ]
        if positive:
            tokens[int(rng.integers(0, 2))] = _token(rng, marker, 0)
        target_pos = int(rng.integers(min_gap, length))
        tokens[target_pos] = _token(rng, target, 1 if positive else 0)
        sentences.append(Sentence(id=f"{prefix}{i}", tokens=tuple(tokens)))
    return Dataset(sentences=tuple(sentences))


def short_sentence_fixture(n: int = 30, seed: int = 5,
                           max_len: int = 12) -> Dataset:
    """Short sentences (length <= max_len) for degenerate-window studies."""
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n):
        length = int(rng.integers(3, max_len + 1))
        tokens = []
        for _ in range(length):
            if rng.random() < 0.15:
                tokens.append(_token(rng, _TRIGGERS[rng.integers(len(_TRIGGERS))], 1))
            else:
                tokens.append(_token(rng, _FILLER[rng.integers(len(_FILLER))], 0))
        sentences.append(Sentence(id=f"sh{i}", tokens=tuple(tokens)))
    return Dataset(sentences=tuple(sentences))
