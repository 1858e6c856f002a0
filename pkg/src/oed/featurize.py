"""Per-token feature extraction: the eight sequence-model features plus the
CNN position feature, feature-set expressions, tag vocabularies, provider
adapters, and a binary feature cache.

Feature kinds:
    W   300-d static word embedding (trainable, pretrained init)
    P    10-d simplified POS tag embedding (trainable)
    T    10-d detailed POS tag embedding (trainable)
    D    10-d dependency relation embedding (trainable)
    E    10-d entity IOB+type tag embedding (trainable)
    Sp   96-d frozen contextual tensor
    B   768-d frozen contextual word embedding
    S   768-d frozen contextual sentence embedding (sum of B over the sentence)
    Po  relative window position embedding (CNN only, trainable)
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import Dataset, Sentence

PAD_INDEX = 0
UNK_INDEX = 1
N_RESERVED = 2

PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"


class FeatureError(ValueError):
    """Raised for malformed feature expressions or provider misuse."""


class FeatureKind(Enum):
    W = ("W", 300, True)
    P = ("P", 10, True)
    T = ("T", 10, True)
    D = ("D", 10, True)
    E = ("E", 10, True)
    SP = ("Sp", 96, False)
    B = ("B", 768, False)
    S = ("S", 768, False)
    PO = ("Po", None, True)  # dim configurable; CNN only

    def __init__(self, label, dim, trainable):
        self.label = label
        self.dim = dim
        self.trainable = trainable

    @classmethod
    def from_label(cls, label: str) -> "FeatureKind":
        for k in cls:
            if k.label == label:
                return k
        raise FeatureError(f"unknown feature kind {label!r}")


# "all" covers the eight sequence-model features; Po exists only for the CNN.
ALL_KINDS = frozenset(
    {
        FeatureKind.W,
        FeatureKind.P,
        FeatureKind.T,
        FeatureKind.D,
        FeatureKind.E,
        FeatureKind.SP,
        FeatureKind.B,
        FeatureKind.S,
    }
)

CATEGORICAL_KINDS = frozenset(
    {FeatureKind.P, FeatureKind.T, FeatureKind.D, FeatureKind.E}
)
VECTOR_KINDS = frozenset({FeatureKind.SP, FeatureKind.B, FeatureKind.S})

_EXPR_RE = re.compile(r"^\s*(all)?\s*(?:-?\s*\{([^}]*)\})?\s*$")


def parse_feature_expr(text: str) -> frozenset[FeatureKind]:
    """Parse a feature-set expression: `all`, `all-{K,...}`, or `{K,...}`."""
    m = _EXPR_RE.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise FeatureError(f"malformed feature expression {text!r}")
    has_all, body = m.group(1), m.group(2)
    listed: set[FeatureKind] = set()
    if body is not None and body.strip():
        for part in body.split(","):
            listed.add(FeatureKind.from_label(part.strip()))
    if has_all:
        result = set(ALL_KINDS) - listed
    else:
        if body is None:
            raise FeatureError(f"malformed feature expression {text!r}")
        result = listed
    if not result:
        raise FeatureError(f"feature expression {text!r} resolves to the empty set")
    return frozenset(result)


def format_feature_set(kinds) -> str:
    order = [k for k in FeatureKind if k in kinds]
    return "{" + ",".join(k.label for k in order) + "}"


def concat_dim(kinds, po_dim: int = 0) -> int:
    """Width of the concatenated per-token vector for a feature set."""
    if not kinds:
        raise FeatureError("empty feature set")
    total = 0
    for k in kinds:
        total += po_dim if k is FeatureKind.PO else k.dim
    return total


@dataclass(frozen=True)
class TagVocabulary:
    """Dense tag -> index mapping with reserved padding and unknown slots."""

    kind: FeatureKind
    index: dict[str, int]

    @property
    def size(self) -> int:
        # includes the two reserved indices
        return len(self.index) + N_RESERVED

    def __getitem__(self, tag: str) -> int:
        return self.index.get(tag, UNK_INDEX)


def build_tag_vocab(dataset: Dataset, kind: FeatureKind) -> TagVocabulary:
    """Vocabulary over the dataset's tags for one categorical kind."""
    if kind not in CATEGORICAL_KINDS:
        raise FeatureError(f"{kind.label} is not a categorical kind")
    attr = {
        FeatureKind.P: "pos_simple",
        FeatureKind.T: "pos_detailed",
        FeatureKind.D: "dep_rel",
        FeatureKind.E: "entity_tag",
    }[kind]
    tags = sorted({getattr(t, attr) for s in dataset for t in s.tokens})
    index = {tag: i + N_RESERVED for i, tag in enumerate(tags)}
    return TagVocabulary(kind=kind, index=index)


def build_word_vocab(dataset: Dataset) -> dict[str, int]:
    """Word -> index mapping (indices 0/1 reserved for padding/unknown)."""
    words = sorted({t.text for s in dataset for t in s.tokens})
    return {w: i + N_RESERVED for i, w in enumerate(words)}


def sentence_embedding(token_vectors) -> np.ndarray:
    """Elementwise sum of per-token contextual vectors."""
    vecs = [np.asarray(v) for v in token_vectors]
    if not vecs:
        raise FeatureError("sentence_embedding needs at least one vector")
    dims = {v.shape for v in vecs}
    if len(dims) != 1:
        raise FeatureError(f"mixed vector dimensions: {dims}")
    out = np.zeros_like(vecs[0])
    for v in vecs:
        out = out + v
    return out


class ContextualEncoderProvider(Protocol):
    """Produces frozen per-token contextual vectors for a sentence.

    Must be deterministic: repeated calls on the same input return
    byte-identical arrays.
    """

    name: str

    def encode(self, texts: list[str]) -> np.ndarray:
        """768-d contextual word vectors, one row per token (kind B)."""
        ...

    def encode_small(self, texts: list[str]) -> np.ndarray:
        """96-d contextual tensors, one row per token (kind Sp)."""
        ...


def _hashed_vector(text: str, salt: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(
        hashlib.blake2b(f"{salt}\x00{text}".encode(), digest_size=8).digest(),
        "little",
    )
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float64)


class HashedContextEncoder:
    """Deterministic reference encoder for tests and synthetic experiments.

    Each token vector is a hash-seeded unit vector for the token text blended
    with the mean of hash-seeded vectors of its neighbors within `radius`.
    Context-sensitive (the same word in different neighborhoods gets different
    vectors) without any model download.
    """

    def __init__(self, radius: int = 2, name: str = "hashed-v1"):
        self.radius = radius
        self.name = name

    def _encode(self, texts: list[str], dim: int) -> np.ndarray:
        n = len(texts)
        self_vecs = np.stack([_hashed_vector(t, "self", dim) for t in texts])
        ctx_vecs = np.stack([_hashed_vector(t, "ctx", dim) for t in texts])
        out = np.empty((n, dim))
        for i in range(n):
            lo, hi = max(0, i - self.radius), min(n, i + self.radius + 1)
            neighbors = [j for j in range(lo, hi) if j != i]
            if neighbors:
                ctx = ctx_vecs[neighbors].mean(axis=0)
            else:
                ctx = np.zeros(dim)
            out[i] = 0.5 * self_vecs[i] + 0.5 * ctx
        return out

    def encode(self, texts: list[str]) -> np.ndarray:
        return self._encode(texts, 768)

    def encode_small(self, texts: list[str]) -> np.ndarray:
        return self._encode(texts, 96)


class WordVectors:
    """300-d static word vectors from the plain-text embedding format.

    Format: one token per line, the token followed by 300 floats.  Tokens
    absent from the file are initialized from U(-0.25, 0.25), seeded by a
    hash of the word so lookups stay deterministic.
    """

    DIM = 300

    def __init__(self, path: str | Path | None = None):
        self.table: dict[str, np.ndarray] = {}
        if path is not None:
            with Path(path).open(encoding="utf-8") as f:
                for line in f:
                    parts = line.rstrip("\n").split(" ")
                    if len(parts) != self.DIM + 1:
                        continue
                    self.table[parts[0]] = np.asarray(parts[1:], dtype=np.float64)

    def __getitem__(self, word: str) -> np.ndarray:
        vec = self.table.get(word)
        if vec is not None:
            return vec
        seed = int.from_bytes(
            hashlib.blake2b(f"w2v\x00{word}".encode(), digest_size=8).digest(),
            "little",
        )
        return np.random.default_rng(seed).uniform(-0.25, 0.25, self.DIM)

    def embedding_matrix(self, vocab: dict[str, int]) -> np.ndarray:
        """Initial weights for a trainable word-embedding table."""
        size = max(vocab.values(), default=N_RESERVED - 1) + 1
        mat = np.zeros((size, self.DIM))
        mat[UNK_INDEX] = self[UNK_TOKEN]
        for word, idx in vocab.items():
            mat[idx] = self[word]
        return mat


@dataclass
class FeatureBundle:
    """Per-token features: vectors for frozen kinds, indices for trainable ones."""

    vectors: dict[FeatureKind, np.ndarray]
    indices: dict[FeatureKind, int]

    def kinds(self):
        return set(self.vectors) | set(self.indices)


class FeatureCache:
    """Binary per-sentence cache at `cache/<provider>/<sentence-id>.bin`.

    Keys are (provider name, sentence id); switching providers switches
    directories, which invalidates the cache.  Writes are serialized per key.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()

    def _path(self, provider: str, sentence_id: str) -> Path:
        return self.root / provider / f"{sentence_id}.bin"

    def get(self, provider: str, sentence_id: str) -> dict[str, np.ndarray] | None:
        path = self._path(provider, sentence_id)
        if not path.exists():
            return None
        with path.open("rb") as f:
            data = np.load(f)
            return {k: data[k] for k in data.files}

    def put(self, provider: str, sentence_id: str, arrays: dict[str, np.ndarray]):
        path = self._path(provider, sentence_id)
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            with tmp.open("wb") as f:
                np.savez(f, **arrays)
            tmp.replace(path)


def contextual_vectors(
    sentence: Sentence,
    encoder: ContextualEncoderProvider,
    cache: FeatureCache | None = None,
) -> dict[str, np.ndarray]:
    """B, Sp, and S arrays for a sentence, from cache when possible."""
    if cache is not None:
        hit = cache.get(encoder.name, sentence.id)
        if hit is not None:
            return hit
    texts = sentence.texts
    b = encoder.encode(texts)
    if b.shape != (len(texts), 768):
        raise FeatureError(
            f"provider {encoder.name!r} returned shape {b.shape} "
            f"for a {len(texts)}-token sentence"
        )
    sp = encoder.encode_small(texts)
    if sp.shape != (len(texts), 96):
        raise FeatureError(
            f"provider {encoder.name!r} returned Sp shape {sp.shape} "
            f"for a {len(texts)}-token sentence"
        )
    s = sentence_embedding(list(b))
    arrays = {"B": b, "Sp": sp, "S": s}
    if cache is not None:
        cache.put(encoder.name, sentence.id, arrays)
    return arrays


def featurize_sentence(
    sentence: Sentence,
    kinds,
    encoder: ContextualEncoderProvider | None = None,
    vocabs: dict[FeatureKind, TagVocabulary] | None = None,
    word_vocab: dict[str, int] | None = None,
    cache: FeatureCache | None = None,
) -> list[FeatureBundle]:
    """One FeatureBundle per token for the resolved feature set."""
    kinds = set(kinds)
    vocabs = vocabs or {}
    needs_context = kinds & VECTOR_KINDS
    if needs_context and encoder is None:
        missing = format_feature_set(needs_context)
        raise FeatureError(f"no contextual encoder registered for {missing}")
    ctx = contextual_vectors(sentence, encoder, cache) if needs_context else {}

    bundles = []
    for i, tok in enumerate(sentence.tokens):
        vectors: dict[FeatureKind, np.ndarray] = {}
        indices: dict[FeatureKind, int] = {}
        for kind in kinds:
            if kind is FeatureKind.B:
                vectors[kind] = ctx["B"][i]
            elif kind is FeatureKind.SP:
                vectors[kind] = ctx["Sp"][i]
            elif kind is FeatureKind.S:
                vectors[kind] = ctx["S"]
            elif kind in CATEGORICAL_KINDS:
                if kind not in vocabs:
                    raise FeatureError(f"no vocabulary supplied for kind {kind.label}")
                indices[kind] = vocabs[kind][_tag_of(tok, kind)]
            elif kind is FeatureKind.W:
                if word_vocab is None:
                    raise FeatureError("no word vocabulary supplied for kind W")
                indices[kind] = word_vocab.get(tok.text, UNK_INDEX)
            else:
                raise FeatureError(f"kind {kind.label} not valid for sequence models")
        bundles.append(FeatureBundle(vectors=vectors, indices=indices))
    return bundles


def _tag_of(tok, kind: FeatureKind) -> str:
    return {
        FeatureKind.P: tok.pos_simple,
        FeatureKind.T: tok.pos_detailed,
        FeatureKind.D: tok.dep_rel,
        FeatureKind.E: tok.entity_tag,
    }[kind]
