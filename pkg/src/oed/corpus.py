"""Dataset model, JSONL file format, splitting, and descriptive statistics.

A dataset is a list of tokenized sentences with per-token binary trigger
labels plus POS / dependency / entity tag columns.  Files are JSON-lines,
one sentence per line:

    {"id": "s1", "date": "1998-08-17", "tokens": [
        {"t": "crisis", "y": 1, "pos": "NOUN", "tag": "NN",
         "dep": "nsubj", "ent": "O"}, ...]}
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

_ENTITY_TAG_RE = re.compile(r"^(O|[BI]-.+)$")
_ALPHA_RE = re.compile(r"[^\W\d_]")


class CorpusError(ValueError):
    """Raised for malformed dataset files or invariant violations."""


@dataclass(frozen=True)
class Token:
    text: str
    label: int  # 1 = trigger, 0 = non-trigger
    pos_simple: str = ""
    pos_detailed: str = ""
    dep_rel: str = ""
    entity_tag: str = "O"

    def __post_init__(self):
        if not self.text:
            raise CorpusError("token text must be non-empty")
        if self.label not in (0, 1):
            raise CorpusError(f"label must be 0 or 1, got {self.label!r}")
        if not _ENTITY_TAG_RE.match(self.entity_tag):
            raise CorpusError(f"invalid entity tag {self.entity_tag!r}")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]
    source_date: str | None = None

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError(f"sentence {self.id!r} has no tokens")

    def __len__(self):
        return len(self.tokens)

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    @property
    def labels(self) -> list[int]:
        return [t.label for t in self.tokens]


@dataclass(frozen=True)
class Dataset:
    sentences: tuple[Sentence, ...]
    partition: str = "trainval"  # "trainval" or "test"

    def __post_init__(self):
        if self.partition not in ("trainval", "test"):
            raise CorpusError(f"unknown partition {self.partition!r}")
        seen = set()
        for s in self.sentences:
            if s.id in seen:
                raise CorpusError(f"duplicate sentence id {s.id!r}")
            seen.add(s.id)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def ids(self) -> set[str]:
        return {s.id for s in self.sentences}


@dataclass(frozen=True)
class DatasetStats:
    sentence_count: int
    token_count: int
    word_count: int
    entity_count: int
    event_count: int
    avg_tokens_per_sentence: float
    avg_words_per_sentence: float
    avg_entities_per_sentence: float
    avg_events_per_sentence: float
    vocab_sizes: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise CorpusError(
                f"validation_fraction must be in (0,1), got {self.validation_fraction}"
            )


def _token_from_record(rec: dict, line_no: int) -> Token:
    try:
        return Token(
            text=rec["t"],
            label=rec["y"],
            pos_simple=rec.get("pos", ""),
            pos_detailed=rec.get("tag", ""),
            dep_rel=rec.get("dep", ""),
            entity_tag=rec.get("ent", "O"),
        )
    except KeyError as e:
        raise CorpusError(f"line {line_no}: token record missing key {e}") from e
    except CorpusError as e:
        raise CorpusError(f"line {line_no}: {e}") from e


def load_dataset(path: str | Path, partition: str = "trainval") -> Dataset:
    """Load a JSONL dataset file, validating every record.

    Errors report the offending line number.
    """
    path = Path(path)
    sentences: list[Sentence] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"line {line_no}: malformed JSON: {e}") from e
            if not isinstance(rec, dict) or "id" not in rec or "tokens" not in rec:
                raise CorpusError(f"line {line_no}: record needs 'id' and 'tokens'")
            sid = rec["id"]
            if sid in seen:
                raise CorpusError(f"duplicate id {sid!r} at line {line_no}")
            seen.add(sid)
            tokens = tuple(_token_from_record(t, line_no) for t in rec["tokens"])
            try:
                sentences.append(
                    Sentence(id=sid, tokens=tokens, source_date=rec.get("date"))
                )
            except CorpusError as e:
                raise CorpusError(f"line {line_no}: {e}") from e
    return Dataset(sentences=tuple(sentences), partition=partition)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the JSONL format; load(save(d)) round-trips."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for s in dataset:
            f.write(sentence_to_json(s) + "\n")


def sentence_to_json(s: Sentence) -> str:
    rec = {
        "id": s.id,
        "date": s.source_date,
        "tokens": [
            {
                "t": t.text,
                "y": t.label,
                "pos": t.pos_simple,
                "tag": t.pos_detailed,
                "dep": t.dep_rel,
                "ent": t.entity_tag,
            }
            for t in s.tokens
        ],
    }
    return json.dumps(rec, ensure_ascii=False)


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle then prefix split into (train, validation).

    Train gets ceil((1-f)*N) sentences, validation the remainder.
    Deterministic for a fixed seed.
    """
    if dataset.partition != "trainval":
        raise CorpusError("can only split the trainval partition")
    n = len(dataset)
    n_train = math.ceil((1.0 - spec.validation_fraction) * n)
    order = np.random.default_rng(spec.seed).permutation(n)
    train = tuple(dataset.sentences[i] for i in order[:n_train])
    val = tuple(dataset.sentences[i] for i in order[n_train:])
    return (
        Dataset(sentences=train, partition="trainval"),
        Dataset(sentences=val, partition="trainval"),
    )


def is_word(text: str) -> bool:
    """A token counts as a word if it contains at least one letter."""
    return bool(_ALPHA_RE.search(text))


def count_entity_spans(tokens) -> int:
    """Count contiguous entity spans; a B- tag (or I- after O) starts a span."""
    count = 0
    prev_inside = False
    for t in tokens:
        tag = t.entity_tag
        if tag == "O":
            prev_inside = False
        elif tag.startswith("B-"):
            count += 1
            prev_inside = True
        else:  # I-
            if not prev_inside:
                count += 1
            prev_inside = True
    return count


def compute_stats(dataset: Dataset) -> DatasetStats:
    """Descriptive statistics: token/word/entity/event counts and tag vocab sizes."""
    n_sent = len(dataset)
    n_tok = n_word = n_ent = n_event = 0
    vocabs: dict[str, set] = {
        "word": set(),
        "P": set(),
        "T": set(),
        "D": set(),
        "E": set(),
    }
    for s in dataset:
        n_tok += len(s)
        n_ent += count_entity_spans(s.tokens)
        for t in s.tokens:
            if is_word(t.text):
                n_word += 1
                vocabs["word"].add(t.text)
            n_event += t.label
            vocabs["P"].add(t.pos_simple)
            vocabs["T"].add(t.pos_detailed)
            vocabs["D"].add(t.dep_rel)
            vocabs["E"].add(t.entity_tag)

    def avg(total):
        return total / n_sent if n_sent else 0.0

    return DatasetStats(
        sentence_count=n_sent,
        token_count=n_tok,
        word_count=n_word,
        entity_count=n_ent,
        event_count=n_event,
        avg_tokens_per_sentence=avg(n_tok),
        avg_words_per_sentence=avg(n_word),
        avg_entities_per_sentence=avg(n_ent),
        avg_events_per_sentence=avg(n_event),
        vocab_sizes={k: len(v) for k, v in vocabs.items()} if n_sent else {},
    )


def concat(a: Dataset, b: Dataset, partition: str | None = None) -> Dataset:
    """Concatenate two datasets (e.g. train + validation for the SVM)."""
    return Dataset(
        sentences=a.sentences + b.sentences,
        partition=partition or a.partition,
    )


def load_manifest(path: str | Path) -> tuple[Dataset, Dataset]:
    """Load a partition manifest: a JSON file with 'trainval' and 'test' paths."""
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        manifest = json.load(f)
    base = path.parent
    trainval = load_dataset(base / manifest["trainval"], partition="trainval")
    test = load_dataset(base / manifest["test"], partition="test")
    overlap = trainval.ids & test.ids
    if overlap:
        raise CorpusError(f"sentence ids in both partitions: {sorted(overlap)[:5]}")
    return trainval, test


def relabel(sentence: Sentence, labels) -> Sentence:
    """Return a copy of `sentence` with the given per-token labels."""
    if len(labels) != len(sentence):
        raise CorpusError("label length mismatch")
    tokens = tuple(
        replace(tok, label=int(y)) for tok, y in zip(sentence.tokens, labels)
    )
    return replace(sentence, tokens=tokens)
