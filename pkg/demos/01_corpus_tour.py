"""A guided tour of the corpus layer.

Generates a synthetic tagged corpus, saves it in the JSONL file format,
loads it back, and prints descriptive statistics — the same numbers the
`oed stats` command reports.

Run:  python3 demos/01_corpus_tour.py
"""

import tempfile
from pathlib import Path

from oed.corpus import SplitSpec, compute_stats, load_dataset, save_dataset, split
from oed.synth import random_fixture

workdir = Path(tempfile.mkdtemp(prefix="oed-demo-"))
dataset = random_fixture(40, seed=7)
path = workdir / "corpus.jsonl"
save_dataset(dataset, path)
print(f"wrote {len(dataset)} sentences to {path}\n")

loaded = load_dataset(path)
assert loaded.sentences == dataset.sentences  # byte-faithful round trip

stats = compute_stats(loaded)
print(f"sentences          {stats.sentence_count}")
print(f"tokens             {stats.token_count} "
      f"(avg {stats.avg_tokens_per_sentence:.2f}/sentence)")
print(f"words              {stats.word_count}")
print(f"entity spans       {stats.entity_count}")
print(f"trigger tokens     {stats.event_count}")
for family, size in sorted(stats.vocab_sizes.items()):
    print(f"vocab[{family:<5}]       {size}")

train, val = split(loaded, SplitSpec(seed=1, validation_fraction=0.2))
print(f"\nseeded 80/20 split: {len(train)} train / {len(val)} validation "
      f"(disjoint: {not (train.ids & val.ids)})")
