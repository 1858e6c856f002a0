"""Command-line entry point: `oed` with verbs stats, featurize, train,
experiment run|resume, report, svm, and serve.

Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click

from . import corpus, evalstats, trainer
from .featurize import (
    FeatureCache,
    FeatureError,
    HashedContextEncoder,
    WordVectors,
    contextual_vectors,
    parse_feature_expr,
)
from .models import KERNELS, SvmConfig, build_svm
from .trainer import (
    ConfigMismatchError,
    ExperimentConfig,
    TrainerError,
    TrialConfig,
    VariantSpec,
)

_TOP_KEYS = {
    "name", "seeds", "patience", "max_epochs", "validation_fraction",
    "deterministic", "fixed_split", "encoder_radius", "word_vectors",
    "data", "variants",
}
_DATA_KEYS = {"trainval", "test"}


def _parse_seeds(raw) -> tuple[int, ...]:
    if isinstance(raw, str):
        lo, _, hi = raw.partition("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in raw)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment TOML file (strict: unknown keys fail)."""
    path = Path(path)
    if not path.exists():
        raise click.UsageError(f"config file not found: {path}")
    with path.open("rb") as f:
        raw = tomllib.load(f)

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    data = raw.get("data", {})
    unknown = set(data) - _DATA_KEYS
    if unknown:
        raise click.UsageError(f"unknown [data] keys: {sorted(unknown)}")
    if "trainval" not in data:
        raise click.UsageError("config needs data.trainval")
    if "variants" not in raw or not raw["variants"]:
        raise click.UsageError("config needs at least one [[variants]] entry")

    base = path.parent
    variants = []
    for v in raw["variants"]:
        v = dict(v)
        try:
            vid = v.pop("id")
            model = v.pop("model")
        except KeyError as e:
            raise click.UsageError(f"variant missing key {e}")
        try:
            variants.append(VariantSpec(id=vid, model=model, params=v))
        except TrainerError as e:
            raise click.UsageError(str(e))

    wv = raw.get("word_vectors")
    try:
        return ExperimentConfig(
            name=raw.get("name", path.stem),
            variants=tuple(variants),
            seeds=_parse_seeds(raw.get("seeds", "1..10")),
            trainval_path=str(base / data["trainval"]),
            test_path=str(base / data["test"]) if "test" in data else None,
            patience=int(raw.get("patience", 400)),
            max_epochs=int(raw.get("max_epochs", 5000)),
            validation_fraction=float(raw.get("validation_fraction", 0.2)),
            deterministic=bool(raw.get("deterministic", True)),
            fixed_split=bool(raw.get("fixed_split", False)),
            encoder_radius=int(raw.get("encoder_radius", 2)),
            word_vectors_path=str(base / wv) if wv else None,
        )
    except TrainerError as e:
        raise click.UsageError(str(e))


def _load_dataset_or_die(path, partition="trainval"):
    path = Path(path)
    if not path.exists():
        raise click.UsageError(f"dataset file not found: {path}")
    try:
        return corpus.load_dataset(path, partition=partition)
    except corpus.CorpusError as e:
        raise click.UsageError(str(e))


def _cache_dir(option_value):
    return option_value or os.environ.get("OED_CACHE_DIR") or "cache"


@click.group()
def main():
    """Ongoing-event trigger detection laboratory."""


@main.command()
@click.argument("dataset", type=click.Path())
def stats(dataset):
    """Print descriptive statistics for a JSONL dataset file."""
    ds = _load_dataset_or_die(dataset)
    s = corpus.compute_stats(ds)
    click.echo(f"{'sentences':<22}{s.sentence_count}")
    click.echo(f"{'tokens':<22}{s.token_count}  (avg {s.avg_tokens_per_sentence:.2f})")
    click.echo(f"{'words':<22}{s.word_count}  (avg {s.avg_words_per_sentence:.2f})")
    click.echo(f"{'entities':<22}{s.entity_count}  (avg {s.avg_entities_per_sentence:.2f})")
    click.echo(f"{'events':<22}{s.event_count}  (avg {s.avg_events_per_sentence:.2f})")
    for family, size in sorted(s.vocab_sizes.items()):
        click.echo(f"{'vocab ' + family:<22}{size}")


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--features", default="all", help='e.g. "all-{B}" or "{B,S}"')
@click.option("--cache", "cache_dir", default=None,
              help="cache directory (default $OED_CACHE_DIR or ./cache)")
@click.option("--radius", default=2, help="reference encoder context radius")
def featurize(dataset, features, cache_dir, radius):
    """Precompute and cache contextual feature vectors for every sentence."""
    try:
        kinds = parse_feature_expr(features)
    except FeatureError as e:
        raise click.UsageError(str(e))
    ds = _load_dataset_or_die(dataset)
    encoder = HashedContextEncoder(radius=radius)
    cache = FeatureCache(_cache_dir(cache_dir))
    for s in ds:
        contextual_vectors(s, encoder, cache)
    click.echo(
        f"cached contextual vectors for {len(ds)} sentences "
        f"under {cache.root / encoder.name} (features {features})"
    )


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--test", "test_path", type=click.Path(), default=None)
@click.option("--model", default="rnn", type=click.Choice(["rnn", "cnn"]))
@click.option("--features", default="all")
@click.option("--arch", default="15", help='hidden units, e.g. "100,15,5"')
@click.option("--window", default=5)
@click.option("--seed", default=1)
@click.option("--patience", default=400)
@click.option("--max-epochs", default=5000)
@click.option("--validation-fraction", default=0.2)
@click.option("--out", "out_dir", type=click.Path(), default="out")
def train(dataset, test_path, model, features, arch, window, seed,
          patience, max_epochs, validation_fraction, out_dir):
    """Run a single trial and write its result record."""
    trainval = _load_dataset_or_die(dataset)
    test = _load_dataset_or_die(test_path, "test") if test_path else None
    if model == "rnn":
        try:
            parse_feature_expr(features)
        except FeatureError as e:
            raise click.UsageError(str(e))
        params = {
            "features": features,
            "arch": [int(x) for x in arch.split(",")],
        }
        variant = VariantSpec(id=f"rnn-{arch.replace(',', '_')}",
                              model="rnn", params=params)
    else:
        sizes = [k for k in (2, 3, 4, 5) if k <= window] or [1]
        variant = VariantSpec(id=f"cnn-w{window}", model="cnn",
                              params={"window": window,
                                      "filter_sizes": sizes,
                                      "use_position": window > 1})
    cfg = TrialConfig(
        variant=variant, seed=seed, patience=patience, max_epochs=max_epochs,
        validation_fraction=validation_fraction,
    )
    try:
        result = trainer.run_trial(cfg, trainval, test)
    except Exception as e:
        raise click.ClickException(str(e))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"trial-{variant.id}-{seed}.json"
    path.write_text(result.to_json())
    click.echo(f"wrote {path}")


@main.group()
def experiment():
    """Run or resume a declarative experiment grid."""


@experiment.command("run")
@click.argument("config", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default=None)
def experiment_run(config, out_dir):
    cfg = load_config(config)
    out_dir = out_dir or f"out/{cfg.name}"
    try:
        results = trainer.run_experiment(cfg, out_dir)
    except ConfigMismatchError as e:
        raise click.UsageError(str(e))
    except Exception as e:
        raise click.ClickException(str(e))
    click.echo(f"{len(results)} trial results in {out_dir}")


@experiment.command("resume")
@click.argument("config", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), required=True)
def experiment_resume(config, out_dir):
    cfg = load_config(config)
    try:
        results = trainer.resume_experiment(cfg, out_dir)
    except ConfigMismatchError as e:
        raise click.UsageError(str(e))
    except TrainerError as e:
        raise click.ClickException(str(e))
    click.echo(f"{len(results)} trial results in {out_dir}")


@main.command()
@click.argument("results_dir", type=click.Path())
@click.option("--split", default="test")
@click.option("--f1", "f1_flavor", default="f1_std",
              type=click.Choice(["f1_std", "f1_sens_spec"]))
@click.option("--student", is_flag=True,
              help="pooled-variance t-test instead of Welch")
@click.option("--against-best", is_flag=True, default=True,
              help="compare each variant to the best (always on)")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def report(results_dir, split, f1_flavor, student, against_best, csv_path):
    """Aggregate trial results into a per-variant comparison table."""
    results = trainer.load_results(results_dir)
    if not results:
        raise click.UsageError(f"no trial results in {results_dir}")
    try:
        rep = evalstats.render_report(
            results, split=split, f1_flavor=f1_flavor, welch=not student
        )
    except (evalstats.StatsError, KeyError) as e:
        raise click.ClickException(str(e))
    click.echo(rep.to_text())
    if csv_path:
        Path(csv_path).write_text(rep.to_csv())
        click.echo(f"wrote {csv_path}")


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--test", "test_path", type=click.Path(), default=None)
@click.option("--kernel", default="all",
              type=click.Choice(("all",) + KERNELS))
def svm(dataset, test_path, kernel):
    """Fit the per-token SVM baseline for one kernel or all four."""
    trainval = _load_dataset_or_die(dataset)
    test = _load_dataset_or_die(test_path, "test") if test_path else None
    kernels = KERNELS if kernel == "all" else (kernel,)
    click.echo(f"{'kernel':<12}{'split':<10}{'sens':>8}{'spec':>8}{'f1':>8}")
    for k in kernels:
        model = build_svm(SvmConfig(kernel=k))
        try:
            model.fit(list(trainval.sentences))
        except Exception as e:
            raise click.ClickException(str(e))
        for name, ds in (("train+val", trainval), ("test", test)):
            if ds is None:
                continue
            import numpy as np

            probs = np.concatenate(model.predict_proba(list(ds.sentences)))
            gold = np.concatenate([np.array(s.labels) for s in ds])
            m = evalstats.metrics(evalstats.confusion(probs, gold))
            click.echo(
                f"{k:<12}{name:<10}{m.sensitivity:>8.3f}"
                f"{m.specificity:>8.3f}{m.f1_std:>8.3f}"
            )


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000)
def serve(host, port):
    """Start the annotation service HTTP API."""
    from .service import serve as run_server

    run_server(host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
