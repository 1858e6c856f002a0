import json

import pytest

from oed.corpus import Dataset, relabel
from oed.evalstats import ConfusionCounts
from oed.synth import random_fixture, separable_corpus
from oed.trainer import (
    ConfigMismatchError,
    ExperimentConfig,
    TrainerError,
    TrialConfig,
    TrialResult,
    VariantSpec,
    load_results,
    resume_experiment,
    run_experiment,
    run_trial,
)

RNN_TINY = VariantSpec(
    id="rnn-tiny", model="rnn",
    params={"features": "{B,S}", "arch": [4], "l1": 0.0, "l2": 0.0},
)


def _trial_config(seed=1, **kw):
    kw.setdefault("patience", 3)
    kw.setdefault("max_epochs", 3)
    return TrialConfig(variant=RNN_TINY, seed=seed, **kw)


@pytest.fixture(scope="module")
def data():
    return random_fixture(12, seed=4), Dataset(
        sentences=random_fixture(5, seed=6, prefix="t").sentences,
        partition="test",
    )


# -- variant / config validation ------------------------------------------


def test_variant_rejects_unknown_model():
    with pytest.raises(TrainerError):
        VariantSpec(id="x", model="transformer")


def test_variant_rejects_unknown_keys():
    with pytest.raises(TrainerError, match="unknown keys"):
        VariantSpec(id="x", model="rnn", params={"window": 5})
    with pytest.raises(TrainerError, match="unknown keys"):
        VariantSpec(id="x", model="svm", params={"arch": [5]})


def test_variant_builds_model_configs():
    rnn = VariantSpec(id="a", model="rnn",
                      params={"features": "{W}", "arch": [5, 2]})
    assert rnn.model_config().hidden_units == (5, 2)
    assert rnn.model_config().feature_set == "{W}"
    cnn = VariantSpec(id="b", model="cnn", params={"window": 3,
                                                   "filter_sizes": [2, 3]})
    assert cnn.model_config().filter_sizes == (2, 3)
    svm = VariantSpec(id="c", model="svm", params={"kernel": "rbf"})
    assert svm.model_config().kernel == "rbf"


def test_trial_config_rejects_bad_patience():
    with pytest.raises(TrainerError):
        TrialConfig(variant=RNN_TINY, seed=1, patience=0)


def test_experiment_config_requires_consecutive_seeds():
    with pytest.raises(TrainerError, match="consecutive"):
        ExperimentConfig(name="x", variants=(RNN_TINY,), seeds=(2, 3),
                         trainval_path="d.jsonl")
    with pytest.raises(TrainerError, match="consecutive"):
        ExperimentConfig(name="x", variants=(RNN_TINY,), seeds=(1, 3),
                         trainval_path="d.jsonl")


def test_experiment_config_requires_unique_variant_ids():
    with pytest.raises(TrainerError, match="unique"):
        ExperimentConfig(name="x", variants=(RNN_TINY, RNN_TINY),
                         seeds=(1,), trainval_path="d.jsonl")


def test_experiment_config_hash_is_content_addressed():
    a = ExperimentConfig(name="x", variants=(RNN_TINY,), seeds=(1,),
                         trainval_path="d.jsonl")
    b = ExperimentConfig(name="x", variants=(RNN_TINY,), seeds=(1,),
                         trainval_path="d.jsonl")
    c = ExperimentConfig(name="x", variants=(RNN_TINY,), seeds=(1, 2),
                         trainval_path="d.jsonl")
    assert a.hash() == b.hash()
    assert a.hash() != c.hash()


# -- result records -------------------------------------------------------


def test_trial_result_json_round_trip():
    result = TrialResult(
        variant="v", seed=2, best_epoch=3, stopped_epoch=5,
        confusion={"test": ConfusionCounts(1, 2, 3, 4)}, wall_seconds=0.0,
    )
    assert TrialResult.from_json(result.to_json()) == result


def test_trial_result_json_is_canonical():
    result = TrialResult(
        variant="v", seed=1, best_epoch=1, stopped_epoch=1,
        confusion={"validation": ConfusionCounts(0, 0, 1, 0),
                   "train": ConfusionCounts(1, 0, 0, 0)},
        wall_seconds=0.0,
    )
    text = result.to_json()
    assert text == json.dumps(json.loads(text), sort_keys=True)
    assert text.index('"train"') < text.index('"validation"')


# -- single trials --------------------------------------------------------


def test_run_trial_rnn_reports_three_splits(data):
    trainval, test = data
    result = run_trial(_trial_config(), trainval, test)
    assert set(result.confusion) == {"train", "validation", "test"}
    assert result.variant == "rnn-tiny" and result.seed == 1
    assert result.wall_seconds == 0.0  # deterministic mode


def test_run_trial_svm_skips_validation(data):
    trainval, test = data
    cfg = TrialConfig(
        variant=VariantSpec(id="svm-lin", model="svm",
                            params={"kernel": "linear"}),
        seed=1,
    )
    result = run_trial(cfg, trainval, test)
    assert set(result.confusion) == {"train", "test"}
    assert result.best_epoch == result.stopped_epoch == 1


def test_run_trial_records_wall_time_when_not_deterministic(data):
    trainval, _ = data
    result = run_trial(_trial_config(deterministic=False), trainval)
    assert result.wall_seconds > 0.0


def test_run_trial_seed_changes_outcome(data):
    trainval, test = data
    a = run_trial(_trial_config(seed=1), trainval, test)
    b = run_trial(_trial_config(seed=2), trainval, test)
    assert a.to_json() != b.to_json()


def test_run_trial_fixed_split_shares_partition(data):
    trainval, _ = data
    a = run_trial(_trial_config(seed=1, fixed_split=True), trainval)
    b = run_trial(_trial_config(seed=2, fixed_split=True), trainval)
    # identical split sizes imply the same total counted examples per split
    assert a.confusion["validation"].total == b.confusion["validation"].total


# -- experiment grid ------------------------------------------------------


def _experiment(tmp_path, variants, seeds=(1, 2)):
    from oed.corpus import save_dataset

    trainval = random_fixture(12, seed=4)
    test = random_fixture(5, seed=6, prefix="t")
    save_dataset(trainval, tmp_path / "train.jsonl")
    save_dataset(test, tmp_path / "test.jsonl")
    return ExperimentConfig(
        name="exp", variants=variants, seeds=seeds,
        trainval_path=str(tmp_path / "train.jsonl"),
        test_path=str(tmp_path / "test.jsonl"),
        patience=2, max_epochs=2,
    )


def test_run_experiment_persists_each_trial(tmp_path):
    cfg = _experiment(tmp_path, (RNN_TINY,))
    out = tmp_path / "out"
    results = run_experiment(cfg, out)
    assert len(results) == 2
    assert (out / "experiment.json").exists()
    assert (out / "trial-rnn-tiny-1.json").exists()
    assert (out / "trial-rnn-tiny-2.json").exists()


def test_run_experiment_skips_completed_trials(tmp_path):
    cfg = _experiment(tmp_path, (RNN_TINY,))
    out = tmp_path / "out"
    run_experiment(cfg, out)
    sentinel = '{"variant": "rnn-tiny", "seed": 1, "best_epoch": 99, ' \
               '"stopped_epoch": 99, "confusion": {}, "wall_seconds": 0.0}'
    (out / "trial-rnn-tiny-1.json").write_text(sentinel)
    results = run_experiment(cfg, out)
    # the tampered record is loaded, not recomputed
    assert any(r.best_epoch == 99 for r in results)


def test_run_experiment_detects_config_mismatch(tmp_path):
    cfg = _experiment(tmp_path, (RNN_TINY,))
    out = tmp_path / "out"
    run_experiment(cfg, out)
    other = _experiment(tmp_path, (RNN_TINY,), seeds=(1,))
    with pytest.raises(ConfigMismatchError):
        run_experiment(other, out)


def test_run_experiment_records_failures_and_continues(tmp_path):
    from oed.corpus import save_dataset

    # all-negative labels: the svm cannot fit, the rnn still can
    ds = random_fixture(8, seed=4)
    flat = Dataset(sentences=tuple(relabel(s, [0] * len(s)) for s in ds))
    save_dataset(flat, tmp_path / "flat.jsonl")
    bad = VariantSpec(id="svm-bad", model="svm", params={"kernel": "linear"})
    cfg = ExperimentConfig(
        name="exp", variants=(bad, RNN_TINY), seeds=(1,),
        trainval_path=str(tmp_path / "flat.jsonl"),
        patience=2, max_epochs=2,
    )
    out = tmp_path / "out"
    results = run_experiment(cfg, out)
    assert len(results) == 1 and results[0].variant == "rnn-tiny"
    failed = json.loads((out / "trial-svm-bad-1.failed.json").read_text())
    assert failed["variant"] == "svm-bad" and "class" in failed["error"]


def test_resume_requires_existing_run(tmp_path):
    cfg = _experiment(tmp_path, (RNN_TINY,))
    with pytest.raises(TrainerError, match="resume"):
        resume_experiment(cfg, tmp_path / "nothing")


def test_resume_completes_missing_trials(tmp_path):
    cfg = _experiment(tmp_path, (RNN_TINY,))
    out = tmp_path / "out"
    run_experiment(cfg, out)
    (out / "trial-rnn-tiny-2.json").unlink()
    results = resume_experiment(cfg, out)
    assert len(results) == 2
    assert (out / "trial-rnn-tiny-2.json").exists()


def test_load_results_ignores_failure_records(tmp_path):
    cfg = _experiment(tmp_path, (RNN_TINY,), seeds=(1,))
    out = tmp_path / "out"
    run_experiment(cfg, out)
    (out / "trial-ghost-1.failed.json").write_text(
        '{"variant": "ghost", "seed": 1, "error": "x"}'
    )
    results = load_results(out)
    assert [r.variant for r in results] == ["rnn-tiny"]
