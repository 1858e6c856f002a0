import numpy as np
import pytest
import torch
from torch import nn

from oed.corpus import Dataset
from oed.featurize import (
    PAD_TOKEN,
    FeatureKind,
    HashedContextEncoder,
    build_tag_vocab,
    build_word_vocab,
)
from oed.models import (
    CnnClassifier,
    CnnConfig,
    EarlyStopper,
    ModelError,
    NotFittedError,
    RnnClassifier,
    RnnConfig,
    SvmClassifier,
    SvmConfig,
    build_cnn,
    build_rnn,
    build_svm,
    extract_windows,
    predict_sentence,
)
from oed.models.rnn import _RnnNet
from oed.synth import random_fixture, separable_corpus, short_sentence_fixture

ENCODER = HashedContextEncoder()


def _quick_rnn(dataset, feature_set="{B,S}", epochs=3, arch=(4,)):
    config = RnnConfig(hidden_units=arch, feature_set=feature_set,
                       l1=0.0, l2=0.0)
    model = build_rnn(config, dataset, encoder=ENCODER)
    model.fit(list(dataset.sentences), patience=epochs, max_epochs=epochs,
              seed=1)
    return model


# -- early stopping -------------------------------------------------------


def test_early_stopper_scripted_trace():
    stopper = EarlyStopper(patience=2)
    trace = [0.1, 0.3, 0.2, 0.2, 0.2]
    stops = [stopper.update(v) for v in trace]
    assert stops == [False, False, False, False, True]
    assert stopper.best_epoch == 2
    assert stopper.epoch == 5


def test_early_stopper_tie_does_not_reset_patience():
    stopper = EarlyStopper(patience=1)
    assert not stopper.update(0.5)
    assert not stopper.update(0.5)  # tie: not an improvement
    assert stopper.update(0.5)
    assert stopper.best_epoch == 1


def test_early_stopper_improvement_resets_patience():
    stopper = EarlyStopper(patience=1)
    for value in (0.1, 0.2, 0.3, 0.4):
        assert not stopper.update(value)
    assert stopper.best_epoch == 4


def test_early_stopper_rejects_bad_patience():
    with pytest.raises(ModelError):
        EarlyStopper(patience=0)


# -- sequence model config ------------------------------------------------


def test_rnn_config_rejects_position_feature():
    with pytest.raises(ModelError):
        RnnConfig(feature_set="{W,Po}")


def test_rnn_config_rejects_empty_architecture():
    with pytest.raises(ModelError):
        RnnConfig(hidden_units=())
    with pytest.raises(ModelError):
        RnnConfig(hidden_units=(5, 0))


def test_rnn_config_input_dim_full_set():
    assert RnnConfig().input_dim == 1972


def test_rnn_requires_encoder_for_contextual_features(tiny_dataset):
    config = RnnConfig(feature_set="{B}")
    with pytest.raises(ModelError, match="encoder"):
        build_rnn(config, tiny_dataset, encoder=None)


def test_rnn_requires_word_vocab_for_w():
    config = RnnConfig(feature_set="{W}")
    with pytest.raises(ModelError):
        RnnClassifier(config, word_vocab=None)


# -- sequence model behavior ----------------------------------------------


def test_rnn_predict_before_fit_raises(tiny_dataset):
    config = RnnConfig(feature_set="{B,S}")
    model = build_rnn(config, tiny_dataset, encoder=ENCODER)
    with pytest.raises(NotFittedError):
        model.predict_proba(list(tiny_dataset.sentences))


def test_rnn_probabilities_shape_and_range(tiny_dataset):
    model = _quick_rnn(tiny_dataset)
    probs = model.predict_proba(list(tiny_dataset.sentences))
    assert len(probs) == len(tiny_dataset)
    for s, p in zip(tiny_dataset, probs):
        assert p.shape == (len(s),)
        assert np.all((p >= 0) & (p <= 1))


def test_rnn_batch_order_does_not_change_predictions(tiny_dataset):
    model = _quick_rnn(tiny_dataset)
    sentences = list(tiny_dataset.sentences)
    forward = model.predict_proba(sentences)
    backward = model.predict_proba(sentences[::-1])[::-1]
    for a, b in zip(forward, backward):
        assert np.allclose(a, b, atol=1e-5)


def test_rnn_frozen_features_have_no_trainable_tables(tiny_dataset):
    model = _quick_rnn(tiny_dataset, feature_set="{B,S,Sp}")
    assert len(model.net.embeddings) == 0
    # deterministic inference: repeated prediction is bit-stable
    a = model.predict_proba(list(tiny_dataset.sentences))
    b = model.predict_proba(list(tiny_dataset.sentences))
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_rnn_all_features_width(tiny_dataset):
    config = RnnConfig(hidden_units=(3,), feature_set="all", l1=0.0, l2=0.0)
    model = build_rnn(config, tiny_dataset, encoder=ENCODER)
    model.fit(list(tiny_dataset.sentences), patience=1, max_epochs=1, seed=1)
    probs = model.predict_proba(list(tiny_dataset.sentences))
    assert len(probs) == len(tiny_dataset)


def test_rnn_stacked_architecture(tiny_dataset):
    model = _quick_rnn(tiny_dataset, arch=(5, 2), epochs=1)
    assert len(model.net.lstms) == 2


def test_rnn_save_load_round_trip(tmp_path, tiny_dataset):
    model = _quick_rnn(tiny_dataset, feature_set="{B,S,P,W}")
    model.save(tmp_path / "model")
    loaded = RnnClassifier.load(tmp_path / "model", encoder=ENCODER)
    a = model.predict_proba(list(tiny_dataset.sentences))
    b = loaded.predict_proba(list(tiny_dataset.sentences))
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-6)


def test_predict_sentence_thresholds(tiny_dataset):
    model = _quick_rnn(tiny_dataset)
    s = tiny_dataset.sentences[0]
    labels = predict_sentence(model, s)
    (probs,) = model.predict_proba([s])
    assert labels == [int(p >= 0.5) for p in probs]


def test_rnn_gradients_match_finite_differences():
    """Central-difference check of the network gradient in double precision."""
    torch.manual_seed(0)
    config = RnnConfig(hidden_units=(3,), dropout_p=0.0, l1=0.0, l2=0.0,
                       feature_set="{P}")
    net = _RnnNet(config, {"P": 5}, None).double()
    cats = {"P": torch.tensor([[2, 3, 4, 2]])}
    labels = torch.tensor([[1.0, 0.0, 1.0, 0.0]], dtype=torch.float64)
    bce = nn.BCEWithLogitsLoss()

    def loss_value():
        return bce(net(None, cats), labels)

    loss = loss_value()
    net.zero_grad()
    loss.backward()

    rng = np.random.default_rng(0)
    h = 1e-6
    checked = 0
    for param in net.parameters():
        if param.grad is None:
            continue
        flat = param.data.view(-1)
        grad = param.grad.view(-1)
        for idx in rng.choice(flat.numel(), size=min(3, flat.numel()),
                              replace=False):
            original = flat[idx].item()
            flat[idx] = original + h
            plus = loss_value().item()
            flat[idx] = original - h
            minus = loss_value().item()
            flat[idx] = original
            numeric = (plus - minus) / (2 * h)
            analytic = grad[idx].item()
            denom = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / denom < 1e-3
            checked += 1
    assert checked >= 10


def test_rnn_learns_separable_data(separable):
    config = RnnConfig(hidden_units=(8,), feature_set="{B}", l1=0.0, l2=0.0)
    model = build_rnn(config, separable, encoder=ENCODER)
    trace = model.fit(list(separable.sentences), patience=300, max_epochs=300,
                      seed=1)
    assert max(trace.val_f1) > 0.9
    assert trace.best_epoch <= trace.stopped_epoch


# -- window model ---------------------------------------------------------


def test_cnn_config_validation():
    with pytest.raises(ModelError, match="odd"):
        CnnConfig(window=4)
    with pytest.raises(ModelError, match="position"):
        CnnConfig(window=1, filter_sizes=(1,))
    with pytest.raises(ModelError, match="wider"):
        CnnConfig(window=3, filter_sizes=(2, 5))
    config = CnnConfig(window=1, filter_sizes=(1,), use_position=False)
    assert config.token_dim == 350


def test_extract_windows_against_slicing_oracle(tiny_dataset):
    window = 5
    half = window // 2
    for s in tiny_dataset:
        instances = extract_windows(s, window)
        assert len(instances) == len(s)
        for center, inst in enumerate(instances):
            pads = 0
            for slot, off in enumerate(range(-half, half + 1)):
                j = center + off
                if 0 <= j < len(s):
                    assert inst.texts[slot] == s.tokens[j].text
                    assert inst.entity_tags[slot] == s.tokens[j].entity_tag
                else:
                    assert inst.texts[slot] == PAD_TOKEN
                    assert inst.entity_tags[slot] == ""
                    pads += 1
            assert inst.pad_count == pads
            assert inst.label == s.tokens[center].label
            assert inst.positions == tuple(range(-half, half + 1))


def test_extract_windows_rejects_even_window(tiny_dataset):
    with pytest.raises(ModelError):
        extract_windows(tiny_dataset.sentences[0], 4)


def test_cnn_fit_predict_shapes(tiny_dataset):
    config = CnnConfig(window=3, filters_per_size=8, filter_sizes=(2, 3))
    model = build_cnn(config, tiny_dataset)
    model.fit(list(tiny_dataset.sentences), patience=2, max_epochs=2, seed=1)
    probs = model.predict_proba(list(tiny_dataset.sentences))
    for s, p in zip(tiny_dataset, probs):
        assert p.shape == (len(s),)
        assert np.all((p >= 0) & (p <= 1))


def test_cnn_embedding_norms_respect_cap(tiny_dataset):
    config = CnnConfig(window=3, filters_per_size=8, filter_sizes=(2, 3),
                       norm_cap=1.5)
    model = build_cnn(config, tiny_dataset)
    model.fit(list(tiny_dataset.sentences), patience=3, max_epochs=3, seed=1)
    for emb in (model.net.word_emb, model.net.entity_emb,
                model.net.position_emb):
        norms = emb.weight.norm(dim=1)
        assert torch.all(norms <= config.norm_cap + 1e-6)


def test_cnn_degenerate_window_trains():
    ds = short_sentence_fixture(10, max_len=12)
    config = CnnConfig(window=21, filters_per_size=4, filter_sizes=(2, 3))
    model = build_cnn(config, ds)
    model.fit(list(ds.sentences), patience=1, max_epochs=1, seed=1)
    probs = model.predict_proba(list(ds.sentences))
    assert len(probs) == len(ds)


def test_cnn_save_load_round_trip(tmp_path, tiny_dataset):
    config = CnnConfig(window=3, filters_per_size=4, filter_sizes=(2,))
    model = build_cnn(config, tiny_dataset)
    model.fit(list(tiny_dataset.sentences), patience=1, max_epochs=1, seed=1)
    model.save(tmp_path / "cnn")
    loaded = CnnClassifier.load(tmp_path / "cnn")
    a = model.predict_proba(list(tiny_dataset.sentences))
    b = loaded.predict_proba(list(tiny_dataset.sentences))
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-6)


# -- svm baseline ---------------------------------------------------------


def test_svm_config_rejects_unknown_kernel():
    with pytest.raises(ModelError):
        SvmConfig(kernel="quadratic")


def test_svm_requires_both_classes(tiny_dataset):
    from oed.corpus import relabel

    all_zero = [relabel(s, [0] * len(s)) for s in tiny_dataset]
    model = build_svm(SvmConfig())
    with pytest.raises(ModelError):
        model.fit(all_zero)


def test_svm_is_deterministic(separable):
    sentences = list(separable.sentences)
    preds = []
    for _ in range(2):
        model = build_svm(SvmConfig(kernel="linear"))
        model.fit(sentences)
        preds.append(np.concatenate(model.predict_proba(sentences)))
    assert np.array_equal(preds[0], preds[1])


def test_svm_outputs_hard_labels(separable):
    model = build_svm(SvmConfig(kernel="rbf"))
    model.fit(list(separable.sentences))
    probs = np.concatenate(model.predict_proba(list(separable.sentences)))
    assert set(np.unique(probs)) <= {0.0, 1.0}


def test_svm_trains_on_train_plus_validation(separable):
    sentences = list(separable.sentences)
    split_at = len(sentences) // 2
    joint = build_svm(SvmConfig())
    joint.fit(sentences)
    halves = build_svm(SvmConfig())
    halves.fit(sentences[:split_at], sentences[split_at:])
    a = np.concatenate(joint.predict_proba(sentences))
    b = np.concatenate(halves.predict_proba(sentences))
    assert np.array_equal(a, b)


def test_svm_save_load_round_trip(tmp_path, separable):
    model = build_svm(SvmConfig(kernel="linear"))
    model.fit(list(separable.sentences))
    model.save(tmp_path / "svm")
    loaded = SvmClassifier.load(tmp_path / "svm")
    a = np.concatenate(model.predict_proba(list(separable.sentences)))
    b = np.concatenate(loaded.predict_proba(list(separable.sentences)))
    assert np.array_equal(a, b)


def test_svm_predict_before_fit_raises(separable):
    model = build_svm(SvmConfig())
    with pytest.raises(NotFittedError):
        model.predict_proba(list(separable.sentences))
