import itertools
import random

import numpy as np
import pytest

from docprune.classifier import (
    DegenerateLabelsError,
    FeaturizerConfig,
    LabeledExample,
    ModelFormatError,
    QualityClassifier,
    TrainConfig,
    class_weight_map,
    f1,
    featurize,
    featurize_text,
    load_model,
    logistic_loss,
    logistic_loss_gradient,
    save_model,
    score,
    split_train_val,
    train_classifier,
)
from docprune.corpus import snippet_of


class TestFeaturize:
    def test_repeated_token_single_index(self):
        config = FeaturizerConfig(ngram_orders=(1,), hash_bits=10)
        feats = featurize(snippet_of("a a a"), config)
        assert len(feats) == 1
        assert list(feats.values()) == [3]

    def test_deterministic(self):
        config = FeaturizerConfig()
        text = "The quick brown fox jumps over the lazy dog"
        assert featurize_text(text, config) == featurize_text(text, config)

    def test_one_token_change_bounds_differences(self):
        # For a 5-token text, changing token i alters at most n old + n new
        # n-grams per order n.
        config = FeaturizerConfig(ngram_orders=(1, 2, 3), hash_bits=20)
        base = "t0 t1 t2 t3 t4"
        changed = "t0 t1 XX t3 t4"
        for order in (1, 2, 3):
            cfg = FeaturizerConfig(ngram_orders=(order,), hash_bits=20)
            a = featurize_text(base, cfg)
            b = featurize_text(changed, cfg)
            differing = {
                k for k in a.keys() | b.keys() if a.get(k, 0) != b.get(k, 0)
            }
            assert len(differing) <= 2 * order

    def test_no_word_tokens_fallback_feature(self):
        config = FeaturizerConfig()
        feats = featurize(snippet_of("!!! ???"), config)
        assert len(feats) == 1

    def test_empty_snippet_rejected(self):
        with pytest.raises(ValueError):
            featurize(snippet_of(""), FeaturizerConfig())

    def test_indices_within_dimension(self):
        rng = random.Random(3)
        config = FeaturizerConfig(hash_bits=8)
        for _ in range(50):
            text = " ".join(
                "".join(rng.choice("abcdial") for _ in range(rng.randint(1, 8)))
                for _ in range(rng.randint(1, 30))
            )
            feats = featurize_text(text, config)
            assert all(0 <= k < 256 for k in feats)

    def test_hash_bits_bounds(self):
        with pytest.raises(ValueError):
            FeaturizerConfig(hash_bits=7)
        with pytest.raises(ValueError):
            FeaturizerConfig(hash_bits=27)
        FeaturizerConfig(hash_bits=8)
        FeaturizerConfig(hash_bits=26)

    def test_lowercase_folding(self):
        config = FeaturizerConfig(ngram_orders=(1,), hash_bits=12)
        assert featurize_text("Hello HELLO hello", config) == featurize_text(
            "hello hello hello", config
        )


def _examples(n_pos, n_neg, seed=0, hash_bits=10):
    """Separable toy set: positives carry 'good', negatives carry 'bad'."""
    rng = random.Random(seed)
    config = FeaturizerConfig(ngram_orders=(1,), hash_bits=hash_bits)
    out = []
    for i in range(n_pos + n_neg):
        pos = i < n_pos
        filler = " ".join(f"w{rng.randrange(50)}" for _ in range(10))
        marker = "good" if pos else "bad"
        out.append(
            LabeledExample(f"e{i}", featurize_text(f"{filler} {marker}", config), int(pos))
        )
    rng.shuffle(out)
    return out, config


class TestSplitTrainVal:
    def test_stratified_counts(self):
        examples, _ = _examples(25, 75)
        train, val = split_train_val(examples, 0.1, seed=0)
        assert len(val) == 10
        assert len(train) == 90
        positives = sum(e.target for e in val)
        assert positives in (2, 3)

    def test_deterministic(self):
        examples, _ = _examples(30, 70)
        a = split_train_val(examples, 0.2, seed=5)
        b = split_train_val(examples, 0.2, seed=5)
        assert [e.doc_id for e in a[0]] == [e.doc_id for e in b[0]]
        assert [e.doc_id for e in a[1]] == [e.doc_id for e in b[1]]

    def test_partition_is_exhaustive_and_disjoint(self):
        examples, _ = _examples(40, 60)
        train, val = split_train_val(examples, 0.15, seed=1)
        train_ids = [e.doc_id for e in train]
        val_ids = [e.doc_id for e in val]
        assert not set(train_ids) & set(val_ids)
        assert sorted(train_ids + val_ids) == sorted(e.doc_id for e in examples)

    def test_too_few_examples_rejected(self):
        examples, _ = _examples(4, 5)
        with pytest.raises(ValueError):
            split_train_val(examples, 0.1, seed=0)

    def test_fraction_bounds(self):
        examples, _ = _examples(10, 10)
        with pytest.raises(ValueError):
            split_train_val(examples, 0.0, seed=0)
        with pytest.raises(ValueError):
            split_train_val(examples, 1.0, seed=0)


def _brute_force_f1(preds, gold):
    tp = fp = fn = 0
    for p, g in zip(preds, gold):
        if p == 1 and g == 1:
            tp += 1
        elif p == 1 and g == 0:
            fp += 1
        elif p == 0 and g == 1:
            fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


class TestF1:
    def test_hand_computed_case(self):
        # TP=2, FP=1, FN=1 -> P = R = 2/3 -> F1 = 2/3
        preds = [1, 1, 1, 0, 0]
        gold = [1, 1, 0, 1, 0]
        assert f1(preds, gold) == pytest.approx(2 / 3)

    def test_perfect_prediction(self):
        assert f1([1, 0, 1], [1, 0, 1]) == 1.0

    def test_no_positives_anywhere_is_zero(self):
        assert f1([0, 0], [0, 0]) == 0.0

    def test_matches_brute_force_on_all_length4_combinations(self):
        for preds in itertools.product((0, 1), repeat=4):
            for gold in itertools.product((0, 1), repeat=4):
                assert f1(list(preds), list(gold)) == pytest.approx(
                    _brute_force_f1(preds, gold)
                ), (preds, gold)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            f1([1], [1, 0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            f1([], [])


class TestGradient:
    def test_analytic_gradient_matches_finite_differences(self):
        rng = random.Random(9)
        np_rng = np.random.default_rng(9)
        config = FeaturizerConfig(hash_bits=8)
        dim = config.dim
        examples = []
        for i in range(12):
            features = {rng.randrange(dim): rng.randint(1, 3) for _ in range(10)}
            examples.append(LabeledExample(f"g{i}", features, rng.randint(0, 1)))
        # both classes present for the weighted variant
        examples[0].target, examples[1].target = 0, 1
        weights = np_rng.normal(0, 0.5, size=dim)
        bias = 0.3
        cw = class_weight_map([e.target for e in examples])

        grad_w, grad_b = logistic_loss_gradient(weights, bias, examples, cw)
        h = 1e-6
        active = sorted({k for e in examples for k in e.features})
        checked = active[:40] + [d for d in range(5) if d not in active]
        for k in checked:
            w_plus, w_minus = weights.copy(), weights.copy()
            w_plus[k] += h
            w_minus[k] -= h
            fd = (
                logistic_loss(w_plus, bias, examples, cw)
                - logistic_loss(w_minus, bias, examples, cw)
            ) / (2 * h)
            denom = max(abs(fd), abs(grad_w[k]), 1e-8)
            assert abs(fd - grad_w[k]) / denom <= 1e-4, f"index {k}"
        fd_b = (
            logistic_loss(weights, bias + h, examples, cw)
            - logistic_loss(weights, bias - h, examples, cw)
        ) / (2 * h)
        assert abs(fd_b - grad_b) / max(abs(fd_b), 1e-8) <= 1e-4


class TestTraining:
    def test_separable_data_high_f1(self):
        examples, config = _examples(150, 450, seed=2)
        train, val = split_train_val(examples, 0.2, seed=0)
        clf = train_classifier(train, val, TrainConfig(featurizer=config, seed=0))
        assert clf.training_meta["val_f1"] >= 0.95

    def test_deterministic_weights(self):
        examples, config = _examples(100, 100, seed=4)
        train, val = split_train_val(examples, 0.2, seed=0)
        a = train_classifier(train, val, TrainConfig(featurizer=config, seed=3))
        b = train_classifier(train, val, TrainConfig(featurizer=config, seed=3))
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias
        assert a.training_meta == b.training_meta

    def test_single_class_rejected(self):
        examples, config = _examples(20, 20)
        one_class = [e for e in examples if e.target == 1]
        with pytest.raises(DegenerateLabelsError, match="degenerate label distribution"):
            train_classifier(one_class, one_class[:2], TrainConfig(featurizer=config))

    def test_training_meta_recorded(self):
        examples, config = _examples(80, 120, seed=6)
        train, val = split_train_val(examples, 0.1, seed=0)
        clf = train_classifier(train, val, TrainConfig(featurizer=config, seed=1))
        meta = clf.training_meta
        assert meta["train_size"] == len(train)
        assert meta["val_size"] == len(val)
        assert meta["seed"] == 1
        assert 0 <= meta["val_f1"] <= 1
        assert meta["class_weights"]["1"] == pytest.approx(200 / (2 * 80))

    def test_shuffled_labels_fall_to_chance(self):
        # Gold is balanced, so chance F1 at the prior-matched operating point
        # (predict positive for the top half by score) is 0.5.
        rng = random.Random(11)
        config = FeaturizerConfig(hash_bits=12)
        texts = [
            " ".join(f"w{rng.randrange(2000)}" for _ in range(30)) for _ in range(1200)
        ]
        targets = [i % 2 for i in range(1200)]
        rng.shuffle(targets)
        examples = [
            LabeledExample(str(i), featurize_text(t, config), y)
            for i, (t, y) in enumerate(zip(texts, targets))
        ]
        train, val = split_train_val(examples, 0.25, seed=0)
        clf = train_classifier(train, val, TrainConfig(featurizer=config, seed=0))
        val_scores = np.array([score(clf, snippet_of(texts[int(e.doc_id)])) for e in val])
        gold = [e.target for e in val]
        k = sum(gold)
        preds = [0] * len(gold)
        for i in np.argsort(-val_scores, kind="stable")[:k]:
            preds[i] = 1
        assert abs(f1(preds, gold) - 0.5) <= 0.05


class TestScore:
    def test_zero_model_scores_half(self):
        config = FeaturizerConfig(hash_bits=10)
        clf = QualityClassifier(config, np.zeros(config.dim), 0.0, {})
        assert score(clf, snippet_of("anything at all")) == 0.5

    def test_scores_clamped_and_finite(self):
        config = FeaturizerConfig(ngram_orders=(1,), hash_bits=8)
        clf = QualityClassifier(config, np.full(config.dim, 1e9), 1e9, {})
        s = score(clf, snippet_of("huge logit"))
        assert s == 1 - 1e-7
        clf_neg = QualityClassifier(config, np.full(config.dim, -1e9), -1e9, {})
        assert score(clf_neg, snippet_of("huge negative")) == 1e-7

    def test_positive_scaling_preserves_decision(self):
        rng = np.random.default_rng(0)
        config = FeaturizerConfig(hash_bits=8)
        weights = rng.normal(0, 1, config.dim)
        for c in (0.5, 2.0, 7.0):
            a = QualityClassifier(config, weights, 0.0, {})
            b = QualityClassifier(config, c * weights, 0.0, {})
            for text in ("alpha beta", "gamma delta epsilon", "zeta"):
                sa = score(a, snippet_of(text)) - 0.5
                sb = score(b, snippet_of(text)) - 0.5
                assert (sa >= 0) == (sb >= 0)

    def test_empty_snippet_rejected(self):
        config = FeaturizerConfig(hash_bits=8)
        clf = QualityClassifier(config, np.zeros(config.dim), 0.0, {})
        with pytest.raises(ValueError):
            score(clf, snippet_of(""))


class TestModelIO:
    def make_classifier(self, seed=0):
        examples, config = _examples(60, 60, seed=seed)
        train, val = split_train_val(examples, 0.2, seed=0)
        return train_classifier(train, val, TrainConfig(featurizer=config, seed=0))

    def test_roundtrip_scores_identical(self, tmp_path):
        clf = self.make_classifier()
        path = tmp_path / "model.bin"
        save_model(clf, path)
        loaded = load_model(path)
        rng = random.Random(1)
        for _ in range(100):
            text = " ".join(f"w{rng.randrange(60)}" for _ in range(12))
            assert score(loaded, snippet_of(text)) == score(clf, snippet_of(text))

    def test_save_is_byte_stable(self, tmp_path):
        clf = self.make_classifier()
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_model(clf, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file_rejected(self, tmp_path):
        clf = self.make_classifier()
        path = tmp_path / "model.bin"
        save_model(clf, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 16])
        with pytest.raises(ModelFormatError, match="truncated"):
            load_model(path)

    def test_unknown_version_rejected(self, tmp_path):
        import json

        clf = self.make_classifier()
        path = tmp_path / "model.bin"
        save_model(clf, path)
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            blob = fh.read()
        header["format_version"] = 99
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(blob)
        with pytest.raises(ModelFormatError, match="format_version"):
            load_model(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00\x01\x02 not a model at all\n more bytes")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_corrupted_weights_rejected(self, tmp_path):
        clf = self.make_classifier()
        path = tmp_path / "model.bin"
        save_model(clf, path)
        data = bytearray(path.read_bytes())
        data[-5] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError, match="checksum"):
            load_model(path)

    def test_fingerprint_tracks_weights(self):
        a = self.make_classifier(seed=0)
        b = self.make_classifier(seed=1)
        assert a.fingerprint() != b.fingerprint()
        assert a.fingerprint() == self.make_classifier(seed=0).fingerprint()


class TestHeldOutSeparation:
    def test_planted_high_docs_score_above_half(self):
        # After training on mock labels, at least 95% of 1,000 held-out
        # planted-high documents score above 0.5.
        from docprune.corpus import extract_snippet
        from docprune.mocks import mock_label
        from docprune.synthetic import SyntheticCorpusSpec, generate_documents, stratum_of

        docs = generate_documents(
            SyntheticCorpusSpec(n_docs=6000, high_quality_fraction=0.25, seed=19)
        )
        train_docs, held = docs[:1000], docs[1000:]
        config = FeaturizerConfig(hash_bits=16)
        examples = []
        for doc in train_docs:
            snip = extract_snippet(doc)
            target = 1 if mock_label(snip) == "Yes" else 0
            examples.append(LabeledExample(doc.id, featurize_text(snip.text, config), target))
        train, val = split_train_val(examples, 0.1, seed=0)
        clf = train_classifier(train, val, TrainConfig(featurizer=config, seed=0))
        held_high = [d for d in held if stratum_of(d)][:1000]
        assert len(held_high) == 1000
        above = sum(1 for d in held_high if score(clf, extract_snippet(d)) > 0.5)
        assert above >= 950, f"{above}/1000 held-out high docs above 0.5"
