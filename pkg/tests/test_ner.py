from __future__ import annotations

import itertools

import numpy as np
import pytest

from dsqa import ner
from dsqa.corpus import NUM_TAGS, TAG_INDEX, TAGS, EntityType
from dsqa.evaluation import span_f1
from dsqa.synth import SynthConfig, generate_synthetic_corpus
from dsqa.textproc import sequence_features, tokenize


def _feats(*dicts):
    return [dict(d) for d in dicts]


def _random_small_model(rng, n_features=12):
    index = {f"f{i}": i for i in range(n_features)}
    model = ner.CrfModel.zeros(index)
    model.emission[:] = rng.normal(scale=0.5, size=model.emission.shape)
    model.transition[:] = rng.normal(scale=0.5, size=model.transition.shape)
    model.start[:] = rng.normal(scale=0.5, size=model.start.shape)
    model.end[:] = rng.normal(scale=0.5, size=model.end.shape)
    return model


def _random_sequence(rng, model, length):
    n_features = model.emission.shape[0]
    features = []
    for _ in range(length):
        active = rng.choice(n_features, size=int(rng.integers(1, 4)), replace=False)
        features.append({f"f{i}": float(rng.uniform(0.5, 1.5)) for i in active})
    tags = [TAGS[i] for i in rng.integers(0, NUM_TAGS, size=length)]
    return features, tags


class TestLogScore:
    def test_all_zero_model_scores_zero(self):
        model = ner.CrfModel.zeros({"f0": 0})
        feats = _feats({"f0": 1.0}, {"f0": 1.0})
        assert ner.log_score(model, feats, ["O", "B-DS"]) == 0.0

    def test_single_token_no_pairwise_term(self):
        model = ner.CrfModel.zeros({"f0": 0})
        model.emission[0, TAG_INDEX["B-DS"]] = 1.5
        model.start[TAG_INDEX["B-DS"]] = 0.25
        model.end[TAG_INDEX["B-DS"]] = 0.5
        model.transition[:] = 99.0  # must not contribute
        got = ner.log_score(model, _feats({"f0": 2.0}), ["B-DS"])
        assert got == pytest.approx(2.0 * 1.5 + 0.25 + 0.5)

    def test_hand_arithmetic_two_tokens(self):
        model = ner.CrfModel.zeros({"fa": 0, "fb": 1})
        o, bds = TAG_INDEX["O"], TAG_INDEX["B-DS"]
        model.emission[0, o] = 0.3
        model.emission[1, bds] = -0.7
        model.transition[o, bds] = 0.11
        model.start[o] = 0.05
        model.end[bds] = -0.02
        feats = _feats({"fa": 1.0}, {"fb": 2.0})
        expected = 0.3 + 2.0 * -0.7 + 0.11 + 0.05 + -0.02
        assert ner.log_score(model, feats, ["O", "B-DS"]) == pytest.approx(expected)

    def test_unknown_feature_ignored(self):
        model = ner.CrfModel.zeros({"f0": 0})
        feats = _feats({"nonesuch": 3.0})
        assert ner.log_score(model, feats, ["O"]) == 0.0


class TestLogPartition:
    def test_zero_model_is_n_log_9(self):
        model = ner.CrfModel.zeros({"f0": 0})
        for n in (1, 2, 5):
            feats = _feats(*({"f0": 1.0} for _ in range(n)))
            assert ner.log_partition(model, feats) == pytest.approx(n * np.log(9))

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            model = _random_small_model(rng)
            n = int(rng.integers(1, 5))
            features, _ = _random_sequence(rng, model, n)
            scores = [
                ner.log_score(model, features, list(tags))
                for tags in itertools.product(TAGS, repeat=n)
            ]
            hi = max(scores)
            expected = hi + np.log(sum(np.exp(s - hi) for s in scores))
            assert ner.log_partition(model, features) == pytest.approx(
                expected, abs=1e-8
            )

    def test_lower_bounds_every_path(self):
        rng = np.random.default_rng(3)
        model = _random_small_model(rng)
        features, tags = _random_sequence(rng, model, 4)
        assert ner.log_partition(model, features) >= ner.log_score(
            model, features, tags
        )


class TestCrfGradient:
    def test_finite_difference_check(self):
        rng = np.random.default_rng(11)
        model = _random_small_model(rng, n_features=8)
        batch = [
            _random_sequence(rng, model, int(rng.integers(1, 5)))
            for _ in range(3)
        ]
        grad = ner.crf_gradient(model, batch, c1=0.0, c2=0.1)
        h = 1e-5
        for name in ("emission", "transition", "start", "end"):
            w = getattr(model, name)
            g = getattr(grad, name)
            for i in range(w.size):
                orig = w.flat[i]
                w.flat[i] = orig + h
                up = ner.crf_objective(model, batch, c1=0.0, c2=0.1)
                w.flat[i] = orig - h
                dn = ner.crf_objective(model, batch, c1=0.0, c2=0.1)
                w.flat[i] = orig
                fd = (up - dn) / (2 * h)
                a = g.flat[i]
                rel = abs(a - fd) / max(abs(a), abs(fd), 1e-3)
                assert rel < 1e-4, f"{name}[{i}]: analytic {a} vs fd {fd}"

    def test_marginals_per_position_sum_to_one(self):
        from dsqa import _kernels

        rng = np.random.default_rng(13)
        model = _random_small_model(rng)
        features, _ = _random_sequence(rng, model, 5)
        enc = ner._encode(features, model.feature_index)
        emis = ner._emission_matrix(model, enc)
        _, unary, _ = _kernels.forward_backward(
            emis, model.transition, model.start, model.end
        )
        np.testing.assert_allclose(unary.sum(axis=1), 1.0, atol=1e-9)

    def test_gradient_near_zero_at_optimum_of_one_sequence(self):
        # full-batch GD with backtracking; the step grows as the loss
        # surface flattens, so the gradient vanishes quickly
        (q,) = generate_synthetic_corpus(SynthConfig(size=1), seed=4)
        seq = ner.to_bio(q)
        features = sequence_features(seq.tokens)
        batch = [(features, list(seq.tags))]
        index = ner._collect_feature_index([features])
        model = ner.CrfModel.zeros(index)
        names = ("emission", "transition", "start", "end")
        lr = 1.0
        loss = ner.crf_objective(model, batch)
        for _ in range(500):
            grad = ner.crf_gradient(model, batch)
            if grad.norm() < 1e-7:
                break
            saved = {n: getattr(model, n).copy() for n in names}
            for n in names:
                getattr(model, n).__isub__(lr * getattr(grad, n))
            new_loss = ner.crf_objective(model, batch)
            if new_loss <= loss:
                loss, lr = new_loss, lr * 1.5
            else:
                for n in names:
                    np.copyto(getattr(model, n), saved[n])
                lr *= 0.5
        assert ner.crf_gradient(model, batch).norm() < 1e-6

    def test_duplicate_sequence_doubles_contribution(self):
        rng = np.random.default_rng(17)
        model = _random_small_model(rng)
        seq = _random_sequence(rng, model, 3)
        g1 = ner.crf_gradient(model, [seq])
        g2 = ner.crf_gradient(model, [seq, seq])
        np.testing.assert_allclose(g2.emission, 2 * g1.emission, atol=1e-12)
        np.testing.assert_allclose(g2.transition, 2 * g1.transition, atol=1e-12)


class TestViterbi:
    def test_zero_model_decodes_all_o(self):
        model = ner.CrfModel.zeros({"f0": 0})
        tags = ner.viterbi(model, _feats({"f0": 1.0}, {"f0": 1.0}, {"f0": 1.0}))
        assert tags == ["O", "O", "O"]

    def test_matches_brute_force_argmax(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            model = _random_small_model(rng)
            n = int(rng.integers(1, 5))
            features, _ = _random_sequence(rng, model, n)
            best_tags, best_score = None, -np.inf
            for tags in itertools.product(TAGS, repeat=n):
                s = ner.log_score(model, features, list(tags))
                if s > best_score + 1e-12:
                    best_tags, best_score = list(tags), s
            got = ner.viterbi(model, features)
            assert got == best_tags
            assert ner.log_score(model, features, got) == pytest.approx(
                best_score, abs=1e-9
            )

    def test_constructed_weight_fires_b_ds(self):
        toks = tokenize("Is kratom safe")
        features = sequence_features(toks)
        index = ner._collect_feature_index([features])
        model = ner.CrfModel.zeros(index)
        model.emission[index["lower=kratom"], TAG_INDEX["B-DS"]] = 5.0
        tags = ner.viterbi(model, features)
        assert tags[1] == "B-DS"


class TestTraining:
    def test_crf_beats_95_on_held_out(self, synth_corpus_500):
        train, test = synth_corpus_500[:400], synth_corpus_500[400:]
        model = ner.train_crf(train, ner.CrfTrainConfig(seed=0))
        report = span_f1(
            [list(q.entities) for q in test],
            [ner.predict_entities(model, q.text) for q in test],
        )
        assert report.weighted_f1 >= 0.95

    def test_ginseng_background_example(self, synth_corpus_500):
        model = ner.train_crf(
            synth_corpus_500, ner.CrfTrainConfig(seed=1, max_iterations=30)
        )
        spans = ner.predict_entities(model, "What exactly is ginseng?")
        assert [ (s.surface, s.etype) for s in spans ] == [("ginseng", EntityType.DS)]

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            ner.train_crf([])
        with pytest.raises(ValueError):
            ner.train_hmm([])

    def test_training_deterministic(self, synth_corpus_500):
        small = synth_corpus_500[:60]
        config = ner.CrfTrainConfig(seed=9, max_iterations=5)
        a = ner.train_crf(small, config)
        b = ner.train_crf(small, config)
        assert np.array_equal(a.emission, b.emission)
        assert np.array_equal(a.transition, b.transition)

    def test_larger_c2_never_larger_norm(self, synth_corpus_500):
        small = synth_corpus_500[:80]
        norms = []
        for c2 in (0.0, 0.1, 1.0):
            model = ner.train_crf(
                small,
                ner.CrfTrainConfig(seed=3, c1=0.0, c2=c2, max_iterations=15),
            )
            norms.append(
                np.sqrt(
                    np.sum(model.emission**2)
                    + np.sum(model.transition**2)
                    + np.sum(model.start**2)
                    + np.sum(model.end**2)
                )
            )
        assert norms[0] >= norms[1] >= norms[2]

    def test_hmm_rows_are_distributions(self, synth_corpus_500):
        model = ner.train_hmm(synth_corpus_500[:200])
        np.testing.assert_allclose(
            np.exp(model.log_emission).sum(axis=1), 1.0, atol=1e-12
        )
        np.testing.assert_allclose(
            np.exp(model.log_transition).sum(axis=1) + np.exp(model.log_end),
            1.0,
            atol=1e-12,
        )
        assert np.exp(model.log_start).sum() == pytest.approx(1.0, abs=1e-12)

    def test_hmm_reasonable_and_not_above_crf(self, synth_corpus_500):
        train, test = synth_corpus_500[:400], synth_corpus_500[400:]
        hmm = ner.train_hmm(train)
        crf = ner.train_crf(train, ner.CrfTrainConfig(seed=0))
        gold = [list(q.entities) for q in test]
        hmm_f1 = span_f1(
            gold, [ner.predict_entities(hmm, q.text) for q in test]
        ).weighted_f1
        crf_f1 = span_f1(
            gold, [ner.predict_entities(crf, q.text) for q in test]
        ).weighted_f1
        assert 0.5 <= hmm_f1 <= 1.0
        assert hmm_f1 <= crf_f1 + 1e-9


class TestSerialization:
    def test_crf_round_trip(self, tmp_path, synth_corpus_500):
        model = ner.train_crf(
            synth_corpus_500[:60], ner.CrfTrainConfig(seed=0, max_iterations=3)
        )
        path = tmp_path / "crf.npz"
        model.save(path)
        loaded = ner.CrfModel.load(path)
        assert loaded.feature_index == model.feature_index
        np.testing.assert_array_equal(loaded.emission, model.emission)
        text = "Is kratom safe during pregnancy?"
        assert ner.predict_entities(loaded, text) == ner.predict_entities(
            model, text
        )

    def test_hmm_round_trip(self, tmp_path, synth_corpus_500):
        model = ner.train_hmm(synth_corpus_500[:60])
        path = tmp_path / "hmm.npz"
        model.save(path)
        loaded = ner.HmmModel.load(path)
        np.testing.assert_array_equal(loaded.log_emission, model.log_emission)

    def test_kind_mismatch_rejected(self, tmp_path, synth_corpus_500):
        from dsqa.serialize import ModelFormatError

        model = ner.train_hmm(synth_corpus_500[:60])
        path = tmp_path / "hmm.npz"
        model.save(path)
        with pytest.raises(ModelFormatError):
            ner.CrfModel.load(path)

    def test_version_mismatch_rejected(self, tmp_path):
        import numpy as np
        from dsqa.serialize import ModelFormatError, load_model

        path = tmp_path / "bad.npz"
        np.savez(
            path,
            format_version=np.array(999),
            model_kind=np.array("crf"),
            config=np.array("{}"),
        )
        with pytest.raises(ModelFormatError):
            load_model(path, kind="crf")
