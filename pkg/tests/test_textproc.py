from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsqa.textproc import (
    EmbeddingError,
    crf_features,
    load_embeddings,
    pos_tag,
    random_embeddings,
    sequence_features,
    tokenize,
    word_shape,
)


class TestTokenize:
    def test_trailing_question_mark_split(self):
        assert [t.surface for t in tokenize("Does Niacin really work?")] == [
            "Does", "Niacin", "really", "work", "?",
        ]

    def test_empty_string(self):
        assert tokenize("") == []

    def test_internal_hyphen_kept(self):
        assert [t.surface for t in tokenize("L-glutamine for IBS")] == [
            "L-glutamine", "for", "IBS",
        ]

    def test_offsets_reconstruct_surfaces(self):
        text = "Is St. John's Wort (really) safe, or not?"
        for tok in tokenize(text):
            assert text[tok.start : tok.end] == tok.surface

    def test_leading_and_trailing_punctuation_peeled(self):
        assert [t.surface for t in tokenize('"(hello)!"')] == [
            '"', "(", "hello", ")", "!", '"',
        ]

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=80))
    def test_offsets_hold_for_arbitrary_text(self, text):
        tokens = tokenize(text)
        prev_end = -1
        for tok in tokens:
            assert tok.start < tok.end
            assert tok.start >= prev_end
            assert text[tok.start : tok.end] == tok.surface
            prev_end = tok.end

    def test_deterministic(self):
        text = "mix zinc + iron (daily)"
        assert tokenize(text) == tokenize(text)


class TestPosTag:
    def test_coarse_tags(self):
        toks = tokenize("The runner quickly swallowed 2 pills ?")
        tags = [pos_tag(t) for t in toks]
        assert tags == ["DET", "NOUN", "ADV", "VERB", "NUM", "NOUN", "PUNCT"]

    def test_shape_classes(self):
        assert word_shape("kratom") == "lower"
        assert word_shape("Niacin") == "cap"
        assert word_shape("IBS") == "upper"
        assert word_shape("12") == "digit"
        assert word_shape("L-glutamine") == "mixed"
        assert word_shape("?") == "punct"


class TestCrfFeatures:
    def test_window_features(self):
        toks = tokenize("Is kratom safe")
        feats = crf_features(toks, 1)
        assert feats["lower=kratom"] == 1.0
        assert feats["suffix3=tom"] == 1.0
        assert feats["shape=lower"] == 1.0
        assert feats["prev_lower=is"] == 1.0
        assert feats["next_lower=safe"] == 1.0

    def test_bos_marker_and_no_prev(self):
        toks = tokenize("Is kratom safe")
        feats = crf_features(toks, 0)
        assert feats["BOS"] == 1.0
        assert not any(k.startswith("prev_") for k in feats)

    def test_eos_marker(self):
        toks = tokenize("Is kratom safe")
        feats = crf_features(toks, 2)
        assert feats["EOS"] == 1.0
        assert not any(k.startswith("next_") for k in feats)

    def test_extraction_deterministic(self):
        toks = tokenize("Does shark cartilage work?")
        assert sequence_features(toks) == sequence_features(toks)

    def test_position_out_of_range(self):
        with pytest.raises(IndexError):
            crf_features(tokenize("one"), 5)


class TestEmbeddings:
    def test_load_two_rows(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("alpha 1 2 3\nbeta 4 5 6\n")
        table = load_embeddings(path)
        assert table.dim == 3
        assert len(table.vocabulary) == 2
        np.testing.assert_array_equal(table.lookup("beta"), [4.0, 5.0, 6.0])
        np.testing.assert_array_equal(table.lookup("missing"), [0.0, 0.0, 0.0])

    def test_inconsistent_dimension_names_row(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("alpha 1 2 3\nbeta 4 5\n")
        with pytest.raises(EmbeddingError, match="beta"):
            load_embeddings(path)

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("")
        with pytest.raises(EmbeddingError):
            load_embeddings(path)

    def test_random_embeddings_deterministic(self):
        vocab = [f"w{i}" for i in range(10)]
        a = random_embeddings(vocab, 4, seed=7)
        b = random_embeddings(vocab, 4, seed=7)
        np.testing.assert_array_equal(a.vectors, b.vectors)
        np.testing.assert_array_equal(a.oov, b.oov)

    def test_random_embeddings_range(self):
        table = random_embeddings(["a", "b"], 8, seed=0)
        limit = 0.5 / 8
        assert np.all(np.abs(table.vectors) <= limit)
        assert np.all(np.abs(table.oov) <= limit)

    def test_bad_dimension_rejected(self):
        with pytest.raises(ValueError):
            random_embeddings(["a"], 0, seed=0)
