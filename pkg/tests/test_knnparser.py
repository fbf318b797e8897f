from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from retroparse import topformat as tf
from retroparse.augment import NeighborPolicy
from retroparse.corpus import corpus_from_rows
from retroparse.embedding import HashedEmbedder
from retroparse.errors import DuplicateId, EmptyIndex, PredictionsParseError, UnknownId
from retroparse.knnparser import (
    KnnParser,
    PredictionSet,
    best_span,
    knn_predict,
    lcs_length,
    load_predictions,
    predict_corpus,
    span_similarity,
    transfer_frame,
    write_predictions,
)
from retroparse.vindex import VectorIndex, build_index

from conftest import EX3_NN, SMALL_ROWS


def lcs_oracle(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


def _index(corpus, emb):
    return build_index((r.id, emb.embed(r.id, r.utterance), r.domain, r.utterance) for r in corpus)


class TestSimilarity:
    @pytest.mark.parametrize("a, b, want", [
        (["mariah", "carey"], ["mariah", "carey"], 1.0),
        (["songs"], [], 0.0),
        (["ten"], ["20"], 0.0),
        ([], [], 1.0),
        (["Oven"], ["oven"], 1.0),
        (["abcd"], ["abxx"], 0.5),
    ])
    def test_cases(self, a, b, want):
        assert span_similarity(a, b) == pytest.approx(want)

    @settings(max_examples=200)
    @given(st.text("abcde ", max_size=12), st.text("abcde ", max_size=12))
    def test_lcs_matches_oracle(self, a, b):
        assert lcs_length(a, b) == lcs_oracle(a, b)
        assert lcs_length(a, b) == lcs_length(b, a)

    def test_best_span_ties(self):
        # both "a" tokens score 1.0; earliest start wins
        assert best_span(["a"], ["a", "b", "a"], [])[0] == (0, 1)
        # the used span is skipped
        assert best_span(["a"], ["a", "b", "a"], [(0, 1)])[0] == (2, 3)

    def test_best_span_length_cap(self):
        span, _ = best_span(["x"], ["q", "q", "q", "q", "q", "x"], [], threshold=0.0, slack=2)
        assert span == (5, 6)


class TestTransfer:
    def test_mariah_carey(self):
        c = corpus_from_rows([("music", "delete mariah carey songs", EX3_NN)], "train")
        test = corpus_from_rows([("music", "block all songs of mariah carey",
                                  "[in:remove_from_playlist_music [sl:music_artist_name mariah carey ] ]")], "test")
        emb = HashedEmbedder(64, 0)
        got = knn_predict(test.records[0], _index(c, emb), c, emb)
        assert got == ("[in:remove_from_playlist_music [sl:music_artist_name mariah carey ] "
                       "[sl:music_type songs ] ]")

    def test_identical_utterance_verbatim(self, small_corpus, small_index, embedder):
        p = KnnParser(small_index, small_corpus, embedder)
        for rec in small_corpus:
            assert p.predict(rec) == rec.canonical

    def test_fallback_keeps_values(self, embedder):
        c = corpus_from_rows([("d", "set abc", "[in:x set [sl:y abc ] ]")], "train")
        q = corpus_from_rows([("d", "zzz", "[in:x ]")], "test").records[0]
        pred, fills = KnnParser(_index(c, embedder), c, embedder).predict_with_fills(q)
        assert pred == "[in:x [sl:y abc ] ]"
        assert fills[0].chosen_span is None

    def test_nested_inner_slots_filled(self):
        frame = tf.canonicalize(tf.parse_top("[in:a [sl:b [in:c [sl:d home ] ] ] [sl:e now ] ]"))
        out, fills = transfer_frame(frame, "go to homes now".split())
        assert tf.serialize(out) == "[in:a [sl:b [in:c [sl:d homes ] ] ] [sl:e now ] ]"
        assert [f.slot_label for f in fills] == ["sl:d", "sl:e"]

    def test_spans_do_not_overlap(self):
        frame = tf.canonicalize(tf.parse_top("[in:m [sl:a kira ] [sl:b kira ] ]"))
        out, fills = transfer_frame(frame, "kira and kira".split())
        spans = sorted(f.chosen_span for f in fills)
        assert spans == [(0, 1), (2, 3)]

    def test_empty_index(self, small_corpus, embedder):
        ix = VectorIndex(64, (), np.zeros((0, 64), dtype=np.float32), {}, {})
        with pytest.raises(EmptyIndex):
            KnnParser(ix, small_corpus, embedder)


words = st.sampled_from("please add ten minutes oven timer kira lena music mariah carey songs "
                        "delete message to the no more lasagna".split())


@pytest.fixture(scope="module")
def parser():
    c = corpus_from_rows(SMALL_ROWS, "train")
    emb = HashedEmbedder(64, 0)
    return KnnParser(_index(c, emb), c, emb)


class TestInvariants:
    @settings(max_examples=150, deadline=None)
    @given(st.lists(words, min_size=1, max_size=10))
    def test_skeleton_transfer_and_canonical(self, parser, toks):
        p = parser
        rec = corpus_from_rows([("x", " ".join(toks), "[in:q ]")], "test").records[0]
        nb = p.neighbor(rec)
        out, fills = p.predict_with_fills(rec)
        assert tf.skeleton(tf.parse_top(out)) == nb.skeleton
        assert tf.serialize(tf.canonicalize(tf.parse_top(out))) == out
        assert out == p.predict(rec)
        spans = [f.chosen_span for f in fills if f.chosen_span]
        for i, (s1, e1) in enumerate(spans):
            for s2, e2 in spans[i + 1:]:
                assert e1 <= s2 or e2 <= s1

    @settings(max_examples=100)
    @given(st.permutations(["alpha", "bravo charlie", "delta"]), st.lists(st.sampled_from(["x", "y"]), max_size=3))
    def test_perfect_copy(self, values, filler):
        frame = tf.canonicalize(tf.parse_top(
            "[in:f [sl:a alpha ] [sl:b bravo charlie ] [sl:c delta ] ]"))
        tokens = filler + " ".join(values).split() + filler
        out, _ = transfer_frame(frame, tokens)
        assert tf.serialize(out) == "[in:f [sl:a alpha ] [sl:b bravo charlie ] [sl:c delta ] ]"

    def test_cross_domain_policy(self, small_corpus, small_index, embedder):
        p = KnnParser(small_index, small_corpus, embedder, NeighborPolicy("cross_domain_random"), seed=1)
        for rec in small_corpus:
            assert p.neighbor(rec).domain != rec.domain


class TestPredictionsFile:
    def test_round_trip(self, small_corpus, small_index, embedder, tmp_path):
        ps = predict_corpus(KnnParser(small_index, small_corpus, embedder), small_corpus)
        p = tmp_path / "preds.tsv"
        write_predictions(ps, p)
        back = load_predictions(p, small_corpus)
        assert back.preds == ps.preds and back.missing(small_corpus) == []

    def test_partial(self, small_corpus, tmp_path):
        p = tmp_path / "preds.tsv"
        p.write_text("train:0\t[in:x ]\ntrain:1\t[in:y [sl:z\n")
        ps = load_predictions(p, small_corpus)
        assert len(ps) == 2
        assert ps.missing(small_corpus) == ["train:2", "train:3", "train:4"]
        assert ps.unparseable() == ["train:1"]

    @pytest.mark.parametrize("text, err", [
        ("nope\t[in:x ]\n", UnknownId),
        ("train:0\t[in:x ]\ntrain:0\t[in:y ]\n", DuplicateId),
        ("train:0 [in:x ]\n", PredictionsParseError),
    ])
    def test_errors(self, small_corpus, tmp_path, text, err):
        p = tmp_path / "preds.tsv"
        p.write_text(text)
        with pytest.raises(err):
            load_predictions(p, small_corpus)

    def test_prediction_set_empty(self, small_corpus):
        assert PredictionSet("test").missing(small_corpus) == [r.id for r in small_corpus]


@pytest.mark.xfail(strict=True, reason="canonical slot order depends on values for same-label "
                   "siblings mixing nested and text content, so re-filling can reorder the skeleton")
def test_skeleton_transfer_same_label_mixed_siblings():
    nb = tf.canonicalize(tf.parse_top("[in:a [sl:x [in:b ] ] [sl:x foo ] ]"))
    out, _ = transfer_frame(nb, "set Foo".split())
    assert tf.skeleton(out) == tf.skeleton(nb)
