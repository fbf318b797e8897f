import csv
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from retroparse import topformat as tf
from retroparse.corpus import corpus_from_rows
from retroparse.errors import EmptyResults, GoldUnparseable, LengthMismatch, ZeroBaseline
from retroparse.evaluation import (
    FREQUENCY_BUCKETS,
    aggregate,
    emit_report,
    emit_slices_csv,
    evaluate,
    frame_match,
    frequency_bucket_sizes,
    neighbor_pr,
    relative_improvement,
    slice_complexity,
    slice_frequency,
)

from conftest import EX1_EXPECTED, EX1_WITHOUT_NN, EX2_EXPECTED, EX2_NN, DOMAIN_ACCURACY, MACRO_ACCURACY

EX1_SWAPPED = ("[in:send_message [sl:content_exact they have any updates yet ] "
               "[sl:recipient trent ] [sl:recipient lizzie ] ]")


def results_for(per_domain, n=10000):
    """Boolean results whose per-domain accuracy is exactly the given percentage."""
    out = []
    for domain, acc in per_domain.items():
        k = round(acc * n / 100)
        out += [(domain, True)] * k + [(domain, False)] * (n - k)
    return out


class TestFrameMatch:
    def test_identical(self):
        assert frame_match(EX1_EXPECTED, EX1_EXPECTED)

    def test_reordered(self):
        assert frame_match(EX1_SWAPPED, EX1_EXPECTED)

    def test_wrong_intent(self):
        assert not frame_match(EX1_WITHOUT_NN, EX1_EXPECTED)

    def test_coupled_text_ignored(self):
        assert frame_match("[in:x hello [sl:y a ] there ]", "[in:x [sl:y a ] ]")

    def test_unparseable_pred(self):
        assert not frame_match("[in:x", EX2_EXPECTED)

    def test_bad_gold(self):
        with pytest.raises(GoldUnparseable):
            frame_match(EX2_EXPECTED, "[sl:x ]")


class TestAggregate:
    @pytest.mark.parametrize("column", list(DOMAIN_ACCURACY))
    def test_table_macro(self, column):
        r = aggregate(results_for(DOMAIN_ACCURACY[column]))
        assert abs(r.macro_avg - MACRO_ACCURACY[column]) <= 0.005
        assert r.to_dict()["macro_avg"] == MACRO_ACCURACY[column]

    def test_single_domain(self):
        r = aggregate([("a", True)] * 3 + [("a", False)])
        assert r.micro_avg == r.macro_avg == 75.0

    def test_unequal_sizes(self):
        r = aggregate([("a", True)] + [("b", False)] * 3)
        assert r.micro_avg == 25.0 and r.macro_avg == 50.0

    def test_empty(self):
        with pytest.raises(EmptyResults):
            aggregate([])

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.sampled_from("abcd"), st.booleans()), min_size=1, max_size=60))
    def test_order_independent(self, res):
        a, b = aggregate(res), aggregate(list(reversed(res)))
        assert a.micro_avg == b.micro_avg and a.macro_avg == b.macro_avg
        assert a.micro_avg == pytest.approx(100 * sum(ok for _, ok in res) / len(res))


class TestNeighborPR:
    def test_equal(self):
        t = tf.parse_top(EX1_EXPECTED)
        r = neighbor_pr([t], [t])
        assert (r.intent_precision, r.intent_recall, r.slot_precision, r.slot_recall) == (100, 100, 100, 100)

    def test_example_two(self):
        r = neighbor_pr([tf.parse_top(EX2_NN)], [tf.parse_top(EX2_EXPECTED)])
        assert (r.intent_precision, r.intent_recall, r.slot_precision, r.slot_recall) == (0, 0, 0, 0)

    def test_double_recipient(self):
        nb = tf.parse_top("[in:send_message [sl:recipient kira ] ]")
        gold = tf.parse_top("[in:send_message [sl:recipient a ] [sl:recipient b ] ]")
        r = neighbor_pr([nb], [gold])
        assert r.slot_recall == 50 and r.slot_precision == 100

    def test_empty_denominators(self):
        r = neighbor_pr([tf.parse_top("[in:a ]")], [tf.parse_top("[in:a ]")])
        assert r.slot_precision == r.slot_recall == 100
        r = neighbor_pr([tf.parse_top("[in:a [sl:x y ] ]")], [tf.parse_top("[in:a ]")])
        assert r.slot_precision == 0 and r.slot_recall == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            neighbor_pr([tf.parse_top("[in:a ]")], [])


def _records(depths, skeletons=None):
    rows = []
    for i, d in enumerate(depths):
        label = skeletons[i] if skeletons else "x"
        frame = f"[in:{label} [sl:s v ] ]" if d == 1 else f"[in:{label} [sl:s [in:y [sl:t v ] ] ] ]"
        rows.append(("dom", f"u{i}", frame))
    return corpus_from_rows(rows, "test").records


class TestSlices:
    def test_all_flat(self):
        s = slice_complexity(_records([1, 1, 1]), [True, False, True])
        assert s.buckets == [("simple", 3, 2), ("complex", 0, 0)]
        assert s.accuracy("complex") is None

    def test_mixed(self):
        s = slice_complexity(_records([1, 2, 2]), [True, True, False])
        assert s.buckets == [("simple", 1, 1), ("complex", 2, 1)]

    @pytest.mark.parametrize("n, sizes", [(10, [2] * 5), (11, [3, 2, 2, 2, 2]), (3, [1, 1, 1, 0, 0])])
    def test_bucket_sizes(self, n, sizes):
        assert frequency_bucket_sizes(n) == sizes

    def test_unseen_skeleton_is_very_low(self):
        train = corpus_from_rows([("d", "t", "[in:common [sl:s v ] ]")] * 1, "train")
        test = _records([1] * 5, ["common", "common", "common", "common", "rare"])
        # only the unseen one is correct, so Very Low must hold it
        s = slice_frequency(test, train, [False, False, False, False, True])
        assert s.buckets[0] == ("Very Low", 1, 1)
        assert [b for b, _, _ in s.buckets] == list(FREQUENCY_BUCKETS)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from([1, 2]), st.sampled_from("abcdef"), st.booleans()),
                    min_size=1, max_size=80),
           st.lists(st.sampled_from("abcdef"), max_size=40))
    def test_partition_properties(self, rows, train_labels):
        test = _records([d for d, _, _ in rows], [s for _, s, _ in rows])
        results = [ok for _, _, ok in rows]
        train = _records([1] * len(train_labels), train_labels)
        micro = 100 * sum(results) / len(results)
        freq = slice_frequency(test, train, results)
        sizes = [n for _, n, _ in freq.buckets]
        assert sum(sizes) == len(test) and max(sizes) - min(sizes) <= 1
        comp = slice_complexity(test, results)
        assert sum(n for _, n, _ in comp.buckets) == len(test)
        for s in (freq, comp):
            pooled = math.fsum(n * s.accuracy(b) for b, n, _ in s.buckets if n) / len(test)
            assert abs(pooled - micro) <= 1e-9


class TestRelativeImprovement:
    def test_values(self):
        assert relative_improvement(80.0, 80.0) == 0
        assert round(relative_improvement(86.23, 84.43), 2) == 2.13

    def test_zero(self):
        with pytest.raises(ZeroBaseline):
            relative_improvement(1.0, 0.0)


class TestReport:
    @pytest.fixture
    def corpora(self):
        train = corpus_from_rows([("b", "x", "[in:p [sl:s v ] ]"), ("a", "y", "[in:q ]")], "train")
        test = corpus_from_rows([("b", "x", "[in:p [sl:s v ] ]"), ("a", "y", "[in:q ]"),
                                 ("a", "z", "[in:q [sl:s [in:r ] ] ]")], "test")
        return train, test

    def test_evaluate_and_emit(self, corpora, tmp_path):
        train, test = corpora
        preds = {"test:0": "[in:p [sl:s v ] ]", "test:1": "[in:q"}
        r = evaluate(test, preds, train, slices=["complexity", "frequency"])
        assert r.missing == ["test:2"] and r.unparseable == 1
        assert r.micro_avg == pytest.approx(100 / 3)
        p = tmp_path / "r.json"
        emit_report(r, p)
        d = json.loads(p.read_text())
        assert list(d["per_domain"]) == ["a", "b"]
        assert d["micro_avg"] == 33.33 and d["macro_avg"] == 50.0
        assert [s["slice_kind"] for s in d["slices"]] == ["complexity", "frequency_quintile"]
        c = tmp_path / "s.csv"
        emit_slices_csv(r, c)
        rows = list(csv.reader(c.open()))
        assert rows[0] == ["slice", "bucket", "n", "accuracy"] and len(rows) == 1 + 2 + 5

    def test_empty_slices(self, corpora, tmp_path):
        _, test = corpora
        r = evaluate(test, {rec.id: rec.canonical for rec in test})
        p = tmp_path / "r.json"
        emit_report(r, p)
        d = json.loads(p.read_text())
        assert d["slices"] == [] and d["micro_avg"] == 100.0

    def test_frequency_needs_train(self, corpora):
        with pytest.raises(ValueError):
            evaluate(corpora[1], {}, slices=["frequency"])
