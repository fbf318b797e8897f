"""Frame accuracy, per-domain aggregation, slicing and retrieval quality."""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import topformat as tf
from .corpus import Corpus, UtteranceRecord
from .errors import EmptyResults, GoldUnparseable, LengthMismatch, ZeroBaseline

FREQUENCY_BUCKETS = ("Very Low", "Low", "Medium", "High", "Very High")


def _canon_or_none(s: str) -> str | None:
    try:
        return tf.canonical_string(s)
    except tf.FrameParseError:
        return None


def frame_match(pred: str, gold: str) -> bool:
    """Exact match of canonical decoupled forms. Unparseable predictions never match."""
    try:
        g = tf.canonical_string(gold)
    except tf.FrameParseError as e:
        raise GoldUnparseable(f"gold frame does not parse: {e}") from e
    p = _canon_or_none(pred)
    return p is not None and p == g


def _pct(num: int, den: int) -> float | None:
    return 100.0 * num / den if den else None


@dataclass
class DomainScore:
    n: int
    correct: int

    @property
    def frame_accuracy(self) -> float:
        return 100.0 * self.correct / self.n


@dataclass
class SliceReport:
    slice_kind: str
    # (bucket name, n, correct); accuracy is None for empty buckets
    buckets: list[tuple[str, int, int]]

    def accuracy(self, name: str) -> float | None:
        for b, n, c in self.buckets:
            if b == name:
                return _pct(c, n)
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "slice_kind": self.slice_kind,
            "buckets": [
                {"name": b, "n": n, "frame_accuracy": _round(_pct(c, n))}
                for b, n, c in self.buckets
            ],
        }


@dataclass
class PRReport:
    intent_precision: float
    intent_recall: float
    slot_precision: float
    slot_recall: float

    def to_dict(self) -> dict:
        return {k: _round(v) for k, v in self.__dict__.items()}


@dataclass
class EvalReport:
    per_domain: dict[str, DomainScore]
    micro_avg: float
    macro_avg: float
    unparseable: int = 0
    slices: list[SliceReport] = field(default_factory=list)
    split: str = ""
    missing: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    config: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "split": self.split,
            "per_domain": {
                d: {"n": s.n, "frame_accuracy": _round(s.frame_accuracy)}
                for d, s in sorted(self.per_domain.items())
            },
            "micro_avg": _round(self.micro_avg),
            "macro_avg": _round(self.macro_avg),
            "unparseable": self.unparseable,
            "slices": [s.to_dict() for s in self.slices],
            "missing": list(self.missing),
        }
        for k, v in self.extra.items():
            out[k] = v
        if self.config is not None:
            out["config"] = self.config
        return out


def _round(x: float | None) -> float | None:
    return None if x is None else round(x, 2)


def aggregate(results: Iterable[tuple[str, bool]]) -> EvalReport:
    """Per-domain accuracy, pooled micro average and unweighted macro average."""
    counts: dict[str, list[int]] = {}
    for domain, ok in results:
        c = counts.setdefault(domain, [0, 0])
        c[0] += 1
        c[1] += bool(ok)
    if not counts:
        raise EmptyResults("no results to aggregate")
    per_domain = {d: DomainScore(n, k) for d, (n, k) in counts.items()}
    total = sum(s.n for s in per_domain.values())
    correct = sum(s.correct for s in per_domain.values())
    micro = 100.0 * correct / total
    macro = math.fsum(s.frame_accuracy for s in per_domain.values()) / len(per_domain)
    return EvalReport(per_domain=per_domain, micro_avg=micro, macro_avg=macro)


def _multiset_pr(pred: list[str], gold: list[str]) -> tuple[float, float]:
    inter = sum((Counter(pred) & Counter(gold)).values())
    if not pred:
        p = 1.0 if not gold else 0.0
    else:
        p = inter / len(pred)
    if not gold:
        r = 1.0 if not pred else 0.0
    else:
        r = inter / len(gold)
    return p, r


def neighbor_pr(neighbor_parses: Sequence[tf.ParseTree], gold_parses: Sequence[tf.ParseTree]) -> PRReport:
    """Intent and slot label precision/recall of neighbors against golds.

    Labels are compared as multisets per example, then macro-averaged.
    """
    if len(neighbor_parses) != len(gold_parses):
        raise LengthMismatch(f"{len(neighbor_parses)} neighbors vs {len(gold_parses)} golds")
    if not gold_parses:
        raise EmptyResults("no examples")
    ip, ir, sp, sr = [], [], [], []
    for nb, gold in zip(neighbor_parses, gold_parses):
        p, r = _multiset_pr(tf.intent_labels(nb), tf.intent_labels(gold))
        ip.append(p)
        ir.append(r)
        p, r = _multiset_pr(tf.slot_labels(nb), tf.slot_labels(gold))
        sp.append(p)
        sr.append(r)
    n = len(gold_parses)
    return PRReport(
        100 * math.fsum(ip) / n, 100 * math.fsum(ir) / n,
        100 * math.fsum(sp) / n, 100 * math.fsum(sr) / n,
    )


def slice_complexity(records: Sequence[UtteranceRecord], results: Sequence[bool]) -> SliceReport:
    if len(records) != len(results):
        raise LengthMismatch(f"{len(records)} records vs {len(results)} results")
    simple = [ok for r, ok in zip(records, results) if r.depth == 1]
    complex_ = [ok for r, ok in zip(records, results) if r.depth >= 2]
    return SliceReport("complexity", [
        ("simple", len(simple), sum(simple)),
        ("complex", len(complex_), sum(complex_)),
    ])


def frequency_bucket_sizes(n: int, buckets: int = 5) -> list[int]:
    base, extra = divmod(n, buckets)
    return [base + (1 if i < extra else 0) for i in range(buckets)]


def frequency_order(test_records: Sequence[UtteranceRecord], train: Corpus | Iterable[UtteranceRecord]) -> list[int]:
    """Test positions sorted by (train frequency of skeleton, skeleton, id)."""
    freq = Counter(r.skeleton for r in train)
    return sorted(
        range(len(test_records)),
        key=lambda i: (freq[test_records[i].skeleton], test_records[i].skeleton, test_records[i].id),
    )


def slice_frequency(test_records: Sequence[UtteranceRecord], train: Corpus | Iterable[UtteranceRecord],
                    results: Sequence[bool]) -> SliceReport:
    """Five equal-size buckets from rarest to most frequent training skeleton."""
    if len(test_records) != len(results):
        raise LengthMismatch(f"{len(test_records)} records vs {len(results)} results")
    order = frequency_order(test_records, train)
    buckets, start = [], 0
    for name, size in zip(FREQUENCY_BUCKETS, frequency_bucket_sizes(len(order))):
        chosen = order[start:start + size]
        start += size
        buckets.append((name, size, sum(bool(results[i]) for i in chosen)))
    return SliceReport("frequency_quintile", buckets)


def relative_improvement(a: float, b: float) -> float:
    if b <= 0:
        raise ZeroBaseline(f"baseline must be positive, got {b}")
    return 100.0 * (a - b) / b


def evaluate(test: Corpus, preds: dict[str, str], train: Corpus | None = None,
             slices: Sequence[str] = ()) -> EvalReport:
    """Score predictions against gold; missing ids count as mismatches."""
    results, missing, unparseable = [], [], 0
    for rec in test:
        pred = preds.get(rec.id)
        if pred is None:
            missing.append(rec.id)
            results.append(False)
            continue
        p = _canon_or_none(pred)
        if p is None:
            unparseable += 1
        results.append(p is not None and p == rec.canonical)
    report = aggregate((r.domain, ok) for r, ok in zip(test, results))
    report.split = test.split_name
    report.unparseable = unparseable
    report.missing = missing
    for kind in slices:
        if kind == "complexity":
            report.slices.append(slice_complexity(test.records, results))
        elif kind == "frequency":
            if train is None:
                raise ValueError("frequency slicing needs a training corpus")
            report.slices.append(slice_frequency(test.records, train, results))
        else:
            raise ValueError(f"unknown slice kind {kind!r}")
    return report


def emit_report(r: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(r.to_dict(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def emit_slices_csv(r: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice", "bucket", "n", "accuracy"])
        for s in r.slices:
            for name, n, c in s.buckets:
                acc = _pct(c, n)
                w.writerow([s.slice_kind, name, n, "" if acc is None else f"{acc:.2f}"])
