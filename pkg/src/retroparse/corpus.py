"""TOPv2-style TSV ingestion and limited-training subsets."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import topformat as tf
from ._rng import SplitMix64, shuffled_indices
from .errors import (
    BadFractions,
    ColumnCountError,
    DuplicateId,
    EmptyFile,
    FrameParseError,
    RowParseError,
    UnknownDomain,
)
from .vindex import normalize_utterance


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    domain: str
    utterance: str
    semparse: str
    tree: tf.ParseTree = field(repr=False, compare=False)
    canonical: str
    skeleton: str
    depth: int

    @classmethod
    def from_row(cls, record_id: str, domain: str, utterance: str, semparse: str) -> "UtteranceRecord":
        tree = tf.parse_top(semparse)
        canon = tf.canonicalize(tree)
        return cls(
            id=record_id,
            domain=domain,
            utterance=utterance,
            semparse=semparse,
            tree=tree,
            canonical=tf.serialize(canon),
            skeleton=tf.skeleton(canon),
            depth=tf.depth(tree),
        )

    @property
    def tokens(self) -> list[str]:
        return self.utterance.split()

    @property
    def normalized_utterance(self) -> str:
        return normalize_utterance(self.utterance)


@dataclass
class Corpus:
    split_name: str
    records: list[UtteranceRecord]
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self._by_id = {}
        for r in self.records:
            if r.id in self._by_id:
                raise DuplicateId(f"duplicate record id {r.id!r}")
            self._by_id[r.id] = r

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, record_id: str) -> UtteranceRecord:
        return self._by_id[record_id]

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id

    def get(self, record_id: str, default=None):
        return self._by_id.get(record_id, default)

    @property
    def domains(self) -> set[str]:
        return {r.domain for r in self.records}

    def domain_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(r.domain for r in self.records).items()))

    def depth_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(r.depth for r in self.records).items()))

    def skeleton_counts(self) -> Counter:
        return Counter(r.skeleton for r in self.records)


def _looks_like_frame(text: str) -> bool:
    try:
        tf.parse_top(text)
    except FrameParseError:
        return False
    return True


def read_rows(path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    return [ln.split("\t") for ln in lines if ln.strip()]


def ingest_tsv(path, split_name: str = "train", has_header: bool | None = None,
               skip_bad: bool = False) -> Corpus:
    """Load ``domain \\t utterance \\t semparse`` rows; extra columns are ignored.

    ``has_header=None`` auto-detects: the first line is a header iff its third
    column does not parse as a frame. Record ids are ``<split>:<n>`` with n the
    0-based data-row number. With ``skip_bad`` unparseable rows are collected in
    ``Corpus.skipped`` instead of raising.
    """
    rows = read_rows(path)
    if not rows:
        raise EmptyFile(f"{path}: no rows")
    if has_header is None:
        has_header = len(rows[0]) < 3 or not _looks_like_frame(rows[0][2])
    if has_header:
        rows = rows[1:]
    if not rows:
        raise EmptyFile(f"{path}: header only")
    records, skipped = [], []
    for n, cols in enumerate(rows):
        if len(cols) < 3:
            err = ColumnCountError(f"{path}: row {n} has {len(cols)} columns, need 3")
            if not skip_bad:
                raise err
            skipped.append((n, str(err)))
            continue
        domain, utterance, semparse = cols[0].strip(), cols[1].strip(), cols[2].strip()
        try:
            records.append(UtteranceRecord.from_row(f"{split_name}:{n}", domain, utterance, semparse))
        except FrameParseError as e:
            if not skip_bad:
                raise RowParseError(n, e) from e
            skipped.append((n, f"{type(e).__name__}: {e}"))
    return Corpus(split_name, records, skipped)


def corpus_from_rows(rows: Iterable[Sequence[str]], split_name: str = "train") -> Corpus:
    """Build a corpus from in-memory (domain, utterance, semparse) rows."""
    records = [
        UtteranceRecord.from_row(f"{split_name}:{n}", d, u, s)
        for n, (d, u, s) in enumerate(rows)
    ]
    return Corpus(split_name, records)


def write_tsv(records: Iterable[UtteranceRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(f"{r.domain}\t{r.utterance}\t{r.semparse}\n")


def subset_incremental(c: Corpus, fractions: Sequence[float], seed: int = 0) -> list[Corpus]:
    """Nested subsets for limited-training runs.

    The corpus is shuffled once (SplitMix64-driven Fisher-Yates); subset i is
    the first ceil(f_i * N / 100) shuffled records, put back in corpus order.
    """
    fr = list(fractions)
    if not fr or any(not (0 < f <= 100) for f in fr):
        raise BadFractions(f"fractions must lie in (0, 100]: {fr}")
    if any(b <= a for a, b in zip(fr, fr[1:])):
        raise BadFractions(f"fractions must be strictly increasing: {fr}")
    n = len(c.records)
    order = shuffled_indices(n, SplitMix64(seed))
    out = []
    for f in fr:
        size = math.ceil(Fraction(str(f)) * n / 100)
        chosen = sorted(order[:size])
        out.append(Corpus(c.split_name, [c.records[i] for i in chosen]))
    return out


def filter_domain(c: Corpus, domain: str) -> Corpus:
    if domain not in c.domains:
        raise UnknownDomain(f"domain {domain!r} not in {sorted(c.domains)}")
    return Corpus(c.split_name, [r for r in c.records if r.domain == domain])
