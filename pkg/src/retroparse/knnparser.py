"""Non-parametric frame transfer: copy the nearest neighbor's canonical frame
and re-fill its slot values with spans of the input utterance.

Anything with a ``predict(record) -> frame string`` method can stand in for
:class:`KnnParser`; externally trained models plug in through a predictions
TSV instead (see :func:`load_predictions`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

from . import topformat as tf
from .augment import AugmentConfig, NeighborPolicy, Retriever
from .corpus import Corpus, UtteranceRecord
from .errors import DuplicateId, EmptyIndex, PredictionsParseError, UnknownId
from .topformat import IntentNode, SlotNode
from .vindex import VectorIndex

MIN_SPAN_SCORE = 0.1
SPAN_SLACK = 2


def lcs_length(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b):
            cur.append(prev[j] + 1 if ca == cb else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def span_similarity(a: Sequence[str], b: Sequence[str]) -> float:
    """Character LCS of the space-joined, lowercased token lists over the longer length."""
    sa, sb = " ".join(a).lower(), " ".join(b).lower()
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return lcs_length(sa, sb) / max(len(sa), len(sb))


@dataclass
class SlotFill:
    slot_label: str
    neighbor_value_tokens: tuple[str, ...]
    chosen_span: tuple[int, int] | None
    score: float


def _overlaps(span: tuple[int, int], used: list[tuple[int, int]]) -> bool:
    s, e = span
    return any(s < ue and us < e for us, ue in used)


def best_span(value: Sequence[str], tokens: Sequence[str], used: list[tuple[int, int]],
              threshold: float = MIN_SPAN_SCORE, slack: int = SPAN_SLACK):
    """Highest-scoring free span (start, end) of ``tokens``, or None.

    Spans are at most len(value) + slack tokens long. Ties go to the earliest
    start, then the shortest span.
    """
    n = len(tokens)
    best, best_score = None, -1.0
    for start in range(n):
        for length in range(1, min(len(value) + slack, n - start) + 1):
            span = (start, start + length)
            if _overlaps(span, used):
                continue
            score = span_similarity(value, tokens[start:start + length])
            if score > best_score:
                best, best_score = span, score
    if best is None or best_score < threshold:
        return None, max(best_score, 0.0)
    return best, best_score


def transfer_frame(frame: IntentNode, tokens: Sequence[str], threshold: float = MIN_SPAN_SCORE,
                   slack: int = SPAN_SLACK) -> tuple[IntentNode, list[SlotFill]]:
    """Re-fill the slot values of a canonical frame from ``tokens``.

    Slots are visited in canonical pre-order and chosen spans never overlap.
    Slots with no qualifying span keep their original value.
    """
    used: list[tuple[int, int]] = []
    fills: list[SlotFill] = []

    def visit(node: IntentNode) -> IntentNode:
        slots = []
        for slot in node.slots:
            if slot.nested is not None:
                slots.append(SlotNode(slot.label, (visit(slot.nested),)))
                continue
            value = slot.value_tokens
            if not value:
                slots.append(slot)
                continue
            span, score = best_span(value, tokens, used, threshold, slack)
            fills.append(SlotFill(slot.label, value, span, score))
            if span is None:
                slots.append(slot)
            else:
                used.append(span)
                slots.append(SlotNode(slot.label, tuple(tokens[span[0]:span[1]])))
        return IntentNode(node.label, tuple(slots))

    return visit(frame), fills


class Predictor(Protocol):
    def predict(self, rec: UtteranceRecord) -> str: ...


class KnnParser:
    """Top-1 retrieval plus slot re-filling.

    ``train`` must be the corpus the index was built over, since the
    neighbor's gold parse is what gets transferred.
    """

    def __init__(self, ix: VectorIndex, train: Corpus, embedder,
                 policy: NeighborPolicy | None = None, seed: int = 0,
                 threshold: float = MIN_SPAN_SCORE, slack: int = SPAN_SLACK):
        if len(ix) == 0:
            raise EmptyIndex("index is empty")
        policy = policy or NeighborPolicy(exclusion="none")
        self.cfg = AugmentConfig(mode="semparse_nn", k=1, policy=policy, seed=seed)
        self.retriever = Retriever(ix, train, embedder, self.cfg)
        self.train = train
        self.threshold = threshold
        self.slack = slack

    def neighbor(self, rec: UtteranceRecord) -> UtteranceRecord | None:
        ids = self.retriever.select(rec, k=1)
        if not ids:
            return None
        nb = self.train.get(ids[0])
        if nb is None:
            raise UnknownId(f"index record {ids[0]!r} is not in the training corpus")
        return nb

    def predict_with_fills(self, rec: UtteranceRecord) -> tuple[str, list[SlotFill]]:
        nb = self.neighbor(rec)
        if nb is None:
            raise EmptyIndex(f"no admissible neighbor for {rec.id!r}")
        frame = tf.canonicalize(nb.tree)
        filled, fills = transfer_frame(frame, rec.tokens, self.threshold, self.slack)
        return tf.serialize(tf.canonicalize(filled)), fills

    def predict(self, rec: UtteranceRecord) -> str:
        return self.predict_with_fills(rec)[0]


def knn_predict(rec: UtteranceRecord, ix: VectorIndex, corpus: Corpus, embedder,
                policy: NeighborPolicy | None = None, seed: int = 0) -> str:
    return KnnParser(ix, corpus, embedder, policy, seed).predict(rec)


@dataclass
class PredictionSet:
    split_name: str
    preds: dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.preds)

    def missing(self, corpus: Corpus) -> list[str]:
        return [r.id for r in corpus if r.id not in self.preds]

    def unparseable(self) -> list[str]:
        bad = []
        for rid, frame in self.preds.items():
            try:
                tf.parse_top(frame)
            except tf.FrameParseError:
                bad.append(rid)
        return bad


def predict_corpus(predictor: Predictor, corpus: Corpus) -> PredictionSet:
    return PredictionSet(corpus.split_name, {r.id: predictor.predict(r) for r in corpus})


def write_predictions(ps: PredictionSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid, frame in ps.preds.items():
            fh.write(f"{rid}\t{frame}\n")


def load_predictions(path, corpus: Corpus) -> PredictionSet:
    """Read ``record-id \\t frame`` rows. Unparseable frames are kept verbatim."""
    preds: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise PredictionsParseError(f"{path}:{lineno}: expected '<id>\\t<frame>'")
            rid, frame = line.split("\t", 1)
            if rid not in corpus:
                raise UnknownId(f"{path}:{lineno}: id {rid!r} not in corpus {corpus.split_name!r}")
            if rid in preds:
                raise DuplicateId(f"{path}:{lineno}: duplicate id {rid!r}")
            preds[rid] = frame.strip()
    return PredictionSet(corpus.split_name, preds)
