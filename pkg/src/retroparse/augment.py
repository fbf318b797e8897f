"""Neighbor selection policies and retrieval-augmented input rendering.

An augmented input lists neighbor pieces right to left by rank, so the
closest neighbor sits immediately before the utterance::

    p_k | ... | p_2 | p_1 | utterance
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import topformat as tf
from ._rng import keyed, pick
from .corpus import Corpus, UtteranceRecord
from .errors import DimMismatch, EmptyIndex, NoCandidates, UnknownNeighborId
from .vindex import ExclusionRule, VectorIndex

MODES = ("utterance_nn", "semparse_nn")
POLICIES = ("top_k", "random_top_m", "cross_domain_random", "oracle_skeleton")
EXCLUSIONS = ("none", "id", "text", "id+text")


@dataclass(frozen=True)
class NeighborPolicy:
    kind: str = "top_k"
    m: int = 100
    exclusion: str = "id"

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")
        if self.exclusion not in EXCLUSIONS:
            raise ValueError(f"unknown exclusion {self.exclusion!r}; expected one of {EXCLUSIONS}")
        if self.m < 1:
            raise ValueError("m must be >= 1")


@dataclass(frozen=True)
class AugmentConfig:
    mode: str = "semparse_nn"
    k: int = 1
    separator: str = "|"
    policy: NeighborPolicy = field(default_factory=NeighborPolicy)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.separator or any(ch.isspace() for ch in self.separator):
            raise ValueError("separator must be a nonempty token without whitespace")
        if self.policy.kind == "random_top_m" and self.policy.m < self.k:
            raise ValueError(f"random_top_m needs m >= k (m={self.policy.m}, k={self.k})")


@dataclass(frozen=True)
class AugmentedExample:
    id: str
    input: str
    target: str
    neighbor_ids: tuple[str, ...]

    def tsv_row(self) -> str:
        return f"{self.id}\t{self.input}\t{self.target}\t{','.join(self.neighbor_ids)}"


class Retriever:
    """Neighbor selection over a fixed index, neighbor corpus and embedder.

    ``corpus`` supplies gold skeletons for the oracle policy; records in the
    index that are missing from it never match a skeleton.
    """

    def __init__(self, ix: VectorIndex, corpus: Corpus | None, embedder, cfg: AugmentConfig):
        if len(ix) == 0:
            raise EmptyIndex("index is empty")
        if embedder.dim != ix.dim:
            raise DimMismatch(f"embedder dim {embedder.dim} != index dim {ix.dim}")
        self.ix = ix
        self.corpus = corpus
        self.embedder = embedder
        self.cfg = cfg
        self._skeleton_masks: dict[str, np.ndarray] | None = None

    def _skeleton_mask(self, skel: str) -> np.ndarray:
        if self._skeleton_masks is None:
            groups: dict[str, list[int]] = {}
            for i, rid in enumerate(self.ix.ids):
                rec = self.corpus.get(rid) if self.corpus is not None else None
                if rec is not None:
                    groups.setdefault(rec.skeleton, []).append(i)
            self._skeleton_masks = {}
            for s, positions in groups.items():
                mask = np.zeros(len(self.ix), dtype=bool)
                mask[positions] = True
                self._skeleton_masks[s] = mask
        return self._skeleton_masks.get(skel, np.zeros(len(self.ix), dtype=bool))

    def select(self, rec: UtteranceRecord, k: int | None = None) -> list[str]:
        k = self.cfg.k if k is None else k
        pol = self.cfg.policy
        rule = ExclusionRule.for_mode(pol.exclusion, rec.id, rec.utterance)
        ix = self.ix

        if pol.kind == "cross_domain_random":
            allowed = ix.mask(replace(rule, other_domain_than=rec.domain))
            cands = np.flatnonzero(allowed)
            if cands.size == 0:
                raise NoCandidates(f"no index records outside domain {rec.domain!r}")
            return [ix.ids[i] for i in pick(cands, k, keyed(self.cfg.seed, rec.id))]

        q = self.embedder.embed(rec.id, rec.utterance)
        if pol.kind == "top_k":
            return ix.query(q, k, rule).ids
        if pol.kind == "random_top_m":
            top = ix.query(q, pol.m, rule).ids
            return pick(top, k, keyed(self.cfg.seed, rec.id))
        # oracle_skeleton
        hits = ix.query(q, k, rule, restrict_to=self._skeleton_mask(rec.skeleton)).ids
        return hits if hits else ix.query(q, k, rule).ids


def select_neighbors(rec: UtteranceRecord, ix: VectorIndex, cfg: AugmentConfig,
                     corpus: Corpus | None, embedder) -> list[str]:
    return Retriever(ix, corpus, embedder, cfg).select(rec)


def render_augmented(rec: UtteranceRecord, neighbor_ids: Sequence[str], cfg: AugmentConfig,
                     lookup: Mapping[str, UtteranceRecord] | Corpus) -> AugmentedExample:
    pieces = []
    for rid in neighbor_ids:
        nb = lookup.get(rid)
        if nb is None:
            raise UnknownNeighborId(f"neighbor {rid!r} not found")
        # gold parse pieces are re-serialized, so spacing is always single
        pieces.append(nb.utterance if cfg.mode == "utterance_nn" else tf.serialize(nb.tree))
    sep = f" {cfg.separator} "
    text = sep.join([*reversed(pieces), rec.utterance])
    return AugmentedExample(rec.id, text, rec.canonical, tuple(neighbor_ids))


def augment_corpus(c: Corpus, ix: VectorIndex, cfg: AugmentConfig,
                   lookup: Corpus, embedder) -> list[AugmentedExample]:
    """One augmented example per record, in corpus order.

    ``lookup`` is the corpus the index was built from; it provides neighbor
    utterances and gold parses.
    """
    retriever = Retriever(ix, lookup, embedder, cfg)
    return [render_augmented(rec, retriever.select(rec), cfg, lookup) for rec in c]


def write_augmented_tsv(examples: Sequence[AugmentedExample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(ex.tsv_row() + "\n")


def read_augmented_tsv(path) -> list[AugmentedExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rid, text, target, nbs = line.split("\t")
            out.append(AugmentedExample(rid, text, target, tuple(n for n in nbs.split(",") if n)))
    return out
