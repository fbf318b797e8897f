"""Exact flat L2 index over unit-norm embeddings."""
from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DimMismatch, DuplicateId, EmptyInput, FormatError, KZero, VersionMismatch

FORMAT_VERSION = "VIDX1"
_HEADER_RE = re.compile(r"^(VIDX\d+) dim=(\d+) count=(\d+) metric=(\S+)$")


def normalize_utterance(text: str) -> str:
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class ExclusionRule:
    """Which records a query may not return.

    ``exclude_id`` and ``exclude_text`` drop the query itself and its textual
    duplicates; ``other_domain_than`` keeps only records from other domains.
    """

    exclude_id: str | None = None
    exclude_text: str | None = None
    other_domain_than: str | None = None

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def by_id(cls, record_id: str):
        return cls(exclude_id=record_id)

    @classmethod
    def by_text(cls, text: str):
        return cls(exclude_text=normalize_utterance(text))

    @classmethod
    def by_id_and_text(cls, record_id: str, text: str):
        return cls(exclude_id=record_id, exclude_text=normalize_utterance(text))

    @classmethod
    def domain_not_equal(cls, domain: str):
        return cls(other_domain_than=domain)

    @classmethod
    def for_mode(cls, mode: str, record_id: str, text: str):
        """Build a rule from a CLI-style mode: none, id, text or id+text."""
        if mode == "none":
            return cls.none()
        if mode == "id":
            return cls.by_id(record_id)
        if mode == "text":
            return cls.by_text(text)
        if mode in ("id+text", "id_and_text"):
            return cls.by_id_and_text(record_id, text)
        raise ValueError(f"unknown exclusion mode {mode!r}")

    def allows(self, record_id: str, domain: str, utterance: str) -> bool:
        if self.exclude_id is not None and record_id == self.exclude_id:
            return False
        if self.exclude_text is not None and utterance == self.exclude_text:
            return False
        if self.other_domain_than is not None and domain == self.other_domain_than:
            return False
        return True


@dataclass(frozen=True)
class NeighborList:
    entries: tuple[tuple[str, float], ...]
    policy: str = "top_k"
    query_id: str | None = None

    @property
    def ids(self) -> list[str]:
        return [rid for rid, _ in self.entries]

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "policy": self.policy,
            "entries": [{"id": rid, "distance": d} for rid, d in self.entries],
        }


@dataclass(eq=False)
class VectorIndex:
    dim: int
    ids: tuple[str, ...]
    matrix: np.ndarray
    domain_of: dict[str, str]
    utterance_of: dict[str, str]
    _pos: dict[str, int] = field(init=False, repr=False)
    _id_rank: np.ndarray = field(init=False, repr=False)
    _domains: np.ndarray = field(init=False, repr=False)
    _texts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        self.matrix.setflags(write=False)
        self._pos = {rid: i for i, rid in enumerate(self.ids)}
        # Rank of each id in string order, for the (distance, id) tie-break.
        order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
        rank = np.empty(len(self.ids), dtype=np.int64)
        rank[order] = np.arange(len(self.ids))
        self._id_rank = rank
        self._domains = np.array([self.domain_of[r] for r in self.ids], dtype=object)
        self._texts = np.array([self.utterance_of[r] for r in self.ids], dtype=object)

    def __len__(self):
        return len(self.ids)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._pos

    def vector(self, record_id: str) -> np.ndarray:
        return self.matrix[self._pos[record_id]]

    def position(self, record_id: str) -> int:
        return self._pos[record_id]

    @property
    def domains(self) -> set[str]:
        return set(self.domain_of.values())

    def equals(self, other: "VectorIndex", atol: float = 1e-6) -> bool:
        return (
            self.dim == other.dim
            and self.ids == other.ids
            and self.domain_of == other.domain_of
            and self.utterance_of == other.utterance_of
            and np.allclose(self.matrix, other.matrix, atol=atol, rtol=0)
        )

    def mask(self, exclude: ExclusionRule) -> np.ndarray:
        keep = np.ones(len(self.ids), dtype=bool)
        if exclude.exclude_id is not None and exclude.exclude_id in self._pos:
            keep[self._pos[exclude.exclude_id]] = False
        if exclude.exclude_text is not None:
            keep &= self._texts != exclude.exclude_text
        if exclude.other_domain_than is not None:
            keep &= self._domains != exclude.other_domain_than
        return keep

    def distances(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float32)
        if q.shape != (self.dim,):
            raise DimMismatch(f"query dim {q.shape}, index dim {self.dim}")
        diff = self.matrix.astype(np.float64) - q.astype(np.float64)
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def query(
        self,
        q: np.ndarray,
        k: int,
        exclude: ExclusionRule | None = None,
        *,
        restrict_to: np.ndarray | None = None,
        query_id: str | None = None,
        policy: str = "top_k",
    ) -> NeighborList:
        """The k nearest allowed records, ordered by (distance, id).

        ``restrict_to`` is an optional boolean mask over index positions that
        further limits the candidate set.
        """
        if k < 1:
            raise KZero(f"k must be >= 1, got {k}")
        dist = self.distances(q)
        keep = self.mask(exclude or ExclusionRule.none())
        if restrict_to is not None:
            keep &= restrict_to
        cand = np.flatnonzero(keep)
        if cand.size == 0:
            return NeighborList((), policy, query_id)
        order = cand[np.lexsort((self._id_rank[cand], dist[cand]))][:k]
        entries = tuple((self.ids[i], float(dist[i])) for i in order)
        return NeighborList(entries, policy, query_id)


def build_index(records: Iterable[tuple[str, np.ndarray, str, str]]) -> VectorIndex:
    """records: (id, vector, domain, utterance). Build order is kept."""
    ids, vecs, domain_of, utterance_of = [], [], {}, {}
    dim = None
    for rid, vec, domain, utterance in records:
        vec = np.asarray(vec, dtype=np.float32)
        if dim is None:
            dim = vec.shape[0]
        if vec.shape != (dim,):
            raise DimMismatch(f"{rid!r}: dim {vec.shape[0]}, expected {dim}")
        if rid in domain_of:
            raise DuplicateId(f"duplicate id {rid!r}")
        ids.append(rid)
        vecs.append(vec)
        domain_of[rid] = domain
        utterance_of[rid] = normalize_utterance(utterance)
    if not ids:
        raise EmptyInput("cannot build an index from no records")
    return VectorIndex(dim, tuple(ids), np.stack(vecs), domain_of, utterance_of)


def query(ix: VectorIndex, q: np.ndarray, k: int, exclude: ExclusionRule | None = None) -> NeighborList:
    return ix.query(q, k, exclude)


def _b64(text: str) -> str:
    return base64.b64encode(text.encode("utf-8")).decode("ascii")


def save_index(ix: VectorIndex, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{FORMAT_VERSION} dim={ix.dim} count={len(ix)} metric=l2\n")
        for rid, row in zip(ix.ids, ix.matrix):
            floats = " ".join(format(float(x), ".9g") for x in row)
            fh.write(f"{rid}\t{ix.domain_of[rid]}\t{_b64(ix.utterance_of[rid])}\t{floats}\n")


def load_index(path) -> VectorIndex:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        m = _HEADER_RE.match(header)
        if not m:
            if header.startswith("VIDX") and header.split()[0] != FORMAT_VERSION:
                raise VersionMismatch(f"{path}: unsupported version {header.split()[0]!r}")
            raise FormatError(f"{path}: bad header {header!r}")
        version, dim, count, metric = m.group(1), int(m.group(2)), int(m.group(3)), m.group(4)
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"{path}: unsupported version {version!r}")
        if metric != "l2":
            raise FormatError(f"{path}: unsupported metric {metric!r}")
        records = []
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            rid, domain, b64, raw = parts
            try:
                utterance = base64.b64decode(b64, validate=True).decode("utf-8")
                vec = np.array([float(x) for x in raw.split()], dtype=np.float32)
            except (binascii.Error, UnicodeDecodeError, ValueError) as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
            if vec.size != dim:
                raise FormatError(f"{path}:{lineno}: {vec.size} values, header says dim={dim}")
            records.append((rid, vec, domain, utterance))
    if len(records) != count:
        raise FormatError(f"{path}: header says count={count}, found {len(records)} rows")
    if count == 0:
        return VectorIndex(dim, (), np.zeros((0, dim), dtype=np.float32), {}, {})
    try:
        return build_index(records)
    except (DuplicateId, EmptyInput) as e:
        raise FormatError(f"{path}: {e}") from None
