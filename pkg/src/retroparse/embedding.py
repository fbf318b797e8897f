"""Unit-norm utterance embeddings.

Two sources: a deterministic hashed word + character-trigram embedder that
runs anywhere, and a plain-text embedding file for vectors computed by an
external encoder.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from ._rng import MASK64, fnv1a64
from .errors import (
    DimMismatch,
    DimTooSmall,
    DuplicateId,
    EmbeddingParseError,
    MissingId,
)

DEFAULT_DIM = 256
DEFAULT_SEED = 0
MIN_DIM = 8
_TOP_BIT = 1 << 63


def unit_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float32)
    norm = np.sqrt(np.dot(v, v))
    if norm > 1e-12:
        return (v / norm).astype(np.float32)
    return v.copy()


def features(utterance: str) -> list[str]:
    out = []
    for word in utterance.lower().split():
        out.append(word)
        marked = f"^{word}$"
        out.extend(marked[i:i + 3] for i in range(len(marked) - 2))
    return out


@lru_cache(maxsize=1 << 18)
def _feature_hash(feat: str, seed: int) -> int:
    return fnv1a64(feat.encode("utf-8"), seed)


def embed_hashed(utterance: str, dim: int = DEFAULT_DIM, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Signed feature-hashing embedding, L2-normalized, float32.

    Features are the lowercased whitespace words plus the character trigrams
    of each ``^word$``. Each feature is hashed with FNV-1a 64 (offset basis
    XOR seed); bucket is ``hash % dim`` and the top hash bit picks the sign.
    """
    if dim < MIN_DIM:
        raise DimTooSmall(f"dim must be >= {MIN_DIM}, got {dim}")
    seed &= MASK64
    v = np.zeros(dim, dtype=np.float32)
    for feat in features(utterance):
        h = _feature_hash(feat, seed)
        v[h % dim] += -1.0 if h & _TOP_BIT else 1.0
    return unit_normalize(v)


@dataclass
class EmbeddingTable:
    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, record_id: str) -> np.ndarray:
        return self.entries[record_id]

    def __contains__(self, record_id: str) -> bool:
        return record_id in self.entries


def _format_vector(v: Iterable[float]) -> str:
    # 9 significant digits round-trip any float32.
    return " ".join(format(float(x), ".9g") for x in v)


def load_embeddings(path, expected_ids: Iterable[str] | None = None) -> EmbeddingTable:
    """Read ``<id>\\t<f1> ... <fD>`` lines; ``#`` lines and blanks are skipped."""
    table: EmbeddingTable | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise EmbeddingParseError(f"{path}:{lineno}: expected '<id>\\t<floats>'")
            rid, raw = parts
            try:
                vec = np.array([float(x) for x in raw.split()], dtype=np.float32)
            except ValueError as e:
                raise EmbeddingParseError(f"{path}:{lineno}: {e}") from None
            if vec.size == 0:
                raise EmbeddingParseError(f"{path}:{lineno}: empty vector")
            if table is None:
                table = EmbeddingTable(dim=int(vec.size))
            if vec.size != table.dim:
                raise DimMismatch(f"{path}:{lineno}: dim {vec.size}, expected {table.dim}")
            if rid in table.entries:
                raise DuplicateId(f"{path}:{lineno}: duplicate id {rid!r}")
            table.entries[rid] = unit_normalize(vec)
    if table is None:
        raise EmbeddingParseError(f"{path}: no embedding rows")
    if expected_ids is not None:
        missing = sorted(set(expected_ids) - table.entries.keys())
        if missing:
            raise MissingId(f"{path}: {len(missing)} ids missing, e.g. {missing[:3]}")
    return table


def save_embeddings(table: EmbeddingTable | Mapping[str, np.ndarray], path) -> None:
    entries = table.entries if isinstance(table, EmbeddingTable) else table
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid, vec in entries.items():
            fh.write(f"{rid}\t{_format_vector(vec)}\n")


class HashedEmbedder:
    kind = "hashed"

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = DEFAULT_SEED):
        if dim < MIN_DIM:
            raise DimTooSmall(f"dim must be >= {MIN_DIM}, got {dim}")
        self.dim = dim
        self.seed = seed

    def embed(self, record_id: str, utterance: str) -> np.ndarray:
        return embed_hashed(utterance, self.dim, self.seed)


class TableEmbedder:
    """Looks vectors up by record id in a loaded embedding file."""

    kind = "file"

    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.dim = table.dim

    @classmethod
    def from_file(cls, path, expected_ids=None) -> "TableEmbedder":
        return cls(load_embeddings(path, expected_ids))

    def embed(self, record_id: str, utterance: str) -> np.ndarray:
        try:
            return self.table[record_id]
        except KeyError:
            raise MissingId(f"no embedding for {record_id!r}") from None
