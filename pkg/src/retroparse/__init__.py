"""Retrieval-augmented task-oriented semantic parsing toolkit."""
from .topformat import (
    IntentNode,
    ParseTree,
    SlotNode,
    canonicalize,
    decouple,
    depth,
    parse_top,
    serialize,
    skeleton,
)
from .embedding import EmbeddingTable, HashedEmbedder, TableEmbedder, embed_hashed, load_embeddings, unit_normalize
from .vindex import ExclusionRule, NeighborList, VectorIndex, build_index, load_index, save_index
from .corpus import Corpus, UtteranceRecord, filter_domain, ingest_tsv, subset_incremental
from .augment import AugmentConfig, AugmentedExample, NeighborPolicy, augment_corpus, render_augmented, select_neighbors
from .knnparser import KnnParser, PredictionSet, knn_predict, load_predictions, span_similarity
from .evaluation import (
    EvalReport,
    aggregate,
    emit_report,
    evaluate,
    frame_match,
    neighbor_pr,
    relative_improvement,
    slice_complexity,
    slice_frequency,
)

__version__ = "0.1.0"
