"""Command-line pipeline: ingest, build-index, query, augment, predict, eval, subset.

Stages talk only through files (TSV, index, JSON), so any stage can be swapped
for an external tool. Exit codes: 0 ok, 2 usage error, 3 data error,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import topformat as tf
from .augment import (
    AugmentConfig,
    NeighborPolicy,
    augment_corpus,
    read_augmented_tsv,
    write_augmented_tsv,
)
from .corpus import Corpus, ingest_tsv, subset_incremental, write_tsv
from .embedding import DEFAULT_DIM, HashedEmbedder, TableEmbedder
from .errors import DataError, DimMismatch, EmptyIndex, InvariantError, UnknownId
from .evaluation import emit_report, emit_slices_csv, evaluate, neighbor_pr
from .knnparser import KnnParser, load_predictions, predict_corpus, write_predictions
from .vindex import ExclusionRule, build_index, load_index, save_index

log = logging.getLogger("retroparse")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

_MODES = {"utterance-nn": "utterance_nn", "semparse-nn": "semparse_nn"}
_POLICIES = {
    "top-k": "top_k",
    "random-top-m": "random_top_m",
    "cross-domain": "cross_domain_random",
    "oracle-skeleton": "oracle_skeleton",
}


class UsageError(Exception):
    pass


# -- helpers ----------------------------------------------------------------

def _require_files(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")


def _require_out(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).resolve().parent.is_dir():
            raise FileNotFoundError(f"output directory does not exist: {Path(p).parent}")


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _header_flag(args) -> bool | None:
    if args.has_header and args.no_header:
        raise UsageError("--has-header and --no-header are mutually exclusive")
    if args.has_header:
        return True
    if args.no_header:
        return False
    return None


def _ingest(path, split, args) -> Corpus:
    return ingest_tsv(path, split, _header_flag(args), getattr(args, "skip_bad", False))


def _embedder(args, expected_ids=None, default_dim=DEFAULT_DIM):
    if args.embedder == "file":
        if not args.embeddings:
            raise UsageError("--embedder file requires --embeddings PATH")
        emb = TableEmbedder.from_file(args.embeddings, expected_ids)
        if args.dim is not None and args.dim != emb.dim:
            raise DimMismatch(f"--dim {args.dim} but {args.embeddings} has dim {emb.dim}")
        return emb
    return HashedEmbedder(args.dim or default_dim, args.embed_seed)


def _index_and_embedder(args):
    """Load the index; a hashed embedder without --dim takes the index dim."""
    ix = load_index(args.index)
    emb = _embedder(args, default_dim=ix.dim)
    if len(ix) and ix.dim != emb.dim:
        raise DimMismatch(f"index dim {ix.dim} != embedder dim {emb.dim}")
    return ix, emb


def _policy(args) -> NeighborPolicy:
    return NeighborPolicy(kind=_POLICIES[args.policy], m=args.m, exclusion=args.exclude)


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------

def cmd_ingest(args) -> int:
    _require_files(args.tsv)
    _require_out(args.out)
    c = _ingest(args.tsv, args.split, args)
    summary = {
        "split": c.split_name,
        "records": len(c),
        "domains": c.domain_counts(),
        "depth_histogram": {str(d): n for d, n in c.depth_histogram().items()},
        "skipped": len(c.skipped),
        "errors": [{"row": row, "error": msg} for row, msg in c.skipped],
        "config": _config(args),
    }
    _write_json(summary, args.out)
    return EXIT_OK


def cmd_build_index(args) -> int:
    _require_files(args.train, args.embeddings if args.embedder == "file" else None)
    _require_out(args.out)
    train = _ingest(args.train, args.split, args)
    emb = _embedder(args, expected_ids=[r.id for r in train])
    ix = build_index((r.id, emb.embed(r.id, r.utterance), r.domain, r.utterance) for r in train)
    save_index(ix, args.out)
    log.info("indexed %d records (dim %d) -> %s", len(ix), ix.dim, args.out)
    return EXIT_OK


def cmd_query(args) -> int:
    _require_files(args.index, args.embeddings if args.embedder == "file" else None)
    if (args.text is None) == (args.id is None):
        raise UsageError("give exactly one of --text or --id")
    ix, emb = _index_and_embedder(args)
    if args.id is not None:
        if args.id not in ix:
            raise UnknownId(f"id {args.id!r} not in index")
        qid, text = args.id, ix.utterance_of[args.id]
    else:
        qid, text = "query", args.text
    rule = ExclusionRule.for_mode(args.exclude, qid, text)
    nl = ix.query(emb.embed(qid, text), args.k, rule, query_id=args.id)
    out = nl.to_dict()
    out["config"] = _config(args)
    _write_json(out, args.out)
    return EXIT_OK


def cmd_augment(args) -> int:
    _require_files(args.corpus, args.index, args.train,
                   args.embeddings if args.embedder == "file" else None)
    _require_out(args.out)
    cfg = AugmentConfig(mode=_MODES[args.mode], k=args.k, separator=args.separator,
                        policy=_policy(args), seed=args.seed)
    train = _ingest(args.train, args.train_split, args)
    corpus = train if args.corpus == args.train and args.split == args.train_split \
        else _ingest(args.corpus, args.split, args)
    ix, emb = _index_and_embedder(args)
    if len(ix) == 0:
        raise EmptyIndex(f"{args.index} is empty")
    examples = augment_corpus(corpus, ix, cfg, train, emb)
    write_augmented_tsv(examples, args.out)
    log.info("wrote %d augmented rows -> %s", len(examples), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    _require_files(args.test, args.index, args.train,
                   args.embeddings if args.embedder == "file" else None)
    _require_out(args.out)
    policy = _policy(args)
    train = _ingest(args.train, args.train_split, args)
    test = _ingest(args.test, args.split, args)
    ix, emb = _index_and_embedder(args)
    if len(ix) == 0:
        raise EmptyIndex(f"{args.index} is empty")
    parser = KnnParser(ix, train, emb, policy=policy, seed=args.seed)
    preds = predict_corpus(parser, test)
    for rid, frame in preds.preds.items():
        if tf.canonical_string(frame) != frame:
            raise InvariantError(f"prediction for {rid} is not canonical: {frame}")
    write_predictions(preds, args.out)
    log.info("wrote %d predictions -> %s", len(preds), args.out)
    return EXIT_OK


def _slice_kinds(args) -> list[str]:
    if args.slices is None:
        return ["complexity", "frequency"] if args.train else ["complexity"]
    kinds = [s for s in args.slices.split(",") if s and s != "none"]
    for k in kinds:
        if k not in ("complexity", "frequency"):
            raise UsageError(f"unknown slice {k!r}")
    if "frequency" in kinds and not args.train:
        raise UsageError("--slices frequency needs --train")
    return kinds


def cmd_eval(args) -> int:
    _require_files(args.test, args.preds, args.train, args.neighbors)
    _require_out(args.out, args.csv)
    kinds = _slice_kinds(args)
    if args.neighbors and not args.train:
        raise UsageError("--neighbors needs --train")
    test = _ingest(args.test, args.split, args)
    train = _ingest(args.train, args.train_split, args) if args.train else None
    preds = load_predictions(args.preds, test)
    report = evaluate(test, preds.preds, train, kinds)
    if args.neighbors:
        report.extra["retrieval_quality"] = _retrieval_quality(args.neighbors, test, train)
    report.config = _config(args)
    if args.out:
        emit_report(report, args.out)
    else:
        _write_json(report.to_dict(), None)
    if args.csv:
        emit_slices_csv(report, args.csv)
    return EXIT_OK


def _retrieval_quality(path, test: Corpus, train: Corpus) -> dict:
    """Label P/R of the closest and farthest augmented neighbor vs gold."""
    closest, farthest, golds = [], [], []
    for ex in read_augmented_tsv(path):
        if not ex.neighbor_ids or ex.id not in test:
            continue
        try:
            first, last = train[ex.neighbor_ids[0]], train[ex.neighbor_ids[-1]]
        except KeyError as e:
            raise UnknownId(f"{path}: neighbor {e.args[0]!r} not in training corpus") from None
        closest.append(first.tree)
        farthest.append(last.tree)
        golds.append(test[ex.id].tree)
    if not golds:
        return {"n": 0}
    return {
        "n": len(golds),
        "closest": neighbor_pr(closest, golds).to_dict(),
        "farthest": neighbor_pr(farthest, golds).to_dict(),
    }


def _fmt_fraction(f: float) -> str:
    return str(int(f)) if float(f).is_integer() else str(f)


def cmd_subset(args) -> int:
    _require_files(args.tsv)
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_dir}")
    try:
        fractions = [float(x) for x in args.fractions.split(",") if x]
    except ValueError:
        raise UsageError(f"bad --fractions {args.fractions!r}") from None
    c = _ingest(args.tsv, args.split, args)
    subsets = subset_incremental(c, fractions, args.seed)
    stem = Path(args.tsv).stem
    written = []
    for f, sub in zip(fractions, subsets):
        path = out_dir / f"{stem}.{_fmt_fraction(f)}pct.tsv"
        write_tsv(sub, path)
        written.append({"fraction": f, "records": len(sub), "path": str(path)})
    _write_json({"subsets": written, "config": _config(args)}, None)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def _add_header_flags(p):
    p.add_argument("--has-header", action="store_true", help="first line is a header")
    p.add_argument("--no-header", action="store_true", help="first line is data")
    p.add_argument("--skip-bad", action="store_true", help="skip unparseable rows")


def _add_embedder_flags(p):
    p.add_argument("--embedder", choices=("hashed", "file"), default="hashed")
    p.add_argument("--embeddings", help="embedding file for --embedder file")
    p.add_argument("--dim", type=int, help=f"embedding dim; hashed defaults to the index dim, or {DEFAULT_DIM} when building")
    p.add_argument("--embed-seed", type=int, default=0, help="hash seed of the hashed embedder")


def _add_policy_flags(p, default_exclude):
    p.add_argument("--policy", choices=tuple(_POLICIES), default="top-k")
    p.add_argument("--m", type=int, default=100, help="pool size for random-top-m")
    p.add_argument("--exclude", choices=("none", "id", "text", "id+text"), default=default_exclude)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="retroparse", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a TSV and summarize it")
    p.add_argument("tsv")
    p.add_argument("--split", default="train")
    p.add_argument("--out", help="write the JSON summary here instead of stdout")
    _add_header_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-index", help="embed a training TSV and write an index file")
    p.add_argument("train")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    _add_header_flags(p)
    _add_embedder_flags(p)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="nearest neighbors of a text or an indexed record")
    p.add_argument("index")
    p.add_argument("--text")
    p.add_argument("--id")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--exclude", choices=("none", "id", "text", "id+text"), default="none")
    p.add_argument("--out")
    _add_embedder_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("augment", help="write retrieval-augmented inputs")
    p.add_argument("corpus")
    p.add_argument("--index", required=True)
    p.add_argument("--train", required=True, help="TSV the index was built from")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--train-split", default="train")
    p.add_argument("--mode", choices=tuple(_MODES), default="semparse-nn")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--separator", default="|")
    _add_policy_flags(p, default_exclude="id")
    _add_header_flags(p)
    _add_embedder_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("predict", help="kNN frame-transfer predictions")
    p.add_argument("test")
    p.add_argument("--index", required=True)
    p.add_argument("--train", required=True, help="TSV the index was built from")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--train-split", default="train")
    _add_policy_flags(p, default_exclude="none")
    _add_header_flags(p)
    _add_embedder_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="frame accuracy report")
    p.add_argument("test")
    p.add_argument("preds")
    p.add_argument("--train", help="training TSV; enables frequency slicing")
    p.add_argument("--split", default="test")
    p.add_argument("--train-split", default="train")
    p.add_argument("--slices", help="comma list of complexity,frequency (or none)")
    p.add_argument("--neighbors", help="augmented TSV; adds neighbor label P/R")
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--csv", help="also write slice,bucket,n,accuracy CSV")
    _add_header_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("subset", help="nested limited-training subsets")
    p.add_argument("tsv")
    p.add_argument("--fractions", required=True, help="e.g. 10,20,30,40,50")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", default="train")
    _add_header_flags(p)
    p.set_defaults(func=cmd_subset)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"retroparse: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        # config validation (k, m, separator) surfaces as ValueError
        print(f"retroparse: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"retroparse: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as e:
        print(f"retroparse: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
