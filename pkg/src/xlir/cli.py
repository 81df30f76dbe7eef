"""Command-line entry point composing the retrieval pipelines.

Commands map one-to-one onto library operations: ``psq-translate``,
``index-lexical``, ``index-dense``, ``shard-plan``, ``search``, ``fuse``,
``mine-distill``, and ``evaluate``. Shared parameters can come from an INI
config file (sections ``collection``, ``tokenizer``, ``psq``, ``lexical``,
``dense``, ``shards``, ``search``, ``output``); explicit flags override
config values, and unknown config keys are rejected. Every command validates
its inputs before writing any output, exits 0 on success and nonzero with a
diagnostic on failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from collections import Counter
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import dense as dense_mod
from . import distill as distill_mod
from . import evaluation as eval_mod
from . import lexical as lexical_mod
from . import psq as psq_mod
from . import shards as shards_mod
from .errors import FormatError, ValidationError, XlirError

logger = logging.getLogger("xlir")

SHARDED_FORMAT = "xlir-sharded-index"
SHARDED_VERSION = 1

_CONFIG_SCHEMA = {
    "collection": {
        "docs": str,
        "topics": str,
        "embeddings": str,
        "query_embeddings": str,
        "qrels": str,
    },
    "tokenizer": {"stemmer": str},
    "psq": {"cum_mass": float, "max_alts": int},
    "lexical": {
        "k1": float,
        "b": float,
        "lambda": float,
        "rm3_fb_docs": int,
        "rm3_fb_terms": int,
        "rm3_alpha": float,
    },
    "dense": {
        "bits": int,
        "num_centroids": int,
        "nprobe": int,
        "candidate_cap": int,
        "kmeans_iters": int,
        "sample_per_centroid": int,
        "seed": int,
    },
    "shards": {"window_months": int},
    "search": {"variant": str, "scorer": str, "rm3": bool, "k": int},
    "output": {"run_tag": str},
}

# Stemmer registry for the tokenizer config hook; identity is the default.
_STEMMERS: dict[str, Callable[[str], str] | None] = {"identity": None}


def load_config(path: str | Path | None) -> dict[str, dict]:
    """Parse an INI config file, rejecting unknown sections and keys."""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    config: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ValidationError(f"{path}: unknown config section [{section}]")
        schema = _CONFIG_SCHEMA[section]
        config[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ValidationError(f"{path}: unknown config key {key!r} in [{section}]")
            kind = schema[key]
            try:
                if kind is bool:
                    config[section][key] = parser.getboolean(section, key)
                else:
                    config[section][key] = kind(raw)
            except ValueError:
                raise FormatError(f"{path}: bad value {raw!r} for {section}.{key}") from None
    return config


def _require_path(path: str | Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{what} {path} does not exist")
    return path


def _resolve_path(
    flag_value: str | None, config: dict, key: str, what: str
) -> Path:
    """Flag value, falling back to the [collection] config section."""
    value = flag_value if flag_value is not None else config.get("collection", {}).get(key)
    if value is None:
        raise ValidationError(f"no {what} given: pass a flag or set collection.{key} in the config")
    return _require_path(value, what)


def _tokenizer(config: dict) -> corpus_mod.Tokenizer:
    name = config.get("tokenizer", {}).get("stemmer", "identity")
    if name not in _STEMMERS:
        raise ValidationError(f"unknown stemmer {name!r}; known: {sorted(_STEMMERS)}")
    return corpus_mod.Tokenizer(stemmer=_STEMMERS[name])


def _lexical_params(config: dict) -> lexical_mod.LexicalParams:
    section = dict(config.get("lexical", {}))
    if "lambda" in section:
        section["lambda_"] = section.pop("lambda")
    params = lexical_mod.LexicalParams(**section)
    params.validate()
    return params


def _dense_params(config: dict, args: argparse.Namespace | None = None) -> dense_mod.DenseIndexParams:
    section = dict(config.get("dense", {}))
    allowed = {f.name for f in dataclass_fields(dense_mod.DenseIndexParams)}
    params = dense_mod.DenseIndexParams(**{k: v for k, v in section.items() if k in allowed})
    if args is not None:
        for name in ("bits", "num_centroids", "nprobe", "candidate_cap", "kmeans_iters", "seed"):
            value = getattr(args, name, None)
            if value is not None:
                setattr(params, name, value)
    params.validate()
    return params


def _read_bags(path: Path) -> list[tuple[str, dict[str, float]]]:
    bags: list[tuple[str, dict[str, float]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                bags.append((record["id"], {t: float(w) for t, w in record["weights"].items()}))
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError):
                raise FormatError(f"{path}:{lineno}: expected {{'id', 'weights'}} record") from None
    return bags


def _write_bags(path: Path, bags: list[tuple[str, dict[str, float]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, weights in bags:
            quantized = {t: float(np.float32(w)) for t, w in sorted(weights.items())}
            fh.write(json.dumps({"id": doc_id, "weights": quantized}, ensure_ascii=False) + "\n")


def _entries_for_topic(
    topic_id: str, ranked: list[tuple[str, float]], run_tag: str
) -> list[eval_mod.RunEntry]:
    return [
        eval_mod.RunEntry(topic_id=topic_id, doc_id=doc_id, rank=rank, score=score, run_tag=run_tag)
        for rank, (doc_id, score) in enumerate(ranked, start=1)
    ]


# ---------------------------------------------------------------------------
# sharded index directories


def _sharded_meta(engine: str, shard_ordinals: list[int]) -> dict:
    return {
        "format": SHARDED_FORMAT,
        "version": SHARDED_VERSION,
        "engine": engine,
        "shards": shard_ordinals,
    }


def _read_index_kind(index_dir: Path) -> str:
    """One of ``lexical``, ``dense``, ``sharded-lexical``, ``sharded-dense``."""
    meta_path = index_dir / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        fmt = meta.get("format")
        if fmt == SHARDED_FORMAT:
            return f"sharded-{meta['engine']}"
        if fmt == dense_mod.INDEX_FORMAT:
            return "dense"
        raise FormatError(f"{index_dir}: unrecognized index format {fmt!r}")
    if (index_dir / "stats.json").exists():
        return "lexical"
    raise FormatError(f"{index_dir}: not an index directory")


def _global_stats(indexes: dict[int, lexical_mod.InvertedIndex]) -> lexical_mod.CollectionStats:
    doc_freq: dict[str, int] = {}
    coll_freq: dict[str, float] = {}
    num_docs = 0
    total_weight = 0.0
    for index in indexes.values():
        num_docs += index.stats.num_docs
        total_weight += index.stats.total_weight
        for term, df in index.stats.doc_freq.items():
            doc_freq[term] = doc_freq.get(term, 0) + df
        for term, cf in index.stats.coll_freq.items():
            coll_freq[term] = coll_freq.get(term, 0.0) + cf
    return lexical_mod.CollectionStats(
        num_docs=num_docs, total_weight=total_weight, doc_freq=doc_freq, coll_freq=coll_freq
    )


# ---------------------------------------------------------------------------
# commands


def cmd_psq_translate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    docs_path = _resolve_path(args.docs, config, "docs", "document file")
    table_path = _require_path(args.table, "translation table")
    tokenizer = _tokenizer(config)
    cum_mass = args.cum_mass if args.cum_mass is not None else config.get("psq", {}).get(
        "cum_mass", psq_mod.DEFAULT_CUM_MASS
    )
    max_alts = args.max_alts if args.max_alts is not None else config.get("psq", {}).get(
        "max_alts", psq_mod.DEFAULT_MAX_ALTS
    )
    docs = corpus_mod.ingest_collection(docs_path)
    if args.lang is not None:
        docs = [doc for doc in docs if doc.lang == args.lang]
        if not docs:
            raise ValidationError(f"no documents with lang {args.lang!r} in {docs_path}")
    table = psq_mod.prune_table(psq_mod.load_table(table_path), cum_mass=cum_mass, max_alts=max_alts)
    start = time.perf_counter()
    bags = []
    for doc in docs:
        counts = Counter(corpus_mod.document_tokens(doc, tokenizer))
        bags.append((doc.doc_id, psq_mod.translate_doc(counts, table)))
    logger.info(
        "event=psq_translate docs=%d sources=%d elapsed_ms=%.1f",
        len(bags),
        len(table),
        (time.perf_counter() - start) * 1e3,
    )
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    _write_bags(Path(args.output), bags)
    return 0


def cmd_index_lexical(args: argparse.Namespace) -> int:
    bags_path = _require_path(args.bags, "weighted bag file")
    bags = _read_bags(bags_path)
    out_dir = Path(args.output)
    start = time.perf_counter()
    if args.shard_plan is None:
        index = lexical_mod.build_index(bags)
        lexical_mod.save_index(index, out_dir)
        logger.info(
            "event=index_lexical docs=%d terms=%d elapsed_ms=%.1f",
            index.num_docs,
            len(index.postings),
            (time.perf_counter() - start) * 1e3,
        )
        return 0
    plan = shards_mod.ShardPlan.load(_require_path(args.shard_plan, "shard plan"))
    grouped: dict[int, list[tuple[str, dict[str, float]]]] = {}
    for doc_id, bag in bags:
        if doc_id not in plan.assignment:
            raise ValidationError(f"document {doc_id!r} missing from shard plan")
        grouped.setdefault(plan.assignment[doc_id], []).append((doc_id, bag))
    out_dir.mkdir(parents=True, exist_ok=True)
    ordinals = sorted(grouped)
    for ordinal in ordinals:
        lexical_mod.save_index(
            lexical_mod.build_index(grouped[ordinal]), out_dir / f"shard_{ordinal:04d}"
        )
    plan.save(out_dir / "plan.json")
    (out_dir / "meta.json").write_text(
        json.dumps(_sharded_meta("lexical", ordinals), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    logger.info(
        "event=index_lexical docs=%d shards=%d elapsed_ms=%.1f",
        len(bags),
        len(ordinals),
        (time.perf_counter() - start) * 1e3,
    )
    return 0


def cmd_index_dense(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    params = _dense_params(config, args)
    emb_path = _resolve_path(args.embeddings, config, "embeddings", "embedding file")
    embeddings = dense_mod.load_embeddings(emb_path)
    out_dir = Path(args.output)
    if args.shard_plan is None:
        index = dense_mod.build_dense_index(embeddings, params)
        dense_mod.save_dense_index(index, out_dir)
        return 0
    plan = shards_mod.ShardPlan.load(_require_path(args.shard_plan, "shard plan"))
    grouped: dict[int, dict[str, np.ndarray]] = {}
    for key, matrix in embeddings.items():
        doc_id, _ = corpus_mod.parse_passage_key(key)
        if doc_id not in plan.assignment:
            raise ValidationError(f"document {doc_id!r} missing from shard plan")
        grouped.setdefault(plan.assignment[doc_id], {})[key] = matrix
    out_dir.mkdir(parents=True, exist_ok=True)
    ordinals = sorted(grouped)
    for ordinal in ordinals:
        # Shard-local codebooks: scores are not guaranteed comparable across
        # shards; the raw-score merge mirrors that limitation deliberately.
        index = dense_mod.build_dense_index(grouped[ordinal], params)
        dense_mod.save_dense_index(index, out_dir / f"shard_{ordinal:04d}")
    plan.save(out_dir / "plan.json")
    (out_dir / "meta.json").write_text(
        json.dumps(_sharded_meta("dense", ordinals), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return 0


def cmd_shard_plan(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    docs = corpus_mod.ingest_collection(_resolve_path(args.docs, config, "docs", "document file"))
    window_months = (
        args.window_months
        if args.window_months is not None
        else config.get("shards", {}).get("window_months", 3)
    )
    plan = shards_mod.plan_shards(docs, window_months=window_months)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    plan.save(args.output)
    logger.info("event=shard_plan docs=%d shards=%d", len(docs), plan.num_shards)
    return 0


def _topic_filters(topics: list[corpus_mod.Topic]) -> dict[str, shards_mod.DateFilter]:
    return {
        topic.topic_id: shards_mod.DateFilter(start=topic.start_date, end=topic.end_date)
        for topic in topics
    }


def _search_lexical_sharded(
    indexes: dict[int, lexical_mod.InvertedIndex],
    stats: lexical_mod.CollectionStats,
    selected: set[int],
    tokens: list[str],
    args_ns: argparse.Namespace,
    params: lexical_mod.LexicalParams,
) -> list[tuple[str, float]]:
    per_shard = [
        lexical_mod.search_lexical(
            indexes[ordinal],
            tokens,
            scorer=args_ns.scorer,
            rm3=args_ns.rm3,
            k=args_ns.k,
            params=params,
            stats=stats,
        )
        for ordinal in sorted(selected)
        if ordinal in indexes
    ]
    return shards_mod.merge_shard_results(per_shard, k=args_ns.k)


def cmd_search(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    search_cfg = config.get("search", {})
    if args.variant is None:
        args.variant = search_cfg.get("variant", "TD")
    if args.scorer is None:
        args.scorer = search_cfg.get("scorer", "bm25")
    if not args.rm3:
        args.rm3 = bool(search_cfg.get("rm3", False))
    if args.k is None:
        args.k = search_cfg.get("k", 1000)
    run_tag = args.run_tag or config.get("output", {}).get("run_tag", "xlir")

    index_dir = _require_path(args.index, "index directory")
    kind = _read_index_kind(index_dir)
    entries: list[eval_mod.RunEntry] = []
    start = time.perf_counter()

    if kind in ("lexical", "sharded-lexical"):
        topics = corpus_mod.ingest_topics(_resolve_path(args.topics, config, "topics", "topic file"))
        params = _lexical_params(config)
        tokenizer = _tokenizer(config)

        if kind == "lexical":
            indexes = {0: lexical_mod.load_index(index_dir)}
            stats = indexes[0].stats
            plan = None
        else:
            meta = json.loads((index_dir / "meta.json").read_text(encoding="utf-8"))
            indexes = {
                ordinal: lexical_mod.load_index(index_dir / f"shard_{ordinal:04d}")
                for ordinal in meta["shards"]
            }
            stats = _global_stats(indexes)
            plan = shards_mod.ShardPlan.load(index_dir / "plan.json")
        filters = _topic_filters(topics)

        def run_topic(topic: corpus_mod.Topic) -> list[eval_mod.RunEntry]:
            tokens = tokenizer(corpus_mod.form_query(topic, args.variant))
            known = [t for t in tokens if stats.doc_freq.get(t, 0) > 0]
            if len(known) < len(tokens):
                logger.info(
                    "event=query_vocab topic=%s dropped=%d kept=%d",
                    topic.topic_id,
                    len(tokens) - len(known),
                    len(known),
                )
            if not known:
                return []
            if plan is None:
                ranked = lexical_mod.search_lexical(
                    indexes[0], known, scorer=args.scorer, rm3=args.rm3, k=args.k, params=params
                )
            else:
                selected = shards_mod.select_shards(plan, filters[topic.topic_id])
                ranked = _search_lexical_sharded(indexes, stats, selected, known, args, params)
            return _entries_for_topic(topic.topic_id, ranked, run_tag)

        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                for result in pool.map(run_topic, topics):
                    entries.extend(result)
        else:
            for topic in topics:
                entries.extend(run_topic(topic))

    elif kind in ("dense", "sharded-dense"):
        queries = dense_mod.load_embeddings(
            _resolve_path(args.query_embeddings, config, "query_embeddings", "query embeddings")
        )
        params = _dense_params(config, args)
        filters: dict[str, shards_mod.DateFilter] = {}
        topics_path = args.topics or config.get("collection", {}).get("topics")
        if topics_path is not None:
            filters = _topic_filters(
                corpus_mod.ingest_topics(_require_path(topics_path, "topic file"))
            )

        if kind == "dense":
            indexes = {0: dense_mod.load_dense_index(index_dir)}
            plan = None
        else:
            meta = json.loads((index_dir / "meta.json").read_text(encoding="utf-8"))
            indexes = {
                ordinal: dense_mod.load_dense_index(index_dir / f"shard_{ordinal:04d}")
                for ordinal in meta["shards"]
            }
            plan = shards_mod.ShardPlan.load(index_dir / "plan.json")

        def run_query(item: tuple[str, np.ndarray]) -> list[eval_mod.RunEntry]:
            query_id, vectors = item
            if plan is None:
                passage_scores = dense_mod.search_dense(indexes[0], vectors, params)
            else:
                selected = shards_mod.select_shards(
                    plan, filters.get(query_id, shards_mod.DateFilter())
                )
                per_shard = [
                    dense_mod.search_dense(indexes[ordinal], vectors, params)
                    for ordinal in sorted(selected)
                    if ordinal in indexes
                ]
                passage_scores = shards_mod.merge_shard_results(
                    per_shard, k=max(args.k, params.candidate_cap)
                )
            doc_scores = dense_mod.maxp_aggregate(
                (corpus_mod.parse_passage_key(key)[0], score) for key, score in passage_scores
            )
            return _entries_for_topic(query_id, doc_scores[: args.k], run_tag)

        items = list(queries.items())
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                for result in pool.map(run_query, items):
                    entries.extend(result)
        else:
            for item in items:
                entries.extend(run_query(item))
    else:  # pragma: no cover - _read_index_kind exhausts the kinds
        raise FormatError(f"unsupported index kind {kind!r}")

    logger.info(
        "event=search kind=%s topics=%d entries=%d elapsed_ms=%.1f",
        kind,
        len({e.topic_id for e in entries}),
        len(entries),
        (time.perf_counter() - start) * 1e3,
    )
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    eval_mod.write_run(args.output, entries)
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    run_paths = [_require_path(p, "run file") for p in args.runs]
    runs = [eval_mod.ranking_with_scores(path) for path in run_paths]
    run_tag = args.run_tag or "fused"
    topic_ids = sorted({topic_id for run in runs for topic_id in run})
    entries: list[eval_mod.RunEntry] = []
    for topic_id in topic_ids:
        per_language = [run[topic_id] for run in runs if topic_id in run]
        fused = shards_mod.fuse_multilingual(per_language, k=args.k, normalize=args.normalize)
        entries.extend(_entries_for_topic(topic_id, fused, run_tag))
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    eval_mod.write_run(args.output, entries)
    logger.info("event=fuse runs=%d topics=%d entries=%d", len(runs), len(topic_ids), len(entries))
    return 0


def cmd_mine_distill(args: argparse.Namespace) -> int:
    index_dir = _require_path(args.index, "index directory")
    if _read_index_kind(index_dir) != "dense":
        raise ValidationError("mine-distill requires an unsharded dense index")
    queries = dense_mod.load_embeddings(_require_path(args.query_embeddings, "query embeddings"))
    index = dense_mod.load_dense_index(index_dir)
    pairs = []
    for query_id, vectors in queries.items():
        # The mining engine's own scores stand in for teacher scores; an
        # external reranker replaces them downstream.
        scored = dense_mod.search_dense(index, vectors)[: args.k]
        if len(scored) < 2:
            logger.info("event=mine_distill topic=%s skipped=too_few_passages", query_id)
            continue
        pairs.append(
            distill_mod.DistillPair(
                query_id=query_id,
                passage_ids=[key for key, _ in scored],
                teacher_scores=[score for _, score in scored],
            )
        )
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    distill_mod.write_distill_file(args.output, pairs)
    logger.info("event=mine_distill queries=%d written=%d", len(queries), len(pairs))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    run_path = _require_path(args.run, "run file")
    qrels_path = _resolve_path(args.qrels, config, "qrels", "qrels file")
    report = eval_mod.evaluate(run_path, qrels_path, ndcg_k=args.ndcg_k, recall_k=args.recall_k)
    for topic_id in sorted(report.per_topic):
        metrics = report.per_topic[topic_id]
        print(f"{topic_id}\tndcg@{report.ndcg_k}={metrics['ndcg']:.4f}\trecall@{report.recall_k}={metrics['recall']:.4f}")
    print(f"mean\tndcg@{report.ndcg_k}={report.mean_ndcg:.4f}\trecall@{report.recall_k}={report.mean_recall:.4f}")
    for topic_id in report.unjudged_topics:
        print(f"unjudged\t{topic_id}")
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlir", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psq-translate", help="translate documents into query-language bags")
    p.add_argument("--docs", help="document JSONL (or collection.docs in the config)")
    p.add_argument("--table", required=True, help="TSV translation table source<TAB>target<TAB>prob")
    p.add_argument("--output", required=True, help="output JSONL bag file")
    p.add_argument("--lang", help="only translate documents with this language code")
    p.add_argument("--cum-mass", type=float, default=None, help="pruning cumulative mass")
    p.add_argument("--max-alts", type=int, default=None, help="pruning max translations per source")
    p.add_argument("--config")
    p.set_defaults(func=cmd_psq_translate)

    p = sub.add_parser("index-lexical", help="build an inverted index from weighted bags")
    p.add_argument("--bags", required=True)
    p.add_argument("--output", required=True, help="index directory")
    p.add_argument("--shard-plan", help="build one index per date shard")
    p.set_defaults(func=cmd_index_lexical)

    p = sub.add_parser("index-dense", help="build a compressed late-interaction index")
    p.add_argument("--embeddings", help="embedding file (or collection.embeddings in the config)")
    p.add_argument("--output", required=True, help="index directory")
    p.add_argument("--shard-plan", help="build one index per date shard")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bits", type=int, default=None)
    p.add_argument("--num-centroids", type=int, default=None)
    p.add_argument("--nprobe", type=int, default=None)
    p.add_argument("--candidate-cap", type=int, default=None)
    p.add_argument("--kmeans-iters", type=int, default=None)
    p.add_argument("--config")
    p.set_defaults(func=cmd_index_dense)

    p = sub.add_parser("shard-plan", help="plan date-window shards for a collection")
    p.add_argument("--docs", help="document JSONL (or collection.docs in the config)")
    p.add_argument("--window-months", type=int, default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_shard_plan)

    p = sub.add_parser("search", help="run topics or query embeddings against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--output", required=True, help="TREC run file")
    p.add_argument("--topics")
    p.add_argument("--variant", choices=corpus_mod.QUERY_VARIANTS, default=None)
    p.add_argument("--scorer", choices=lexical_mod.SCORERS, default=None)
    p.add_argument("--rm3", action="store_true")
    p.add_argument("--query-embeddings")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--run-tag")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--nprobe", type=int, default=None)
    p.add_argument("--candidate-cap", type=int, default=None)
    p.add_argument("--config")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("fuse", help="merge per-language runs over disjoint subcollections")
    p.add_argument("runs", nargs="+")
    p.add_argument("--output", required=True)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--normalize", action="store_true", help="per-run min-max before merging")
    p.add_argument("--run-tag")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("mine-distill", help="mine hard passages for distillation training data")
    p.add_argument("--index", required=True)
    p.add_argument("--query-embeddings", required=True)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_mine_distill)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", help="qrels file (or collection.qrels in the config)")
    p.add_argument("--ndcg-k", type=int, default=20)
    p.add_argument("--recall-k", type=int, default=1000)
    p.add_argument("--output", help="write metrics as JSON")
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (XlirError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
