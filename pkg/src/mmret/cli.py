"""Command-line front end: index, tune, generate, train, retrieve, eval, compare.

Options resolve in three layers: hard defaults, then a JSON config file
(--config), then explicit flags. Diagnostics go to stderr; data goes to
files or stdout. Exit codes: 0 success, 1 usage error, 2 data error,
3 adapter/model-server error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .adapters import AdapterError, RemoteAdapters, make_adapters
from .bm25 import (
    DEFAULT_B_GRID,
    DEFAULT_K1_GRID,
    BM25Params,
    build_index,
    grid_search,
    load_index,
    save_index,
    search,
)
from .corpus import CorpusFormatError, PassageStore, load_images, load_passages
from .dense import (
    StubProvider,
    build_dense_index,
    dense_search,
    load_dense_index,
    save_dense_index,
)
from .evaluation import evaluate, load_judgments, load_run, paired_ttest, save_run
from .pipeline import (
    PipelineConfig,
    load_dataset,
    run_pipeline,
    write_audit,
    write_dataset,
)
from .trainer import ToyEmbedder, train_toy

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ADAPTER = 3


class UsageError(Exception):
    """Bad flags, bad config, or missing input files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map usage errors to 1
        raise UsageError(message)


class Options:
    """Layered option lookup (flags over config file over defaults).

    Every value read through here is recorded, so the provenance header can
    hash exactly the configuration that produced an output.
    """

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = vars(args)
        self._config = config
        self.used: dict = {}

    def get(self, key: str, default=None):
        value = self._args.get(key)
        if value is None:
            value = self._config.get(key, default)
        self.used[key] = str(value) if isinstance(value, Path) else value
        return value

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
        return value

    def input_path(self, key: str, required: bool = True) -> Path | None:
        value = self.require(key) if required else self.get(key)
        if value is None:
            return None
        path = Path(value)
        if not path.exists():
            raise UsageError(f"--{key.replace('_', '-')}: no such file: {path}")
        return path

    def header(self) -> dict:
        canonical = json.dumps(self.used, sort_keys=True, separators=(",", ":"))
        return {
            "tool": "mmret",
            "version": __version__,
            "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16],
            "seed": self.used.get("seed", 0),
        }


def _load_config(path_text: str | None, args: argparse.Namespace) -> dict:
    if path_text is None:
        return {}
    path = Path(path_text)
    if not path.exists():
        raise UsageError(f"--config: no such file: {path}")
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise UsageError(f"--config: {path} is not valid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise UsageError(f"--config: {path} must contain a JSON object")
    known = set(vars(args)) - {"func", "config", "verbose"}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"--config: unknown keys for this command: {', '.join(unknown)}")
    return config


def _format_table(headers: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    widths = [max(len(str(cell)) for cell in column) for column in zip(headers, *rows)]
    lines = []
    for row in [headers, *rows]:
        lines.append("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _load_store(opts: Options) -> PassageStore:
    return load_passages(opts.input_path("corpus"), opts.get("format"))


def _bm25_params(opts: Options) -> BM25Params:
    return BM25Params(k1=float(opts.get("k1", 1.2)), b=float(opts.get("b", 0.75)))


def _parse_grid(value, flag: str) -> list[float]:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    try:
        grid = [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--{flag}: expected comma-separated numbers") from exc
    if not grid:
        raise UsageError(f"--{flag}: grid is empty")
    return grid


def _load_queries(path: Path) -> list[dict]:
    queries = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                query = {
                    "query_id": record["query_id"],
                    "question": record["question"],
                    "image_id": record.get("image_id", ""),
                }
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad query record ({exc})") from exc
            if query["query_id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate query id {query['query_id']!r}")
            seen.add(query["query_id"])
            queries.append(query)
    if not queries:
        raise ValueError(f"{path}: no queries found")
    return queries


def _load_validation(path: Path) -> list[tuple[str, list[str]]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                pairs.append((record["question"], list(record["answers"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad validation record ({exc})") from exc
    if not pairs:
        raise ValueError(f"{path}: no validation queries found")
    return pairs


# --- command handlers --------------------------------------------------------


def cmd_build_index(opts: Options) -> None:
    store = _load_store(opts)
    out = Path(opts.require("out"))
    index = build_index(store)
    save_index(index, out)
    log.info("indexed %d passages, %d terms -> %s", len(store), len(index.postings), out)
    _emit_json(
        {
            "header": opts.header(),
            "passages": index.doc_count,
            "terms": len(index.postings),
            "out": str(out),
        },
        None,
    )


def cmd_tune_bm25(opts: Options) -> None:
    store = _load_store(opts)
    validation = _load_validation(opts.input_path("validation"))
    k1_grid = _parse_grid(opts.get("k1_grid", list(DEFAULT_K1_GRID)), "k1-grid")
    b_grid = _parse_grid(opts.get("b_grid", list(DEFAULT_B_GRID)), "b-grid")
    cutoff = int(opts.get("cutoff", 5))
    out = opts.get("out")

    index = build_index(store)
    cells = grid_search(index, store, validation, k1_grid, b_grid, cutoff)
    best = max(cells, key=lambda c: (c.mrr, -c.k1, -c.b))
    log.info("best cell of %d: k1=%g b=%g (mrr=%.4f)", len(cells), best.k1, best.b, best.mrr)
    _emit_json(
        {
            "header": opts.header(),
            "cutoff": cutoff,
            "queries": len(validation),
            "best": {"k1": best.k1, "b": best.b, "mrr": best.mrr},
            "cells": [{"k1": c.k1, "b": c.b, "mrr": c.mrr} for c in cells],
        },
        out,
    )


def cmd_generate(opts: Options) -> None:
    store = _load_store(opts)
    images = load_images(opts.input_path("images"))
    out = Path(opts.require("out"))
    try:
        adapters = make_adapters(str(opts.get("adapters", "stub")))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if isinstance(adapters, RemoteAdapters):
        adapters.healthcheck()
    opts.get("seed", 0)  # recorded in the header for provenance
    config = PipelineConfig(
        m=int(opts.get("m", 5)),
        t=float(opts.get("threshold", 0.5)),
        negative_pool_size=int(opts.get("pool", 100)),
        max_phrases_per_passage=(
            int(opts.get("max_phrases")) if opts.get("max_phrases") is not None else None
        ),
        bm25_params=_bm25_params(opts),
    )
    workers = int(opts.get("workers", 1))

    index = build_index(store)
    result = run_pipeline(images, store, index, adapters, config, workers=workers)
    write_dataset(result.examples, out)
    write_audit(result.audit, out.with_suffix(".audit.jsonl"))
    meta = {
        "header": opts.header(),
        "report": result.report.as_dict(),
        "out": str(out),
    }
    out.with_suffix(".meta.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )
    log.info(
        "generated %d examples from %d images -> %s",
        result.report.examples_emitted,
        result.report.images_total,
        out,
    )


def cmd_train(opts: Options) -> None:
    store = _load_store(opts)
    examples = load_dataset(opts.input_path("dataset"))
    out = Path(opts.require("out"))
    embedder, losses = train_toy(
        examples,
        store,
        epochs=int(opts.get("epochs", 40)),
        batch_size=int(opts.get("batch_size", 8)),
        lr=float(opts.get("lr", 1.0)),
        seed=int(opts.get("seed", 0)),
        feature_dim=int(opts.get("feature_dim", 512)),
        embed_dim=int(opts.get("embed_dim", 64)),
    )
    embedder.save(out)
    meta = {"header": opts.header(), "examples": len(examples), "epoch_losses": losses}
    out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    log.info("trained on %d examples for %d epochs -> %s", len(examples), len(losses), out)


def _dense_provider(opts: Options):
    embedder_path = opts.input_path("embedder", required=False)
    if embedder_path is not None:
        return ToyEmbedder.load(embedder_path).as_provider()
    return StubProvider(dim=int(opts.get("dim", 64)), seed=int(opts.get("seed", 0)))


def cmd_retrieve(opts: Options) -> None:
    mode = str(opts.get("mode", "bm25"))
    if mode not in ("bm25", "dense"):
        raise UsageError(f"--mode must be bm25 or dense, got {mode!r}")
    store = _load_store(opts)
    queries = _load_queries(opts.input_path("queries"))
    out = Path(opts.require("out"))
    k = int(opts.get("k", 5))

    run = {}
    if mode == "bm25":
        index_path = opts.input_path("index", required=False)
        index = load_index(index_path) if index_path else build_index(store)
        params = _bm25_params(opts)
        for query in queries:
            run[query["query_id"]] = search(index, params, query["question"], k)
    else:
        provider = _dense_provider(opts)
        workers = int(opts.get("workers", 1))
        cache = opts.get("dense_index")
        if cache is not None and Path(cache).exists():
            dense_index = load_dense_index(cache)
            if sorted(dense_index.ids) != sorted(store.ids()):
                raise ValueError(f"cached dense index {cache} does not match the corpus")
        else:
            dense_index = build_dense_index(provider, store)
            if cache is not None:
                save_dense_index(dense_index, cache)
        for query in queries:
            vector = provider.embed_query(query["question"], query["image_id"])
            run[query["query_id"]] = dense_search(dense_index, vector, k, workers=workers)

    save_run(run, out, header={**opts.header(), "mode": mode, "k": k})
    log.info("retrieved top-%d for %d queries (%s) -> %s", k, len(queries), mode, out)


def cmd_eval(opts: Options) -> None:
    store = _load_store(opts)
    run = load_run(opts.input_path("run"))
    judgments = load_judgments(opts.input_path("judgments"))
    k = int(opts.get("k", 5))
    out = opts.get("out")

    result = evaluate(run, judgments, store, k)
    rows = [
        (f"mrr@{k}", f"{result.mrr:.4f}"),
        (f"p@{k}", f"{result.precision:.4f}"),
        ("queries", str(len(result.per_query))),
    ]
    print(_format_table(("metric", "value"), rows))
    _emit_json({"header": opts.header(), **result.as_dict()}, out)


def cmd_compare(opts: Options) -> None:
    store = _load_store(opts)
    run_a = load_run(opts.input_path("run_a"))
    run_b = load_run(opts.input_path("run_b"))
    judgments = load_judgments(opts.input_path("judgments"))
    k = int(opts.get("k", 5))
    comparisons = int(opts.get("comparisons", 2))
    out = opts.get("out")

    result_a = evaluate(run_a, judgments, store, k)
    result_b = evaluate(run_b, judgments, store, k)
    query_ids = sorted(result_a.per_query)

    metrics = {}
    rows = []
    for label, pick in ((f"mrr@{k}", 0), (f"p@{k}", 1)):
        scores_a = [result_a.per_query[qid][pick] for qid in query_ids]
        scores_b = [result_b.per_query[qid][pick] for qid in query_ids]
        test = paired_ttest(scores_a, scores_b, comparisons)
        mean_a = (result_a.mrr, result_a.precision)[pick]
        mean_b = (result_b.mrr, result_b.precision)[pick]
        metrics[label] = {
            "a": mean_a,
            "b": mean_b,
            "delta": mean_a - mean_b,
            "t": test.t_statistic,
            "p": test.p_value,
            "p_corrected": test.p_corrected,
            "degenerate": test.degenerate,
        }
        rows.append(
            (
                label,
                f"{mean_a:.4f}",
                f"{mean_b:.4f}",
                f"{mean_a - mean_b:+.4f}",
                f"{test.t_statistic:.3f}",
                f"{test.p_corrected:.4g}" + (" (degenerate)" if test.degenerate else ""),
            )
        )
    print(_format_table(("metric", "a", "b", "delta", "t", "p_corr"), rows))
    payload = {
        "header": opts.header(),
        "k": k,
        "queries": len(query_ids),
        "comparisons": comparisons,
        "metrics": metrics,
    }
    _emit_json(payload, out)


# --- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")

    parser = _Parser(prog="mmret", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mmret {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, handler, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=handler)
        return p

    p = command("build-index", cmd_build_index, "build and persist a BM25 index")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--out")

    p = command("tune-bm25", cmd_tune_bm25, "grid-search BM25 parameters by MRR")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--validation")
    p.add_argument("--k1-grid")
    p.add_argument("--b-grid")
    p.add_argument("--cutoff", type=int)
    p.add_argument("--out")

    p = command("generate", cmd_generate, "generate weak-supervision training tuples")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--images")
    p.add_argument("--out")
    p.add_argument("--adapters", help="stub or remote:URL")
    p.add_argument("--m", type=int, help="passages matched per image")
    p.add_argument("--threshold", type=float, help="QA-overlap filter threshold")
    p.add_argument("--pool", type=int, help="negative sampling pool size")
    p.add_argument("--max-phrases", type=int, help="cap on answer phrases per passage")
    p.add_argument("--workers", type=int)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--seed", type=int)

    p = command("train", cmd_train, "train the toy dense embedder on generated tuples")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--feature-dim", type=int)
    p.add_argument("--embed-dim", type=int)

    p = command("retrieve", cmd_retrieve, "run top-k retrieval and write a run file")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--queries")
    p.add_argument("--out")
    p.add_argument("--mode", choices=["bm25", "dense"])
    p.add_argument("--k", type=int)
    p.add_argument("--index", help="prebuilt BM25 index (bm25 mode)")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--embedder", help="trained embedder .npz (dense mode)")
    p.add_argument("--dim", type=int, help="stub embedding width (dense mode)")
    p.add_argument("--seed", type=int, help="stub embedding seed (dense mode)")
    p.add_argument("--dense-index", help="cache path for the dense index")
    p.add_argument("--workers", type=int, help="dense search shards")

    p = command("eval", cmd_eval, "score a run file against answer judgments")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--run")
    p.add_argument("--judgments")
    p.add_argument("--k", type=int)
    p.add_argument("--out")

    p = command("compare", cmd_compare, "compare two runs with paired t-tests")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["tsv", "jsonl"])
    p.add_argument("--run-a")
    p.add_argument("--run-b")
    p.add_argument("--judgments")
    p.add_argument("--k", type=int)
    p.add_argument("--comparisons", type=int)
    p.add_argument("--out")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = _load_config(args.config, args)
        args.func(Options(args, config))
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdapterError as exc:
        print(f"adapter error: {exc}", file=sys.stderr)
        return EXIT_ADAPTER
    except (CorpusFormatError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
