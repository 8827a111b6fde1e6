"""Single command-line entry point; every stage is a subcommand.

Exit codes: 0 success, 1 validation problem (bad flags, bad inputs),
2 I/O problem (missing files, held locks). Every run writes a manifest
next to its outputs so reruns are auditable and reproducible.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .ingest import CrawlConfig, DocumentStore, ExtractionConfig, crawl, extract_main_content, url_fetcher

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # unknown flags exit 1, per contract
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


@contextlib.contextmanager
def _output_lock(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".cpk.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CliError(f"another run holds the lock {lock}", EXIT_IO) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            lock.unlink()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(target: Path, payload: dict) -> Path:
    if target.is_dir():
        path = target / "run_manifest.json"
    else:
        path = target.parent / f"{target.name}.manifest.json"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
    tmp.replace(path)
    return path


def _manifest(subcommand: str, args: argparse.Namespace, started: str, **extra) -> dict:
    config = {
        k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)
    }
    return {
        "subcommand": subcommand,
        "config": {k: str(v) if isinstance(v, Path) else v for k, v in config.items()},
        "seed": getattr(args, "seed", None),
        "started": started,
        "finished": _now(),
        "version": __version__,
        **extra,
    }


def _store_home(args) -> Path:
    value = getattr(args, "store", None) or getattr(args, "in_store", None)
    if value:
        return Path(value)
    home = os.environ.get("CPK_HOME")
    if home:
        return Path(home)
    raise CliError("no store given: pass --store or set CPK_HOME")


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_crawl(args) -> int:
    started = _now()
    allowlist = tuple(
        line.strip()
        for line in Path(args.allowlist).read_text("utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    )
    config = CrawlConfig(
        allowlist=allowlist,
        keyword=args.keyword,
        max_depth=args.max_depth,
        max_pages_per_domain=args.max_pages,
        politeness_delay=args.delay / 1000.0,
        seeds=tuple(args.seed_url or ()),
    )
    store_dir = _store_home(args)
    with _output_lock(store_dir):
        store = DocumentStore(store_dir)
        added = 0
        for doc in crawl(config, url_fetcher()):
            if store.add(doc):
                added += 1
        _write_manifest(store_dir, _manifest("crawl", args, started, documents_added=added))
    print(f"documents added: {added}")
    return EXIT_OK


def cmd_clean(args) -> int:
    started = _now()
    store_dir = _store_home(args)
    config = ExtractionConfig(
        min_block_words=args.min_block_words, max_link_density=args.max_link_density
    )
    with _output_lock(store_dir):
        store = DocumentStore(store_dir)
        updated = 0
        for doc in store.iter_documents(load_html=True):
            if not doc.raw_html:
                continue
            clean_text, title = extract_main_content(doc.raw_html, config)
            store.update_clean_text(doc.id, clean_text, title)
            updated += 1
        _write_manifest(store_dir, _manifest("clean", args, started, documents=updated))
    print(f"documents cleaned: {updated}")
    return EXIT_OK


def cmd_dedup(args) -> int:
    from .dedup import dedup_corpus, simhash, write_index

    started = _now()
    store = DocumentStore(_store_home(args))
    docs = sorted(store.iter_documents(), key=lambda d: (d.fetched_at, d.id))
    kept, dropped = dedup_corpus(docs, args.k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index_path = out / "fingerprints.shx"
    write_index(index_path, ((simhash(d.clean_text), d.id) for d in kept))
    report = {
        "k": args.k,
        "total": len(docs),
        "kept": len(kept),
        "dropped": [[dup, keep] for dup, keep in dropped],
    }
    (out / "dedup_report.json").write_text(json.dumps(report, indent=2) + "\n", "utf-8")
    _write_manifest(out, _manifest("dedup", args, started, kept=len(kept)))
    print(f"kept: {len(kept)}")
    print(f"dropped: {len(dropped)}")
    return EXIT_OK


def cmd_segment(args) -> int:
    from .textseg import split_sentences

    started = _now()
    store = DocumentStore(_store_home(args))
    out = Path(args.out)
    count = 0
    with open(out, "w", encoding="utf-8") as fh:
        for doc in store.iter_documents():
            for sent in split_sentences(doc.clean_text):
                fh.write(
                    json.dumps(
                        {
                            "doc_id": doc.id,
                            "index": sent.index,
                            "char_start": sent.char_start,
                            "char_end": sent.char_end,
                            "tokens": list(sent.tokens),
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                count += 1
    _write_manifest(out, _manifest("segment", args, started, sentences=count))
    print(f"sentences: {count}")
    return EXIT_OK


def cmd_stats(args) -> int:
    from .plots import bar_chart_svg
    from .records import corpus_stats, read_records

    started = _now()
    stats = corpus_stats(read_records(args.records))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "stats.json").write_text(
        json.dumps(stats.to_json_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
    )
    with open(out / "actions_per_tutorial.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["actions", "tutorials"])
        for k in sorted(stats.actions_per_tutorial):
            writer.writerow([k, stats.actions_per_tutorial[k]])
    with open(out / "command_unigrams.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["command", "count"])
        writer.writerows(stats.command_unigrams.most_common())
    with open(out / "command_bigrams.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["first", "second", "count"])
        for (a, b), n in stats.command_bigrams.most_common():
            writer.writerow([a, b, n])
    if args.svg:
        top = stats.command_unigrams.most_common(20)
        (out / "command_unigrams.svg").write_text(
            bar_chart_svg([(c, float(n)) for c, n in top], "Most used commands"), "utf-8"
        )
        hist = sorted(stats.actions_per_tutorial.items())
        (out / "actions_per_tutorial.svg").write_text(
            bar_chart_svg(
                [(str(k), float(v)) for k, v in hist], "Actions per tutorial"
            ),
            "utf-8",
        )
    _write_manifest(out, _manifest("stats", args, started, records=stats.record_count))
    print(
        f"records: {stats.record_count} actions: {stats.action_count} "
        f"unique commands: {stats.unique_commands}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_file(args.config)
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return EXIT_OK


def cmd_export_datasets(args) -> int:
    from .records import read_records
    from .service import ServiceConfig, ServiceState
    from .service.export import export_datasets

    started = _now()
    store = DocumentStore(_store_home(args))
    if args.records:
        records = list(read_records(args.records))
    elif args.events:
        state = ServiceState(
            ServiceConfig(store_dir=str(_store_home(args)), events_path=args.events)
        )
        records = state.finalized
    else:
        raise CliError("pass --records or --events")
    if not records:
        raise CliError("no finalized records to export")
    documents = {r.tutorial_id: store.get(r.tutorial_id) for r in records}
    out = Path(args.out)
    with _output_lock(out):
        manifest = export_datasets(
            records, documents, out, seed=args.seed, min_label_count=args.min_label_count
        )
        _write_manifest(out, _manifest("export-datasets", args, started, **manifest))
    print(
        f"records: {manifest['records']} sentences: {manifest['sentences']} "
        f"usage pairs: {manifest['usage_pairs']}"
    )
    return EXIT_OK


def cmd_train_classifier(args) -> int:
    from .classifier import ClassifierConfig, read_dataset, train

    started = _now()
    rows = read_dataset(args.data)
    data = [item for item, split in rows if split == args.split]
    if not data:
        raise CliError(f"no rows with split={args.split!r} in {args.data}")
    config = ClassifierConfig(
        ngram_max=args.ngram_max,
        hash_buckets=args.buckets,
        embed_dim=args.dim,
        lr=args.lr,
        epochs=args.epochs,
        min_label_count=args.min_label_count,
        loss=args.loss,
        seed=args.seed,
    )
    model = train(data, config)
    out = Path(args.out)
    model.save(out)
    _write_manifest(
        out,
        _manifest(
            "train-classifier",
            args,
            started,
            rows=len(data),
            labels=len(model.labels),
            final_loss=model.epoch_losses[-1] if model.epoch_losses else None,
        ),
    )
    print(f"trained on {len(data)} sentences, {len(model.labels)} labels")
    return EXIT_OK


def cmd_eval_classifier(args) -> int:
    from .classifier import ClassifierModel, predict_topk, read_dataset
    from .metrics import precision_recall_at_1

    model = ClassifierModel.load(args.model)
    rows = [(item, split) for item, split in read_dataset(args.data)]
    data = [item for item, split in rows if split == args.split]
    if not data:
        raise CliError(f"no rows with split={args.split!r}")
    predictions = [predict_topk(model, item.tokens, 1)[0][0] for item in data]
    p1, r1 = precision_recall_at_1(predictions, [item.labels for item in data])
    report = {
        "bleu": None,
        "precisions": None,
        "bp": None,
        "p_at_1": p1,
        "r_at_1": r1,
        "n": len(data),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", "utf-8")
    print(f"p@1 = {p1:.4f}  r@1 = {r1:.4f}  (n={len(data)})")
    return EXIT_OK


def cmd_train_summarizer(args) -> int:
    from .service.export import read_pairs
    from .summarizer import SummarizerConfig, train, write_training_log

    started = _now()
    train_pairs = read_pairs(args.data, split="train")
    val_pairs = read_pairs(args.data, split="val")
    if not train_pairs:
        raise CliError(f"no train pairs in {args.data}")
    config = SummarizerConfig(
        layers=args.layers,
        attention=args.attention,
        dropout=args.dropout,
        hidden_dim=args.hidden,
        embed_dim=args.embed,
        batch_size=args.batch,
        max_iterations=args.iterations,
        lr=args.lr,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
    )
    model = train(train_pairs, val_pairs, config)
    out = Path(args.out)
    model.save(out)
    if args.log:
        write_training_log(args.log, model.training_log)
    _write_manifest(
        out,
        _manifest(
            "train-summarizer",
            args,
            started,
            pairs=len(train_pairs),
            best_iteration=model.best_iteration,
        ),
    )
    best = max((b for _, _, b in model.training_log), default=0.0)
    print(f"{config.describe()}: best val BLEU {best:.4f} at iteration {model.best_iteration}")
    return EXIT_OK


def cmd_eval_summarizer(args) -> int:
    from .metrics import corpus_bleu
    from .service.export import read_pairs
    from .summarizer import SummarizerModel, summarize

    model = SummarizerModel.load(args.model)
    pairs = read_pairs(args.data, split=args.split)
    if not pairs:
        raise CliError(f"no rows with split={args.split!r}")
    grouped: dict[tuple, list] = {}
    for src, ref in pairs:
        grouped.setdefault(tuple(src), []).append(ref)
    candidates = [summarize(model, list(src)) for src in grouped]
    report = corpus_bleu(candidates, list(grouped.values()))
    body = dict(report.to_json_dict(), p_at_1=None, r_at_1=None, n=len(grouped))
    if args.out:
        Path(args.out).write_text(json.dumps(body, indent=2) + "\n", "utf-8")
    print(
        f"BLEU = {report.score:.4f} ({report.score * 100:.2f}) bp={report.brevity_penalty:.3f} "
        f"(n={len(grouped)})"
    )
    return EXIT_OK


def cmd_cluster(args) -> int:
    from .clustering import (
        WordVectors,
        cluster_report,
        embed_summary,
        kmeans,
        load_stopwords,
        representatives,
        strip_boilerplate,
    )
    from .records import read_records

    started = _now()
    vectors = WordVectors.load(args.vectors)
    stopwords = load_stopwords(args.stopwords)
    texts: list[str] = []
    embedded = []
    for record in read_records(args.records):
        if args.what == "goals":
            summaries = [list(record.goal.summary)]
        else:
            summaries = [list(a.usage) for a in record.workflow.actions]
        for summary in summaries:
            tokens = strip_boilerplate([w.lower() for w in summary])
            vec = embed_summary(tokens, vectors, stopwords)
            if vec is not None:
                texts.append(" ".join(tokens))
                embedded.append(vec)
    if len(embedded) < args.k:
        raise CliError(f"only {len(embedded)} embeddable summaries for k={args.k}")
    result = kmeans(embedded, args.k, seed=args.seed)
    reps = representatives(result, embedded, texts, n=args.reps)
    out = Path(args.out)
    out.write_text(
        json.dumps(cluster_report(result, reps), indent=2, sort_keys=True) + "\n", "utf-8"
    )
    _write_manifest(out, _manifest("cluster", args, started, items=len(embedded)))
    print(f"clustered {len(embedded)} summaries into k={args.k} (inertia {result.inertia:.3f})")
    return EXIT_OK


def cmd_extract(args) -> int:
    from .pipeline import Pipeline, PipelineConfig
    from .records import serialize

    started = _now()
    store = DocumentStore(_store_home(args))
    pipeline = Pipeline.from_config(PipelineConfig.from_file(args.config))
    records, report = pipeline.extract_corpus(store)
    out = Path(args.out)
    with open(out, "wb") as fh:
        for record in records:
            fh.write(serialize(record))
            fh.write(b"\n")
    report_path = out.parent / f"{out.stem}_report.json"
    report_path.write_text(json.dumps(report.to_json_dict(), indent=2) + "\n", "utf-8")
    _write_manifest(out, _manifest("extract", args, started, **report.to_json_dict()))
    print(f"extracted: {report.extracted}/{report.total} (failed {report.failed})")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="cpk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cpk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crawl", help="crawl allowlisted domains into a store")
    p.add_argument("--allowlist", required=True, help="file with one domain per line")
    p.add_argument("--keyword", default="photoshop")
    p.add_argument("--max-depth", type=int, default=2)
    p.add_argument("--delay", type=float, default=0.0, help="per-domain delay in ms")
    p.add_argument("--max-pages", type=int, default=1000)
    p.add_argument("--seed-url", action="append")
    p.add_argument("--store")
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("clean", help="re-extract main content from stored HTML")
    p.add_argument("--store")
    p.add_argument("--min-block-words", type=int, default=15)
    p.add_argument("--max-link-density", type=float, default=0.33)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("dedup", help="drop near-duplicate documents")
    p.add_argument("--in", dest="in_store", help="document store directory")
    p.add_argument("--store")
    p.add_argument("--k", type=int, default=3, help="max Hamming distance")
    p.add_argument("--out", default="dedup_out")
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("segment", help="dump sentence segmentation")
    p.add_argument("--store")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("stats", help="corpus statistics from a records file")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-datasets", help="write training datasets")
    p.add_argument("--store")
    p.add_argument("--events", help="annotation event log")
    p.add_argument("--records", help="records JSONL (alternative to --events)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--min-label-count", type=int, default=5)
    p.set_defaults(func=cmd_export_datasets)

    p = sub.add_parser("train-classifier", help="train the command classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--ngram-max", type=int, default=2)
    p.add_argument("--buckets", type=int, default=2**21)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--min-label-count", type=int, default=5)
    p.add_argument("--loss", choices=("softmax", "ova"), default="softmax")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("eval-classifier", help="top-1 precision/recall")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_classifier)

    p = sub.add_parser("train-summarizer", help="train a usage/goal summarizer")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layers", type=int, default=1)
    att = p.add_mutually_exclusive_group()
    att.add_argument("--attention", dest="attention", action="store_true", default=True)
    att.add_argument("--no-attention", dest="attention", action="store_false")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--embed", type=int, default=128)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--checkpoint-every", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--log", help="training log CSV path")
    p.set_defaults(func=cmd_train_summarizer)

    p = sub.add_parser("eval-summarizer", help="corpus BLEU on a split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_summarizer)

    p = sub.add_parser("cluster", help="k-means over summary embeddings")
    p.add_argument("--records", required=True)
    p.add_argument("--vectors", required=True, help="word-vector text file")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--what", choices=("goals", "usages"), default="goals")
    p.add_argument("--stopwords")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("extract", help="run the extraction pipeline over a store")
    p.add_argument("--store")
    p.add_argument("--out", required=True, help="records JSONL output")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.set_defaults(func=cmd_extract)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits; keep the contract: usage errors are 1
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FileNotFoundError, PermissionError, IsADirectoryError, KeyError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
