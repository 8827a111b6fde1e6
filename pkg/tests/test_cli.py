import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from cpkit.cli import main
from cpkit.classifier import (
    NO_ACTION,
    ClassifierConfig,
    LabeledSentence,
    train,
    write_dataset,
)
from cpkit.ingest import Document, DocumentStore
from cpkit.records import write_records


def dir_digest(path: Path, ignore=()) -> dict:
    out = {}
    for p in sorted(path.rglob("*")):
        rel = str(p.relative_to(path))
        if p.is_file() and rel not in ignore:
            out[rel] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture()
def dup_store(tmp_path):
    rng = np.random.default_rng(8)
    text = " ".join(f"tok{int(x)}" for x in rng.integers(0, 200, 150))
    other = " ".join(f"tok{int(x)}" for x in rng.integers(0, 200, 150))
    store = DocumentStore(tmp_path / "docs")
    for i, body in enumerate((text, other, text)):
        store.add(
            Document(
                id=f"doc{i}", url=f"https://a.example/{i}", domain="a.example",
                raw_html=f"<html>{i}</html>".encode(), clean_text=body, fetched_at=float(i),
            )
        )
    return tmp_path / "docs"


class TestDedupCommand:
    def test_reports_dropped_count(self, dup_store, tmp_path, capsys):
        out = tmp_path / "dd"
        code = main(["dedup", "--in", str(dup_store), "--k", "0", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "dropped: 1" in printed
        report = json.loads((out / "dedup_report.json").read_text())
        assert report["kept"] == 2
        assert (out / "fingerprints.shx").exists()
        assert (out / "run_manifest.json").exists()

    def test_does_not_mutate_input_store(self, dup_store, tmp_path):
        before = dir_digest(dup_store)
        main(["dedup", "--in", str(dup_store), "--k", "0", "--out", str(tmp_path / "dd")])
        assert dir_digest(dup_store) == before


class TestEvalClassifier:
    def test_majority_predictor_prints_prior(self, tmp_path, capsys):
        # A model trained only on no-action rows is the majority predictor.
        train_rows = [
            LabeledSentence((f"w{i}", "filler"), frozenset({NO_ACTION})) for i in range(8)
        ]
        config = ClassifierConfig(ngram_max=1, hash_buckets=512, embed_dim=8, epochs=3, seed=1)
        model = train(train_rows, config, labels=(NO_ACTION, "Brush Tool"))
        model_path = tmp_path / "maj.cpkc"
        model.save(model_path)

        eval_rows = [
            LabeledSentence(("w0", "filler"), frozenset({NO_ACTION})),
            LabeledSentence(("w1", "filler"), frozenset({"Brush Tool"})),
            LabeledSentence(("w2", "filler"), frozenset({NO_ACTION})),
            LabeledSentence(("w3", "filler"), frozenset({NO_ACTION})),
        ]
        data_path = tmp_path / "data.jsonl"
        write_dataset(data_path, eval_rows, ["test"] * len(eval_rows))
        code = main(["eval-classifier", "--model", str(model_path), "--data", str(data_path)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "p@1 = 0.7500" in printed  # prior of the majority label

    def test_report_file(self, tmp_path):
        rows = [LabeledSentence(("x",), frozenset({NO_ACTION}))]
        config = ClassifierConfig(ngram_max=1, hash_buckets=64, embed_dim=4, epochs=2, seed=0)
        model = train(rows, config)
        model.save(tmp_path / "m.cpkc")
        write_dataset(tmp_path / "d.jsonl", rows, ["test"])
        out = tmp_path / "report.json"
        main([
            "eval-classifier", "--model", str(tmp_path / "m.cpkc"),
            "--data", str(tmp_path / "d.jsonl"), "--out", str(out),
        ])
        report = json.loads(out.read_text())
        assert report["p_at_1"] == 1.0
        assert report["n"] == 1
        assert report["bleu"] is None


class TestExtractCommand:
    def test_extracts_corpus_and_writes_manifest(self, tmp_path, model_dir, synth_world, capsys):
        store = DocumentStore(tmp_path / "docs")
        for tutorial in synth_world.eval[:5]:
            store.add(tutorial.doc)
        out = tmp_path / "records.jsonl"
        code = main([
            "extract", "--store", str(tmp_path / "docs"),
            "--out", str(out), "--config", str(model_dir / "pipeline.json"),
        ])
        assert code == 0
        lines = out.read_bytes().splitlines()
        assert len(lines) == 5
        manifest = json.loads((tmp_path / "records.jsonl.manifest.json").read_text())
        assert manifest["subcommand"] == "extract"
        assert manifest["extracted"] == 5
        assert (tmp_path / "records_report.json").exists()


class TestSegmentStats:
    def test_segment_dump(self, tmp_path, synth_world):
        store = DocumentStore(tmp_path / "docs")
        store.add(synth_world.eval[0].doc)
        out = tmp_path / "sentences.jsonl"
        assert main(["segment", "--store", str(tmp_path / "docs"), "--out", str(out)]) == 0
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert rows and {"doc_id", "index", "char_start", "char_end", "tokens"} <= set(rows[0])

    def test_stats_outputs(self, tmp_path, synth_world, capsys):
        records_path = tmp_path / "records.jsonl"
        write_records(records_path, [t.record for t in synth_world.train[:10]])
        out = tmp_path / "stats"
        assert main(["stats", "--records", str(records_path), "--out", str(out), "--svg"]) == 0
        stats = json.loads((out / "stats.json").read_text())
        assert stats["records"] == 10
        assert (out / "command_unigrams.csv").exists()
        assert (out / "actions_per_tutorial.csv").exists()
        assert (out / "command_bigrams.csv").exists()
        assert (out / "command_unigrams.svg").read_text().startswith("<svg")


class TestExportDatasetsCommand:
    def test_seeded_reruns_are_byte_identical(self, tmp_path, synth_world):
        store = DocumentStore(tmp_path / "docs")
        for tutorial in synth_world.train[:6]:
            store.add(tutorial.doc)
        records_path = tmp_path / "records.jsonl"
        write_records(records_path, [t.record for t in synth_world.train[:6]])
        args = lambda out: [
            "export-datasets", "--store", str(tmp_path / "docs"),
            "--records", str(records_path), "--out", str(out),
            "--seed", "7", "--min-label-count", "0",
        ]
        assert main(args(tmp_path / "a")) == 0
        assert main(args(tmp_path / "b")) == 0
        ignore = ("run_manifest.json",)  # timestamps differ by design
        assert dir_digest(tmp_path / "a", ignore) == dir_digest(tmp_path / "b", ignore)

    def test_requires_records_or_events(self, tmp_path):
        (tmp_path / "docs").mkdir()
        code = main(["export-datasets", "--store", str(tmp_path / "docs"), "--out", str(tmp_path / "o")])
        assert code == 1


class TestCliContract:
    def test_unknown_flag_exits_1(self, capsys):
        assert main(["dedup", "--nonsense"]) == 1

    def test_unknown_command_exits_1(self):
        assert main(["frobnicate"]) == 1

    def test_missing_input_exits_2(self, tmp_path):
        code = main([
            "stats", "--records", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_lock_contention_exits_2(self, dup_store, tmp_path):
        out = tmp_path / "locked"
        out.mkdir()
        (out / ".cpk.lock").write_text("other-pid")
        code = main([
            "export-datasets", "--store", str(dup_store), "--records",
            str(tmp_path / "missing.jsonl"), "--out", str(out),
        ])
        assert code == 2

    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
        assert "cpk" in capsys.readouterr().out


class TestTrainClassifierCommand:
    def test_train_then_eval_round_trip(self, tmp_path, synth_world, capsys):
        from cpkit.classifier import map_labels_to_sentences, build_label_set, assign_splits
        from cpkit.textseg import split_sentences

        records = [t.record for t in synth_world.train[:15]]
        sentences = {t.doc.id: split_sentences(t.doc.clean_text) for t in synth_world.train[:15]}
        labels = build_label_set(records, min_label_count=0)
        labeled = map_labels_to_sentences(records, sentences, labels)
        splits = assign_splits(len(labeled), (0.8, 0.2), ("train", "test"), seed=3)
        data = tmp_path / "cls.jsonl"
        write_dataset(data, labeled, splits)
        model_path = tmp_path / "cls.cpkc"
        code = main([
            "train-classifier", "--data", str(data), "--out", str(model_path),
            "--ngram-max", "2", "--buckets", "16384", "--dim", "24",
            "--lr", "0.5", "--epochs", "30", "--seed", "5",
        ])
        assert code == 0
        assert model_path.exists()
        code = main(["eval-classifier", "--model", str(model_path), "--data", str(data)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "p@1" in printed


class TestSummarizerCommands:
    def test_train_and_eval_summarizer(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        rows = []
        for _ in range(24):
            src = [f"w{int(x)}" for x in rng.integers(0, 12, 6)]
            rows.append({"source": src, "reference": [src[0], src[1], src[-2], src[-1]]})
        for i, row in enumerate(rows):
            row["split"] = "train" if i < 16 else ("val" if i < 20 else "test")
        data = tmp_path / "pairs.jsonl"
        with open(data, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        model_path = tmp_path / "sum.cpks"
        log_path = tmp_path / "log.csv"
        code = main([
            "train-summarizer", "--data", str(data), "--out", str(model_path),
            "--hidden", "12", "--embed", "8", "--batch", "8",
            "--iterations", "60", "--checkpoint-every", "30",
            "--lr", "0.01", "--seed", "2", "--log", str(log_path),
        ])
        assert code == 0
        assert model_path.exists()
        assert log_path.read_text().startswith("iteration,train_loss,val_bleu")
        assert (tmp_path / "sum.cpks.manifest.json").exists()

        code = main([
            "eval-summarizer", "--model", str(model_path), "--data", str(data),
            "--out", str(tmp_path / "eval.json"),
        ])
        assert code == 0
        report = json.loads((tmp_path / "eval.json").read_text())
        assert 0.0 <= report["bleu"] <= 1.0
        assert report["bleu_percent"] == pytest.approx(report["bleu"] * 100)
        printed = capsys.readouterr().out
        assert "BLEU" in printed


class TestClusterCommand:
    def test_cluster_goal_summaries(self, tmp_path, synth_world, capsys):
        records_path = tmp_path / "records.jsonl"
        write_records(records_path, [t.record for t in synth_world.train[:20]])
        vocab = set()
        for t in synth_world.train[:20]:
            vocab.update(w.lower() for w in t.record.goal.summary)
        rng = np.random.default_rng(0)
        vectors_path = tmp_path / "vectors.txt"
        with open(vectors_path, "w") as fh:
            for token in sorted(vocab):
                values = " ".join(f"{v:.4f}" for v in rng.normal(size=10))
                fh.write(f"{token} {values}\n")
        out = tmp_path / "clusters.json"
        code = main([
            "cluster", "--records", str(records_path), "--vectors", str(vectors_path),
            "--k", "3", "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["K"] == 3
        assert sum(c["size"] for c in report["clusters"]) > 0
        assert all(c["representatives"] for c in report["clusters"])

    def test_too_few_embeddable_summaries_is_validation_error(self, tmp_path, synth_world):
        records_path = tmp_path / "records.jsonl"
        write_records(records_path, [synth_world.train[0].record])
        vectors_path = tmp_path / "vectors.txt"
        vectors_path.write_text("nothing 1.0 2.0\n")
        code = main([
            "cluster", "--records", str(records_path), "--vectors", str(vectors_path),
            "--k", "5", "--seed", "1", "--out", str(tmp_path / "o.json"),
        ])
        assert code == 1


class TestCrawlCommand:
    def test_crawl_local_fixture_site(self, tmp_path, monkeypatch):
        # Serve a tiny site over a real local HTTP server.
        import http.server
        import threading

        pages = {
            "/": "<html><head><title>Photoshop Home</title></head><body><p>"
            + "photoshop basics " + " ".join(f"w{i}" for i in range(20))
            + '</p><a href="/two">two</a></body></html>',
            "/two": "<html><body><p>nothing relevant here at all "
            + " ".join(f"v{i}" for i in range(20)) + "</p></body></html>",
        }

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_GET(self):
                body = pages.get(self.path, "").encode()
                self.send_response(200 if body else 404)
                self.send_header("Content-Type", "text/html")
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            allowlist = tmp_path / "allowlist.txt"
            allowlist.write_text(f"127.0.0.1:{port}\n")
            store = tmp_path / "store"
            code = main([
                "crawl", "--allowlist", str(allowlist), "--keyword", "photoshop",
                "--max-depth", "1", "--delay", "0", "--store", str(store),
                "--seed-url", f"http://127.0.0.1:{port}/",
            ])
            assert code == 0
            docs = list(DocumentStore(store).iter_documents())
            assert len(docs) == 1
            assert "photoshop" in docs[0].clean_text
        finally:
            server.shutdown()

    def test_clean_reextracts(self, tmp_path, synth_world):
        store_dir = tmp_path / "docs"
        store = DocumentStore(store_dir)
        store.add(synth_world.eval[0].doc)
        code = main(["clean", "--store", str(store_dir), "--min-block-words", "5"])
        assert code == 0
        reloaded = DocumentStore(store_dir)
        assert reloaded.get(synth_world.eval[0].doc.id).clean_text
