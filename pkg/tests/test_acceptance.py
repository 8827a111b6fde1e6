"""Acceptance gate: each test prints one PASS/FAIL line for its criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines; the
real-dataset criterion is conditional on CPK_REAL_DATASET and skips
otherwise.
"""

from __future__ import annotations

import contextlib
import time

import numpy as np
import pytest

from synthgen import lcs_length


@contextlib.contextmanager
def criterion(number: int, title: str):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL: {title} ({time.monotonic() - started:.1f}s)")
        raise
    print(f"ACCEPTANCE {number} PASS: {title} ({time.monotonic() - started:.1f}s)")


# ---------------------------------------------------------------------------
# 1. Simhash: metric properties + oracle-verified dedup, under 10 s.

def test_acceptance_1_simhash_suite():
    from cpkit.dedup import dedup_corpus, hamming, simhash
    from cpkit.ingest import Document

    with criterion(1, "simhash metric properties and oracle-verified dedup"):
        started = time.monotonic()
        rng = np.random.default_rng(1001)

        fps = [simhash(" ".join(f"w{int(x)}" for x in rng.integers(0, 500, 80)))
               for _ in range(200)]
        for _ in range(10_000):
            a, b = (fps[int(i)] for i in rng.integers(0, len(fps), 2))
            d_ab = hamming(a, b)
            assert 0 <= d_ab <= 64
            assert d_ab == hamming(b, a)                       # symmetry
            assert (d_ab == 0) == (a == b)                      # identity
            assert hamming(a, a) == 0
            c = fps[int(rng.integers(0, len(fps)))]
            assert hamming(a, c) <= d_ab + hamming(b, c)        # triangle

        base = [" ".join(f"w{int(x)}" for x in rng.integers(0, 600, 120))
                for _ in range(120)]
        docs = []
        for i in range(500):
            words = base[int(rng.integers(0, len(base)))].split()
            for _ in range(int(rng.integers(0, 4))):
                words[int(rng.integers(0, len(words)))] = f"m{int(rng.integers(500))}"
            docs.append(Document(id=f"d{i}", url="", domain="", raw_html=b"",
                                 clean_text=" ".join(words), fetched_at=float(i)))
        k = 3
        kept, dropped = dedup_corpus(docs, k=k)
        assert dropped, "fixture should contain near duplicates"
        kept_fps = [simhash(d.clean_text) for d in kept]
        for i in range(len(kept_fps)):                          # O(n^2) oracle
            for j in range(i + 1, len(kept_fps)):
                assert hamming(kept_fps[i], kept_fps[j]) > k
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"simhash suite took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 2. BLEU equals an independent brute-force counter to 1e-9.

def test_acceptance_2_bleu_oracle_equivalence():
    from cpkit.metrics import corpus_bleu

    from test_metrics import oracle_corpus_bleu, random_fixture

    with criterion(2, "corpus BLEU matches brute-force oracle on 100 fixtures"):
        rng = np.random.default_rng(2002)
        for _ in range(100):
            candidates, references = random_fixture(rng, int(rng.integers(1, 10)))
            got = corpus_bleu(candidates, references).score
            want = oracle_corpus_bleu(candidates, references)
            assert abs(got - want) < 1e-9
        identity = [["x", "y", "z", "w"], ["a", "b", "c", "d", "e"]]
        assert corpus_bleu(identity, [[c] for c in identity]).score == 1.0


# ---------------------------------------------------------------------------
# 3. Classifier synthetic round-trip: P@1 >= 0.95 held out, train < 60 s.

def _classifier_synthetic_corpus(n=2000, seed=3003):
    from cpkit.classifier import NO_ACTION, LabeledSentence

    rng = np.random.default_rng(seed)
    commands = [f"Menu{i} > Cmd{i}" for i in range(20)]
    triggers = [
        ["press", f"key{i}", "to", f"verb{i}", "the", f"noun{i}", "today"]
        for i in range(20)
    ]
    fillers = [
        "thanks for reading this tutorial friends".split(),
        "i hope you enjoyed the final result".split(),
        "here is a quick preview of everything".split(),
        "leave a comment below if you like it".split(),
    ]
    items = []
    for i in range(n):
        noise = [f"x{int(rng.integers(60))}" for _ in range(int(rng.integers(0, 3)))]
        if i % 5 < 2:  # exactly 40% no-action
            tokens = fillers[int(rng.integers(len(fillers)))] + noise
            items.append(LabeledSentence(tuple(tokens), frozenset({NO_ACTION})))
        else:
            c = int(rng.integers(20))
            items.append(
                LabeledSentence(tuple(triggers[c] + noise), frozenset({commands[c]}))
            )
    order = rng.permutation(n)
    return [items[i] for i in order]


def test_acceptance_3_classifier_round_trip():
    from cpkit.classifier import NO_ACTION, ClassifierConfig, predict_topk, train
    from cpkit.metrics import precision_recall_at_1

    with criterion(3, "classifier reaches P@1 >= 0.95 on held-out synthetic data"):
        items = _classifier_synthetic_corpus()
        train_set, test_set = items[:1500], items[1500:]
        assert len(test_set) == 500
        config = ClassifierConfig(
            ngram_max=2, hash_buckets=2**15, embed_dim=32, lr=0.3, epochs=15, seed=11
        )
        started = time.monotonic()
        model = train(train_set, config)
        train_seconds = time.monotonic() - started
        assert train_seconds < 60.0, f"training took {train_seconds:.1f}s"

        predictions = [predict_topk(model, item.tokens, 1)[0][0] for item in test_set]
        gold = [item.labels for item in test_set]
        p1, _ = precision_recall_at_1(predictions, gold)
        assert p1 >= 0.95, f"P@1 = {p1:.4f}"

        prior = sum(1 for g in gold if NO_ACTION in g) / len(gold)
        majority_p1, _ = precision_recall_at_1([NO_ACTION] * len(gold), gold)
        assert majority_p1 == prior
        assert abs(prior - 0.40) <= 0.06, f"no-action prior {prior:.3f} drifted"
        assert p1 > majority_p1 + 0.2  # model clearly beats the majority baseline


# ---------------------------------------------------------------------------
# 4. Bigram features beat unigrams where labels depend on word order.

def test_acceptance_4_ngram_ablation_direction():
    from cpkit.classifier import ClassifierConfig, LabeledSentence, predict_topk, train
    from cpkit.metrics import precision_recall_at_1

    with criterion(4, "P@1(bigram) beats P@1(unigram) by >= 0.05 on order-coded labels"):
        rng = np.random.default_rng(4004)
        items = []
        for _ in range(600):
            noise = [f"n{int(rng.integers(30))}" for _ in range(2)]
            # Same unigram bag, different order: only bigrams disambiguate.
            if rng.random() < 0.5:
                tokens = ["add", "new", "layer", "over", "mask"] + noise
                label = "New Layer"
            else:
                tokens = ["add", "new", "mask", "over", "layer"] + noise
                label = "Layer Mask"
            items.append(LabeledSentence(tuple(tokens), frozenset({label})))
        train_set, test_set = items[:450], items[450:]
        scores = {}
        for ngram_max in (1, 2):
            config = ClassifierConfig(
                ngram_max=ngram_max, hash_buckets=2**14, embed_dim=16,
                lr=0.3, epochs=12, seed=7,
            )
            model = train(train_set, config)
            predictions = [predict_topk(model, t.tokens, 1)[0][0] for t in test_set]
            scores[ngram_max], _ = precision_recall_at_1(
                predictions, [t.labels for t in test_set]
            )
        assert scores[2] >= scores[1] + 0.05, f"unigram {scores[1]:.3f} bigram {scores[2]:.3f}"


# ---------------------------------------------------------------------------
# 5. Handwritten backprop matches finite differences, attention on and off.

def test_acceptance_5_gradient_check():
    from cpkit.summarizer import gradient_check

    with criterion(5, "gradient check < 1e-4 with and without attention"):
        started = time.monotonic()
        err_attention = gradient_check(attention=True, layers=1)
        err_plain = gradient_check(attention=False, layers=1)
        elapsed = time.monotonic() - started
        assert err_attention < 1e-4, f"attention grads off by {err_attention:.2e}"
        assert err_plain < 1e-4, f"plain grads off by {err_plain:.2e}"
        assert elapsed < 60.0, f"gradient checks took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 6. Summarizer overfit + attention ablation, combined < 10 min.

def _compression_task(n, seed):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        pre = [f"n{int(x)}" for x in rng.integers(0, 40, int(rng.integers(2, 7)))]
        post = [f"n{int(x)}" for x in rng.integers(0, 40, int(rng.integers(2, 7)))]
        core = [f"p{int(x)}" for x in rng.integers(0, 20, 4)]
        pairs.append((pre + ["sep"] + core + ["sep"] + post, core))
    return pairs


def test_acceptance_6_summarizer_overfit_and_ablation():
    from cpkit.summarizer import SummarizerConfig, evaluate_bleu, train

    with criterion(6, "overfit BLEU > 0.9 in 2k iterations; attention beats no-attention"):
        started = time.monotonic()
        rng = np.random.default_rng(6006)
        toy = []
        for _ in range(32):
            n = int(rng.integers(6, 11))
            src = [f"w{int(x)}" for x in rng.integers(0, 30, n)]
            toy.append((src, [src[0], src[1], src[-2], src[-1]]))
        overfit_config = SummarizerConfig(
            layers=1, attention=True, dropout=0.0, hidden_dim=48, embed_dim=24,
            batch_size=16, max_iterations=2000, checkpoint_every=400, lr=0.005,
            seed=3, min_count=1,
        )
        model = train(toy, toy, overfit_config)
        self_bleu = evaluate_bleu(model, toy)
        assert self_bleu > 0.9, f"overfit BLEU {self_bleu:.3f}"

        train_pairs = _compression_task(500, 11)
        val_pairs = _compression_task(100, 12)
        bleu = {}
        for attention in (True, False):
            config = SummarizerConfig(
                layers=1, attention=attention, dropout=0.0, hidden_dim=48,
                embed_dim=24, batch_size=32, max_iterations=2500,
                checkpoint_every=500, lr=0.004, seed=5, min_count=1,
            )
            ablation_model = train(train_pairs, val_pairs, config)
            bleu[attention] = evaluate_bleu(ablation_model, val_pairs)
        assert bleu[True] > bleu[False], f"att {bleu[True]:.3f} <= plain {bleu[False]:.3f}"
        elapsed = time.monotonic() - started
        assert elapsed < 600.0, f"summarizer suite took {elapsed:.0f}s"


# ---------------------------------------------------------------------------
# 7. K-means: monotone inertia, blob recovery, byte-exact determinism.

def test_acceptance_7_kmeans():
    from cpkit.clustering import kmeans

    with criterion(7, "k-means inertia monotone, 10-sigma blobs recovered, seeded determinism"):
        rng = np.random.default_rng(7007)
        sigma = 1.0
        blob_a = rng.normal(0.0, sigma, size=(80, 4))
        blob_b = rng.normal(10.0 * sigma, sigma, size=(80, 4))
        data = np.vstack([blob_a, blob_b])
        truth = np.array([0] * 80 + [1] * 80)
        result = kmeans(data, k=2, seed=17)  # inertia monotonicity asserted inside
        agreement = max(
            (result.assignment == truth).mean(),
            (result.assignment == 1 - truth).mean(),
        )
        assert agreement == 1.0, f"blob recovery {agreement:.3f}"

        again = kmeans(data, k=2, seed=17)
        assert result.centroids.tobytes() == again.centroids.tobytes()
        assert result.assignment.tobytes() == again.assignment.tobytes()

        messy = rng.normal(size=(300, 6))
        for k in (2, 5, 9):
            kmeans(messy, k=k, seed=23)  # per-iteration assertion must hold


# ---------------------------------------------------------------------------
# 8. Pipeline round-trip over 100 rendered tutorials.

def test_acceptance_8_pipeline_round_trip(synth_pipeline, synth_world):
    from cpkit.records import validate_record

    with criterion(8, "pipeline recovers >= 90% of commands, in order, all records valid"):
        total = matched = 0
        for tutorial in synth_world.eval:
            record, doc = synth_pipeline.extract_from_html(tutorial.html)
            got = [a.command.display for a in record.workflow.actions]
            matched += lcs_length(tutorial.command_sequence, got)
            total += len(tutorial.command_sequence)
            assert validate_record(record, doc) == [], doc.id
            indices = [a.source.spans[0].sentence_index for a in record.workflow.actions]
            assert indices == sorted(indices)
        recovery = matched / total
        assert recovery >= 0.90, f"command recovery {recovery:.3f}"
        assert len(synth_world.eval) == 100


# ---------------------------------------------------------------------------
# 9. Real-dataset export counts (conditional).

def test_acceptance_9_real_dataset_counts(real_dataset):
    from cpkit.classifier import build_label_set
    from cpkit.records import corpus_stats
    from cpkit.textseg import split_sentences

    records, documents = real_dataset
    with criterion(9, "real-dataset export reproduces documented counts"):
        stats = corpus_stats(records)
        assert stats.record_count == 2022
        assert stats.unique_commands == 819
        assert stats.action_count == 47491
        labels = build_label_set(records, min_label_count=5)
        assert len(labels) - 1 == 404  # command labels beside the no-action label
        sentence_count = sum(
            len(split_sentences(doc.clean_text)) for doc in documents.values()
        )
        assert abs(sentence_count - 94022) / 94022 <= 0.05
