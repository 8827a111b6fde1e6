"""Sentence-level command prediction from hashed bag-of-n-gram features.

The model averages embeddings of hashed word n-grams into a single hidden
vector and applies a linear output layer over the command labels plus an
explicit "No Action" label. Training is plain SGD with a linearly decaying
learning rate; multi-label sentences are handled either by replicating the
example once per gold label under a softmax loss (default) or with an
independent logistic loss per label.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hashing import FEATURE_SEED, hash_token
from .records import CpkRecord
from .textseg import Sentence

NO_ACTION = "No Action"

MODEL_MAGIC = b"CPKC"
MODEL_VERSION = 1

_GRAM_SEP = "\x1f"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LabeledSentence:
    tokens: tuple[str, ...]
    labels: frozenset[str]
    doc_id: str = ""
    sentence_index: int = 0

    def __post_init__(self):
        if not self.labels:
            raise ValueError("labels must be non-empty")
        if NO_ACTION in self.labels and len(self.labels) > 1:
            raise ValueError(f"{NO_ACTION!r} cannot co-occur with command labels")


@dataclass(frozen=True)
class ClassifierConfig:
    ngram_max: int = 2
    hash_buckets: int = 2**21
    embed_dim: int = 100
    lr: float = 0.1
    epochs: int = 5
    min_label_count: int = 5
    loss: str = "softmax"  # "softmax" | "ova"
    seed: int = 1

    def __post_init__(self):
        if not 1 <= self.ngram_max <= 4:
            raise ValueError("ngram_max must be in [1, 4]")
        if self.hash_buckets <= 0 or self.embed_dim <= 0:
            raise ValueError("dims must be positive")
        if self.loss not in ("softmax", "ova"):
            raise ValueError(f"unknown loss {self.loss!r}")


def build_label_set(
    records: Iterable[CpkRecord], min_label_count: int = 5
) -> tuple[str, ...]:
    """Label vocabulary: commands seen more than ``min_label_count`` times,
    ordered by count desc then name, with the no-action label first."""
    counts: Counter = Counter()
    for record in records:
        counts.update(a.command.display for a in record.workflow.actions)
    commands = sorted(
        (cmd for cmd, n in counts.items() if n > min_label_count),
        key=lambda cmd: (-counts[cmd], cmd),
    )
    return (NO_ACTION, *commands)


def map_labels_to_sentences(
    records: Iterable[CpkRecord],
    sentences_by_doc: Mapping[str, Sequence[Sentence]],
    label_vocab: Sequence[str],
) -> list[LabeledSentence]:
    """Project record actions onto sentences.

    A sentence gets the union of command labels of every action whose span
    set touches it; commands outside the vocabulary are dropped, and any
    sentence left without a command (including all sentences of a document
    with no actions) is labeled no-action.
    """
    vocab = set(label_vocab)
    out: list[LabeledSentence] = []
    for record in records:
        if record.tutorial_id not in sentences_by_doc:
            raise ValueError(f"no sentences for document {record.tutorial_id!r}")
        sentences = sentences_by_doc[record.tutorial_id]
        per_sentence: list[set[str]] = [set() for _ in sentences]
        for action in record.workflow.actions:
            label = action.command.display
            for idx in action.source.sentence_indices():
                if not 0 <= idx < len(sentences):
                    raise ValueError(
                        f"corrupt record {record.tutorial_id!r}: action span "
                        f"references sentence {idx} of {len(sentences)}"
                    )
                if label in vocab:
                    per_sentence[idx].add(label)
        for sent, labels in zip(sentences, per_sentence):
            out.append(
                LabeledSentence(
                    tokens=tuple(sent.tokens),
                    labels=frozenset(labels) if labels else frozenset({NO_ACTION}),
                    doc_id=record.tutorial_id,
                    sentence_index=sent.index,
                )
            )
    return out


def extract_features(
    tokens: Sequence[str], ngram_max: int, hash_buckets: int
) -> list[int]:
    """Bucket ids for all 1..n-grams of ``tokens``; duplicates kept."""
    ids: list[int] = []
    for n in range(1, ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            gram = _GRAM_SEP.join(tokens[i : i + n])
            ids.append(hash_token(gram, FEATURE_SEED) % hash_buckets)
    return ids


class ClassifierModel:
    def __init__(
        self,
        embeddings: np.ndarray,
        output: np.ndarray,
        labels: tuple[str, ...],
        config: ClassifierConfig,
        epoch_losses: list[float] | None = None,
    ):
        self.embeddings = embeddings  # (hash_buckets, embed_dim) float32
        self.output = output  # (num_labels, embed_dim) float32
        self.labels = labels
        self.config = config
        self.epoch_losses = epoch_losses or []

    def hidden(self, tokens: Sequence[str]) -> np.ndarray:
        ids = extract_features(tokens, self.config.ngram_max, self.config.hash_buckets)
        if not ids:
            return np.zeros(self.config.embed_dim, dtype=np.float32)
        return self.embeddings[np.asarray(ids)].mean(axis=0)

    def scores(self, tokens: Sequence[str]) -> np.ndarray:
        raw = self.output @ self.hidden(tokens)
        if self.config.loss == "softmax":
            shifted = raw - raw.max()
            p = np.exp(shifted)
            return p / p.sum()
        return 1.0 / (1.0 + np.exp(-raw))

    def save(self, path) -> None:
        config_blob = json.dumps(asdict(self.config)).encode("utf-8")
        vocab_blob = json.dumps(list(self.labels)).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<B", MODEL_VERSION))
            fh.write(struct.pack("<I", len(config_blob)))
            fh.write(config_blob)
            fh.write(struct.pack("<I", len(vocab_blob)))
            fh.write(vocab_blob)
            fh.write(self.embeddings.astype("<f4").tobytes(order="C"))
            fh.write(self.output.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        with open(path, "rb") as fh:
            if fh.read(4) != MODEL_MAGIC:
                raise ValueError("not a classifier model file")
            (version,) = struct.unpack("<B", fh.read(1))
            if version != MODEL_VERSION:
                raise ValueError(f"unsupported model version {version}")
            (n,) = struct.unpack("<I", fh.read(4))
            config = ClassifierConfig(**json.loads(fh.read(n)))
            (n,) = struct.unpack("<I", fh.read(4))
            labels = tuple(json.loads(fh.read(n)))
            emb_count = config.hash_buckets * config.embed_dim
            emb = np.frombuffer(fh.read(emb_count * 4), dtype="<f4").reshape(
                config.hash_buckets, config.embed_dim
            )
            out = np.frombuffer(
                fh.read(len(labels) * config.embed_dim * 4), dtype="<f4"
            ).reshape(len(labels), config.embed_dim)
        return cls(emb.copy(), out.copy(), labels, config)


def _prepare(
    data: Sequence[LabeledSentence], labels: Sequence[str], config: ClassifierConfig
) -> list[tuple[np.ndarray, np.ndarray, int, list[int]]]:
    index = {label: i for i, label in enumerate(labels)}
    prepared = []
    for item in data:
        missing = item.labels - index.keys()
        if missing:
            raise ValueError(f"labels outside vocabulary: {sorted(missing)}")
        ids = extract_features(item.tokens, config.ngram_max, config.hash_buckets)
        if not ids:
            continue
        unique, counts = np.unique(np.asarray(ids), return_counts=True)
        gold = sorted(index[label] for label in item.labels)
        prepared.append((unique, counts.astype(np.float32), len(ids), gold))
    return prepared


def train(
    data: Sequence[LabeledSentence],
    config: ClassifierConfig,
    labels: Sequence[str] | None = None,
) -> ClassifierModel:
    """Train a model; deterministic for a fixed seed (single worker)."""
    if not data:
        raise ValueError("training data is empty")
    if labels is None:
        seen = sorted({label for item in data for label in item.labels})
        labels = tuple([NO_ACTION] + [l for l in seen if l != NO_ACTION])
    labels = tuple(labels)
    prepared = _prepare(data, labels, config)
    if not prepared:
        raise ValueError("no usable training rows")

    rng = np.random.default_rng(config.seed)
    emb = (
        (rng.random((config.hash_buckets, config.embed_dim), dtype=np.float32) * 2 - 1)
        / config.embed_dim
    )
    out = np.zeros((len(labels), config.embed_dim), dtype=np.float32)

    # Under softmax each row trains once per gold label.
    if config.loss == "softmax":
        rows = [
            (unique, counts, total, gold)
            for unique, counts, total, golds in prepared
            for gold in golds
        ]
    else:
        rows = list(prepared)

    total_steps = config.epochs * len(rows)
    step = 0
    epoch_losses: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(rows))
        loss_sum = 0.0
        for row_idx in order:
            lr = config.lr * (1.0 - step / total_steps)
            step += 1
            unique, counts, total, gold = rows[row_idx]
            hidden = (emb[unique] * counts[:, None]).sum(axis=0) / total
            scores = out @ hidden
            if config.loss == "softmax":
                shifted = scores - scores.max()
                exp = np.exp(shifted)
                probs = exp / exp.sum()
                loss_sum += -float(np.log(max(probs[gold], 1e-30)))
                grad_scores = probs
                grad_scores[gold] -= 1.0
            else:
                probs = 1.0 / (1.0 + np.exp(-scores))
                target = np.zeros(len(labels), dtype=np.float32)
                target[gold] = 1.0
                eps = 1e-12
                loss_sum += -float(
                    (target * np.log(probs + eps) + (1 - target) * np.log(1 - probs + eps)).sum()
                )
                grad_scores = probs - target
            grad_hidden = out.T @ grad_scores
            out -= lr * np.outer(grad_scores, hidden)
            emb[unique] -= lr * np.outer(counts, grad_hidden) / total
        epoch_loss = loss_sum / len(rows)
        if not np.isfinite(epoch_loss):
            raise TrainingError(
                f"non-finite loss at step {step} (lr={config.lr}, epoch loss={epoch_loss})"
            )
        epoch_losses.append(epoch_loss)
    return ClassifierModel(emb, out, labels, config, epoch_losses)


def predict_topk(
    model: ClassifierModel, tokens: Sequence[str], k: int = 1
) -> list[tuple[str, float]]:
    """Top-k (label, score); ties break by label vocabulary order."""
    scores = model.scores(tokens)
    ranked = sorted(range(len(model.labels)), key=lambda i: (-scores[i], i))
    return [(model.labels[i], float(scores[i])) for i in ranked[:k]]


# ---------------------------------------------------------------------------
# Labeled-sentence dataset file: JSONL rows with a train/test split field.

def assign_splits(
    count: int, ratios: Sequence[float], names: Sequence[str], seed: int
) -> list[str]:
    """Seeded random split assignment; ratios must sum to 1."""
    if len(ratios) != len(names) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must match names and sum to 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(count)
    boundaries = np.floor(np.cumsum(np.asarray(ratios)) * count).astype(int)
    boundaries[-1] = count
    assignment = [""] * count
    start = 0
    for name, end in zip(names, boundaries):
        for position in order[start:end]:
            assignment[position] = name
        start = end
    return assignment


def write_dataset(path, items: Sequence[LabeledSentence], splits: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item, split in zip(items, splits):
            fh.write(
                json.dumps(
                    {
                        "doc_id": item.doc_id,
                        "sentence_index": item.sentence_index,
                        "tokens": list(item.tokens),
                        "labels": sorted(item.labels),
                        "split": split,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_dataset(path) -> list[tuple[LabeledSentence, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out.append(
                (
                    LabeledSentence(
                        tokens=tuple(row["tokens"]),
                        labels=frozenset(row["labels"]),
                        doc_id=row.get("doc_id", ""),
                        sentence_index=row.get("sentence_index", 0),
                    ),
                    row.get("split", "train"),
                )
            )
    return out
