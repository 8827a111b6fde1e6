"""Turn finalized annotations into training datasets.

Emits a command-classification JSONL (sentence labels plus a train/test
split), a goal-classification JSONL, and summarization pair files for
usage and goal summaries with train/val/test splits. Splits are seeded and
grouped so identical sources never straddle a split boundary.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..classifier import (
    NO_ACTION,
    build_label_set,
    map_labels_to_sentences,
    write_dataset,
)
from ..records import CpkRecord
from ..textseg import split_sentences, tokenize

GOAL_LABEL = "Goal"


def write_pairs(path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_pairs(path, split: str | None = None) -> list[tuple[list[str], list[str]]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if split is None or row.get("split") == split:
                pairs.append((row["source"], row["reference"]))
    return pairs


def _grouped_split(
    keys: Sequence[tuple], ratios: Sequence[float], names: Sequence[str], seed: int
) -> dict[tuple, str]:
    """Assign a split to each unique key, seeded and order-independent."""
    unique = sorted(set(keys))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(unique))
    boundaries = np.floor(np.cumsum(np.asarray(ratios)) * len(unique)).astype(int)
    boundaries[-1] = len(unique)
    assignment: dict[tuple, str] = {}
    start = 0
    for name, end in zip(names, boundaries):
        for idx in order[start:end]:
            assignment[unique[idx]] = name
        start = end
    return assignment


def _summary_pairs(records: Iterable[CpkRecord], sentences_by_doc) -> tuple[list, list]:
    usage_rows = []
    goal_rows = []
    for record in records:
        sentences = sentences_by_doc[record.tutorial_id]
        for action in record.workflow.actions:
            indices = action.source.sentence_indices()
            source: list[str] = []
            for i in indices:
                source.extend(sentences[i].tokens)
            reference = tokenize(" ".join(action.usage))
            if source and reference:
                usage_rows.append({"source": source, "reference": reference})
        goal_source: list[str] = []
        for i in record.goal.source.sentence_indices():
            goal_source.extend(sentences[i].tokens)
        goal_reference = tokenize(" ".join(record.goal.summary))
        if goal_source and goal_reference:
            goal_rows.append({"source": goal_source, "reference": goal_reference})
    return usage_rows, goal_rows


def export_datasets(
    records: Sequence[CpkRecord],
    documents_by_id: dict,
    out_dir: str | Path,
    seed: int = 13,
    min_label_count: int = 5,
    classifier_ratios: tuple[float, float] = (2 / 3, 1 / 3),
    summarizer_ratios: tuple[float, float, float] = (0.54, 0.23, 0.23),
) -> dict:
    """Write all dataset files; returns counts and paths. Deterministic for
    a fixed seed so re-exports are byte-identical."""
    if not records:
        raise ValueError("no finalized records to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: r.tutorial_id)
    sentences_by_doc = {
        doc_id: split_sentences(documents_by_id[doc_id].clean_text)
        for doc_id in {r.tutorial_id for r in records}
    }

    # Command classification.
    labels = build_label_set(records, min_label_count)
    labeled = map_labels_to_sentences(records, sentences_by_doc, labels)
    split_of = _grouped_split(
        [(s.doc_id, s.sentence_index) for s in labeled],
        classifier_ratios,
        ("train", "test"),
        seed,
    )
    cls_path = out / "classification.jsonl"
    write_dataset(
        cls_path, labeled, [split_of[(s.doc_id, s.sentence_index)] for s in labeled]
    )

    # Goal classification: a sentence is positive when a goal span touches it.
    goal_rows = []
    for record in records:
        goal_indices = set(record.goal.source.sentence_indices())
        for sent in sentences_by_doc[record.tutorial_id]:
            goal_rows.append(
                {
                    "doc_id": record.tutorial_id,
                    "sentence_index": sent.index,
                    "tokens": list(sent.tokens),
                    "labels": [GOAL_LABEL if sent.index in goal_indices else NO_ACTION],
                    "split": split_of[(record.tutorial_id, sent.index)],
                }
            )
    goal_cls_path = out / "goal_classification.jsonl"
    with open(goal_cls_path, "w", encoding="utf-8") as fh:
        for row in goal_rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    # Summarization pairs (usage + goal), split by unique source.
    usage_rows, goal_sum_rows = _summary_pairs(records, sentences_by_doc)
    names = ("train", "val", "test")
    usage_split = _grouped_split(
        [tuple(r["source"]) for r in usage_rows], summarizer_ratios, names, seed + 1
    )
    for row in usage_rows:
        row["split"] = usage_split[tuple(row["source"])]
    goal_split = _grouped_split(
        [tuple(r["source"]) for r in goal_sum_rows], summarizer_ratios, names, seed + 2
    )
    for row in goal_sum_rows:
        row["split"] = goal_split[tuple(row["source"])]
    usage_path = out / "summarization_usage.jsonl"
    goal_sum_path = out / "summarization_goal.jsonl"
    write_pairs(usage_path, usage_rows)
    write_pairs(goal_sum_path, goal_sum_rows)

    manifest = {
        "seed": seed,
        "min_label_count": min_label_count,
        "classifier_ratios": list(classifier_ratios),
        "summarizer_ratios": list(summarizer_ratios),
        "records": len(records),
        "labels": len(labels),
        "sentences": len(labeled),
        "action_sentences": sum(
            1 for s in labeled if NO_ACTION not in s.labels
        ),
        "usage_pairs": len(usage_rows),
        "goal_pairs": len(goal_sum_rows),
        "files": {
            "classification": cls_path.name,
            "goal_classification": goal_cls_path.name,
            "summarization_usage": usage_path.name,
            "summarization_goal": goal_sum_path.name,
        },
    }
    (out / "splits.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
