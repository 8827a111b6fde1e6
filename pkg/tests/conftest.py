"""Shared fixtures: the synthetic tutorial world and models trained on it.

Training happens once per session; pipeline, CLI and acceptance tests all
reuse the same models so the suite stays fast.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from types import SimpleNamespace

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthgen import make_corpus, training_sets  # noqa: E402


@pytest.fixture(scope="session")
def synth_world():
    from cpkit.classifier import ClassifierConfig, train as train_classifier
    from cpkit.summarizer import SummarizerConfig, train as train_summarizer

    train_tutorials = make_corpus(40, seed=101)
    eval_tutorials = make_corpus(100, seed=707)
    wooden = make_corpus(1, seed=909, goal_idx=0, first_command_idx=0, n_actions=4)[0]
    sets = training_sets(train_tutorials)

    cls_config = ClassifierConfig(
        ngram_max=2, hash_buckets=2**15, embed_dim=32, lr=0.5, epochs=40, seed=5
    )
    command_model = train_classifier(sets["labeled"], cls_config, labels=sets["labels"])
    goal_model = train_classifier(sets["goal_rows"], cls_config)

    sum_config = SummarizerConfig(
        layers=1,
        attention=True,
        hidden_dim=48,
        embed_dim=24,
        batch_size=32,
        max_iterations=1200,
        checkpoint_every=300,
        lr=0.005,
        seed=5,
        min_count=1,
    )
    usage_model = train_summarizer(sets["usage_pairs"], sets["usage_pairs"][:40], sum_config)
    goal_summarizer = train_summarizer(sets["goal_pairs"], sets["goal_pairs"][:20], sum_config)

    return SimpleNamespace(
        train=train_tutorials,
        eval=eval_tutorials,
        wooden=wooden,
        sets=sets,
        command_model=command_model,
        goal_model=goal_model,
        usage_model=usage_model,
        goal_summarizer=goal_summarizer,
    )


@pytest.fixture(scope="session")
def synth_pipeline(synth_world):
    from cpkit.pipeline import Pipeline

    return Pipeline(
        command_model=synth_world.command_model,
        usage_model=synth_world.usage_model,
        goal_model=synth_world.goal_model,
        goal_summarizer=synth_world.goal_summarizer,
        action_threshold=0.3,
        goal_policy="classifier",
    )


@pytest.fixture(scope="session")
def model_dir(synth_world, tmp_path_factory):
    """Models saved to disk plus a pipeline config file, for CLI tests."""
    path = tmp_path_factory.mktemp("models")
    synth_world.command_model.save(path / "commands.cpkc")
    synth_world.goal_model.save(path / "goal.cpkc")
    synth_world.usage_model.save(path / "usage.cpks")
    synth_world.goal_summarizer.save(path / "goal_summarizer.cpks")
    config = {
        "command_model": str(path / "commands.cpkc"),
        "usage_model": str(path / "usage.cpks"),
        "goal_model": str(path / "goal.cpkc"),
        "goal_summarizer": str(path / "goal_summarizer.cpks"),
        "action_threshold": 0.3,
        "goal_policy": "classifier",
    }
    (path / "pipeline.json").write_text(json.dumps(config, indent=2), "utf-8")
    return path


@pytest.fixture()
def seg_fixture_cases():
    data = json.loads((Path(__file__).parent / "fixtures" / "segmentation.json").read_text("utf-8"))
    return [(row["text"], row["sentences"]) for row in data]


@pytest.fixture(scope="session")
def real_dataset():
    """The released annotation corpus, when present: CPK_REAL_DATASET points
    at a directory with records.jsonl and a docs/ store."""
    import os

    root = os.environ.get("CPK_REAL_DATASET")
    if not root:
        pytest.skip("CPK_REAL_DATASET not set; real-dataset checks skipped")
    root = Path(root)
    records_path = root / "records.jsonl"
    store_path = root / "docs"
    if not records_path.exists() or not store_path.exists():
        pytest.skip(f"real dataset incomplete under {root}")
    from cpkit.ingest import DocumentStore
    from cpkit.records import read_records

    records = list(read_records(records_path))
    store = DocumentStore(store_path)
    documents = {r.tutorial_id: store.get(r.tutorial_id) for r in records}
    return records, documents
