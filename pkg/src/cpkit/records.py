"""Core knowledge types: commands, actions, goals, workflows and records.

A record captures everything extracted from one tutorial: a goal (short
summary plus the text spans it came from) and an ordered workflow of
actions, each grounding a software command and its usage in the tutorial
text. Records serialize to one JSON object per line (UTF-8, LF).
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

from .textseg import Sentence, split_sentences

MAX_SUMMARY_WORDS = 10

_WS = re.compile(r"\s+")


class Span(NamedTuple):
    """A character range inside one sentence of the clean text."""

    sentence_index: int
    char_start: int
    char_end: int


@dataclass(frozen=True)
class SpanSet:
    spans: tuple[Span, ...]

    @classmethod
    def of(cls, *spans: tuple[int, int, int]) -> "SpanSet":
        return cls(tuple(Span(*s) for s in spans))

    def sentence_indices(self) -> tuple[int, ...]:
        return tuple(sorted({s.sentence_index for s in self.spans}))


@dataclass(frozen=True)
class Command:
    """A named software operation: a menu path or a single tool/panel name."""

    path: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "Command":
        """Build a command from annotator text like "File>Open" or "Brush Tool".

        Whitespace is normalized; ">" separates menu path segments.
        """
        segments = tuple(_WS.sub(" ", seg).strip() for seg in text.split(">"))
        if not segments or any(not seg for seg in segments):
            raise ValueError(f"malformed command: {text!r}")
        return cls(segments)

    @property
    def display(self) -> str:
        return " > ".join(self.path)


@dataclass(frozen=True)
class Action:
    command: Command
    usage: tuple[str, ...]
    source: SpanSet


@dataclass(frozen=True)
class Goal:
    summary: tuple[str, ...]
    source: SpanSet
    title_span: SpanSet | None = None


@dataclass(frozen=True)
class Workflow:
    actions: tuple[Action, ...]


@dataclass(frozen=True)
class CpkRecord:
    tutorial_id: str
    goal: Goal
    workflow: Workflow
    annotator: str | None = None
    provenance: str = "human"  # "human" | "machine"
    draft: bool = False


class Violation(NamedTuple):
    field: str
    rule: str

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return f"{self.field}: {self.rule}"


def count_words(text_or_words: str | Iterable[str]) -> int:
    """Word count at whitespace granularity; hyphenated tokens are one word."""
    if isinstance(text_or_words, str):
        return len(text_or_words.split())
    return len(list(text_or_words))


def _check_spans(
    name: str,
    span_set: SpanSet,
    sentences: list[Sentence],
    violations: list[Violation],
) -> None:
    for span in span_set.spans:
        if span.char_end <= span.char_start:
            violations.append(Violation(name, "degenerate span"))
            continue
        if not 0 <= span.sentence_index < len(sentences):
            violations.append(Violation(name, "sentence index out of range"))
            continue
        sent = sentences[span.sentence_index]
        if span.char_start < sent.char_start or span.char_end > sent.char_end:
            violations.append(Violation(name, "span outside sentence bounds"))


def validate_record(record: CpkRecord, doc, *, draft: bool | None = None) -> list[Violation]:
    """Check every invariant of ``record`` against its source document.

    Returns an empty list iff the record is well formed. ``draft`` defaults
    to the record's own flag; a finalized record needs a non-empty workflow.
    """
    if draft is None:
        draft = record.draft
    violations: list[Violation] = []
    if record.tutorial_id != doc.id:
        violations.append(Violation("tutorial_id", "dangling reference: record does not match document"))
        return violations
    sentences = split_sentences(doc.clean_text)

    if count_words(record.goal.summary) > MAX_SUMMARY_WORDS:
        violations.append(Violation("goal.summary", f"summary > {MAX_SUMMARY_WORDS} words"))
    if not draft and not record.goal.summary:
        violations.append(Violation("goal.summary", "empty summary"))
    _check_spans("goal.source", record.goal.source, sentences, violations)
    if record.goal.title_span is not None:
        _check_spans("goal.title_span", record.goal.title_span, sentences, violations)

    if not draft and not record.workflow.actions:
        violations.append(Violation("workflow", "empty workflow"))
    for i, action in enumerate(record.workflow.actions):
        name = f"workflow[{i}]"
        if not action.command.path or any(not seg.strip() for seg in action.command.path):
            violations.append(Violation(f"{name}.command", "empty command segment"))
        if count_words(action.usage) > MAX_SUMMARY_WORDS:
            violations.append(Violation(f"{name}.usage", f"usage > {MAX_SUMMARY_WORDS} words"))
        if not action.usage:
            violations.append(Violation(f"{name}.usage", "empty usage"))
        _check_spans(f"{name}.source", action.source, sentences, violations)

    if record.provenance not in ("human", "machine"):
        violations.append(Violation("provenance", "must be 'human' or 'machine'"))
    return violations


# ---------------------------------------------------------------------------
# Serialization: one JSON object per record, LF-terminated lines in files.

class RecordParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _spanset_to_json(span_set: SpanSet) -> list[list[int]]:
    return [list(span) for span in span_set.spans]


def _spanset_from_json(data) -> SpanSet:
    return SpanSet(tuple(Span(int(a), int(b), int(c)) for a, b, c in data))


def record_to_dict(record: CpkRecord) -> dict:
    return {
        "tutorial_id": record.tutorial_id,
        "goal": {
            "summary": list(record.goal.summary),
            "source": _spanset_to_json(record.goal.source),
            "title_span": None
            if record.goal.title_span is None
            else _spanset_to_json(record.goal.title_span),
        },
        "workflow": [
            {
                "command": list(a.command.path),
                "usage": list(a.usage),
                "source": _spanset_to_json(a.source),
            }
            for a in record.workflow.actions
        ],
        "annotator": record.annotator,
        "provenance": record.provenance,
        "draft": record.draft,
    }


def record_from_dict(data: dict) -> CpkRecord:
    goal = data["goal"]
    return CpkRecord(
        tutorial_id=data["tutorial_id"],
        goal=Goal(
            summary=tuple(goal["summary"]),
            source=_spanset_from_json(goal["source"]),
            title_span=None
            if goal.get("title_span") is None
            else _spanset_from_json(goal["title_span"]),
        ),
        workflow=Workflow(
            tuple(
                Action(
                    command=Command(tuple(a["command"])),
                    usage=tuple(a["usage"]),
                    source=_spanset_from_json(a["source"]),
                )
                for a in data["workflow"]
            )
        ),
        annotator=data.get("annotator"),
        provenance=data.get("provenance", "human"),
        draft=bool(data.get("draft", False)),
    )


def serialize(record: CpkRecord) -> bytes:
    return json.dumps(record_to_dict(record), ensure_ascii=False).encode("utf-8")


def deserialize(payload: bytes) -> CpkRecord:
    try:
        data = json.loads(payload.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise RecordParseError("invalid UTF-8", exc.start) from exc
    except json.JSONDecodeError as exc:
        offset = len(payload[: exc.pos].decode("utf-8", "ignore").encode("utf-8"))
        raise RecordParseError(f"malformed record: {exc.msg}", offset) from exc
    try:
        return record_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordParseError(f"bad record structure: {exc}", 0) from exc


def write_records(path, records: Iterable[CpkRecord]) -> int:
    count = 0
    with open(path, "wb") as fh:
        for record in records:
            fh.write(serialize(record))
            fh.write(b"\n")
            count += 1
    return count


def read_records(path) -> Iterator[CpkRecord]:
    with open(path, "rb") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield deserialize(line)


# ---------------------------------------------------------------------------
# Corpus statistics.

@dataclass
class StatsReport:
    record_count: int
    action_count: int
    unique_commands: int
    actions_per_tutorial: dict[int, int]
    command_unigrams: Counter
    command_bigrams: Counter

    def to_json_dict(self) -> dict:
        return {
            "records": self.record_count,
            "actions": self.action_count,
            "unique_commands": self.unique_commands,
            "actions_per_tutorial": {str(k): v for k, v in sorted(self.actions_per_tutorial.items())},
            "command_unigrams": [
                [cmd, n] for cmd, n in self.command_unigrams.most_common()
            ],
            "command_bigrams": [
                [a, b, n] for (a, b), n in self.command_bigrams.most_common()
            ],
        }


def corpus_stats(records: Iterable[CpkRecord]) -> StatsReport:
    """Fold action/command distributions over finalized records."""
    histogram: Counter = Counter()
    unigrams: Counter = Counter()
    bigrams: Counter = Counter()
    record_count = 0
    action_count = 0
    for record in records:
        record_count += 1
        commands = [a.command.display for a in record.workflow.actions]
        histogram[len(commands)] += 1
        action_count += len(commands)
        unigrams.update(commands)
        bigrams.update(zip(commands, commands[1:]))
    return StatsReport(
        record_count=record_count,
        action_count=action_count,
        unique_commands=len(unigrams),
        actions_per_tutorial=dict(histogram),
        command_unigrams=unigrams,
        command_bigrams=bigrams,
    )
