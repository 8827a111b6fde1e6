"""End-to-end extraction: raw HTML in, machine-provenance record out.

Six stages run in order: main-content extraction, goal chunk
identification, goal summarization, action chunk identification, command
prediction, and usage summarization. Every action is grounded in the
sentence it came from, and actions are emitted in sentence order.
"""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import NO_ACTION, ClassifierModel, predict_topk
from .ingest import Document, DocumentStore, ExtractionConfig, content_id, extract_main_content
from .records import Action, Command, CpkRecord, Goal, Span, SpanSet, Workflow, validate_record
from .summarizer import SummarizerModel, summarize
from .textseg import split_sentences, tokenize

log = logging.getLogger(__name__)

GOAL_LABEL = "Goal"
MAX_WORDS = 10


class NoContentError(RuntimeError):
    pass


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    command_model: str
    usage_model: str
    goal_model: str | None = None
    goal_summarizer: str | None = None
    action_threshold: float = 0.5
    goal_policy: str = "classifier"  # "classifier" | "first-k"
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text("utf-8"))
        extraction = ExtractionConfig(**data.pop("extraction", {}))
        return cls(extraction=extraction, **data)


@dataclass
class RunReport:
    total: int = 0
    extracted: int = 0
    failed: int = 0
    empty_workflow: int = 0
    error_classes: Counter = field(default_factory=Counter)
    failures: list[tuple[str, str]] = field(default_factory=list)
    latencies: list[float] = field(default_factory=list)

    def _percentile(self, q: float) -> float:
        if not self.latencies:
            return 0.0
        ranked = sorted(self.latencies)
        idx = min(len(ranked) - 1, int(q * len(ranked)))
        return ranked[idx]

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "extracted": self.extracted,
            "failed": self.failed,
            "empty_workflow": self.empty_workflow,
            "error_classes": dict(self.error_classes),
            "failures": [list(f) for f in self.failures],
            "latency_seconds": {
                "p50": self._percentile(0.50),
                "p90": self._percentile(0.90),
                "p99": self._percentile(0.99),
            },
        }


class Pipeline:
    """Holds the loaded models; immutable while a run is in flight."""

    def __init__(
        self,
        command_model: ClassifierModel,
        usage_model: SummarizerModel,
        goal_model: ClassifierModel | None = None,
        goal_summarizer: SummarizerModel | None = None,
        action_threshold: float = 0.5,
        goal_policy: str = "classifier",
        extraction: ExtractionConfig = ExtractionConfig(),
    ):
        self.command_model = command_model
        self.usage_model = usage_model
        self.goal_model = goal_model
        self.goal_summarizer = goal_summarizer
        self.action_threshold = action_threshold
        self.goal_policy = goal_policy
        self.extraction = extraction

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Pipeline":
        for path in (config.command_model, config.usage_model, config.goal_model,
                     config.goal_summarizer):
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"model file missing: {path}")
        return cls(
            command_model=ClassifierModel.load(config.command_model),
            usage_model=SummarizerModel.load(config.usage_model),
            goal_model=ClassifierModel.load(config.goal_model)
            if config.goal_model
            else None,
            goal_summarizer=SummarizerModel.load(config.goal_summarizer)
            if config.goal_summarizer
            else None,
            action_threshold=config.action_threshold,
            goal_policy=config.goal_policy,
            extraction=config.extraction,
        )

    # ----- goal identification (stage 2) -----

    def _goal_sentence_indices(self, sentences) -> tuple[list[int], bool]:
        """Goal sentence indices plus whether the positional fallback fired."""
        if self.goal_policy == "classifier" and self.goal_model is not None:
            positives = [
                s.index
                for s in sentences
                if predict_topk(self.goal_model, s.tokens, 1)[0][0] == GOAL_LABEL
            ]
            if positives:
                return positives, False
        return [s.index for s in sentences[:2]], True

    def _summarize_goal(self, tokens: list[str]) -> list[str]:
        if self.goal_summarizer is not None:
            summary = summarize(self.goal_summarizer, tokens)[:MAX_WORDS]
            if summary:
                return summary
        return tokens[:MAX_WORDS]

    def _summarize_usage(self, tokens: tuple[str, ...]) -> list[str]:
        summary = summarize(self.usage_model, list(tokens))[:MAX_WORDS]
        return summary if summary else list(tokens)[:MAX_WORDS]

    # ----- full record extraction -----

    def extract_from_document(self, doc: Document) -> CpkRecord:
        sentences = split_sentences(doc.clean_text)
        if not sentences:
            raise NoContentError(f"no content in document {doc.id}")

        goal_indices, used_fallback = self._goal_sentence_indices(sentences)
        goal_source = SpanSet(
            tuple(
                Span(i, sentences[i].char_start, sentences[i].char_end)
                for i in goal_indices
            )
        )
        # The title joins the summarizer input only in fallback mode, where
        # it stands in for an unidentified goal chunk.
        goal_tokens = tokenize(doc.title_guess or "") if used_fallback else []
        for i in goal_indices:
            goal_tokens.extend(sentences[i].tokens)
        goal = Goal(
            summary=tuple(self._summarize_goal(goal_tokens)),
            source=goal_source,
        )

        actions: list[Action] = []
        num_labels = len(self.command_model.labels)
        for sent in sentences:
            ranked = predict_topk(self.command_model, sent.tokens, num_labels)
            top_label, top_score = ranked[0]
            if top_label == NO_ACTION:
                continue
            commands = [
                label
                for label, score in ranked
                if label != NO_ACTION and score >= self.action_threshold
            ]
            if not commands:
                commands = [top_label]
            usage = tuple(self._summarize_usage(sent.tokens))
            span = SpanSet((Span(sent.index, sent.char_start, sent.char_end),))
            for command in commands:
                actions.append(
                    Action(command=Command.parse(command), usage=usage, source=span)
                )

        record = CpkRecord(
            tutorial_id=doc.id,
            goal=goal,
            workflow=Workflow(tuple(actions)),
            provenance="machine",
            draft=not actions,
        )
        if actions:
            violations = validate_record(record, doc)
            if violations:
                raise ExtractionError(
                    f"extracted record violates invariants: {[str(v) for v in violations]}"
                )
        return record

    def extract_from_html(
        self, raw_html: bytes, url: str = "", domain: str = ""
    ) -> tuple[CpkRecord, Document]:
        clean_text, title = extract_main_content(raw_html, self.extraction)
        if not clean_text:
            raise NoContentError("no content")
        doc = Document(
            id=content_id(raw_html),
            url=url,
            domain=domain,
            raw_html=raw_html,
            clean_text=clean_text,
            title_guess=title,
            fetched_at=time.time(),
        )
        return self.extract_from_document(doc), doc

    def extract_corpus(
        self, store: DocumentStore
    ) -> tuple[list[CpkRecord], RunReport]:
        """Process every stored document; failures are logged, never fatal."""
        report = RunReport()
        records: list[CpkRecord] = []
        for doc in store.iter_documents(load_html=True):
            report.total += 1
            started = time.monotonic()
            try:
                if doc.raw_html:
                    record, _ = self.extract_from_html(
                        doc.raw_html, url=doc.url, domain=doc.domain
                    )
                else:
                    record = self.extract_from_document(doc)
                records.append(record)
                report.extracted += 1
                if record.draft:
                    report.empty_workflow += 1
            except Exception as exc:
                report.failed += 1
                report.error_classes[type(exc).__name__] += 1
                report.failures.append((doc.id, str(exc)))
                log.warning("extraction failed for %s: %s", doc.id, exc)
            finally:
                report.latencies.append(time.monotonic() - started)
        return records, report
