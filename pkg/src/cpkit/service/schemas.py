"""Request/response bodies for the annotation API."""

from __future__ import annotations

from pydantic import BaseModel, Field

SpanTriple = tuple[int, int, int]  # (sentence_index, char_start, char_end)


class ErrorBody(BaseModel):
    code: str
    message: str


class CoarseTask(BaseModel):
    doc_id: str
    clean_text: str
    raw_render_url: str


class FineTask(BaseModel):
    session_id: str
    doc_id: str
    clean_text: str
    title_guess: str | None = None
    step: str
    version: int


class NextTaskResponse(BaseModel):
    kind: str
    coarse: CoarseTask | None = None
    fine: FineTask | None = None


class JudgmentRequest(BaseModel):
    doc_id: str
    is_single_text_tutorial: bool
    title_span: list[SpanTriple] | None = None


class JudgmentResponse(BaseModel):
    doc_id: str
    status: str
    judgments: int


class ActionPayload(BaseModel):
    command: str
    usage: str
    spans: list[SpanTriple]


class AdvanceRequest(BaseModel):
    expected_version: int
    step: str
    keep: bool | None = None
    title_span: list[SpanTriple] | None = None
    goal_spans: list[SpanTriple] | None = None
    summary: str | None = None
    action: ActionPayload | None = None
    finish: bool = False

    def payload(self) -> dict:
        if self.step == "quality_filter":
            return {"keep": bool(self.keep)}
        if self.step == "title_select":
            return {"title_span": [list(s) for s in self.title_span or []]}
        if self.step == "goal_select":
            return {"goal_spans": [list(s) for s in self.goal_spans or []]}
        if self.step == "goal_summarize":
            return {"summary": self.summary or ""}
        if self.step == "action_annotate":
            if self.finish:
                return {"finish": True}
            action = self.action.model_dump() if self.action else None
            if action:
                action["spans"] = [list(s) for s in action["spans"]]
            return {"action": action}
        return {}


class SessionStateResponse(BaseModel):
    session_id: str
    doc_id: str
    worker_id: str
    step: str
    version: int
    closed: bool
    outcome: str | None = None
    title_span: list[SpanTriple] | None = None
    goal_spans: list[SpanTriple] = Field(default_factory=list)
    goal_summary: list[str] = Field(default_factory=list)
    actions: list[dict] = Field(default_factory=list)


class DocumentResponse(BaseModel):
    id: str
    url: str
    domain: str
    title_guess: str | None = None
    clean_text: str


class SentenceRow(BaseModel):
    index: int
    char_start: int
    char_end: int


class CommandRow(BaseModel):
    command: str
    count: int


class ExportRequest(BaseModel):
    out_dir: str
    seed: int = 13
    min_label_count: int = 5


class ExportResponse(BaseModel):
    records: int
    labels: int
    sentences: int
    action_sentences: int
    usage_pairs: int
    goal_pairs: int
    files: dict[str, str]
