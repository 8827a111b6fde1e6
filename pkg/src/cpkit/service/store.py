"""Event-sourced annotation state.

Every mutation appends one JSON line to the event log and folds it into the
in-memory views; startup replays the log. Nothing is ever rewritten or
deleted, so the log is the full audit trail and crash recovery is a replay.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..ingest import DocumentStore
from ..records import (
    Action,
    Command,
    CpkRecord,
    Goal,
    Span,
    SpanSet,
    Workflow,
    count_words,
    record_from_dict,
    record_to_dict,
    validate_record,
)
from ..textseg import split_sentences
from .config import ServiceConfig

MAX_WORDS = 10

FINE_STEPS = (
    "quality_filter",
    "title_select",
    "goal_select",
    "goal_summarize",
    "action_annotate",
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class Judgment:
    worker_id: str
    is_tutorial: bool
    title_span: list[tuple[int, int, int]] | None
    submitted_at: float


@dataclass
class FineSession:
    session_id: str
    doc_id: str
    worker_id: str
    step: str = "quality_filter"
    version: int = 0
    expires_at: float = 0.0
    closed: bool = False
    outcome: str | None = None  # "rejected" | "finalized"
    title_span: list[tuple[int, int, int]] | None = None
    goal_spans: list[tuple[int, int, int]] = field(default_factory=list)
    goal_summary: list[str] = field(default_factory=list)
    actions: list[dict] = field(default_factory=list)

    def public_state(self) -> dict:
        return {
            "session_id": self.session_id,
            "doc_id": self.doc_id,
            "worker_id": self.worker_id,
            "step": self.step,
            "version": self.version,
            "closed": self.closed,
            "outcome": self.outcome,
            "title_span": self.title_span,
            "goal_spans": self.goal_spans,
            "goal_summary": self.goal_summary,
            "actions": self.actions,
        }


def _spans_overlap(a, b) -> bool:
    # Character intervals are absolute offsets, so sentence ids can differ.
    for _, a_start, a_end in a or []:
        for _, b_start, b_end in b or []:
            if max(a_start, b_start) < min(a_end, b_end):
                return True
    return False


def resolve_coarse(judgments: list[Judgment]) -> str:
    """Resolution of a coarse task given its judgments so far.

    Two matching judgments decide (yes+yes needs overlapping title spans);
    otherwise a third judgment breaks the tie, and a still-undecided triple
    is rejected.
    """
    if len(judgments) < 2:
        return "pending"
    yes = [j for j in judgments if j.is_tutorial]
    no = [j for j in judgments if not j.is_tutorial]
    for i in range(len(yes)):
        for j in range(i + 1, len(yes)):
            if _spans_overlap(yes[i].title_span, yes[j].title_span):
                return "accepted"
    if len(no) >= 2:
        return "rejected"
    if len(judgments) == 2:
        return "needs_third"
    return "rejected"


class ServiceState:
    """All annotation state plus the document corpus it annotates."""

    def __init__(self, config: ServiceConfig, clock: Callable[[], float] = time.time):
        self.config = config
        self.clock = clock
        self.documents = DocumentStore(config.store_dir)
        self.lock = threading.Lock()
        self.events_path = Path(config.events_path)
        self.events_path.parent.mkdir(parents=True, exist_ok=True)

        self.judgments: dict[str, list[Judgment]] = {}
        self.coarse_claims: dict[str, dict[str, float]] = {}  # doc -> worker -> expiry
        self.sessions: dict[str, FineSession] = {}
        self.sessions_by_doc: dict[str, str] = {}  # doc -> latest session id
        self.finalized: list[CpkRecord] = []
        self._session_counter = 0
        self._sentences_cache: dict[str, list] = {}

        if self.events_path.exists():
            with open(self.events_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._fold(json.loads(line))

    # ----- event plumbing -----

    def _append(self, event: dict) -> None:
        event = dict(event, at=self.clock())
        with open(self.events_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
        self._fold(event)

    def _fold(self, event: dict) -> None:
        kind = event["type"]
        if kind == "coarse_claimed":
            claims = self.coarse_claims.setdefault(event["doc_id"], {})
            claims[event["worker_id"]] = event["expires_at"]
        elif kind == "judgment":
            self.judgments.setdefault(event["doc_id"], []).append(
                Judgment(
                    worker_id=event["worker_id"],
                    is_tutorial=event["is_tutorial"],
                    title_span=[tuple(s) for s in event["title_span"]]
                    if event.get("title_span") is not None
                    else None,
                    submitted_at=event["at"],
                )
            )
            self.coarse_claims.get(event["doc_id"], {}).pop(event["worker_id"], None)
        elif kind == "session_started":
            self._session_counter += 1
            session = FineSession(
                session_id=event["session_id"],
                doc_id=event["doc_id"],
                worker_id=event["worker_id"],
                expires_at=event["expires_at"],
            )
            self.sessions[session.session_id] = session
            self.sessions_by_doc[session.doc_id] = session.session_id
        elif kind == "session_advanced":
            session = self.sessions[event["session_id"]]
            session.version = event["version"]
            session.expires_at = event["expires_at"]
            step = event["step"]
            payload = event["payload"]
            if step == "quality_filter" and not payload["keep"]:
                session.closed = True
                session.outcome = "rejected"
                session.step = "done"
            elif step == "quality_filter":
                session.step = "title_select"
            elif step == "title_select":
                session.title_span = [tuple(s) for s in payload["title_span"]]
                session.step = "goal_select"
            elif step == "goal_select":
                session.goal_spans = [tuple(s) for s in payload["goal_spans"]]
                session.step = "goal_summarize"
            elif step == "goal_summarize":
                session.goal_summary = payload["summary"].split()
                session.step = "action_annotate"
            elif step == "action_annotate":
                if payload.get("finish"):
                    session.step = "done"
                else:
                    session.actions.append(payload["action"])
        elif kind == "record_finalized":
            session = self.sessions[event["session_id"]]
            session.closed = True
            session.outcome = "finalized"
            self.finalized.append(record_from_dict(event["record"]))

    # ----- helpers -----

    def worker_for_token(self, token: str) -> str:
        worker = self.config.workers.get(token)
        if worker is None:
            raise ApiError(401, "unauthorized", "unknown bearer token")
        return worker

    def _sentences(self, doc_id: str):
        if doc_id not in self._sentences_cache:
            doc = self.documents.get(doc_id)
            self._sentences_cache[doc_id] = split_sentences(doc.clean_text)
        return self._sentences_cache[doc_id]

    def coarse_resolution(self, doc_id: str) -> str:
        return resolve_coarse(self.judgments.get(doc_id, []))

    def _active_coarse_claims(self, doc_id: str, exclude: str) -> int:
        now = self.clock()
        judged = {j.worker_id for j in self.judgments.get(doc_id, [])}
        return sum(
            1
            for worker, expiry in self.coarse_claims.get(doc_id, {}).items()
            if worker != exclude and worker not in judged and expiry > now
        )

    def _fine_busy(self, doc_id: str) -> bool:
        sid = self.sessions_by_doc.get(doc_id)
        if sid is None:
            return False
        session = self.sessions[sid]
        if session.closed:
            return True  # annotated or rejected: never re-served
        return session.expires_at > self.clock()

    # ----- operations -----

    def _coarse_task_payload(self, doc_id: str) -> dict:
        doc = self.documents.get(doc_id)
        return {
            "doc_id": doc_id,
            "clean_text": doc.clean_text,
            "raw_render_url": f"/documents/{doc_id}/raw",
        }

    def next_coarse_task(self, worker_id: str) -> dict | None:
        with self.lock:
            now = self.clock()
            # Re-polling hands back the worker's own open claim instead of
            # hoarding a second document.
            for doc_id in self.documents.ids():
                judgments = self.judgments.get(doc_id, [])
                if resolve_coarse(judgments) in ("accepted", "rejected"):
                    continue
                if any(j.worker_id == worker_id for j in judgments):
                    continue
                if self.coarse_claims.get(doc_id, {}).get(worker_id, 0.0) > now:
                    return self._coarse_task_payload(doc_id)
            for doc_id in self.documents.ids():
                judgments = self.judgments.get(doc_id, [])
                resolution = resolve_coarse(judgments)
                if resolution in ("accepted", "rejected"):
                    continue
                if any(j.worker_id == worker_id for j in judgments):
                    continue
                wanted = 2 if len(judgments) < 2 else 3
                if len(judgments) + self._active_coarse_claims(doc_id, worker_id) >= wanted:
                    continue
                self._append(
                    {
                        "type": "coarse_claimed",
                        "doc_id": doc_id,
                        "worker_id": worker_id,
                        "expires_at": now + self.config.claim_lease_seconds,
                    }
                )
                return self._coarse_task_payload(doc_id)
            return None

    def next_fine_task(self, worker_id: str) -> dict | None:
        with self.lock:
            # Resume the worker's own open session first.
            for session in self.sessions.values():
                if (
                    session.worker_id == worker_id
                    and not session.closed
                    and session.expires_at > self.clock()
                ):
                    return self._fine_task_payload(session)
            for doc_id in self.documents.ids():
                if self.config.require_coarse_accept:
                    if self.coarse_resolution(doc_id) != "accepted":
                        continue
                if self._fine_busy(doc_id):
                    continue
                session_id = f"s{self._session_counter + 1:06d}"  # _fold increments
                self._append(
                    {
                        "type": "session_started",
                        "session_id": session_id,
                        "doc_id": doc_id,
                        "worker_id": worker_id,
                        "expires_at": self.clock() + self.config.claim_lease_seconds,
                    }
                )
                return self._fine_task_payload(self.sessions[session_id])
            return None

    def _fine_task_payload(self, session: FineSession) -> dict:
        doc = self.documents.get(session.doc_id)
        return {
            "session_id": session.session_id,
            "doc_id": session.doc_id,
            "clean_text": doc.clean_text,
            "title_guess": doc.title_guess,
            "step": session.step,
            "version": session.version,
        }

    def submit_judgment(
        self,
        worker_id: str,
        doc_id: str,
        is_tutorial: bool,
        title_span: list[tuple[int, int, int]] | None,
    ) -> dict:
        with self.lock:
            if doc_id not in self.documents:
                raise ApiError(404, "unknown_document", f"no document {doc_id!r}")
            if is_tutorial and not title_span:
                raise ApiError(
                    422, "validation", "title_span is required for a 'yes' judgment"
                )
            if not is_tutorial:
                title_span = None
            judgments = self.judgments.get(doc_id, [])
            if any(j.worker_id == worker_id for j in judgments):
                raise ApiError(
                    409, "duplicate_judgment", "worker already judged this document"
                )
            resolution = resolve_coarse(judgments)
            if resolution in ("accepted", "rejected"):
                raise ApiError(409, "resolved", "task already resolved")
            self._append(
                {
                    "type": "judgment",
                    "doc_id": doc_id,
                    "worker_id": worker_id,
                    "is_tutorial": is_tutorial,
                    "title_span": [list(s) for s in title_span] if title_span else None,
                }
            )
            return {
                "doc_id": doc_id,
                "status": self.coarse_resolution(doc_id),
                "judgments": len(self.judgments.get(doc_id, [])),
            }

    def get_session(self, session_id: str) -> FineSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def advance_session(
        self, worker_id: str, session_id: str, expected_version: int, step: str, payload: dict
    ) -> dict:
        with self.lock:
            session = self.get_session(session_id)
            if session.worker_id != worker_id:
                raise ApiError(403, "forbidden", "session belongs to another worker")
            if session.closed or session.step == "done":
                raise ApiError(409, "protocol", "session is closed")
            if session.version != expected_version:
                raise ApiError(
                    409,
                    "version_conflict",
                    f"expected version {session.version}, got {expected_version}",
                )
            if step != session.step:
                raise ApiError(
                    409,
                    "protocol",
                    f"step {step!r} out of order; session is at {session.step!r}",
                )
            self._validate_payload(session, step, payload)

            if step == "action_annotate" and payload.get("finish"):
                record = self._build_record(session)
                doc = self.documents.get(session.doc_id)
                violations = validate_record(record, doc)
                if violations:
                    raise ApiError(
                        422,
                        "validation",
                        "; ".join(f"{v.field}: {v.rule}" for v in violations),
                    )
                self._append(
                    {
                        "type": "session_advanced",
                        "session_id": session_id,
                        "step": step,
                        "payload": {"finish": True},
                        "version": session.version + 1,
                        "expires_at": self.clock() + self.config.claim_lease_seconds,
                    }
                )
                self._append(
                    {
                        "type": "record_finalized",
                        "session_id": session_id,
                        "record": record_to_dict(record),
                    }
                )
            else:
                self._append(
                    {
                        "type": "session_advanced",
                        "session_id": session_id,
                        "step": step,
                        "payload": payload,
                        "version": session.version + 1,
                        "expires_at": self.clock() + self.config.claim_lease_seconds,
                    }
                )
            return self.sessions[session_id].public_state()

    def _validate_payload(self, session: FineSession, step: str, payload: dict) -> None:
        def check_spans(spans, name):
            if not spans:
                raise ApiError(422, "validation", f"{name} must contain spans")
            sentences = self._sentences(session.doc_id)
            for span in spans:
                si, cs, ce = span
                if ce <= cs:
                    raise ApiError(422, "validation", f"{name}: degenerate span")
                if not 0 <= si < len(sentences):
                    raise ApiError(422, "validation", f"{name}: bad sentence index")
                sent = sentences[si]
                if cs < sent.char_start or ce > sent.char_end:
                    raise ApiError(
                        422, "validation", f"{name}: span outside sentence {si}"
                    )

        if step == "quality_filter":
            if "keep" not in payload:
                raise ApiError(422, "validation", "payload needs 'keep'")
        elif step == "title_select":
            check_spans(payload.get("title_span"), "title_span")
        elif step == "goal_select":
            check_spans(payload.get("goal_spans"), "goal_spans")
        elif step == "goal_summarize":
            summary = payload.get("summary", "")
            words = count_words(summary)
            if words == 0:
                raise ApiError(422, "validation", "summary must not be empty")
            if words > MAX_WORDS:
                raise ApiError(
                    422, "validation", f"summary exceeds {MAX_WORDS} words ({words})"
                )
        elif step == "action_annotate":
            if payload.get("finish"):
                if not session.actions:
                    raise ApiError(
                        422, "validation", "at least one action before finishing"
                    )
                return
            action = payload.get("action")
            if not action:
                raise ApiError(422, "validation", "payload needs 'action' or 'finish'")
            try:
                Command.parse(action["command"])
            except (KeyError, ValueError) as exc:
                raise ApiError(422, "validation", f"bad command: {exc}") from exc
            usage_words = count_words(action.get("usage", ""))
            if usage_words == 0:
                raise ApiError(422, "validation", "usage must not be empty")
            if usage_words > MAX_WORDS:
                raise ApiError(
                    422, "validation", f"usage exceeds {MAX_WORDS} words ({usage_words})"
                )
            check_spans(action.get("spans"), "action spans")

    def _build_record(self, session: FineSession) -> CpkRecord:
        return CpkRecord(
            tutorial_id=session.doc_id,
            goal=Goal(
                summary=tuple(session.goal_summary),
                source=SpanSet(tuple(Span(*s) for s in session.goal_spans)),
                title_span=SpanSet(tuple(Span(*s) for s in session.title_span))
                if session.title_span
                else None,
            ),
            workflow=Workflow(
                tuple(
                    Action(
                        command=Command.parse(a["command"]),
                        usage=tuple(a["usage"].split()),
                        source=SpanSet(tuple(Span(*s) for s in a["spans"])),
                    )
                    for a in session.actions
                )
            ),
            annotator=session.worker_id,
            provenance="human",
        )

    def command_vocabulary(self) -> list[dict]:
        counts: dict[str, int] = {}
        for record in self.finalized:
            for action in record.workflow.actions:
                counts[action.command.display] = counts.get(action.command.display, 0) + 1
        return [
            {"command": cmd, "count": n}
            for cmd, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
