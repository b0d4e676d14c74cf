"""HTTP/JSON session service.

Every endpoint delegates to a module operation; request and response
bodies are the canonical JSON of the core types. Error mapping:
validation -> 422, unknown session or addressee -> 404, provider
failure -> 502 (with cause), suggestion format violation -> 409,
suggestions disabled for the session -> 403.

One serialized writer per session (a per-session lock); sessions are
independent and the profile index and classifiers are shared immutable
resources. State is persisted as per-session append-only event logs and
recovered by replay, so a crashed service resumes from disk.
"""

from __future__ import annotations

import logging
import threading
import uuid
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import metrics as metrics_mod
from . import pedagogy
from .engine import (
    GeneratedResponse,
    GeneratorFailure,
    ResponseGenerator,
    ScriptedGenerator,
    ModelBackedGenerator,
    SessionState,
    UnknownAddressee,
    post_teacher_turn,
    start_session,
)
from .model import ClassimError, ClassroomContext, ContextDistillation, \
    TRQFLabel, ToulminLabel, validate_context
from .persistence import (
    CorruptLog,
    EventLog,
    record_annotation,
    record_session_started,
    record_teacher_turn,
    apply_annotation,
    recover_session,
    session_log_path,
)
from .providers import (
    BACKEND_SCRIPTED,
    ProviderConfig,
    ProviderFailure,
    build_provider,
)
from .retrieval import InsufficientProfiles, ProfileIndex, scripted_distill

log = logging.getLogger(__name__)


class ContextBody(BaseModel):
    grade_level: int
    math_topic: str
    class_description: str = ""
    distilled: Optional[dict] = None


class CreateSessionBody(BaseModel):
    context: ContextBody
    seed: int = 0
    roster_size: int = 20
    suggestions_enabled: bool = True
    problem_statement: Optional[str] = None


class TurnBody(BaseModel):
    text: str
    addressed: Optional[list[str]] = None
    max_respondents: Optional[int] = None


class AnnotationBody(BaseModel):
    turn_id: int
    labels: list[str]


class ReflectionBody(BaseModel):
    text: str


class FollowupBody(BaseModel):
    question: str


class DegradableGenerator(ResponseGenerator):
    """Wraps a model-backed generator with a scripted fallback: when the
    provider fails after its retries, the single response degrades to the
    scripted backend and is flagged, so a live session never stalls."""

    def __init__(self, primary: ResponseGenerator):
        self.primary = primary
        self.fallback = ScriptedGenerator()
        self.degraded_ids: set[str] = set()

    def generate(self, profile, context, transcript_tail, draw):
        try:
            return self.primary.generate(
                profile, context, transcript_tail, draw)
        except Exception as exc:
            log.warning("provider degraded for %s: %s",
                        profile.profile_id, type(exc).__name__)
            self.degraded_ids.add(profile.profile_id)
            return self.fallback.generate(
                profile, context, transcript_tail, draw)


class SessionService:
    """Owns live sessions, their locks, and their event logs."""

    def __init__(self, index: ProfileIndex, config: ProviderConfig,
                 data_dir: str):
        self.index = index
        self.config = config
        self.data_dir = data_dir
        self.sessions: dict[str, SessionState] = {}
        self.locks: dict[str, threading.Lock] = {}
        self.logs: dict[str, EventLog] = {}
        self.reports: dict[str, pedagogy.FeedbackReport] = {}
        self._registry_lock = threading.Lock()
        self.provider = build_provider(config)
        self.question_classifier = pedagogy.ScriptedQuestionClassifier()
        self.response_classifier = pedagogy.ScriptedResponseClassifier()

    def make_generator(self) -> ResponseGenerator:
        if self.provider is None:
            return ScriptedGenerator()
        return DegradableGenerator(ModelBackedGenerator(self.provider))

    def create(self, body: CreateSessionBody) -> SessionState:
        raw = ClassroomContext(
            grade_level=body.context.grade_level,
            math_topic=body.context.math_topic,
            class_description=body.context.class_description,
            distilled=ContextDistillation.from_json_dict(body.context.distilled)
            if body.context.distilled
            else scripted_distill(body.context.class_description),
        )
        context = validate_context(raw)
        session_id = uuid.uuid4().hex[:12]
        state = start_session(
            context, self.index, seed=body.seed, session_id=session_id,
            roster_size=body.roster_size,
            problem_statement=body.problem_statement)
        state.suggestions_enabled = body.suggestions_enabled
        event_log = EventLog(session_log_path(self.data_dir, session_id))
        record_session_started(event_log, state, body.roster_size)
        with self._registry_lock:
            self.sessions[session_id] = state
            self.locks[session_id] = threading.Lock()
            self.logs[session_id] = event_log
        return state

    def get(self, session_id: str) -> tuple[SessionState, threading.Lock]:
        with self._registry_lock:
            if session_id in self.sessions:
                return self.sessions[session_id], self.locks[session_id]
        # not in memory: try crash recovery from the event log
        try:
            state, corrupt = recover_session(
                self.data_dir, session_id, self.index)
        except (FileNotFoundError, CorruptLog, ClassimError):
            raise HTTPException(404, f"unknown session {session_id!r}")
        if state is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        if corrupt is not None:
            log.warning("session %s: dropped truncated event at line %d",
                        session_id, corrupt)
        with self._registry_lock:
            self.sessions.setdefault(session_id, state)
            self.locks.setdefault(session_id, threading.Lock())
            self.logs.setdefault(
                session_id,
                EventLog(session_log_path(self.data_dir, session_id)))
            return self.sessions[session_id], self.locks[session_id]


def _roster_payload(state: SessionState) -> list[dict]:
    out = []
    for pid in state.roster.members:
        entry = state.profiles[pid].to_json_dict()
        entry["affect"] = state.affect[pid].value
        entry["score"] = state.roster.scores[pid]
        out.append(entry)
    return out


def create_app(index: ProfileIndex, config: ProviderConfig,
               data_dir: str) -> FastAPI:
    service = SessionService(index, config, data_dir)
    app = FastAPI(title="classim session service")
    app.state.service = service

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "backend": service.config.backend}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            state = service.create(body)
        except InsufficientProfiles as exc:
            raise HTTPException(422, str(exc))
        except ClassimError as exc:
            raise HTTPException(422, str(exc))
        return {
            "session_id": state.session_id,
            "problem_statement": state.problem_statement,
            "suggestions_enabled": state.suggestions_enabled,
            "roster": _roster_payload(state),
        }

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnBody):
        state, lock = service.get(session_id)
        generator = service.make_generator()
        with lock:
            try:
                responses, affect = post_teacher_turn(
                    state, body.text, generator,
                    addressed=body.addressed,
                    max_respondents=body.max_respondents)
            except UnknownAddressee as exc:
                raise HTTPException(404, str(exc))
            except GeneratorFailure as exc:
                raise HTTPException(502, str(exc))
            except ClassimError as exc:
                raise HTTPException(422, str(exc))
            record_teacher_turn(
                service.logs[session_id], body.text,
                addressed=body.addressed,
                max_respondents=body.max_respondents)
            degraded = getattr(generator, "degraded_ids", set())
            return {
                "responses": [
                    dict(r.to_json_dict(),
                         degraded=r.profile_id in degraded)
                    for r in responses],
                "affect": {pid: a.value for pid, a in affect.items()},
            }

    @app.get("/sessions/{session_id}/suggestion")
    def get_suggestion(session_id: str):
        state, lock = service.get(session_id)
        with lock:
            if not state.suggestions_enabled:
                raise HTTPException(
                    403, "suggestions are disabled for this session")
            try:
                suggestion = pedagogy.suggest(
                    state,
                    question_classifier=service.question_classifier,
                    response_classifier=service.response_classifier)
            except pedagogy.FormatViolation as exc:
                raise HTTPException(409, str(exc))
            except pedagogy.PreconditionViolation as exc:
                raise HTTPException(422, str(exc))
            except ProviderFailure as exc:
                raise HTTPException(502, str(exc))
            return suggestion.to_json_dict()

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        state, lock = service.get(session_id)
        with lock:
            return {
                "session_id": state.session_id,
                "problem_statement": state.problem_statement,
                "turns": [t.to_json_dict() for t in state.transcript],
            }

    @app.post("/sessions/{session_id}/annotations")
    def post_annotation(session_id: str, body: AnnotationBody):
        state, lock = service.get(session_id)
        with lock:
            turn = next(
                (t for t in state.transcript if t.turn_id == body.turn_id),
                None)
            if turn is None:
                raise HTTPException(404, f"no turn {body.turn_id}")
            try:
                labels = _parse_labels(turn, body.labels)
                verdict = pedagogy.verify_annotation(
                    turn, labels,
                    question_classifier=service.question_classifier,
                    response_classifier=service.response_classifier)
            except (pedagogy.WrongFramework, ClassimError) as exc:
                raise HTTPException(422, str(exc))
            framework = "trqf" if turn.speaker.is_teacher else "toulmin"
            system = sorted(
                l.value for l in verdict.system_labels.elements())
            apply_annotation(state, body.turn_id, framework, system)
            record_annotation(
                service.logs[session_id], body.turn_id, framework, system)
            return verdict.to_json_dict()

    @app.post("/sessions/{session_id}/reflection")
    def post_reflection(session_id: str, body: ReflectionBody):
        state, lock = service.get(session_id)
        with lock:
            try:
                report = pedagogy.overall_feedback(state, body.text)
            except pedagogy.PreconditionViolation as exc:
                raise HTTPException(422, str(exc))
            service.reports[session_id] = report
            return report.to_json_dict()

    @app.post("/sessions/{session_id}/reflection/followups")
    def post_followup(session_id: str, body: FollowupBody):
        state, lock = service.get(session_id)
        with lock:
            report = service.reports.get(session_id)
            if report is None:
                raise HTTPException(
                    422, "submit a reflection before asking follow-ups")
            try:
                answer = pedagogy.answer_followup(
                    report, body.question, state.transcript)
            except pedagogy.PreconditionViolation as exc:
                raise HTTPException(422, str(exc))
            return {"answer": answer}

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        state, lock = service.get(session_id)
        with lock:
            return metrics_mod.aggregate([state.transcript]).to_json_dict()

    return app


def _parse_labels(turn, labels: list[str]) -> list:
    """Parse label strings against any framework; verify_annotation then
    rejects wrong-framework labels with a WrongFramework error."""
    parsed = []
    for raw in labels:
        if raw in {l.value for l in TRQFLabel}:
            parsed.append(TRQFLabel(raw))
        elif raw in {l.value for l in ToulminLabel}:
            parsed.append(ToulminLabel(raw))
        else:
            raise ClassimError(f"unknown label {raw!r}")
    return parsed
