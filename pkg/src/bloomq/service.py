"""HTTP service that drives blinded, server-authoritative rubric sessions.

Clients only ever see the course topic, the display text (the in-session
rephrased text once one exists), and the single rubric item the cursor is on.
Generator model, strategy, and the prompted level never leave the server.
Gating runs server-side; the UI renders whatever the server sends.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import rubric
from .model import AnnotationRecord, QuestionRecord, RubricItem
from .storage import load_annotations

TOKEN_ENV = "BLOOMQ_ANNOTATION_TOKEN"


class ServiceError(Exception):
    pass


class UnknownAnnotator(ServiceError):
    pass


def ordering_seed(run_id: str, annotator_id: str) -> int:
    digest = hashlib.sha256(f"{run_id}|{annotator_id}".encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


@dataclass
class AssignmentState:
    annotator_id: str
    ordering: list[str]
    completed: set[str] = field(default_factory=set)
    active_question: str | None = None
    active_session: rubric.RubricState | None = None
    last_submit: tuple | None = None  # (question_id, item, response, text, reply)


class AnnotationStore:
    """Append-only annotation persistence with at-most-one record per
    (annotator, question)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seen: set[tuple[str, str]] = set()
        if self.path.exists():
            for record in load_annotations(self.path):
                self._seen.add((record.annotator_id, record.question_id))

    def completed_for(self, annotator_id: str) -> set[str]:
        return {qid for (aid, qid) in self._seen if aid == annotator_id}

    def persist(self, record: AnnotationRecord) -> None:
        key = (record.annotator_id, record.question_id)
        with self._lock:
            if key in self._seen:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self._seen.add(key)


class SubmitPayload(BaseModel):
    question_id: str
    item: str
    response: str
    rephrase_text: str | None = None


class AnnotationService:
    def __init__(
        self,
        questions: list[QuestionRecord],
        annotators: list[str],
        store: AnnotationStore,
        run_id: str | None = None,
    ):
        if not questions:
            raise ValueError("cannot serve an empty question dataset")
        self.questions = {q.question_id: q for q in questions}
        self.run_id = run_id or questions[0].run_id
        self.store = store
        self._lock = threading.Lock()
        self.states: dict[str, AssignmentState] = {}
        for name in annotators:
            annotator_id = name if name.startswith("human:") else f"human:{name}"
            ordering = [q.question_id for q in questions]
            random.Random(ordering_seed(self.run_id, annotator_id)).shuffle(ordering)
            self.states[annotator_id] = AssignmentState(
                annotator_id=annotator_id,
                ordering=ordering,
                completed=store.completed_for(annotator_id),
            )

    def _state(self, annotator: str) -> AssignmentState:
        annotator_id = annotator if annotator.startswith("human:") else f"human:{annotator}"
        state = self.states.get(annotator_id)
        if state is None:
            raise UnknownAnnotator(f"annotator {annotator!r} is not registered")
        return state

    def _progress(self, state: AssignmentState) -> dict:
        return {"completed": len(state.completed), "total": len(state.ordering)}

    def _view(self, state: AssignmentState) -> dict:
        question = self.questions[state.active_question]
        session = state.active_session
        item = session.cursor
        display_text = session.rephrased_text or question.text
        return {
            "status": "item",
            "question_id": question.question_id,
            "topic": question.topic,
            "display_text": display_text,
            "current_item": item.value,
            "options": list(item.options),
            "text_required_if": "yes" if item is RubricItem.REPHRASE else None,
            "progress": self._progress(state),
        }

    def next_assignment(self, annotator: str) -> dict:
        with self._lock:
            state = self._state(annotator)
            if state.active_session is not None:
                return self._view(state)
            for question_id in state.ordering:
                if question_id in state.completed:
                    continue
                state.active_question = question_id
                state.active_session = rubric.start_session(question_id)
                state.last_submit = None
                return self._view(state)
            return {"status": "all_done", "progress": self._progress(state)}

    def submit_response(self, annotator: str, payload: SubmitPayload) -> dict:
        with self._lock:
            state = self._state(annotator)
            submit_key = (
                payload.question_id,
                payload.item,
                payload.response,
                payload.rephrase_text,
            )
            if state.last_submit is not None and state.last_submit[:4] == submit_key:
                return state.last_submit[4]  # duplicate delivery: same reply, no re-apply
            if state.active_session is None or state.active_question != payload.question_id:
                raise rubric.OutOfOrder(
                    f"question {payload.question_id} is not the active session"
                )
            item = RubricItem.from_key(payload.item)
            session = rubric.apply_response(
                state.active_session, item, payload.response, payload.rephrase_text
            )
            if session.done:
                record = rubric.finalize(session, annotator_id=state.annotator_id)
                self.store.persist(record)
                state.completed.add(payload.question_id)
                state.active_question = None
                state.active_session = None
                reply = {"status": "session_complete", "progress": self._progress(state)}
            else:
                state.active_session = session
                reply = self._view(state)
            state.last_submit = submit_key + (reply,)
            return reply

    def progress(self, annotator: str) -> dict:
        with self._lock:
            state = self._state(annotator)
            per_item: dict[str, dict[str, int]] = {
                item.value: {} for item in RubricItem
            }
            for record in load_annotations(self.store.path) if self.store.path.exists() else []:
                if record.annotator_id != state.annotator_id:
                    continue
                for item in RubricItem:
                    value = record.responses[item]
                    per_item[item.value][value] = per_item[item.value].get(value, 0) + 1
            return {**self._progress(state), "per_item": per_item}


def create_app(
    questions: list[QuestionRecord],
    annotators: list[str],
    out_path: str | Path,
    run_id: str | None = None,
    ui_dir: str | Path | None = None,
    token: str | None = None,
) -> FastAPI:
    """Build the annotation API, optionally serving a built UI bundle at /."""
    store = AnnotationStore(out_path)
    service = AnnotationService(questions, annotators, store, run_id=run_id)
    app = FastAPI(title="bloomq annotation service", docs_url=None, redoc_url=None)
    app.state.service = service
    required_token = token if token is not None else os.environ.get(TOKEN_ENV)

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if required_token and request.url.path.startswith("/api/") and request.url.path != "/api/health":
            supplied = request.headers.get("Authorization", "")
            if supplied != f"Bearer {required_token}":
                return JSONResponse({"error": "Unauthorized"}, status_code=401)
        return await call_next(request)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "questions": len(service.questions)}

    @app.get("/api/annotators/{annotator}/next")
    def next_assignment(annotator: str) -> dict:
        try:
            return service.next_assignment(annotator)
        except UnknownAnnotator as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/api/annotators/{annotator}/responses")
    def submit(annotator: str, payload: SubmitPayload) -> dict:
        try:
            return service.submit_response(annotator, payload)
        except UnknownAnnotator as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except rubric.OutOfOrder as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (rubric.InvalidOption, rubric.MissingRephraseText, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/annotators/{annotator}/progress")
    def progress(annotator: str) -> dict:
        try:
            return service.progress(annotator)
        except UnknownAnnotator as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
