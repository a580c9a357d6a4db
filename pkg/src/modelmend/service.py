"""Session-oriented HTTP API over the whole workflow.

Endpoints (JSON bodies, rationals as strings, errors as {code, message,
details}):

    POST /sessions                      upload a model, start a session
    GET  /sessions/{id}                 session status
    GET  /sessions/{id}/description     T1 text + key inventory
    GET  /sessions/{id}/diagnosis       T2 text + IIS payload (409 if feasible)
    GET  /sessions/{id}/recommendation  T3 text + candidate parameters
    POST /sessions/{id}/chat            one conversation turn
    POST /sessions/{id}/repair          gated repair solve (202 = confirm first)
    POST /sessions/{id}/repair/confirm  run the pending gated repair
    GET  /sessions/{id}/model           current model as `.om` text

Every session appends to its own event-log file; loading a session replays
the recorded outcomes (never the solvers or the language model), so a
restarted process serves identical state.  Within a session requests are
serialized; a chat request that finds the session busy returns 429.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .agent.client import client_from_env
from .agent.prompts import PromptContext, render_fallback
from .agent.session import (
    ChatSession,
    GateDecision,
    PendingRequest,
    ToolCall,
    chat_turn,
    gate_request,
    new_session,
)
from .branch_bound import check_feasible_milp
from .iis import ORACLE_LP, ORACLE_MILP, deletion_filter
from .model import Model, UnknownParam, normalize
from .modelfile import FORMAT_STRUCTURED, FORMAT_TEXT, parse, serialize
from .rationals import format_rational, parse_rational
from .payloads import (
    candidates_payload,
    iis_from_payload,
    iis_payload,
    keys_payload,
    parse_errors_payload,
    plan_from_payload,
    plan_payload,
)
from .model import list_keys
from .repair import (
    MODE_ENTRY,
    MODE_TIED,
    NonlinearRepairUnsupported,
    RepairSpec,
    Unrepairable,
    explain_deltas,
    solve_repair,
)
from .simplex import Feasible, check_feasible

PHASES = ("Loaded", "Described", "Diagnosed", "Chatting")
MAX_SOURCE_BYTES = 256 * 1024
DEFAULT_BUDGET_SECS = 30.0


def _phase_rank(phase: str) -> int:
    return PHASES.index(phase)


@dataclass
class SessionRecord:
    id: str
    session: ChatSession
    source: str
    format: str
    feasible: bool
    phase: str = "Loaded"
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    description_text: Optional[str] = None
    diagnosis: Optional[dict] = None       # {"text", "payload"}
    recommendation: Optional[dict] = None  # {"text", "payload"}
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def advance(self, phase: str):
        if _phase_rank(phase) > _phase_rank(self.phase):
            self.phase = phase
        self.updated = time.time()


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details=None):
        self.status = status
        self.code = code
        self.message = message
        self.details = details if details is not None else []
        super().__init__(message)


def _pending_payload(pending: Optional[PendingRequest]):
    if pending is None:
        return None
    return {"tool": pending.call.name, "args": pending.call.args,
            "reason": pending.decision.reason,
            "consequence": pending.decision.consequence}


def _pending_from_payload(payload) -> Optional[PendingRequest]:
    if payload is None:
        return None
    return PendingRequest(
        ToolCall(payload["tool"], payload["args"]),
        GateDecision(False, payload["reason"], payload["consequence"]),
    )


class SessionStore:
    """In-memory session map backed by one append-only event file each."""

    def __init__(self, data_dir: Path, client_factory):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.client_factory = client_factory
        self._records: dict[str, SessionRecord] = {}
        self._registry_lock = threading.Lock()

    def _path(self, sid: str) -> Path:
        return self.data_dir / f"{sid}.jsonl"

    def append(self, record: SessionRecord, event: dict):
        event = {"ts": time.time(), **event}
        with self._path(record.id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
        record.updated = event["ts"]  # replay restores exactly this stamp

    def create(self, source: str, format: str, feasible: bool,
               model: Model) -> SessionRecord:
        sid = secrets.token_urlsafe(16)
        record = SessionRecord(
            id=sid,
            session=new_session(model, client=self.client_factory()),
            source=source,
            format=format,
            feasible=feasible,
        )
        with self._registry_lock:
            self._records[sid] = record
        self.append(record, {"event": "created", "id": sid, "source": source,
                             "format": format, "feasible": feasible,
                             "created": record.created})
        return record

    def get(self, sid: str) -> SessionRecord:
        with self._registry_lock:
            record = self._records.get(sid)
        if record is None:
            record = self._replay(sid)
            if record is None:
                raise ApiError(404, "unknown_session", f"no session {sid!r}")
            with self._registry_lock:
                self._records.setdefault(sid, record)
                record = self._records[sid]
        return record

    def _replay(self, sid: str) -> Optional[SessionRecord]:
        """Rebuild a record by folding its recorded event outcomes."""
        path = self._path(sid)
        if not path.exists() or "/" in sid or sid.startswith("."):
            return None
        record: Optional[SessionRecord] = None
        for line in path.read_text(encoding="utf-8").splitlines():
            event = json.loads(line)
            kind = event["event"]
            if kind == "created":
                model = parse(event["source"], event["format"])
                assert isinstance(model, Model)
                record = SessionRecord(
                    id=sid,
                    session=new_session(model, client=self.client_factory()),
                    source=event["source"],
                    format=event["format"],
                    feasible=event["feasible"],
                )
                record.created = event["created"]
            else:
                assert record is not None
                self._fold(record, kind, event)
            assert record is not None
            record.updated = event["ts"]
        return record

    @staticmethod
    def _fold(record: SessionRecord, kind: str, event: dict):
        session = record.session
        if kind == "described":
            record.description_text = event["text"]
            record.advance("Described")
        elif kind == "diagnosed":
            record.diagnosis = {"text": event["text"], "payload": event["payload"]}
            session.cached_iis = iis_from_payload(event["payload"])
            record.advance("Diagnosed")
        elif kind == "recommended":
            record.recommendation = {"text": event["text"], "payload": event["payload"]}
        elif kind == "chat":
            session.history.extend(event["messages_added"])
            if event.get("param_values"):
                session.model = session.model.with_param_values(
                    {k: parse_rational(v) for k, v in event["param_values"].items()})
                record.feasible = event.get("feasible", record.feasible)
                record.diagnosis = None
                record.recommendation = None
            session.cached_iis = (
                iis_from_payload(event["iis"]) if event.get("iis") else None)
            session.cached_plan = (
                plan_from_payload(event["plan"]) if event.get("plan") else None)
            session.pending_confirmation = _pending_from_payload(event.get("pending"))
            record.advance("Chatting")
        elif kind == "repair":
            if event.get("plan"):
                session.cached_plan = plan_from_payload(event["plan"])
            session.pending_confirmation = _pending_from_payload(event.get("pending"))
        elif kind == "confirmed":
            session.cached_plan = (
                plan_from_payload(event["plan"]) if event.get("plan") else None)
            if event.get("param_values"):
                session.model = session.model.with_param_values(
                    {k: parse_rational(v) for k, v in event["param_values"].items()})
                record.feasible = event.get("feasible", record.feasible)
                record.diagnosis = None
                record.recommendation = None
            session.pending_confirmation = None


def _check_model(model: Model) -> bool:
    system = normalize(model)
    verdict = (check_feasible_milp(system) if system.has_integers
               else check_feasible(system))
    return isinstance(verdict, Feasible)


def _diagnose(model: Model):
    system = normalize(model)
    oracle = ORACLE_MILP if system.has_integers else ORACLE_LP
    return deletion_filter(system, oracle=oracle)


def create_app(data_dir=None, client_factory=None, solve_budget=None,
               ui_dir=None) -> FastAPI:
    """Build the service; arguments override the WORKBENCH_* environment."""
    data_dir = Path(data_dir or os.environ.get("WORKBENCH_DATA_DIR", "workbench-data"))
    budget = float(solve_budget if solve_budget is not None
                   else os.environ.get("WORKBENCH_SOLVE_BUDGET_SECS", DEFAULT_BUDGET_SECS))
    store = SessionStore(data_dir, client_factory or client_from_env)
    pool = ThreadPoolExecutor(max_workers=8, thread_name_prefix="solve")
    app = FastAPI(title="modelmend", version="0.1.0")
    app.state.store = store

    def budgeted(fn):
        future = pool.submit(fn)
        try:
            return future.result(timeout=budget)
        except FutureTimeout:
            raise ApiError(504, "solve_budget_exceeded",
                           f"solve exceeded {budget} seconds",
                           details=[{"partial": True}])

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={
            "code": exc.code, "message": exc.message, "details": exc.details})

    def record_info(record: SessionRecord, with_transcript: bool = False) -> dict:
        info = {
            "id": record.id,
            "phase": record.phase,
            "feasible": record.feasible,
            "name": record.session.model.name,
            "created": record.created,
            "updated": record.updated,
            "pending_confirmation": record.session.pending_confirmation is not None,
        }
        if with_transcript:
            # the chat history verbatim, so a client refresh can rebuild its view
            info["transcript"] = [dict(m) for m in record.session.history]
            pending = record.session.pending_confirmation
            info["pending"] = _pending_payload(pending)
        return info

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        source = body.get("source", "")
        format = body.get("format", FORMAT_TEXT)
        if format not in (FORMAT_TEXT, FORMAT_STRUCTURED):
            raise ApiError(422, "bad_format", f"unknown format {format!r}")
        if len(source.encode()) > MAX_SOURCE_BYTES:
            raise ApiError(413, "too_large",
                           f"source exceeds {MAX_SOURCE_BYTES} bytes")
        result = parse(source, format)
        if not isinstance(result, Model):
            raise ApiError(422, "parse_error", "the model source does not parse",
                           details=parse_errors_payload(result))
        feasible = budgeted(lambda: _check_model(result))
        record = store.create(source, format, feasible, result)
        return record_info(record)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return record_info(store.get(sid), with_transcript=True)

    @app.get("/sessions/{sid}/description")
    def get_description(sid: str):
        record = store.get(sid)
        with record.lock:
            if record.description_text is None:
                record.description_text = render_fallback("T1", record.session.model)
                record.advance("Described")
                store.append(record, {"event": "described",
                                      "text": record.description_text})
            return {"text": record.description_text,
                    "keys": keys_payload(list_keys(record.session.model))}

    @app.get("/sessions/{sid}/diagnosis")
    def get_diagnosis(sid: str):
        record = store.get(sid)
        with record.lock:
            if record.feasible:
                raise ApiError(409, "already_feasible",
                               "the model is feasible; there is nothing to diagnose")
            if record.diagnosis is None:
                result = budgeted(lambda: _diagnose(record.session.model))
                record.session.cached_iis = result
                text = render_fallback("T2", record.session.model,
                                       PromptContext(iis=result))
                record.diagnosis = {"text": text, "payload": iis_payload(result)}
                record.advance("Diagnosed")
                store.append(record, {"event": "diagnosed", "text": text,
                                      "payload": record.diagnosis["payload"]})
            return {"text": record.diagnosis["text"],
                    "members": record.diagnosis["payload"]["members"],
                    **record.diagnosis["payload"]}

    @app.get("/sessions/{sid}/recommendation")
    def get_recommendation(sid: str):
        record = store.get(sid)
        with record.lock:
            if record.recommendation is None:
                iis = record.session.cached_iis
                text = render_fallback("T3", record.session.model,
                                       PromptContext(iis=iis))
                payload = candidates_payload(record.session.model, iis)
                record.recommendation = {"text": text, "payload": payload}
                store.append(record, {"event": "recommended", "text": text,
                                      "payload": payload})
            return {"text": record.recommendation["text"],
                    **record.recommendation["payload"]}

    @app.post("/sessions/{sid}/chat")
    def post_chat(sid: str, body: dict):
        record = store.get(sid)
        if not record.lock.acquire(blocking=False):
            raise ApiError(429, "turn_in_flight",
                           "a turn is already running for this session")
        try:
            message = body.get("message", "")
            before = len(record.session.history)
            old_model = record.session.model
            reply, updated = budgeted(
                lambda: chat_turn(record.session, message))
            messages_added = updated.history[before:]
            tool_calls = []
            for m in messages_added:
                if m["role"] == "tool":
                    rec = json.loads(m["content"])
                    tool_calls.append({"name": rec["tool"], "result": rec["result"]})
            event = {
                "event": "chat",
                "message": message,
                "reply": reply,
                "messages_added": messages_added,
                "iis": iis_payload(updated.cached_iis) if updated.cached_iis else None,
                "plan": plan_payload(updated.cached_plan) if updated.cached_plan else None,
                "pending": _pending_payload(updated.pending_confirmation),
            }
            if updated.model is not old_model:
                event["param_values"] = {p.name: format_rational(p.value)
                                         for p in updated.model.params}
                record.feasible = _check_model(updated.model)
                event["feasible"] = record.feasible
                record.diagnosis = None          # stale: re-diagnosis allowed
                record.recommendation = None
            record.session = updated
            record.advance("Chatting")
            store.append(record, event)
            return {"reply": reply,
                    "tool_calls": [c["name"] for c in tool_calls],
                    "pending_confirmation": updated.pending_confirmation is not None}
        finally:
            record.lock.release()

    def _solve_and_store(record: SessionRecord, params, mode):
        model = record.session.model
        spec = RepairSpec(frozenset(params), mode)
        try:
            plan = budgeted(lambda: solve_repair(model, spec))
        except NonlinearRepairUnsupported as e:
            raise ApiError(422, "nonlinear_repair_unsupported", str(e))
        except Unrepairable as e:
            raise ApiError(422, "unrepairable", str(e))
        record.session.cached_plan = plan
        payload = plan_payload(plan, explain_deltas(model, plan))
        return payload

    @app.post("/sessions/{sid}/repair")
    def post_repair(sid: str, body: dict):
        record = store.get(sid)
        with record.lock:
            params = body.get("params", [])
            mode = body.get("mode", MODE_TIED)
            if mode not in (MODE_TIED, MODE_ENTRY):
                raise ApiError(422, "bad_mode", f"unknown repair mode {mode!r}")
            if not isinstance(params, list) or not params:
                raise ApiError(422, "bad_params", "params must be a non-empty list")
            try:
                decision = gate_request(record.session, params)
            except UnknownParam as e:
                raise ApiError(422, "unknown_param", str(e))
            if not decision.allowed:
                pending = PendingRequest(
                    ToolCall("solve_repair", {"params": list(params), "mode": mode}),
                    decision)
                record.session.pending_confirmation = pending
                store.append(record, {"event": "repair", "params": list(params),
                                      "mode": mode, "outcome": "warning",
                                      "pending": _pending_payload(pending)})
                return JSONResponse(status_code=202, content={
                    "code": "confirmation_required",
                    "reason": decision.reason,
                    "consequence": decision.consequence,
                })
            record.session.pending_confirmation = None  # superseded by this request
            payload = _solve_and_store(record, params, mode)
            store.append(record, {"event": "repair", "params": list(params),
                                  "mode": mode, "outcome": "plan",
                                  "plan": plan_payload(record.session.cached_plan),
                                  "payload": payload})
            return payload

    @app.post("/sessions/{sid}/repair/confirm")
    def post_confirm(sid: str):
        record = store.get(sid)
        with record.lock:
            pending = record.session.pending_confirmation
            if pending is None:
                raise ApiError(409, "nothing_pending",
                               "no gated request is waiting for confirmation")
            record.session.pending_confirmation = None
            if pending.call.name == "solve_repair":
                payload = _solve_and_store(record, pending.call.args["params"],
                                           pending.call.args.get("mode", MODE_TIED))
                store.append(record, {"event": "confirmed",
                                      "plan": plan_payload(record.session.cached_plan),
                                      "payload": payload})
                return payload
            # an apply_repair pending set during chat: run it through the tools
            from .agent.tools import execute_tool

            result = budgeted(lambda: execute_tool(
                record.session, pending.call.name, pending.call.args))
            event = {"event": "confirmed", "payload": result,
                     "plan": (plan_payload(record.session.cached_plan)
                              if record.session.cached_plan else None)}
            if result.get("applied"):
                record.feasible = result["feasible"]
                record.diagnosis = None
                record.recommendation = None
                event["param_values"] = result["params"]
                event["feasible"] = record.feasible
            store.append(record, event)
            return result

    @app.get("/sessions/{sid}/model")
    def get_model(sid: str):
        record = store.get(sid)
        with record.lock:
            return PlainTextResponse(serialize(record.session.model, FORMAT_TEXT))

    ui = Path(ui_dir) if ui_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui), html=True), name="ui")

    return app


def main(argv=None) -> int:
    """Entry point for `modelmend serve`."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="modelmend serve")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("WORKBENCH_PORT", "8080")))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--data-dir", default=None)
    args = parser.parse_args(argv)
    app = create_app(data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0
