"""Network service: HTTP API, WebSocket sessions, and an NDJSON socket.

The HTTP endpoints are thin wrappers over the core package.  Live
sessions speak one message vocabulary over two transports: newline
delimited JSON on a plain TCP socket, and the same payloads over a
WebSocket.  The listen address comes from the LOOPSCOPE_ADDR environment
variable ("host:port") unless given explicitly.
"""

from __future__ import annotations

import asyncio
import json
import os

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .engine import Limits
from .errors import LoopscopeError, SessionError
from .failures import monte_carlo, TimedScenario
from .ir import spec_from_json
from .report import analysis_bundle, classification_bundle, simulation_bundle
from .scenarios import list_scenarios, load_scenario, verify_golden
from .session import SessionManager

DEFAULT_ADDR = "127.0.0.1:8787"


def resolve_addr(addr=None):
    addr = addr or os.environ.get("LOOPSCOPE_ADDR") or DEFAULT_ADDR
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


class LimitsModel(BaseModel):
    max_steps: int = 10_000
    max_tree_nodes: int = 1_000_000
    max_queries: int = 64

    def to_limits(self):
        return Limits(self.max_steps, self.max_tree_nodes, self.max_queries)


class AnalysisRequest(BaseModel):
    scenario_id: str | None = None
    spec: dict | None = None
    limits: LimitsModel = LimitsModel()
    strict: bool = True


class SimulateRequest(BaseModel):
    scenario_id: str | None = None
    scenario: dict | None = None
    trials: int = 1000
    master_seed: int = 0
    include_records: int = 0


class SessionStartRequest(BaseModel):
    scenario_id: str
    input: dict = {}


class SessionMessageModel(BaseModel):
    type: str
    seq: int | None = None
    word: str | None = None


def _load_machine(scenario_id=None, spec=None):
    if (scenario_id is None) == (spec is None):
        raise LoopscopeError("provide exactly one of scenario_id or spec")
    if spec is not None:
        return spec_from_json(spec)
    entry = load_scenario(scenario_id)
    if entry.kind != "classification-fixture":
        raise LoopscopeError(f"scenario {scenario_id!r} is not a machine fixture")
    return entry.payload


def _load_timed(scenario_id=None, scenario=None):
    if (scenario_id is None) == (scenario is None):
        raise LoopscopeError("provide exactly one of scenario_id or scenario")
    if scenario is not None:
        return TimedScenario.from_json(scenario)
    entry = load_scenario(scenario_id)
    if entry.kind != "timed-scenario":
        raise LoopscopeError(f"scenario {scenario_id!r} is not a timed scenario")
    return entry.payload


def handle_wire_message(manager, session, message):
    """Shared message dispatch for the socket and WebSocket transports.

    Returns (replies, session); the session binds on hello and sticks for
    the rest of the connection.
    """
    msg_type = message.get("type")
    try:
        if msg_type == "hello":
            machine = _load_machine(scenario_id=message.get("scenario_id"),
                                    spec=message.get("spec"))
            session, outbound = manager.start_session(
                machine, message.get("input", {}),
                scenario_id=message.get("scenario_id"))
            ack = {"type": "hello_ack", "session": session.session_id,
                   "alphabet": list(machine.alphabet.symbols),
                   "max_answer_len": machine.max_answer_len}
            return [ack] + outbound, session
        if session is None and message.get("session"):
            session = manager.get(message["session"])
        if session is None:
            return [{"type": "error", "reason": "no session; send hello first"}], None
        if msg_type in ("answer", "stop"):
            return session.handle_message(message), session
        if msg_type == "get_report":
            return [{"type": "report", "report": session.finalize_report()}], session
        return [{"type": "error", "reason": f"unknown message type {msg_type!r}"}], session
    except (LoopscopeError, SessionError) as e:
        return [{"type": "error", "reason": str(e)}], session


def create_app(transcript_dir=None, limits=Limits()):
    app = FastAPI(title="loopscope", version="0.1.0")
    manager = SessionManager(transcript_dir=transcript_dir, limits=limits)
    app.state.manager = manager

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LoopscopeError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e

    @app.get("/scenarios")
    def scenarios():
        return {"ids": list_scenarios()}

    @app.post("/scenarios/{scenario_id}/verify")
    def verify(scenario_id: str):
        return _guard(lambda: verify_golden(scenario_id).to_json())

    @app.post("/classify")
    def classify(req: AnalysisRequest):
        def work():
            machine = _load_machine(req.scenario_id, req.spec)
            return classification_bundle(machine, req.limits.to_limits(), req.strict)
        return _guard(work)

    @app.post("/analyze")
    def analyze(req: AnalysisRequest):
        def work():
            machine = _load_machine(req.scenario_id, req.spec)
            return analysis_bundle(machine, req.limits.to_limits(), req.strict)
        return _guard(work)

    @app.post("/simulate")
    def simulate(req: SimulateRequest):
        def work():
            scenario = _load_timed(req.scenario_id, req.scenario)
            records, summary = monte_carlo(scenario, req.trials, req.master_seed)
            return simulation_bundle(scenario, summary, records, req.include_records)
        return _guard(work)

    @app.post("/sessions")
    def start_session(req: SessionStartRequest):
        def work():
            machine = _load_machine(scenario_id=req.scenario_id)
            session, outbound = manager.start_session(machine, req.input,
                                                      scenario_id=req.scenario_id)
            return {"session_id": session.session_id, "messages": outbound,
                    "state": session.view_state()}
        return _guard(work)

    @app.post("/sessions/{session_id}/messages")
    def session_message(session_id: str, msg: SessionMessageModel):
        def work():
            session = manager.get(session_id)
            payload = {k: v for k, v in msg.model_dump().items() if v is not None}
            return {"messages": session.handle_message(payload),
                    "state": session.view_state()}
        return _guard(work)

    @app.get("/sessions/{session_id}/report")
    def session_report(session_id: str):
        return _guard(lambda: manager.get(session_id).finalize_report())

    @app.get("/sessions/{session_id}/transcript")
    def session_transcript(session_id: str):
        return _guard(lambda: {"messages": manager.get(session_id).transcript})

    @app.websocket("/ws")
    async def ws_session(socket: WebSocket):
        await socket.accept()
        session = None
        try:
            while True:
                message = json.loads(await socket.receive_text())
                replies, session = handle_wire_message(manager, session, message)
                for reply in replies:
                    await socket.send_text(json.dumps(reply, sort_keys=True))
        except WebSocketDisconnect:
            pass

    return app


async def serve_ndjson(manager, host, port):
    """Newline-delimited JSON session transport on a TCP socket."""

    async def handle(reader, writer):
        session = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    message = json.loads(line)
                except json.JSONDecodeError:
                    replies = [{"type": "error", "reason": "malformed JSON line"}]
                else:
                    replies, session = handle_wire_message(manager, session, message)
                for reply in replies:
                    writer.write((json.dumps(reply, sort_keys=True) + "\n").encode())
                await writer.drain()
        finally:
            writer.close()

    server = await asyncio.start_server(handle, host, port)
    return server


async def serve(addr=None, http_addr=None, transcript_dir=None):
    """Run the NDJSON socket and the HTTP/WebSocket app until cancelled."""
    import uvicorn

    host, port = resolve_addr(addr)
    if http_addr is None:
        http_host, http_port = host, port + 1
    else:
        http_host, http_port = resolve_addr(http_addr)
    app = create_app(transcript_dir=transcript_dir)
    ndjson_server = await serve_ndjson(app.state.manager, host, port)
    config = uvicorn.Config(app, host=http_host, port=http_port, log_level="warning")
    server = uvicorn.Server(config)
    try:
        await server.serve()
    finally:
        ndjson_server.close()
        await ndjson_server.wait_closed()
