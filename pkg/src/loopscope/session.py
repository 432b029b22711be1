"""Live sessions: a machine runs in real time with a human as the oracle.

A session steps the machine until it needs an answer, then waits.  The
protocol is a small message vocabulary: the server sends query, segment,
halt, abort, and report_ready; the client sends hello, answer, and stop.
Message handling per session is strictly serialized under a lock, stop
is accepted in any unfinished state and wins races with in-flight
answers, and every accepted message is appended to the transcript file
before the reply is sent.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path

from .engine import ABORT, HALT, Limits, QueryRecord, Trace, run
from .errors import SessionError
from .ir import Abort, Continue, Halt, Query, STOP
from .oracles import ScriptedOracle
from .report import trace_bundle
from .tree import build_tree, decisive_points, detect_real_queries, trace_metrics

AWAITING_ANSWER = "awaiting-answer"
FINISHED = "finished"


def _msg(msg_type, **fields):
    return {"type": msg_type, **fields}


class Session:
    """One machine run driven by protocol messages."""

    def __init__(self, machine, input, session_id=None, scenario_id=None,
                 limits=Limits(), transcript_dir=None, clock=time.monotonic):
        machine.validate_input(input)
        self.session_id = session_id or uuid.uuid4().hex
        self.scenario_id = scenario_id
        self.machine = machine
        self.input = input
        self.limits = limits
        self.state = AWAITING_ANSWER
        self.outcome = None
        self.output = None
        self.seq = -1  # seq of the outstanding query
        self.started_at = clock()
        self._clock = clock
        self._lock = threading.Lock()
        self._stop_requested = False
        self._pending = None  # the outstanding Query effect
        self._config = machine.initial_config(input)
        self._events = []
        self._queries = []
        self._steps_at_last_query = 0
        self.transcript = []
        self._transcript_path = None
        if transcript_dir is not None:
            Path(transcript_dir).mkdir(parents=True, exist_ok=True)
            self._transcript_path = Path(transcript_dir) / f"{self.session_id}.jsonl"

    # -- internals ------------------------------------------------------------

    def _append_transcript(self, message):
        self.transcript.append(message)
        if self._transcript_path is not None:
            with open(self._transcript_path, "a") as fh:
                fh.write(json.dumps(message, sort_keys=True) + "\n")
                fh.flush()

    def _finish(self, outcome, output=None):
        self.state = FINISHED
        self.outcome = outcome
        self.output = output

    def _advance(self):
        """Step until the next query, halt, or abort; return outbound messages."""
        out = []
        while True:
            if self._config.steps_taken >= self.limits.max_steps:
                self._events.append((self._config.steps_taken, "step_limit"))
                self._finish("step_limit")
                out.append(_msg("abort", reason="step limit reached"))
                break
            effect = self.machine.step(self._config)
            if isinstance(effect, Continue):
                self._config = effect.config
                continue
            if isinstance(effect, Halt):
                self._events.append((self._config.steps_taken, "halt"))
                self._finish(HALT, effect.output)
                out.append(_msg("segment",
                                steps_since_last_query=self._config.steps_taken
                                - self._steps_at_last_query))
                out.append(_msg("halt", output=effect.output))
                break
            if isinstance(effect, Abort):
                self._events.append((self._config.steps_taken, "abort"))
                self._finish(ABORT)
                out.append(_msg("abort"))
                break
            # Query
            if self._config.queries_asked >= self.limits.max_queries:
                self._events.append((self._config.steps_taken, "step_limit"))
                self._finish("step_limit")
                out.append(_msg("abort", reason="query limit reached"))
                break
            self._pending = effect
            self.seq += 1
            self._events.append((self._config.steps_taken, f"query:{self.seq}"))
            out.append(_msg("segment",
                            steps_since_last_query=self._config.steps_taken
                            - self._steps_at_last_query))
            self._steps_at_last_query = self._config.steps_taken
            out.append(_msg("query", session=self.session_id, seq=self.seq,
                            prompt=effect.prompt,
                            issued_at=self._clock() - self.started_at))
            break
        if self.state == FINISHED:
            out.append(_msg("report_ready", report_id=self.session_id))
        for message in out:
            self._append_transcript(message)
        return out

    # -- public API -----------------------------------------------------------

    def start(self):
        with self._lock:
            self._append_transcript(_msg("hello", session=self.session_id,
                                         scenario_id=self.scenario_id,
                                         input=self.input))
            return self._advance()

    def handle_message(self, message):
        with self._lock:
            msg_type = message.get("type")
            if msg_type == "stop":
                return self._handle_stop(message)
            if msg_type == "answer":
                return self._handle_answer(message)
            raise SessionError(f"unknown message type {msg_type!r}")

    def _handle_stop(self, message):
        if self.state == FINISHED:
            # idempotent after finish; nothing to do
            return []
        self._stop_requested = True
        self._append_transcript(message)
        self._events.append((self._config.steps_taken, "abort"))
        if self._pending is not None:
            self._queries.append(QueryRecord(
                prompt=self._pending.prompt, answer=STOP, query_index=self.seq,
                issued_at=0.0, answered_at=0.0))
            self._pending = None
        self._finish(ABORT)
        out = [_msg("abort"), _msg("report_ready", report_id=self.session_id)]
        for m in out:
            self._append_transcript(m)
        return out

    def _handle_answer(self, message):
        if self.state == FINISHED or self._stop_requested:
            raise SessionError("session already finished")
        if self._pending is None:
            raise SessionError("no outstanding query")
        seq = message.get("seq")
        if seq != self.seq:
            raise SessionError(f"answer seq {seq} does not match outstanding seq {self.seq}")
        word = message.get("word")
        if not self.machine.alphabet.contains_word(word, self.machine.max_answer_len):
            raise SessionError(f"answer {word!r} outside the answer space")
        self._append_transcript(message)
        self._queries.append(QueryRecord(
            prompt=self._pending.prompt, answer=word, query_index=self.seq,
            issued_at=0.0, answered_at=0.0))
        resumed = self._pending.resume(word)
        self._pending = None
        if isinstance(resumed, Abort):
            self._events.append((self._config.steps_taken, "abort"))
            self._finish(ABORT)
            out = [_msg("abort"), _msg("report_ready", report_id=self.session_id)]
            for m in out:
                self._append_transcript(m)
            return out
        self._config = resumed.config
        return self._advance()

    def to_trace(self):
        if self.state != FINISHED:
            raise SessionError("session still running")
        return Trace(spec_hash=self.machine.spec_hash(), input=self.input,
                     events=tuple(self._events), queries=tuple(self._queries),
                     outcome=self.outcome, output=self.output)

    def finalize_report(self):
        """Post-session analysis bundle: strip, real flags, decisive points."""
        trace = self.to_trace()
        tree = build_tree(self.machine, self.input, self.limits)
        real = detect_real_queries(tree)
        notes = []
        decisive = None
        if trace.outcome == HALT:
            answers = [q.answer for q in trace.queries]
            oracle = ScriptedOracle(answers or [""])
            decisive = decisive_points(trace, self.machine, oracle, self.limits)
        elif trace.outcome == ABORT:
            notes.append("no output; abort excluded from outcome sets")
        bundle = trace_bundle(trace, metrics=trace_metrics(trace),
                              decisive=decisive, notes=notes)
        bundle["kind"] = "session-report"
        bundle["session_id"] = self.session_id
        bundle["real_flags"] = real.real_flags()
        bundle["conclusive"] = real.conclusive
        return bundle

    def view_state(self):
        return {"session_id": self.session_id,
                "state": (f"finished({self.outcome})" if self.state == FINISHED
                          else f"awaiting-answer({self.seq})"),
                "scenario_id": self.scenario_id}


class SessionManager:
    """Concurrent session registry; per-session handling stays serialized."""

    def __init__(self, transcript_dir=None, limits=Limits()):
        self._sessions = {}
        self._lock = threading.Lock()
        self.transcript_dir = transcript_dir
        self.limits = limits

    def start_session(self, machine, input, scenario_id=None):
        session = Session(machine, input, scenario_id=scenario_id,
                          limits=self.limits, transcript_dir=self.transcript_dir)
        with self._lock:
            self._sessions[session.session_id] = session
        outbound = session.start()
        return session, outbound

    def get(self, session_id):
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session {session_id!r}")
        return session
