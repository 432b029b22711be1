import json
import threading

import pytest

from loopscope.engine import Limits, replay
from loopscope.errors import SessionError
from loopscope.ir import spec_from_json
from loopscope.session import Session, SessionManager

PAIR_SPEC = {
    "name": "pair", "alphabet": ["0", "1"], "max_answer_len": 2,
    "inputs": [], "vars": [{"name": "a", "domain": {"kind": "word"}},
                           {"name": "b", "domain": {"kind": "word"}}],
    "entry": "q0",
    "nodes": {
        "q0": {"kind": "query", "prompt": '"0"', "bind": "a", "next": "q1"},
        "q1": {"kind": "query", "prompt": '"1"', "bind": "b", "next": "h"},
        "h": {"kind": "halt", "output": "concat(a, b)"},
    },
}


def _session(**kwargs):
    return Session(spec_from_json(PAIR_SPEC), {}, **kwargs)


def _types(messages):
    return [m["type"] for m in messages]


class TestSessionFlow:
    def test_start_emits_segment_then_query(self):
        s = _session()
        out = s.start()
        assert _types(out) == ["segment", "query"]
        assert out[1]["seq"] == 0
        assert out[1]["prompt"] == "0"
        assert out[1]["session"] == s.session_id

    def test_full_run_to_halt(self):
        s = _session()
        s.start()
        out = s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        assert _types(out) == ["segment", "query"]
        assert out[1]["seq"] == 1
        out = s.handle_message({"type": "answer", "seq": 1, "word": "0"})
        assert _types(out) == ["segment", "halt", "report_ready"]
        assert out[1]["output"] == "10"
        assert s.view_state()["state"] == "finished(halt)"

    def test_seq_numbers_are_gapless(self):
        s = _session()
        s.start()
        s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        transcript_seqs = [m["seq"] for m in s.transcript if m["type"] == "query"]
        assert transcript_seqs == [0, 1]

    def test_wrong_seq_rejected(self):
        s = _session()
        s.start()
        with pytest.raises(SessionError):
            s.handle_message({"type": "answer", "seq": 5, "word": "1"})

    def test_answer_validated_against_alphabet(self):
        s = _session()
        s.start()
        with pytest.raises(SessionError):
            s.handle_message({"type": "answer", "seq": 0, "word": "2"})
        with pytest.raises(SessionError):
            s.handle_message({"type": "answer", "seq": 0, "word": "000"})
        with pytest.raises(SessionError):
            s.handle_message({"type": "answer", "seq": 0, "word": None})

    def test_rejected_answer_leaves_query_outstanding(self):
        s = _session()
        s.start()
        with pytest.raises(SessionError):
            s.handle_message({"type": "answer", "seq": 0, "word": "2"})
        out = s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        assert _types(out) == ["segment", "query"]

    def test_unknown_message_type_rejected(self):
        s = _session()
        s.start()
        with pytest.raises(SessionError):
            s.handle_message({"type": "ping"})


class TestStop:
    def test_stop_aborts_and_reports(self):
        s = _session()
        s.start()
        out = s.handle_message({"type": "stop"})
        assert _types(out) == ["abort", "report_ready"]
        assert s.view_state()["state"] == "finished(abort)"

    def test_stop_records_pending_query_as_stopped(self):
        s = _session()
        s.start()
        s.handle_message({"type": "stop"})
        trace = s.to_trace()
        assert trace.outcome == "abort"
        assert len(trace.queries) == 1
        assert trace.queries[0].answer is not None

    def test_stop_is_idempotent_after_finish(self):
        s = _session()
        s.start()
        s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        s.handle_message({"type": "answer", "seq": 1, "word": "0"})
        assert s.handle_message({"type": "stop"}) == []

    def test_answer_after_stop_rejected(self):
        s = _session()
        s.start()
        s.handle_message({"type": "stop"})
        with pytest.raises(SessionError):
            s.handle_message({"type": "answer", "seq": 0, "word": "1"})

    def test_stop_wins_race_with_answers(self):
        # hammer one session with competing stop and answer threads; stop
        # must always finish the session with an abort outcome
        for trial in range(20):
            s = _session()
            s.start()
            barrier = threading.Barrier(3)
            errors = []
            stop_out = []

            def answer(seq):
                barrier.wait()
                try:
                    s.handle_message({"type": "answer", "seq": seq, "word": "1"})
                except SessionError:
                    pass
                except Exception as e:  # pragma: no cover
                    errors.append(e)

            def stop():
                barrier.wait()
                stop_out.append(s.handle_message({"type": "stop"}))

            threads = [threading.Thread(target=answer, args=(0,)),
                       threading.Thread(target=answer, args=(1,)),
                       threading.Thread(target=stop)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert not errors
            state = s.view_state()["state"]
            if stop_out[0]:
                # stop landed while the run was live: it must win
                assert state == "finished(abort)"
            else:
                # both answers beat the stop; the late stop is a no-op
                assert state == "finished(halt)"


class TestTranscript:
    def test_transcript_flushed_to_disk(self, tmp_path):
        s = _session(transcript_dir=tmp_path)
        s.start()
        s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        path = tmp_path / f"{s.session_id}.jsonl"
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert lines == s.transcript
        # answers are persisted before any reply is produced
        answer_idx = next(i for i, m in enumerate(lines) if m["type"] == "answer")
        assert lines[answer_idx + 1]["type"] == "segment"

    def test_transcript_replays_into_identical_trace(self, tmp_path):
        s = _session(transcript_dir=tmp_path)
        s.start()
        s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        s.handle_message({"type": "answer", "seq": 1, "word": "0"})
        trace = s.to_trace()
        assert replay(trace, spec_from_json(PAIR_SPEC)) == trace


class TestReport:
    def test_report_requires_finished_session(self):
        s = _session()
        s.start()
        with pytest.raises(SessionError):
            s.finalize_report()

    def test_halt_report_has_decisive_points(self):
        s = _session()
        s.start()
        s.handle_message({"type": "answer", "seq": 0, "word": "1"})
        s.handle_message({"type": "answer", "seq": 1, "word": "0"})
        report = s.finalize_report()
        assert report["kind"] == "session-report"
        assert report["session_id"] == s.session_id
        assert report["real_flags"] == [True, True]
        assert report["decisive_points"] == [0, 1]
        assert report["conclusive"] is True

    def test_abort_report_notes_excluded_output(self):
        s = _session()
        s.start()
        s.handle_message({"type": "stop"})
        report = s.finalize_report()
        assert "decisive_points" not in report
        assert any("abort excluded" in n for n in report["notes"])


class TestSessionManager:
    def test_start_and_get(self):
        manager = SessionManager()
        session, outbound = manager.start_session(spec_from_json(PAIR_SPEC), {})
        assert _types(outbound) == ["segment", "query"]
        assert manager.get(session.session_id) is session

    def test_unknown_session_raises(self):
        with pytest.raises(SessionError):
            SessionManager().get("nope")

    def test_limits_propagate(self):
        manager = SessionManager(limits=Limits(max_queries=1))
        session, _ = manager.start_session(spec_from_json(PAIR_SPEC), {})
        out = session.handle_message({"type": "answer", "seq": 0, "word": "1"})
        assert _types(out) == ["abort", "report_ready"]
        assert out[0]["reason"] == "query limit reached"
