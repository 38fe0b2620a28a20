import json
import threading
import time
import urllib.request

import pytest

from stratac.gateway import Gateway, GatewayServer
from stratac.harness import (RunController, RunState, run, shipboard_scenario)


def _get(url):
    with urllib.request.urlopen(url, timeout=5) as resp:
        return json.loads(resp.read())


def _post(url, payload):
    req = urllib.request.Request(url, data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=5) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def _read_sse(url, limit=10_000, timeout=10):
    """Collect SSE frames until the end event or timeout; returns (ids, datas)."""
    ids, datas = [], []
    req = urllib.request.Request(url)
    deadline = time.time() + timeout
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        current_id = None
        while time.time() < deadline and len(datas) < limit:
            line = resp.readline().decode()
            if line == "":
                break
            line = line.rstrip("\n")
            if line.startswith("id: "):
                current_id = int(line[4:])
            elif line.startswith("event: end"):
                resp.readline()
                resp.readline()
                break
            elif line.startswith("data: "):
                ids.append(current_id)
                datas.append(json.loads(line[6:]))
    return ids, datas


@pytest.fixture(scope="module")
def served_run():
    """A complete scripted shipboard run served by a gateway."""
    scenario = shipboard_scenario()
    state = RunState(scenario, 7, "scripted")
    controller = RunController()
    gateway = Gateway(state, controller, interactive=False)
    server = GatewayServer(gateway)
    server.start()
    final = run(scenario, 7, controller=controller, on_event=gateway.on_event,
                on_tick_end=lambda s: gateway.publish_snapshot(), state=state)
    gateway.finish()
    host, port = server.address
    yield f"http://{host}:{port}", final, gateway
    server.stop()


class TestEndpoints:
    def test_snapshot_consistent_with_final_state(self, served_run):
        base, state, _ = served_run
        snapshot = _get(f"{base}/snapshot")
        assert snapshot["tick"] == state.tick
        assert snapshot["finished"] is True
        assert set(snapshot["agents"]) == {"ugv-1"}

    def test_full_event_history_equals_record(self, served_run):
        base, state, _ = served_run
        ids, datas = _read_sse(f"{base}/events?since=0")
        record_lines = state.record_files()["gateway.jsonl"].splitlines()
        assert [json.dumps(d, sort_keys=True) for d in datas] == record_lines
        assert ids == [d["seq"] for d in datas]

    def test_resume_without_gaps(self, served_run):
        base, state, _ = served_run
        _, first = _read_sse(f"{base}/events?since=0", limit=5)
        last_seq = first[-1]["seq"]
        _, rest = _read_sse(f"{base}/events?since={last_seq + 1}")
        seqs = [d["seq"] for d in first] + [d["seq"] for d in rest]
        assert seqs == list(range(len(state.events)))

    def test_kind_filter(self, served_run):
        base, state, _ = served_run
        _, thoughts = _read_sse(f"{base}/events?since=0&kind=THOUGHT")
        assert thoughts
        assert all(d["kind"] == "THOUGHT" for d in thoughts)
        expected = len([e for e in state.events if e.kind == "THOUGHT"])
        assert len(thoughts) == expected

    def test_two_subscribers_identical(self, served_run):
        base, _, _ = served_run
        results = [None, None]

        def fetch(slot):
            results[slot] = _read_sse(f"{base}/events?since=0")[1]

        threads = [threading.Thread(target=fetch, args=(i,)) for i in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=10)
        assert results[0] == results[1]

    def test_utterance_rejected_in_scripted_mode(self, served_run):
        base, _, _ = served_run
        code, body = _post(f"{base}/utterance",
                           {"speaker": "daniel", "text": "Hello?"})
        assert code == 409
        assert not body["ok"]
        assert "scripted" in body["detail"]

    def test_unknown_path_404(self, served_run):
        base, _, _ = served_run
        try:
            urllib.request.urlopen(f"{base}/nope", timeout=5)
            assert False, "expected 404"
        except urllib.error.HTTPError as err:
            assert err.code == 404

    def test_snapshot_equals_event_fold(self, served_run):
        # every transcript turn in the snapshot tail appears in the stream,
        # in the same order (snapshot = fold of events up to its tick)
        base, state, _ = served_run
        snapshot = _get(f"{base}/snapshot")
        _, datas = _read_sse(f"{base}/events?since=0")
        streamed = [(d["payload"]["speaker"], d["payload"]["text"])
                    for d in datas if d["kind"] == "UTTERANCE"]
        tail = [(u["speaker"], u["text"]) for u in snapshot["transcript_tail"]]
        assert streamed[-len(tail):] == tail


class TestLiveControl:
    def test_pause_freezes_snapshot_and_step_advances(self):
        scenario = shipboard_scenario()
        state = RunState(scenario, 7, "scripted")
        controller = RunController()
        gateway = Gateway(state, controller, interactive=False)
        server = GatewayServer(gateway)
        server.start()
        base = f"http://{server.address[0]}:{server.address[1]}"
        controller.control("pause")
        thread = threading.Thread(
            target=lambda: (run(scenario, 7, controller=controller,
                                on_event=gateway.on_event,
                                on_tick_end=lambda s: gateway.publish_snapshot(),
                                state=state), gateway.finish()))
        thread.start()
        try:
            time.sleep(0.3)
            snap1 = _get(f"{base}/snapshot")
            snap2 = _get(f"{base}/snapshot")
            assert snap1 == snap2   # paused means frozen
            code, _ = _post(f"{base}/control", {"action": "step"})
            assert code == 200
            time.sleep(0.3)
            snap3 = _get(f"{base}/snapshot")
            assert snap3["tick"] >= snap1.get("tick", -1)
            _post(f"{base}/control", {"action": "resume"})
            thread.join(timeout=30)
            assert not thread.is_alive()
            assert state.finished
        finally:
            controller.control("resume")
            thread.join(timeout=10)
            server.stop()

    def test_interactive_intake_reaches_transcript(self):
        scenario = shipboard_scenario()
        scenario.human_script = []
        scenario.milestones = []
        scenario.success = lambda s: any(sp == "ugv-1" for _, sp, _ in s.transcript)
        state = RunState(scenario, 7, "interactive")
        controller = RunController()
        gateway = Gateway(state, controller, interactive=True)
        server = GatewayServer(gateway)
        server.start()
        base = f"http://{server.address[0]}:{server.address[1]}"
        controller.control("pause")
        thread = threading.Thread(
            target=lambda: (run(scenario, 7, mode="interactive", controller=controller,
                                on_event=gateway.on_event,
                                on_tick_end=lambda s: gateway.publish_snapshot(),
                                state=state, tick_budget=200), gateway.finish()))
        thread.start()
        try:
            code, body = _post(f"{base}/utterance",
                               {"speaker": "daniel", "text": "How old is the thermostat?"})
            assert code == 200 and body["ok"]
            controller.control("resume")
            thread.join(timeout=30)
            assert not thread.is_alive()
            speakers = [s for _, s, _ in state.transcript]
            assert speakers[0] == "daniel"
            assert "ugv-1" in speakers
        finally:
            controller.control("resume")
            thread.join(timeout=10)
            server.stop()
