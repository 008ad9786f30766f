"""Session service tests: protocol shapes, exactly-once answers, timeouts.

These drive the HTTP app in-process. Human-bridge sessions are kept tiny
(a few queries past the seed phase) so the suite stays fast.
"""

import time

import pytest

fastapi = pytest.importorskip("fastapi")

from fastapi.testclient import TestClient  # noqa: E402

from quiver.service import create_app  # noqa: E402


@pytest.fixture()
def client(tmp_path):
    app = create_app(trace_dir=tmp_path / "traces")
    return TestClient(app)


def wait_for(predicate, timeout=30.0, interval=0.02):
    deadline = time.time() + timeout
    while time.time() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    raise TimeoutError("condition not reached")


def next_query(client, sid, timeout=30.0):
    """Poll until a query is pending or the session finishes."""
    def step():
        p = client.get(f"/sessions/{sid}/pending").json()
        if p["state"] == "finished" or p["query"] is not None:
            return p
        return None
    return wait_for(step, timeout)


def drive(client, sid, ps_answer="A", ia_answer=-0.1, on_answer=None):
    """Answer every query until the session finishes; returns #answers."""
    answered = 0
    while True:
        p = next_query(client, sid)
        if p["state"] == "finished":
            return answered
        q = p["query"]
        answer = ps_answer if q["kind"] == "PS" else ia_answer
        r = client.post(f"/sessions/{sid}/answers",
                        json={"query_id": q["id"], "answer": answer})
        assert r.status_code == 200, r.text
        assert r.json() == {"accepted": True, "state": "computing"}
        answered += 1
        if on_answer:
            on_answer(q, p)


def make_session(client, **overrides):
    body = {"problem": "dtlz2-3", "budget": 103.0, "policy": "PSOnly",
            "dm": "human", "seed": 0, "query_timeout": 30.0}
    body.update(overrides)
    r = client.post("/sessions", json=body)
    assert r.status_code == 201, r.text
    return r.json()["id"]


# ------------------------------------------------------------- creation

def test_synthetic_demo_runs_to_result(client):
    r = client.post("/sessions", json={"problem": "dtlz2-3", "budget": 150.0,
                                       "dm": "synthetic", "seed": 3})
    assert r.status_code == 201
    assert r.json()["state"] in ("computing", "finished")
    sid = r.json()["id"]
    res = wait_for(lambda: (lambda j: j if j["state"] == "finished" else None)(
        client.get(f"/sessions/{sid}/result").json()))
    assert res["regret"] is not None and res["regret"] >= 0.0
    assert res["recommendation"]["labels"] == ["f1", "f2", "f3"]
    assert len(res["recommendation"]["f"]) == 3
    spend = res["spend"]
    assert spend["total"] == pytest.approx(
        spend["eval"] + spend["ps"] + spend["ia"])
    assert spend["total"] <= 150.0 + 1e-9
    assert res["entropy"]["final"] <= res["entropy"]["initial"] + 1e-9


def test_concurrent_sessions_are_independent(client):
    a = make_session(client, budget=101.0)
    b = make_session(client, budget=102.0, seed=5)
    assert a != b
    pa = client.get(f"/sessions/{a}/pending").json()
    pb = client.get(f"/sessions/{b}/pending").json()
    assert pa["status"]["budget"] == 101.0
    assert pb["status"]["budget"] == 102.0
    # draining one session leaves the other still waiting
    drive(client, a)
    state_b = client.get(f"/sessions/{b}/pending").json()["state"]
    assert state_b in ("awaiting_answer", "computing")
    drive(client, b)


def test_create_rejections(client):
    r = client.post("/sessions", json={"problem": "not-a-problem"})
    assert r.status_code == 422
    assert r.json()["detail"][0]["loc"] == ["body", "problem"]
    r = client.post("/sessions", json={"problem": "dtlz2-3",
                                       "policy": "Greedy"})
    assert r.status_code == 422
    r = client.post("/sessions", json={"problem": "dtlz2-3", "budget": -5})
    assert r.status_code == 422
    r = client.post("/sessions", json={"problem": "dtlz2-3", "dm": "psychic"})
    assert r.status_code == 422
    r = client.post("/sessions", json={})  # missing required field
    assert r.status_code == 422


# ----------------------------------------------------------- query flow

def test_ps_query_shape_and_answer_mapping(client):
    # budget 103 = 20 seed evals + exactly 3 comparisons
    sid = make_session(client)
    p = next_query(client, sid)
    q = p["query"]
    assert q["kind"] == "PS"
    assert q["dim"] is None
    assert len(q["outcome_a"]) == 3 and len(q["outcome_b"]) == 3
    assert q["labels"] == ["f1", "f2", "f3"]
    assert q["instruction"]
    # objective vectors are shown in objective space (all nonnegative
    # for this problem), not the internal negated form
    assert all(v >= 0.0 for v in q["outcome_a"] + q["outcome_b"])
    n = drive(client, sid, ps_answer="B")
    assert n == 3
    trace = client.get(f"/sessions/{sid}/trace").json()
    responses = [s["payload"]["response"] for s in trace["steps"]
                 if s["kind"] == "PS"]
    assert responses == [0.0, 0.0, 0.0]          # "B" means 0


def test_ps_answer_a_maps_to_one(client):
    sid = make_session(client, budget=101.0)     # exactly 1 comparison
    assert drive(client, sid, ps_answer="A") == 1
    trace = client.get(f"/sessions/{sid}/trace").json()
    responses = [s["payload"]["response"] for s in trace["steps"]
                 if s["kind"] == "PS"]
    assert responses == [1.0]


def test_ia_query_shape_and_passthrough(client):
    # 100 seed + 2 adjustments at 1.15 fits in 103
    sid = make_session(client, policy="IAOnly")
    p = next_query(client, sid)
    q = p["query"]
    assert q["kind"] == "IA"
    assert isinstance(q["dim"], int) and 0 <= q["dim"] < 3
    assert f"f{q['dim'] + 1}" in q["instruction"]
    assert drive(client, sid, ia_answer=-0.4) == 2
    trace = client.get(f"/sessions/{sid}/trace").json()
    ia_steps = [s for s in trace["steps"] if s["kind"] == "IA"]
    assert [s["payload"]["response"] for s in ia_steps] == [-0.4, -0.4]
    assert all("dim" in s["payload"] for s in ia_steps)


# ---------------------------------------------------------- exactly-once

def test_duplicate_answer_conflict(client):
    sid = make_session(client)
    q = next_query(client, sid)["query"]
    body = {"query_id": q["id"], "answer": "A"}
    assert client.post(f"/sessions/{sid}/answers", json=body).status_code \
        == 200
    dup = client.post(f"/sessions/{sid}/answers", json=body)
    assert dup.status_code == 409
    assert q["id"] in dup.json()["detail"]
    # the optimizer's query count is unaffected by the rejected duplicate
    drive(client, sid)
    res = client.get(f"/sessions/{sid}/result").json()
    assert res["counts"]["n_ps"] == 3


def test_unknown_query_and_session(client):
    sid = make_session(client, budget=101.0)
    next_query(client, sid)
    r = client.post(f"/sessions/{sid}/answers",
                    json={"query_id": "q999", "answer": "A"})
    assert r.status_code == 404
    r = client.post("/sessions/nope/answers",
                    json={"query_id": "q1", "answer": "A"})
    assert r.status_code == 404
    assert client.get("/sessions/nope/pending").status_code == 404
    assert client.get("/sessions/nope/result").status_code == 404
    assert client.get("/sessions/nope/trace").status_code == 404
    drive(client, sid)


def test_answer_validation_by_kind(client):
    sid = make_session(client, budget=101.0)
    q = next_query(client, sid)["query"]
    r = client.post(f"/sessions/{sid}/answers",
                    json={"query_id": q["id"], "answer": 0.5})
    assert r.status_code == 422
    assert r.json()["detail"][0]["loc"] == ["body", "answer"]
    r = client.post(f"/sessions/{sid}/answers",
                    json={"query_id": q["id"], "answer": "C"})
    assert r.status_code == 422
    # the query survives rejected submissions
    p = client.get(f"/sessions/{sid}/pending").json()
    assert p["query"]["id"] == q["id"]
    drive(client, sid)


def test_ia_rejects_text(client):
    sid = make_session(client, policy="IAOnly", budget=101.15)
    q = next_query(client, sid)["query"]
    r = client.post(f"/sessions/{sid}/answers",
                    json={"query_id": q["id"], "answer": "abc"})
    assert r.status_code == 422
    drive(client, sid, ia_answer=0.2)


# ------------------------------------------------------ status and trace

def test_spent_is_monotone_across_polls(client):
    sid = make_session(client)
    seen = []

    def record(q, poll):
        seen.append(poll["status"]["spent"])

    drive(client, sid, on_answer=record)
    seen.append(client.get(f"/sessions/{sid}/pending").json()
                ["status"]["spent"])
    assert all(b >= a for a, b in zip(seen, seen[1:]))
    assert seen[-1] == pytest.approx(103.0)


def test_result_before_finish_has_no_recommendation(client):
    sid = make_session(client)
    next_query(client, sid)
    res = client.get(f"/sessions/{sid}/result").json()
    assert res["state"] == "awaiting_answer"
    assert res["recommendation"] is None
    assert res["regret"] is None
    assert res["entropy"]["current"] is not None
    drive(client, sid)
    res = client.get(f"/sessions/{sid}/result").json()
    assert res["state"] == "finished"
    assert res["recommendation"] is not None


def test_trace_grows_then_completes(client, tmp_path):
    sid = make_session(client)
    next_query(client, sid)
    partial = client.get(f"/sessions/{sid}/trace").json()
    assert not partial["complete"]
    assert partial["steps"][0]["kind"] == "Seed"
    assert partial["result"] is None
    drive(client, sid)
    full = client.get(f"/sessions/{sid}/trace").json()
    assert full["complete"]
    assert full["result"]["summary"]["n_ps"] == 3
    kinds = [s["kind"] for s in full["steps"]]
    assert kinds.count("PS") == 3


def test_finished_trace_flushed_to_file(tmp_path):
    app = create_app(trace_dir=tmp_path / "spool")
    client = TestClient(app)
    r = client.post("/sessions", json={"problem": "dtlz2-3", "budget": 110.0,
                                       "dm": "synthetic", "seed": 1})
    sid = r.json()["id"]
    wait_for(lambda: client.get(f"/sessions/{sid}/result").json()["state"]
             == "finished")
    assert (tmp_path / "spool" / f"{sid}.jsonl").exists()


# ---------------------------------------------------------------- timeout

def test_unanswered_queries_time_out_as_refusals(client):
    sid = make_session(client, query_timeout=0.1)
    res = wait_for(lambda: (lambda j: j if j["state"] == "finished" else
                            None)(client.get(f"/sessions/{sid}/result")
                                  .json()),
                   timeout=60.0, interval=0.2)
    # nothing was ever answered: no query spend, seed evaluations only
    assert res["counts"]["n_ps"] == 0
    assert res["spend"]["total"] == pytest.approx(100.0)
    trace = client.get(f"/sessions/{sid}/trace").json()
    refusals = [s for s in trace["steps"] if s["kind"] == "Refusal"]
    assert len(refusals) == 11
    assert all(s["cost"] == 0.0 for s in refusals)
