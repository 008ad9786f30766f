"""HTTP boundary for live decision-maker sessions.

One optimizer run per session. The run executes on a background thread
whose decision maker blocks on a single-slot handoff; HTTP handlers
publish the pending query, accept exactly one answer per query id, and
serve live status.  The documented endpoint schema lives in
docs/service_api.md and is what the browser console consumes.
"""

from __future__ import annotations

import secrets
import tempfile
import threading
import time
from pathlib import Path

import numpy as np

try:
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware
    from pydantic import BaseModel
except ImportError as exc:                                # pragma: no cover
    raise ImportError(
        "the session service needs the optional [service] dependencies "
        "(pip install 'quiver[service]')") from exc

from quiver import harness
from quiver.decision_makers import HumanBridgeDM, SyntheticDM, draw_dm_weights
from quiver.metrics import utility_regret
from quiver.orchestrator import POLICIES, RunConfig, recommend, run
from quiver.problems import (
    default_oracle_resolution,
    get_problem,
    sample_front,
)
from quiver.preferences import entropy

QUERY_INSTRUCTIONS = {
    "PS": "Pick the outcome you prefer.",
    "IA": ("Imagine adjusting objective {label} of outcome B until the two "
           "outcomes feel equally good, and enter that signed adjustment "
           "(positive = B needed to get better)."),
}


class DuplicateAnswer(Exception):
    pass


class UnknownQuery(Exception):
    pass


class Handoff:
    """Single-slot query/answer exchange between the run thread and HTTP.

    The optimizer publishes one pending query and blocks; an HTTP handler
    delivers at most one answer per query id.  Timeouts return None, which
    the bridge converts into a zero-cost refusal.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._ready = threading.Event()
        self._pending = None        # dict: id, kind, payload
        self._answer = None
        self._answered: set = set()
        self._counter = 0

    def ask(self, kind, payload, timeout):
        with self._lock:
            self._counter += 1
            pending = {"id": f"q{self._counter}", "kind": kind,
                       "payload": payload}
            self._pending = pending
            self._answer = None
            self._ready.clear()
        answered = self._ready.wait(timeout)
        with self._lock:
            self._pending = None
            return self._answer if answered else None

    def submit(self, query_id, value):
        with self._lock:
            if query_id in self._answered:
                raise DuplicateAnswer(query_id)
            if self._pending is None or self._pending["id"] != query_id:
                raise UnknownQuery(query_id)
            self._answered.add(query_id)
            self._answer = value
            self._ready.set()

    def pending(self):
        with self._lock:
            if self._pending and self._pending["id"] not in self._answered:
                return dict(self._pending)
            return None


class Session:
    """One optimizer run plus everything the HTTP layer needs to show it."""

    def __init__(self, body: "CreateSession", trace_dir: Path):
        self.id = secrets.token_hex(8)
        self.lock = threading.Lock()
        self.trace_dir = trace_dir
        self.spec = get_problem(body.problem)
        self.labels = [f"f{i + 1}" for i in range(self.spec.m)]
        self.dm_kind = body.dm
        self.handoff = Handoff()

        streams = harness.derive_streams(body.seed, body.problem,
                                         body.policy, body.seed, None)
        self.config = RunConfig(problem=body.problem, policy=body.policy,
                                seed=streams["run"], budget=body.budget)
        if body.dm == "synthetic":
            self.w_star = draw_dm_weights(
                self.spec.m, np.random.default_rng(streams["w_star"]))
            self.dm = SyntheticDM(
                self.w_star, np.random.default_rng(streams["dm_noise"]))
        else:
            self.w_star = None
            self.dm = HumanBridgeDM(self.handoff, timeout=body.query_timeout)
        self.streams = streams

        self.started = False
        self.trace = None
        self.error = None
        self.regret = None
        self.steps_so_far: list = []
        # before the first step the posterior is uniform over S particles
        h0 = float(np.log(self.config.particles))
        self.status = {"spent": 0.0, "remaining": body.budget,
                       "budget": body.budget, "n_eval": 0, "n_ps": 0,
                       "n_ia": 0, "entropy": h0, "entropy_min": h0,
                       "recommendation": None}
        self.thread = threading.Thread(target=self._main, daemon=True,
                                       name=f"session-{self.id}")

    # -- run thread ------------------------------------------------------

    def start(self):
        self.started = True
        self.thread.start()

    def _observe(self, step, state):
        h = entropy(state.ps)
        _, f_rec = recommend(
            state.ps, state.archive,
            uniform_weights=(self.config.policy == "EvalOnly"))
        with self.lock:
            self.steps_so_far.append(step.to_dict())
            prev_min = self.status["entropy_min"]
            self.status = {
                "spent": state.spent,
                "remaining": state.remaining,
                "budget": self.config.budget,
                "n_eval": len(state.archive),
                "n_ps": state.counts["PS"],
                "n_ia": state.counts["IA"],
                "entropy": h,
                "entropy_min": h if prev_min is None else min(prev_min, h),
                "recommendation": {"f": f_rec.tolist(),
                                   "labels": self.labels},
            }

    def _main(self):
        try:
            trace = run(self.config, self.dm, observer=self._observe)
        except Exception as exc:                          # noqa: BLE001
            with self.lock:
                self.error = f"{type(exc).__name__}: {exc}"
            return
        regret = None
        if self.w_star is not None:
            front = sample_front(self.spec,
                                 default_oracle_resolution(self.spec))
            regret = utility_regret(trace, self.w_star, front)
        path = self.trace_dir / f"{self.id}.jsonl"
        harness.write_trace(path, self.id, trace, self.w_star, self.streams,
                            seed_index=0)
        with self.lock:
            self.trace = trace
            self.regret = regret

    # -- views -----------------------------------------------------------

    def state(self) -> str:
        with self.lock:
            if self.trace is not None or self.error is not None:
                return "finished"
        if self.handoff.pending() is not None:
            return "awaiting_answer"
        return "computing" if self.started else "idle"

    def pending_view(self):
        pending = self.handoff.pending()
        if pending is None:
            return None
        payload = pending["payload"]
        # queries travel in value space; humans see objective vectors
        outcome_a = (-np.asarray(payload["a_value"])).tolist()
        outcome_b = (-np.asarray(payload["b_value"])).tolist()
        dim = payload.get("dim")
        instruction = QUERY_INSTRUCTIONS[pending["kind"]]
        if pending["kind"] == "IA":
            instruction = instruction.format(label=self.labels[dim])
        return {"id": pending["id"], "kind": pending["kind"],
                "outcome_a": outcome_a, "outcome_b": outcome_b,
                "dim": dim, "labels": self.labels,
                "instruction": instruction}

    def status_view(self) -> dict:
        with self.lock:
            return dict(self.status)

    def result_view(self) -> dict:
        state = self.state()
        with self.lock:
            trace, error, regret = self.trace, self.error, self.regret
            status = dict(self.status)
        out = {"id": self.id, "state": state, "error": error,
               "recommendation": None, "regret": None,
               "spend": None, "entropy": None}
        if trace is not None:
            s = trace.summary
            out["recommendation"] = {
                "x": np.asarray(trace.final_x).tolist(),
                "f": np.asarray(trace.final_f).tolist(),
                "labels": self.labels}
            out["spend"] = {"eval": s["spend_eval"], "ps": s["spend_ps"],
                            "ia": s["spend_ia"], "total": s["total_spend"]}
            out["counts"] = {"n_eval": s["n_eval"], "n_ps": s["n_ps"],
                             "n_ia": s["n_ia"]}
            out["entropy"] = {"initial": float(np.log(self.config.particles)),
                              "final": s["final_entropy"],
                              "min": status["entropy_min"]}
            out["regret"] = regret
        else:
            out["spend"] = {"total": status["spent"]}
            out["counts"] = {"n_eval": status["n_eval"],
                             "n_ps": status["n_ps"],
                             "n_ia": status["n_ia"]}
            out["entropy"] = {"initial": float(np.log(self.config.particles)),
                              "current": status["entropy"],
                              "min": status["entropy_min"]}
            out["status"] = status
        return out

    def trace_view(self) -> dict:
        with self.lock:
            complete = self.trace is not None
            steps = list(self.steps_so_far)
            result = None
            if complete:
                result = {
                    "final_x": np.asarray(self.trace.final_x).tolist(),
                    "final_f": np.asarray(self.trace.final_f).tolist(),
                    "summary": self.trace.summary}
        return {"run": self.id, "config": self._config_dict(),
                "steps": steps, "result": result, "complete": complete}

    def _config_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self.config)


class CreateSession(BaseModel):
    problem: str
    budget: float = 500.0
    policy: str = "QUIVER"
    dm: str = "human"
    seed: int = 0
    query_timeout: float = 600.0


class Answer(BaseModel):
    query_id: str
    answer: str | float


def _validation_error(field: str, msg: str):
    return HTTPException(status_code=422, detail=[
        {"loc": ["body", field], "msg": msg, "type": "value_error"}])


def create_app(trace_dir=None) -> FastAPI:
    app = FastAPI(title="quiver session service")
    # the browser console may be served from any origin (or file://)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.sessions = {}
    app.state.trace_dir = Path(trace_dir or tempfile.mkdtemp(
        prefix="quiver-sessions-"))
    app.state.trace_dir.mkdir(parents=True, exist_ok=True)

    def get_session(session_id: str) -> Session:
        session = app.state.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"no session {session_id!r}")
        return session

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        if body.policy not in POLICIES:
            raise _validation_error("policy",
                                    f"unknown policy {body.policy!r}")
        if body.dm not in ("human", "synthetic"):
            raise _validation_error("dm", "dm must be 'human' or 'synthetic'")
        if body.budget <= 0:
            raise _validation_error("budget", "budget must be positive")
        try:
            session = Session(body, app.state.trace_dir)
        except KeyError as exc:
            raise _validation_error("problem", str(exc.args[0]))
        app.state.sessions[session.id] = session
        session.start()
        # tiny grace period so trivial sessions report an honest state
        time.sleep(0.01)
        return {"id": session.id, "state": session.state()}

    @app.get("/sessions/{session_id}/pending")
    def get_pending(session_id: str):
        session = get_session(session_id)
        return {"state": session.state(),
                "query": session.pending_view(),
                "status": session.status_view()}

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: Answer):
        session = get_session(session_id)
        pending = session.handoff.pending()
        kind = pending["kind"] if (pending and
                                   pending["id"] == body.query_id) else None
        if kind == "PS":
            if not isinstance(body.answer, str) or \
                    body.answer.upper() not in ("A", "B"):
                raise _validation_error(
                    "answer", "a comparison answer must be 'A' or 'B'")
            value = 1 if body.answer.upper() == "A" else 0
        elif kind == "IA":
            if isinstance(body.answer, str):
                raise _validation_error(
                    "answer", "an adjustment answer must be a finite number")
            value = float(body.answer)
            if not np.isfinite(value):
                raise _validation_error(
                    "answer", "an adjustment answer must be a finite number")
        else:
            value = body.answer     # resolved to 404/409 by the handoff
        try:
            session.handoff.submit(body.query_id, value)
        except DuplicateAnswer:
            raise HTTPException(
                status_code=409,
                detail=f"query {body.query_id!r} was already answered")
        except UnknownQuery:
            raise HTTPException(
                status_code=404,
                detail=f"no pending query {body.query_id!r}")
        return {"accepted": True, "state": "computing"}

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        return get_session(session_id).result_view()

    @app.get("/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        return get_session(session_id).trace_view()

    return app
