"""Session service: start generation, query it anytime, stream metrics.

Each session owns one generation loop running in a worker thread. Control
operations (start/pause/stop/query) are applied between iterations through a
message queue; readers consume published snapshots and an append-only event
log (NDJSON on disk, replayed across restarts). A checkpoint of the full run
state is written every `checkpoint_every` iterations for crash recovery.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, StreamingResponse

from .dtree import Hyperparams, rules_to_dict, tree_to_dict
from .engine import Engine
from .generator import WalkParams
from .model import ReachabilityGraph, VulnerabilityInventory
from .query import QuerySyntaxError, parse_query, serialize_query
from .risk import AggregationStrategy
from .scenario import (
    ScenarioSpec,
    SchemaError,
    generate_scenario,
    inventory_from_dict,
    inventory_to_dict,
    network_from_dict,
    network_to_dict,
)
from .steering import SteeringParams

DEFAULT_CHECKPOINT_EVERY = 50

SORT_KEYS = ("risk", "likelihood", "impact", "length")


def _engine_params(params: dict) -> dict:
    walk = WalkParams(
        stop_probability=float(params.get("stop_probability", 0.15)),
        batch_size=int(params.get("batch_size", 100)),
        max_length=params.get("max_length"),
        entry_nodes=tuple(params["entry_nodes"]) if params.get("entry_nodes") else None,
        seed=int(params.get("seed", 0)),
    )
    strat = AggregationStrategy(
        params.get("likelihood_agg", "min"), params.get("impact_agg", "max")
    )
    steering = SteeringParams(
        epsilon_explore=float(params.get("epsilon_explore", 0.1)),
        window=int(params.get("breakdown_window", 10)),
        precision_floor=float(params.get("precision_floor", 0.3)),
        quiet_horizon=int(params.get("quiet_horizon", 20)),
    )
    hyper = Hyperparams(
        max_depth=int(params.get("max_depth", 8)),
        min_samples_leaf=int(params.get("min_samples_leaf", 5)),
        min_training_size=int(params.get("min_training_size", 100)),
        min_class_count=int(params.get("min_class_count", 10)),
    )
    return {"params": walk, "strat": strat, "steering_params": steering, "hyper": hyper}


class SessionRuntime:
    """One generation loop plus its event log and checkpoints."""

    IDLE, RUNNING, PAUSED, STOPPED, COMPLETED = (
        "idle", "running", "paused", "stopped", "completed",
    )

    def __init__(
        self,
        session_id: str,
        net: ReachabilityGraph,
        inv: VulnerabilityInventory,
        params: dict,
        directory: Path,
        checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    ):
        self.id = session_id
        self.net = net
        self.inv = inv
        self.params = params
        self.dir = directory
        self.checkpoint_every = checkpoint_every
        self.engine = Engine(net, inv, **_engine_params(params))
        self.state = self.IDLE
        self.max_iterations = params.get("max_iterations")

        self._thread: threading.Thread | None = None
        self._control: list[tuple] = []
        self._cond = threading.Condition()
        self._events: list[dict] = []
        self._seq = 0
        self._event_fh = None
        self._pending_query: tuple | None = None

    # -- persistence -------------------------------------------------------

    def save_meta(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        meta = {
            "id": self.id,
            "network": network_to_dict(self.net),
            "inventory": inventory_to_dict(self.inv),
            "params": self.params,
        }
        (self.dir / "meta.json").write_text(json.dumps(meta, sort_keys=True))

    def checkpoint(self) -> None:
        data = self.engine.checkpoint_state()
        tmp = self.dir / "checkpoint.json.tmp"
        tmp.write_text(json.dumps(data))
        os.replace(tmp, self.dir / "checkpoint.json")

    @classmethod
    def load(cls, directory: Path, checkpoint_every: int) -> "SessionRuntime":
        meta = json.loads((directory / "meta.json").read_text())
        net = network_from_dict(meta["network"])
        inv = inventory_from_dict(meta["inventory"], net)
        runtime = cls(
            meta["id"], net, inv, meta.get("params", {}), directory, checkpoint_every
        )
        checkpoint_file = directory / "checkpoint.json"
        if checkpoint_file.exists():
            runtime.engine.restore_state(json.loads(checkpoint_file.read_text()))
        events_file = directory / "events.ndjson"
        if events_file.exists():
            with events_file.open() as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        runtime._events.append(json.loads(line))
            if runtime._events:
                runtime._seq = runtime._events[-1]["seq"] + 1
        return runtime

    # -- events --------------------------------------------------------------

    def _emit(self, record: dict) -> None:
        with self._cond:
            record = dict(record)
            record["seq"] = self._seq
            self._seq += 1
            self._events.append(record)
            if self._event_fh is None:
                self.dir.mkdir(parents=True, exist_ok=True)
                self._event_fh = (self.dir / "events.ndjson").open("a")
            self._event_fh.write(json.dumps(record) + "\n")
            self._event_fh.flush()
            self._cond.notify_all()

    def events_since(self, index: int) -> list[dict]:
        with self._cond:
            return self._events[index:]

    # -- control -------------------------------------------------------------

    def start(self) -> None:
        if self.state == self.RUNNING:
            raise StateConflict("session already running")
        if self.state in (self.STOPPED, self.COMPLETED):
            raise StateConflict(f"session is {self.state}")
        if self.state == self.PAUSED:
            with self._cond:
                self._control.append(("resume",))
                self._cond.notify_all()
            return
        self.state = self.RUNNING
        self._emit({"event": "started", "iter": self.engine.iteration})
        self._thread = threading.Thread(target=self._run_loop, daemon=True)
        self._thread.start()

    def pause(self) -> None:
        if self.state != self.RUNNING:
            raise StateConflict(f"cannot pause a {self.state} session")
        with self._cond:
            self._control.append(("pause",))

    def stop(self) -> None:
        if self.state in (self.STOPPED, self.COMPLETED):
            raise StateConflict(f"session already {self.state}")
        if self.state == self.IDLE:
            self.state = self.STOPPED
            self._emit({"event": "stopped", "iter": self.engine.iteration})
            return
        with self._cond:
            self._control.append(("stop",))
            self._cond.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=10)

    def submit_query(self, text: str) -> dict:
        ast = parse_query(text)  # surface syntax errors before acceptance
        applied_at = self.engine.iteration + 1
        if self.state in (self.IDLE, self.PAUSED, self.STOPPED, self.COMPLETED):
            self.engine.submit_query(ast)
            self._emit(
                {"event": "query_accepted", "iter": self.engine.iteration,
                 "query": serialize_query(ast)}
            )
        else:
            with self._cond:
                self._control.append(("query", ast))
        return {"query": serialize_query(ast), "applies_at_iteration": applied_at}

    # -- loop ----------------------------------------------------------------

    def _run_loop(self) -> None:
        paused = False
        while True:
            with self._cond:
                while True:
                    while self._control:
                        msg = self._control.pop(0)
                        if msg[0] == "stop":
                            self.state = self.STOPPED
                            self._cond.notify_all()
                        elif msg[0] == "pause":
                            paused = True
                            self.state = self.PAUSED
                        elif msg[0] == "resume":
                            paused = False
                            self.state = self.RUNNING
                        elif msg[0] == "query":
                            self.engine.submit_query(msg[1])
                            self._emit(
                                {"event": "query_accepted", "iter": self.engine.iteration,
                                 "query": serialize_query(msg[1])}
                            )
                    if self.state == self.STOPPED:
                        break
                    if paused:
                        self._cond.wait(timeout=0.2)
                        continue
                    break
            if self.state == self.STOPPED:
                self._emit({"event": "stopped", "iter": self.engine.iteration})
                self.checkpoint()
                return
            # apply a queued query exactly at the iteration boundary
            rep = self.engine.step()
            for ev in rep.events:
                self._emit(ev)
            self._emit(dict(rep.record))
            if self.engine.iteration % self.checkpoint_every == 0:
                self.checkpoint()
            if (
                self.max_iterations is not None
                and self.engine.iteration >= int(self.max_iterations)
            ):
                self.state = self.COMPLETED
                self._emit({"event": "completed", "iter": self.engine.iteration})
                self.checkpoint()
                return

    # -- snapshots -----------------------------------------------------------

    def snapshot(self, sort: str = "risk", limit: int = 50) -> dict:
        if sort not in SORT_KEYS:
            raise ValueError(f"sort must be one of {SORT_KEYS}")
        records = list(self.engine.records)
        flags = self.engine.relevance_flags()
        if sort == "length":
            records.sort(key=lambda rec: (rec.features.length, rec.signature))
        else:
            records.sort(key=lambda rec: (-getattr(rec.features, sort), rec.signature))

        def row(rec, is_answer):
            steps = []
            for k, vuln_id in enumerate(rec.path.vulns):
                host = rec.path.states[k + 1]
                steps.append(
                    {"host": host, "vuln": vuln_id, "cvss": self.engine.ix.vuln_cvss[rec.rows[k]]}
                )
            return {
                "states": list(rec.path.states),
                "vulns": list(rec.path.vulns),
                "steps": steps,
                "likelihood": rec.features.likelihood,
                "impact": rec.features.impact,
                "risk": rec.features.risk,
                "length": rec.features.length,
                "is_answer": bool(is_answer),
            }

        flag_by_sig = {}
        if flags is not None:
            flag_by_sig = {rec.signature: f for rec, f in zip(self.engine.records, flags)}
        answers = [rec for rec in records if flag_by_sig.get(rec.signature)]
        state = self.engine.state
        stability = None
        if state.min_stability_series:
            stability = {
                f: series[-1] for f, series in state.stability_series.items() if series
            }
        steer = self.engine.steer
        return {
            "session": self.id,
            "state": self.state,
            "iter": self.engine.iteration,
            "total_paths": len(records),
            "phase": state.current_phase(),
            "stability": stability,
            "query": serialize_query(self.engine.query) if self.engine.query else None,
            "steering_active": self.engine.steering_active,
            "converged": self.engine.converged,
            "precision_history": [
                [i, p] for i, p in (steer.precision_history if steer else [])
            ],
            "answers": [row(rec, True) for rec in answers[:limit]],
            "paths": [row(rec, flag_by_sig.get(rec.signature, False)) for rec in records[:limit]],
        }


class StateConflict(RuntimeError):
    pass


class SessionStore:
    def __init__(self, data_dir: str | Path, checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY):
        self.data_dir = Path(data_dir)
        self.checkpoint_every = checkpoint_every
        self.sessions: dict[str, SessionRuntime] = {}
        self.data_dir.mkdir(parents=True, exist_ok=True)
        for meta in sorted(self.data_dir.glob("*/meta.json")):
            runtime = SessionRuntime.load(meta.parent, checkpoint_every)
            self.sessions[runtime.id] = runtime

    def create(self, net, inv, params: dict) -> SessionRuntime:
        session_id = params.get("id") or uuid.uuid4().hex[:12]
        runtime = SessionRuntime(
            session_id, net, inv, params, self.data_dir / session_id, self.checkpoint_every
        )
        runtime.save_meta()
        if params.get("query"):
            runtime.engine.submit_query(parse_query(params["query"]))
        self.sessions[session_id] = runtime
        return runtime

    def get(self, session_id: str) -> SessionRuntime:
        runtime = self.sessions.get(session_id)
        if runtime is None:
            raise KeyError(session_id)
        return runtime

    def shutdown(self) -> None:
        for runtime in self.sessions.values():
            if runtime.state == SessionRuntime.RUNNING:
                try:
                    runtime.stop()
                except StateConflict:
                    pass


def create_app(
    data_dir: str | Path, checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY
) -> FastAPI:
    from contextlib import asynccontextmanager

    store = SessionStore(data_dir, checkpoint_every)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        store.shutdown()

    app = FastAPI(title="agx session service", lifespan=lifespan)
    app.state.store = store

    @app.exception_handler(SchemaError)
    async def schema_error(_, exc: SchemaError):
        return JSONResponse(status_code=400, content={"detail": str(exc), "pointer": exc.pointer})

    @app.exception_handler(QuerySyntaxError)
    async def query_error(_, exc: QuerySyntaxError):
        return JSONResponse(
            status_code=400, content={"detail": str(exc), "position": exc.position}
        )

    @app.exception_handler(StateConflict)
    async def conflict(_, exc: StateConflict):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def missing(_, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": f"unknown session {exc}"})

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        params = payload.get("params", {})
        if "scenario" in payload and payload["scenario"] is not None:
            net, inv = generate_scenario(ScenarioSpec.from_dict(payload["scenario"]))
        else:
            net = network_from_dict(payload.get("network"))
            inv = inventory_from_dict(payload.get("inventory"), net)
        runtime = store.create(net, inv, params)
        return {"id": runtime.id, "state": runtime.state, "hosts": len(net.nodes)}

    @app.get("/sessions")
    def list_sessions():
        return [
            {"id": r.id, "state": r.state, "iter": r.engine.iteration}
            for r in store.sessions.values()
        ]

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str):
        r = store.get(session_id)
        return {
            "id": r.id,
            "state": r.state,
            "iter": r.engine.iteration,
            "total_paths": len(r.engine.records),
            "query": serialize_query(r.engine.query) if r.engine.query else None,
            "steering_active": r.engine.steering_active,
            "converged": r.engine.converged,
        }

    @app.post("/sessions/{session_id}/start")
    def start(session_id: str):
        runtime = store.get(session_id)
        runtime.start()
        return {"state": runtime.state}

    @app.post("/sessions/{session_id}/pause")
    def pause(session_id: str):
        runtime = store.get(session_id)
        runtime.pause()
        time.sleep(0.02)
        return {"state": runtime.state}

    @app.post("/sessions/{session_id}/stop")
    def stop(session_id: str):
        runtime = store.get(session_id)
        runtime.stop()
        return {"state": runtime.state}

    @app.post("/sessions/{session_id}/query")
    def submit_query(session_id: str, payload: dict = Body(...)):
        runtime = store.get(session_id)
        text = payload.get("query")
        if not isinstance(text, str):
            raise HTTPException(status_code=400, detail="body must carry a 'query' string")
        return runtime.submit_query(text)

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(
        session_id: str,
        sort: str = Query("risk"),
        limit: int = Query(50, ge=1, le=10_000),
    ):
        runtime = store.get(session_id)
        try:
            return runtime.snapshot(sort=sort, limit=limit)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/sessions/{session_id}/diagnostics")
    def diagnostics(session_id: str):
        runtime = store.get(session_id)
        steer = runtime.engine.steer
        return {
            "query": serialize_query(runtime.engine.query) if runtime.engine.query else None,
            "steering_active": runtime.engine.steering_active,
            "converged": runtime.engine.converged,
            "rules": rules_to_dict(steer.rules) if steer and steer.rules else None,
            "tree": tree_to_dict(steer.tree) if steer and steer.tree else None,
            "labeled_paths": len(steer.labeled) if steer else 0,
        }

    @app.get("/sessions/{session_id}/events")
    def events(
        session_id: str,
        from_iter: int = Query(0, alias="from"),
        follow: bool = Query(True),
    ):
        runtime = store.get(session_id)

        def stream():
            index = 0
            while True:
                batch = runtime.events_since(index)
                index += len(batch)
                for record in batch:
                    if record.get("iter", 0) >= from_iter:
                        yield json.dumps(record) + "\n"
                if runtime.state in (SessionRuntime.STOPPED, SessionRuntime.COMPLETED):
                    if not runtime.events_since(index):
                        return
                    continue
                if not follow:
                    return
                with runtime._cond:
                    if len(runtime._events) == index:
                        runtime._cond.wait(timeout=0.2)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    return app
