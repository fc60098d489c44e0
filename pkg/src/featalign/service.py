"""Live correction sessions over HTTP/WebSocket.

Each session wraps one episode engine so a person (or a script) can play the
human: inspect the state, drag a waypoint, and watch the detection, diagnosis,
and update events stream back. The service adds no learning math of its own --
drags become joint torques via the Jacobian transpose and feed the exact same
engine the batch harness uses.

Phases: planning -> awaiting_input -> (diagnosing, within the correction
request) -> updating -> ... -> done. ``step`` advances planning/updating;
sessions with ``use_oracle`` substitute the scripted human for drags.
"""

from __future__ import annotations

import asyncio
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import arm
from .episode import EpisodeEngine, _jsonable
from .errors import ScenarioError, SessionError
from .features import TrainedFeature
from .scenario import Scenario, scenario_from_dict
from .trajectory import CorrectionEvent

SNAPSHOT_SCHEMA_VERSION = 1
MAX_TORQUE_NORM = 5.0


class CreateSessionRequest(BaseModel):
    scenario: dict | None = None  # inline scenario document; None = server default
    use_oracle: bool = True


class DragCorrection(BaseModel):
    waypoint_index: int
    drag: list[float] = Field(min_length=2, max_length=2)  # workspace meters


class Session:
    def __init__(self, session_id: str, scenario: Scenario, use_oracle: bool):
        self.id = session_id
        self.scenario = scenario
        self.use_oracle = use_oracle
        self.engine = EpisodeEngine(scenario)
        self.phase = "planning"
        self.lock = threading.Lock()

    # -- phase transitions -------------------------------------------------

    def _after_plan(self) -> None:
        if self.engine.step_no >= self.scenario.budget:
            self.engine.finish("budget_exhausted")
            self.phase = "done"
            return
        if not self.use_oracle:
            self.phase = "awaiting_input"
            return
        corr = self.engine.consult_oracle()
        if corr is None:
            self.engine.finish("converged")
            self.phase = "done"
        else:
            self._process(corr)

    def _process(self, corr: CorrectionEvent) -> None:
        self.phase = "diagnosing"
        self.engine.process_correction(corr)
        self.phase = "updating"

    def step(self) -> list[dict]:
        """Advance one loop stage; legal in planning/updating (and, for a live
        human, in awaiting_input, where it means "no correction, finish")."""
        start = len(self.engine.events)
        if self.phase == "planning":
            self.engine.plan_current(reason="initial")
            self._after_plan()
        elif self.phase == "updating":
            self.engine.apply_update_and_replan()
            self._after_plan()
        elif self.phase == "awaiting_input":
            self.engine.finish("converged")
            self.phase = "done"
        else:
            raise SessionError(f"cannot step in phase {self.phase!r}")
        return self.engine.events[start:]

    def apply_drag(self, msg: DragCorrection) -> tuple[list[dict], dict]:
        if self.phase != "awaiting_input":
            raise SessionError(f"cannot apply a correction in phase {self.phase!r}")
        traj = self.engine.current
        if not 1 <= msg.waypoint_index <= traj.steps - 1:
            raise SessionError(
                f"waypoint {msg.waypoint_index} is not interior (1..{traj.steps - 1})"
            )
        drag = np.asarray(msg.drag, dtype=float)
        if not np.all(np.isfinite(drag)):
            raise SessionError("drag must be finite")
        start = len(self.engine.events)
        jac = arm.jacobian(self.engine.model, traj.waypoints[msg.waypoint_index])
        torque = jac.T @ drag
        norm = float(np.linalg.norm(torque))
        if norm > MAX_TORQUE_NORM:
            torque = torque * (MAX_TORQUE_NORM / norm)
        ack = {
            "waypoint_index": msg.waypoint_index,
            "drag": [float(v) for v in drag],
            "torque": [float(v) for v in torque],
        }
        if norm == 0.0:
            return [], ack  # zero drag: no state change
        corr = CorrectionEvent(
            waypoint_index=msg.waypoint_index,
            torque=torque,
            timestamp=float(self.engine.step_no),
        )
        self._process(corr)
        return self.engine.events[start:], ack

    # -- views ---------------------------------------------------------------

    def snapshot(self) -> dict:
        engine = self.engine
        model = engine.model

        def traj_view(traj):
            if traj is None:
                return None
            frames = arm.fk_batch(model, traj.waypoints)
            return {
                "waypoints": traj.waypoints,
                "joints": frames,
                "ee": frames[:, -1, :],
            }

        def env_view(env):
            return {
                "label": env.label,
                "objects": [{"id": o.id, "position": o.position} for o in env.objects],
            }

        last = {"detection": None, "diagnosis": None}
        for event in reversed(engine.events):
            if event["type"] in ("detection", "recheck") and last["detection"] is None:
                last["detection"] = event
            if event["type"] == "diagnosis" and last["diagnosis"] is None:
                last["diagnosis"] = event
            if all(v is not None for v in last.values()):
                break

        return _jsonable(
            {
                "schema_version": SNAPSHOT_SCHEMA_VERSION,
                "session_id": self.id,
                "phase": self.phase,
                "status": engine.status,
                "step": engine.step_no,
                "budget": self.scenario.budget,
                "use_oracle": self.use_oracle,
                "theta": engine.theta,
                "beta_hat": engine.beta_hat,
                "e_posterior": engine.e_posterior,
                "epsilon_beta": engine.params.epsilon_beta,
                "arm": {
                    "base_position": model.base_position,
                    "link_lengths": list(model.link_lengths),
                    "joint_limits": model.joint_limits,
                },
                "training_env": env_view(self.scenario.env_train),
                "test_env": env_view(self.scenario.env_test),
                "features": [
                    {
                        "id": f.id,
                        "anchor": f.anchor,
                        "delta_acc": f.delta_acc,
                        "width": f.width,
                        "peak": f.peak,
                    }
                    for f in engine.fs
                ],
                "trajectory": traj_view(engine.current),
                "deformed": traj_view(engine.xi_h),
                "deformation": {
                    "mu": engine.shape.mu,
                    "a_inverse": engine.shape.a_inverse,
                },
                "last_detection": last["detection"],
                "last_diagnosis": last["diagnosis"],
                "event_cursor": len(engine.events),
            }
        )


def replay_events(scenario: Scenario, events: list[dict]) -> dict:
    """Reconstruct the comparable part of a final snapshot purely from events.

    Applies plan/update/alignment/learned/cloned events to the scenario's
    initial state without running any solver; used to verify the stream is
    replayable.
    """
    features = list(scenario.feature_set)
    theta = [float(v) for v in scenario.theta_init]
    waypoints = None
    beta_hat = 0.0
    status = "running"
    for event in events:
        kind = event["type"]
        if kind == "plan":
            waypoints = event["waypoints"]
        elif kind == "update":
            theta = [float(v) for v in event["theta_after"]]
            beta_hat = float(event["beta_used"])
        elif kind == "alignment":
            for i, f in enumerate(features):
                if f.id == event["feature_id"]:
                    features[i] = f.translated(np.asarray(event["delta_applied"]))
        elif kind in ("feature_learned",):
            features.append(
                TrainedFeature(
                    id=event["feature_id"],
                    anchor=np.asarray(event["anchor"]),
                    width=float(event["width"]),
                )
            )
            if len(theta) < len(features):
                theta = theta + [0.0]
        elif kind == "feature_cloned":
            source = next(f for f in features if f.id == event["source_feature_id"])
            clone = source.translated(np.asarray(event["delta_applied"]))
            features.append(
                TrainedFeature(
                    id=event["feature_id"], anchor=clone.anchor,
                    width=clone.width, delta_acc=clone.delta_acc,
                )
            )
            src_idx = next(i for i, f in enumerate(features) if f.id == event["source_feature_id"])
            if len(theta) < len(features):
                theta = theta + [theta[src_idx]]
        elif kind == "done":
            status = event["status"]
    return _jsonable(
        {
            "theta": theta,
            "beta_hat": beta_hat,
            "status": status,
            "waypoints": waypoints,
            "features": [
                {
                    "id": f.id,
                    "anchor": f.anchor,
                    "delta_acc": f.delta_acc,
                    "width": f.width,
                    "peak": f.peak,
                }
                for f in features
            ],
        }
    )


def create_app(
    default_scenario: Scenario | None = None, static_dir: str | Path | None = None
) -> FastAPI:
    app = FastAPI(title="featalign correction service")
    sessions: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        if req.scenario is not None:
            try:
                scenario = scenario_from_dict(req.scenario)
            except ScenarioError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        elif default_scenario is not None:
            scenario = default_scenario
        else:
            raise HTTPException(
                status_code=422,
                detail="no scenario given and the server has no default",
            )
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = Session(session_id, scenario, req.use_oracle)
        return {"session_id": session_id, "phase": sessions[session_id].phase}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.snapshot()

    @app.post("/sessions/{session_id}/step")
    def step(session_id: str):
        session = get_session(session_id)
        with session.lock:
            try:
                events = session.step()
            except SessionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {"events": events, "phase": session.phase}

    @app.post("/sessions/{session_id}/correction")
    def correction(session_id: str, msg: DragCorrection):
        session = get_session(session_id)
        with session.lock:
            try:
                events, ack = session.apply_drag(msg)
            except SessionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {"events": events, "phase": session.phase, "correction": ack}

    @app.get("/sessions/{session_id}/events")
    def events_since(session_id: str, since: int = 0):
        session = get_session(session_id)
        with session.lock:
            events = session.engine.events[since:]
            return {
                "events": events,
                "cursor": len(session.engine.events),
                "phase": session.phase,
            }

    @app.websocket("/sessions/{session_id}/ws")
    async def events_ws(websocket: WebSocket, session_id: str):
        await websocket.accept()
        session = sessions.get(session_id)
        if session is None:
            await websocket.close(code=4404)
            return
        cursor = 0
        try:
            while True:
                with session.lock:
                    pending = session.engine.events[cursor:]
                    phase = session.phase
                for event in pending:
                    await websocket.send_json({"event": event, "phase": phase})
                cursor += len(pending)
                if phase == "done" and not pending:
                    await websocket.send_json({"phase": "done", "event": None})
                    break
                await asyncio.sleep(0.1)
        except WebSocketDisconnect:
            return
        await websocket.close()

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
