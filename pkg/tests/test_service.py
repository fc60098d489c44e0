import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from featalign import run_episode
from featalign.arm import jacobian
from featalign.scenario import scenario_to_dict
from featalign.service import create_app, replay_events


@pytest.fixture()
def client(aligned_scenario):
    return TestClient(create_app(default_scenario=aligned_scenario))


def make_client(scenario):
    return TestClient(create_app(default_scenario=scenario))


def create_session(client, use_oracle=True, scenario=None):
    body = {"use_oracle": use_oracle}
    if scenario is not None:
        body["scenario"] = scenario_to_dict(scenario)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 200
    return resp.json()["session_id"]


def step_until_done(client, sid, limit=40):
    events = []
    for _ in range(limit):
        body = client.post(f"/sessions/{sid}/step").json()
        events += body["events"]
        if body["phase"] == "done":
            return events
    raise AssertionError("session did not finish")


class TestSessionLifecycle:
    def test_fresh_session_state(self, client, aligned_scenario):
        sid = create_session(client)
        snap = client.get(f"/sessions/{sid}/state").json()
        assert snap["phase"] == "planning"
        assert snap["theta"] == [0.5, 0.5]
        assert snap["trajectory"] is None
        assert snap["epsilon_beta"] == aligned_scenario.learner.epsilon_beta

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/state").status_code == 404

    def test_get_state_is_pure(self, client):
        sid = create_session(client)
        client.post(f"/sessions/{sid}/step")
        a = client.get(f"/sessions/{sid}/state").content
        b = client.get(f"/sessions/{sid}/state").content
        assert a == b

    def test_step_in_done_phase_conflicts(self, client):
        sid = create_session(client)
        step_until_done(client, sid)
        assert client.post(f"/sessions/{sid}/step").status_code == 409

    def test_events_cursor_pagination(self, client):
        sid = create_session(client)
        step_until_done(client, sid)
        all_events = client.get(f"/sessions/{sid}/events").json()
        assert all_events["cursor"] == len(all_events["events"])
        tail = client.get(f"/sessions/{sid}/events", params={"since": 1}).json()
        assert tail["events"] == all_events["events"][1:]


class TestOracleEquivalence:
    def test_aligned_scenario_matches_cli(self, client, aligned_scenario):
        sid = create_session(client)
        events = step_until_done(client, sid)
        report = run_episode(aligned_scenario)
        assert events == json.loads(json.dumps(report.events))

    def test_desk_shift_matches_cli(self, desk_scenario):
        client = make_client(desk_scenario)
        sid = create_session(client)
        events = step_until_done(client, sid)
        report = run_episode(desk_scenario)
        assert events == json.loads(json.dumps(report.events))


class TestDragCorrections:
    def _to_awaiting(self, scenario):
        client = make_client(scenario)
        sid = create_session(client, use_oracle=False)
        body = client.post(f"/sessions/{sid}/step").json()
        assert body["phase"] == "awaiting_input"
        return client, sid

    def test_zero_drag_is_a_no_op(self, desk_scenario):
        client, sid = self._to_awaiting(desk_scenario)
        before = client.get(f"/sessions/{sid}/state").content
        resp = client.post(
            f"/sessions/{sid}/correction", json={"waypoint_index": 10, "drag": [0.0, 0.0]}
        )
        assert resp.status_code == 200
        assert resp.json()["events"] == []
        assert client.get(f"/sessions/{sid}/state").content == before

    def test_drag_maps_through_jacobian_transpose(self, desk_scenario):
        client, sid = self._to_awaiting(desk_scenario)
        snap = client.get(f"/sessions/{sid}/state").json()
        wp = np.array(snap["trajectory"]["waypoints"][10])
        drag = [0.0, 0.25]
        resp = client.post(
            f"/sessions/{sid}/correction", json={"waypoint_index": 10, "drag": drag}
        )
        body = resp.json()
        expected = jacobian(desk_scenario.model, wp).T @ np.array(drag)
        assert np.allclose(body["correction"]["torque"], expected)
        # the deformed end-effector moves along the drag at the pushed waypoint
        corr_event = next(e for e in body["events"] if e["type"] == "correction")
        moved = np.array(corr_event["deformed_ee"][10]) - np.array(
            snap["trajectory"]["ee"][10]
        )
        assert moved @ np.array(drag) > 0

    def test_wrong_phase_rejected(self, desk_scenario):
        client = make_client(desk_scenario)
        sid = create_session(client, use_oracle=False)
        resp = client.post(
            f"/sessions/{sid}/correction", json={"waypoint_index": 10, "drag": [0.1, 0.0]}
        )
        assert resp.status_code == 409

    def test_endpoint_indices_rejected(self, desk_scenario):
        client, sid = self._to_awaiting(desk_scenario)
        for idx in (0, desk_scenario.planner.steps):
            resp = client.post(
                f"/sessions/{sid}/correction", json={"waypoint_index": idx, "drag": [0.1, 0.0]}
            )
            assert resp.status_code == 409

    def test_step_in_awaiting_input_finishes(self, desk_scenario):
        client, sid = self._to_awaiting(desk_scenario)
        body = client.post(f"/sessions/{sid}/step").json()
        assert body["phase"] == "done"
        assert body["events"][-1]["type"] == "done"
        assert body["events"][-1]["status"] == "converged"

    def test_drag_replicating_oracle_reproduces_diagnosis(self, desk_scenario, desk_episode):
        # replay the scripted human's torque as a workspace drag: the torque is
        # (numerically) in the Jacobian-transpose range, so the least-squares
        # drag reproduces it and the whole diagnosis chain
        corr = desk_episode["corr"]
        q = desk_episode["xi_r"].waypoints[corr.waypoint_index]
        jac = jacobian(desk_scenario.model, q)
        drag, *_ = np.linalg.lstsq(jac.T, corr.torque, rcond=None)

        client, sid = self._to_awaiting(desk_scenario)
        resp = client.post(
            f"/sessions/{sid}/correction",
            json={"waypoint_index": corr.waypoint_index, "drag": [float(v) for v in drag]},
        )
        events = resp.json()["events"]
        replayed_torque = np.array(
            next(e for e in events if e["type"] == "correction")["torque"]
        )
        # the drag reproduces the torque up to its (tiny) null-space component
        cosine = replayed_torque @ corr.torque / (
            np.linalg.norm(replayed_torque) * np.linalg.norm(corr.torque)
        )
        assert cosine > 0.999
        assert np.linalg.norm(replayed_torque - corr.torque) < 0.05 * np.linalg.norm(corr.torque)

        scripted = run_episode(desk_scenario)
        expect_diag = next(e for e in scripted.events if e["type"] == "diagnosis")
        got_diag = next(e for e in events if e["type"] == "diagnosis")
        assert {p["feature_id"]: p["verdict"] for p in got_diag["per_feature"]} == {
            p["feature_id"]: p["verdict"] for p in expect_diag["per_feature"]
        }
        assert got_diag["aligned_feature_ids"] == expect_diag["aligned_feature_ids"]


class TestReplay:
    def test_event_replay_reconstructs_snapshot(self, desk_scenario):
        client = make_client(desk_scenario)
        sid = create_session(client)
        step_until_done(client, sid)
        snap = client.get(f"/sessions/{sid}/state").json()
        events = client.get(f"/sessions/{sid}/events").json()["events"]
        replayed = replay_events(desk_scenario, events)
        assert replayed["theta"] == snap["theta"]
        assert replayed["waypoints"] == snap["trajectory"]["waypoints"]
        assert replayed["features"] == snap["features"]
        assert replayed["status"] == snap["status"]


class TestWebSocket:
    def test_stream_delivers_all_events(self, desk_scenario):
        client = make_client(desk_scenario)
        sid = create_session(client)
        rest_events = step_until_done(client, sid)
        received = []
        with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
            while True:
                msg = ws.receive_json()
                if msg["event"] is None:
                    break
                received.append(msg["event"])
        assert received == json.loads(json.dumps(rest_events))


class TestInlineScenario:
    def test_create_with_inline_document(self, aligned_scenario, missing_scenario):
        client = make_client(aligned_scenario)
        sid = create_session(client, scenario=missing_scenario)
        snap = client.get(f"/sessions/{sid}/state").json()
        assert len(snap["features"]) == 2
        assert snap["test_env"]["label"] == "test"

    def test_invalid_inline_document_rejected(self, client):
        resp = client.post("/sessions", json={"scenario": {"schema_version": 1}})
        assert resp.status_code == 422
