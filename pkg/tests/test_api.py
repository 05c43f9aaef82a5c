import dataclasses
import json

import pytest
from fastapi.testclient import TestClient

from agora.api import build_app
from agora.config import baseline_config
from agora.runtime import assemble

GOLDEN = "tests/fixtures/golden_rules.txt"


def client(**overrides) -> TestClient:
    config = dataclasses.replace(baseline_config(), rules_path=GOLDEN,
                                 n_samples=1, **overrides)
    return TestClient(build_app(assemble(config)))


@pytest.fixture
def api() -> TestClient:
    return client()


@pytest.fixture
def human_api() -> TestClient:
    return client(reflectors=("human",))


class TestGoals:
    def test_submit_goal_returns_run_id(self, api):
        response = api.post("/goals", json={"goal_text": "compute: 2+3"})
        assert response.status_code == 200
        body = response.json()
        assert body["run_id"].startswith("run-")
        assert body["status"] == "complete"

    def test_run_snapshot_lists_steps(self, api):
        run_id = api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        view = api.get(f"/runs/{run_id}").json()
        assert view["status"] == "complete"
        assert view["final_answer"] == "5"
        assert [s["step_id"] for s in view["plan"]["steps"]] == ["s1"]

    def test_unknown_run_404(self, api):
        assert api.get("/runs/run-9999").status_code == 404


class TestFeedback:
    def test_approve_resumes_run(self, human_api):
        run_id = human_api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        view = human_api.get(f"/runs/{run_id}").json()
        assert view["status"] == "awaiting_human"
        assert view["pending_action"] == "feedback"
        response = human_api.post(f"/runs/{run_id}/feedback",
                                  json={"verdict": "approve"})
        assert response.json()["status"] == "complete"

    def test_revise_requires_critiques(self, human_api):
        run_id = human_api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        response = human_api.post(f"/runs/{run_id}/feedback",
                                  json={"verdict": "revise",
                                        "critiques": []})
        assert response.status_code == 422

    def test_double_submit_conflicts(self, human_api):
        run_id = human_api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        human_api.post(f"/runs/{run_id}/feedback",
                       json={"verdict": "approve"})
        second = human_api.post(f"/runs/{run_id}/feedback",
                                json={"verdict": "approve"})
        assert second.status_code == 409


class TestChoices:
    def tree_client(self) -> TestClient:
        return client(planner="multi_path", reflectors=("human",),
                      tree_depth=2, tree_branching=2)

    def test_choice_flow(self):
        api = self.tree_client()
        run_id = api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        for _ in range(4):
            view = api.get(f"/runs/{run_id}").json()
            if view["pending_action"] != "choice":
                break
            events = api.get(f"/runs/{run_id}/events").json()["events"]
            request = [e for e in events
                       if e["event_type"] == "choice_requested"][-1]
            node_id = request["payload"]["node_id"]
            option_id = request["payload"]["options"][0][0]
            response = api.post(f"/runs/{run_id}/choice",
                                json={"node_id": node_id,
                                      "option_id": option_id})
            assert response.status_code == 200
        view = api.get(f"/runs/{run_id}").json()
        assert view["pending_action"] == "feedback"
        api.post(f"/runs/{run_id}/feedback", json={"verdict": "approve"})
        view = api.get(f"/runs/{run_id}").json()
        assert view["status"] == "complete"
        assert view["plan"] is not None

    def test_invalid_option_422(self):
        api = self.tree_client()
        run_id = api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        events = api.get(f"/runs/{run_id}/events").json()["events"]
        request = [e for e in events
                   if e["event_type"] == "choice_requested"][-1]
        node_id = request["payload"]["node_id"]
        response = api.post(f"/runs/{run_id}/choice",
                            json={"node_id": node_id, "option_id": "r.9.9"})
        assert response.status_code == 422


class TestEvents:
    def test_incremental_fetch(self, api):
        run_id = api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        full = api.get(f"/runs/{run_id}/events").json()
        assert full["events"][0]["event_type"] == "run_started"
        later = api.get(f"/runs/{run_id}/events",
                        params={"from": full["events"][2]["seq"]}).json()
        assert later["events"][0]["seq"] == full["events"][3]["seq"]

    def test_stream_is_line_delimited_json(self, api):
        run_id = api.post("/goals", json={
            "goal_text": "compute: 2+3"}).json()["run_id"]
        with api.stream("GET", f"/runs/{run_id}/stream") as response:
            lines = [json.loads(line) for line in response.iter_lines()
                     if line]
        assert lines[0]["event_type"] == "run_started"
        assert lines[-1]["event_type"] == "run_completed"


class TestCatalogueAndDecide:
    def test_registry_lists_builtin_tools(self, api):
        entries = api.get("/registry").json()["entries"]
        assert {e["entry_id"] for e in entries} == {"calculator", "search",
                                                    "echo"}

    def test_decide_endpoint(self, api):
        response = api.post("/decide", json={
            "requirements": ["accessibility"]})
        assert response.status_code == 200
        body = response.json()
        assert body["config"]["goal_creator"] == "proactive"
        assert body["report"]["selections"]

    def test_decide_unknown_tag_422(self, api):
        response = api.post("/decide", json={"requirements": ["warp_speed"]})
        assert response.status_code == 422

    def test_health_reports_patterns(self, api):
        body = api.get("/health").json()
        assert body["status"] == "ok"
        assert body["patterns"]["planner"] == "single_path"
