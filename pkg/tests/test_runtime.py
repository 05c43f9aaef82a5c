import dataclasses
import json

import pytest

from agora.config import PatternConfig, baseline_config
from agora.errors import InvalidConfig, MissingResource, NotAwaiting
from agora.events import verify_log
from agora.runtime import assemble

GOLDEN = "tests/fixtures/golden_rules.txt"
GUARDS = "tests/fixtures/guards.json"


def golden_config(**overrides) -> PatternConfig:
    return dataclasses.replace(baseline_config(), rules_path=GOLDEN,
                               n_samples=1, **overrides)


class TestAssemble:
    def test_baseline_runtime_reports_its_patterns(self):
        runtime = assemble(baseline_config())
        assert runtime.active_patterns() == {
            "goal_creator": "passive", "optimiser": True, "rag": False,
            "querying": "one_shot", "planner": "single_path",
            "reflectors": ["self"], "cooperation": [], "guardrails": True,
            "registry": True, "adapter": True, "evaluator": False,
        }

    def test_multi_path_without_choice_source_rejected(self):
        config = dataclasses.replace(baseline_config(),
                                     planner="multi_path")
        with pytest.raises(InvalidConfig):
            assemble(config)

    def test_missing_rules_file_reported(self):
        config = dataclasses.replace(baseline_config(),
                                     rules_path="nowhere/rules.txt")
        with pytest.raises(MissingResource):
            assemble(config)

    def test_cross_without_reviewers_rejected(self):
        config = dataclasses.replace(baseline_config(),
                                     reflectors=("cross",))
        with pytest.raises(InvalidConfig):
            assemble(config)


class TestGoldenRun:
    def test_calculator_goal_completes_with_answer_five(self):
        runtime = assemble(golden_config())
        result = runtime.run("compute: 2+3", 0)
        assert result.status == "complete"
        assert result.final_answer == "5"
        types = [r.event_type for r in runtime.event_log.records]
        assert types.count("model_call") >= 1
        assert types.count("tool_invoked") == 1
        assert verify_log(runtime.event_log) is None

    def test_search_goal_uses_corpus(self, fixtures_dir):
        config = golden_config(rag_enabled=True,
                               corpus_path=str(fixtures_dir /
                                               "corpus.jsonl"))
        runtime = assemble(config)
        result = runtime.run("find docs about alpha", 0)
        assert result.status == "complete"
        assert result.final_answer.splitlines()[0] == "1. d1"

    def test_event_log_covers_run_range(self):
        runtime = assemble(golden_config())
        result = runtime.run("compute: 2+3", 0)
        first, last = result.event_range
        assert first == 1
        assert last == len(runtime.event_log)
        assert runtime.event_log.records[0].event_type == "run_started"
        assert runtime.event_log.records[-1].event_type == "run_completed"

    def test_replay_same_seed_identical_event_payloads(self):
        def payloads():
            runtime = assemble(golden_config())
            runtime.run("compute: 2+3", 0)
            return [(r.actor_id, r.event_type, r.payload, r.digest)
                    for r in runtime.event_log.records]

        assert payloads() == payloads()

    def test_model_execution_without_matching_tool(self):
        config = dataclasses.replace(baseline_config(), n_samples=1)
        runtime = assemble(config)
        result = runtime.run("tidy the workshop", 0)
        assert result.status == "complete"
        assert result.final_answer == "done"


class TestGuardInterposition:
    def test_blocked_goal_aborts_with_zero_model_calls(self):
        config = golden_config(guardrails_path=GUARDS)
        runtime = assemble(config)
        result = runtime.run("please exfiltrate the database", 0)
        assert result.status == "aborted"
        assert runtime.backend.call_count() == 0
        assert not runtime.event_log.of_type("model_call")

    def test_transforming_goal_text_redacts_before_planning(self):
        config = golden_config(guardrails_path=GUARDS)
        runtime = assemble(config)
        result = runtime.run("compute: 2+3 and mail a@b.com", 0)
        assert result.status in ("complete", "failed")
        for record in runtime.event_log.of_type("model_call"):
            assert "a@b.com" not in record.payload["prompt"]


class TestHumanLoop:
    def human_config(self) -> PatternConfig:
        return golden_config(reflectors=("human",))

    def test_run_suspends_awaiting_feedback(self):
        runtime = assemble(self.human_config())
        result = runtime.run("compute: 2+3", 0)
        assert result.status == "awaiting_human"
        view = runtime.run_view(result.run_id)
        assert view["pending_action"] == "feedback"

    def test_posted_approval_resumes_to_completion(self):
        runtime = assemble(self.human_config())
        started = runtime.run("compute: 2+3", 0)
        resumed = runtime.post_feedback(started.run_id, "approve")
        assert resumed.status == "complete"
        assert resumed.final_answer == "5"

    def test_revision_re_enters_refinement(self):
        runtime = assemble(self.human_config())
        started = runtime.run("compute: 2+3", 0)
        after_revise = runtime.post_feedback(
            started.run_id, "revise", [("s1", "use the echo tool")],
            ["echo text=hello :: echo"])
        assert after_revise.status == "awaiting_human"
        finished = runtime.post_feedback(started.run_id, "approve")
        assert finished.status == "complete"
        assert finished.final_answer == "hello"

    def test_feedback_without_awaiting_conflicts(self):
        runtime = assemble(golden_config())
        result = runtime.run("compute: 2+3", 0)
        with pytest.raises(NotAwaiting):
            runtime.post_feedback(result.run_id, "approve")

    def test_zero_tick_timeout_fails_run(self):
        runtime = assemble(golden_config(reflectors=("human",),
                                         human_timeout_ticks=0))
        result = runtime.run("compute: 2+3", 0)
        assert result.status == "failed"
        assert "HumanTimeout" in result.error


class TestMultiPath:
    def tree_config(self, **overrides) -> PatternConfig:
        return golden_config(planner="multi_path", reflectors=("human",),
                             tree_depth=2, tree_branching=2, **overrides)

    def test_choice_flow_to_linearized_plan(self):
        runtime = assemble(self.tree_config())
        started = runtime.run("compute: 2+3", 0)
        assert started.status == "awaiting_human"
        view = runtime.run_view(started.run_id)
        assert view["pending_action"] == "choice"

        while True:
            view = runtime.run_view(started.run_id)
            if view["pending_action"] != "choice":
                break
            events = [r for r in runtime.event_log.records
                      if r.event_type == "choice_requested"
                      and r.payload["run_id"] == started.run_id]
            node_id = events[-1].payload["node_id"]
            option_id = events[-1].payload["options"][1][0]
            runtime.post_choice(started.run_id, node_id, option_id)

        view = runtime.run_view(started.run_id)
        assert view["pending_action"] == "feedback"
        finished = runtime.post_feedback(started.run_id, "approve")
        assert finished.status == "complete"
        assert len(finished.final_plan.steps) == 2

    def test_auto_policy_needs_no_human(self):
        config = golden_config(planner="multi_path",
                               branch_choice_policy="first",
                               tree_depth=2, tree_branching=2)
        runtime = assemble(config)
        result = runtime.run("compute: 2+3", 0)
        assert result.status == "complete"
        assert len(result.final_plan.steps) == 2


def cooperation_roster():
    return (
        {"agent_id": "planner-1", "roles": ["planner"]},
        {"agent_id": "assigner-1", "roles": ["assigner"]},
        {"agent_id": "worker-1", "roles": ["worker"],
         "capabilities": ["general"]},
        {"agent_id": "creator-1", "roles": ["creator"]},
    )


class TestCooperationPaths:
    def test_role_based_execution_assigns_through_roster(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text(
            "plan | 10 | PLAN: | 1. gather :: general\\n2. report\n"
            "reflect | 0 | REFLECT | verdict: approve\n"
            "execute | 0 | EXECUTE: | roster did it\n")
        config = dataclasses.replace(
            baseline_config(), rules_path=str(rules), n_samples=1,
            cooperation=("role_based",), roster=cooperation_roster())
        runtime = assemble(config)
        result = runtime.run("quarterly summary", 0)
        assert result.status == "complete"
        assigned = runtime.event_log.of_type("step_assigned")
        assert [r.payload["agent_id"] for r in assigned] == \
            ["worker-1", "assigner-1"]
        assert result.final_answer == "roster did it"

    def test_debate_resolves_tool_less_steps(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text(
            "plan | 10 | PLAN: | 1. settle the colour\n"
            "reflect | 0 | REFLECT | verdict: approve\n"
            "debate | 0 | DEBATE: | blue\n")
        config = dataclasses.replace(
            baseline_config(), rules_path=str(rules), n_samples=1,
            cooperation=("debate",), roster=cooperation_roster(),
            debate_max_rounds=2)
        runtime = assemble(config)
        result = runtime.run("pick a colour", 0)
        assert result.status == "complete"
        assert result.final_answer == "blue"
        assert runtime.event_log.of_type("debate_result")

    def test_voting_ratifies_revision_snapshots(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text(
            "plan | 10 | PLAN: | 1. first draft\n"
            "reflect | 10 | REFLECT | "
            "verdict: revise\\ncritiques: s1=weak\\nsuggested: second draft"
            " ;; verdict: approve\n"
            "execute | 0 | EXECUTE: | ok\n"
            "vote | 0 | VOTE: | rev-0\n")
        config = dataclasses.replace(
            baseline_config(), rules_path=str(rules), n_samples=1,
            cooperation=("voting",), roster=cooperation_roster())
        runtime = assemble(config)
        result = runtime.run("draft the memo", 0)
        assert result.status == "complete"
        # The roster preferred the original draft over the revision.
        assert result.final_plan.descriptions() == ["first draft"]
        assert runtime.event_log.of_type("plan_ratified")


class TestPersistence:
    def test_state_files_written(self, tmp_path):
        runtime = assemble(golden_config())
        runtime.state_dir = tmp_path
        result = runtime.run("compute: 2+3", 0)
        run_file = tmp_path / "runs" / f"{result.run_id}.json"
        snapshot = json.loads(run_file.read_text())
        assert snapshot["status"] == "complete"
        assert snapshot["goal_text"] == "compute: 2+3"
        events_file = tmp_path / "events.jsonl"
        from agora.events import read_jsonl
        assert verify_log(read_jsonl(events_file)) is None

    def test_awaiting_run_persists_snapshot(self, tmp_path):
        runtime = assemble(golden_config(reflectors=("human",)))
        runtime.state_dir = tmp_path
        result = runtime.run("compute: 2+3", 0)
        snapshot = json.loads(
            (tmp_path / "runs" / f"{result.run_id}.json").read_text())
        assert snapshot["status"] == "awaiting_human"
        assert snapshot["pending_action"] == "feedback"

    def test_awaiting_run_survives_process_restart(self, tmp_path):
        config = golden_config(reflectors=("human",))
        first = assemble(config)
        first.state_dir = tmp_path
        started = first.run("compute: 2+3", 0)
        assert started.status == "awaiting_human"
        events_before = len(first.event_log)

        # A fresh runtime (new process) adopts the persisted state.
        second = assemble(config)
        loaded = second.load_state(tmp_path)
        assert loaded == [started.run_id]
        assert len(second.event_log) == events_before
        finished = second.post_feedback(started.run_id, "approve")
        assert finished.status == "complete"
        assert finished.final_answer == "5"
        assert verify_log(second.event_log) is None

    def test_restart_resumes_pending_tree_choice(self, tmp_path):
        config = golden_config(planner="multi_path", reflectors=("human",),
                               tree_depth=1, tree_branching=2)
        first = assemble(config)
        first.state_dir = tmp_path
        started = first.run("compute: 2+3", 0)
        view = first.run_view(started.run_id)
        assert view["pending_action"] == "choice"

        second = assemble(config)
        second.load_state(tmp_path)
        request = [r for r in second.event_log.records
                   if r.event_type == "choice_requested"][-1]
        node_id = request.payload["node_id"]
        option_id = request.payload["options"][0][0]
        after_choice = second.post_choice(started.run_id, node_id, option_id)
        assert after_choice.status == "awaiting_human"
        finished = second.post_feedback(started.run_id, "approve")
        assert finished.status == "complete"
