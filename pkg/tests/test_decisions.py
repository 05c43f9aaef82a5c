import itertools

import pytest

from agora.config import baseline_config
from agora.decisions import (DECISION_GRAPH, QUALITY_VOCABULARY,
                             decide_patterns)
from agora.errors import UnknownRequirement
from agora.runtime import assemble


class TestPaperAnchors:
    def test_accessibility_selects_proactive(self):
        config, _ = decide_patterns({"accessibility"})
        assert config.goal_creator == "proactive"

    def test_limited_budget_selects_one_shot(self):
        config, _ = decide_patterns({"limited_budget"})
        assert config.querying == "one_shot"

    def test_empty_requirements_yield_documented_baseline(self):
        config, _ = decide_patterns(set())
        baseline = baseline_config()
        assert config.goal_creator == "passive"
        assert config.optimiser_enabled
        assert config.querying == "one_shot"
        assert config.planner == "single_path"
        assert config.reflectors == ("self",)
        assert config.cooperation == ()
        assert config.guardrails_enabled
        assert config == baseline


class TestVocabulary:
    def test_unknown_requirement_rejected(self):
        with pytest.raises(UnknownRequirement):
            decide_patterns({"blazing_speed"})

    def test_vocabulary_covers_expected_tags(self):
        for tag in ("accessibility", "limited_budget", "reasoning_certainty",
                    "fairness", "contestability", "inclusiveness",
                    "interactivity", "goal_seeking"):
            assert tag in QUALITY_VOCABULARY


class TestSelections:
    def test_explainability_pulls_every_matching_complement(self):
        config, _ = decide_patterns({"explainability"})
        assert config.querying == "incremental"
        assert "self" in config.reflectors
        assert "cross" in config.reflectors
        assert "debate" in config.cooperation

    def test_human_preference_selects_multi_path_and_human(self):
        config, _ = decide_patterns({"human_preference_alignment"})
        assert config.planner == "multi_path"
        assert "human" in config.reflectors

    def test_fairness_selects_voting(self):
        config, _ = decide_patterns({"fairness"})
        assert config.cooperation == ("voting",)
        assert config.roster  # default roster filled for assembly

    def test_contested_querying_resolved_by_precedence(self):
        config, report = decide_patterns({"reasoning_certainty",
                                          "efficiency"})
        assert config.querying == "incremental"
        querying = next(s for s in report["selections"]
                        if s["decision_id"] == "querying")
        assert "efficiency" in querying["overridden"]

    def test_common_attributes_note_without_selection(self):
        config, report = decide_patterns({"interactivity"})
        assert config.goal_creator == "passive"  # baseline untouched
        assert any("interactivity" in note for note in report["notes"])

    def test_report_lists_strengths_and_tradeoffs(self):
        _, report = decide_patterns({"safety"})
        guard = next(s for s in report["selections"]
                     if s["decision_id"] == "guardrails")
        assert "safety" in guard["matched_requirements"]
        assert guard["tradeoffs"]


class TestDecisionSoundness:
    def test_every_single_tag_assembles(self):
        for tag in sorted(QUALITY_VOCABULARY):
            config, _ = decide_patterns({tag})
            runtime = assemble(config)
            assert runtime.active_patterns()["planner"] == config.planner

    def test_alternative_exclusivity_by_construction(self):
        for tag in sorted(QUALITY_VOCABULARY):
            config, _ = decide_patterns({tag})
            assert config.goal_creator in ("passive", "proactive")
            assert config.querying in ("one_shot", "incremental")
            assert config.planner in ("single_path", "multi_path")

    def test_multi_path_without_human_gets_auto_policy(self):
        config, _ = decide_patterns({"inclusiveness"})
        assert config.planner == "multi_path"
        if "human" not in config.reflectors:
            assert config.branch_choice_policy is not None

    def test_cross_reflection_gets_reviewer_roster(self):
        config, _ = decide_patterns({"scalability"})
        if "cross" in config.reflectors:
            assert config.reviewers

    def test_two_tag_sample_assembles(self):
        # The exhaustive pass runs in the acceptance suite; spot a slice here.
        tags = sorted(QUALITY_VOCABULARY)[:8]
        for a, b in itertools.combinations(tags, 2):
            config, _ = decide_patterns({a, b})
            assemble(config)


class TestGraphShape:
    def test_alternatives_have_disjoint_distinctive_strengths(self):
        for node in DECISION_GRAPH:
            if node.relation != "alternative":
                continue
            first, second = node.options
            assert not (first.strengths & second.strengths)

    def test_common_attributes_outside_option_strengths(self):
        for node in DECISION_GRAPH:
            for option in node.options:
                assert not (option.strengths & node.common)
