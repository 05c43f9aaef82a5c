import dataclasses
import json

import pytest

from agora.config import baseline_config
from agora.errors import (AgentAssemblyFailure, DuplicateCase,
                          ThresholdOrder, UnknownSlot)
from agora.evaluator import (CaseOutcome, EvalCase, Metric, define_suite,
                             evaluate, generate_cases, load_suite,
                             report_table, report_to_dict)

GOLDEN = "tests/fixtures/golden_rules.txt"

EXACT = Metric("m-exact", "exact_match")


def case(case_id: str, text: str, expected: str,
         metric: Metric = EXACT) -> EvalCase:
    return EvalCase(case_id, "default", text, expected, metric)


def golden_eval_config():
    return dataclasses.replace(baseline_config(), rules_path=GOLDEN,
                               n_samples=1)


class TestDefineSuite:
    def test_valid_suite_stored(self):
        suite = define_suite([case("c1", "x", "y"), case("c2", "x", "y"),
                              case("c3", "x", "y")], 1.0, 0.5)
        assert len(suite.cases) == 3

    def test_threshold_order(self):
        with pytest.raises(ThresholdOrder):
            define_suite([case("c1", "x", "y")], 0.5, 0.9)

    def test_duplicate_case(self):
        with pytest.raises(DuplicateCase):
            define_suite([case("c1", "x", "y"), case("c1", "z", "w")],
                         1.0, 0.5)

    def test_default_near_miss_is_half_pass(self):
        suite = define_suite([case("c1", "x", "y")], 0.8)
        assert suite.near_miss_threshold == 0.4


class TestGenerateCases:
    def grid_template(self) -> EvalCase:
        return case("t", "compute: {x}+{y}", "{x}")

    def test_cartesian_order(self):
        cases = generate_cases(self.grid_template(),
                               {"x": ["1", "2"], "y": ["a"]})
        assert [c.case_id for c in cases] == ["t[x=1,y=a]", "t[x=2,y=a]"]
        assert cases[0].input == "compute: 1+a"

    def test_single_axis_count(self):
        cases = generate_cases(self.grid_template(),
                               {"x": ["1", "2", "3"]})
        assert len(cases) == 3

    def test_empty_values_rejected(self):
        with pytest.raises(ValueError):
            generate_cases(self.grid_template(), {"x": []})

    def test_unknown_slot(self):
        with pytest.raises(UnknownSlot):
            generate_cases(self.grid_template(), {"z": ["1"]})

    def test_sorted_key_order(self):
        cases = generate_cases(self.grid_template(),
                               {"y": ["b"], "x": ["1"]})
        assert cases[0].case_id == "t[x=1,y=b]"


class TestEvaluate:
    def test_exact_match_pass(self):
        suite = define_suite([case("calc", "compute: 2+3", "5")], 1.0)
        report = evaluate(golden_eval_config(), suite)
        outcome = report.per_case["calc"]
        assert outcome.score == 1.0
        assert outcome.passed

    def test_numeric_tolerance(self):
        metric = Metric("m", "numeric_tolerance", tolerance=0.1)
        suite = define_suite(
            [case("close", "compute: 2+3", "5.05", metric)], 1.0)
        report = evaluate(golden_eval_config(), suite)
        assert report.per_case["close"].score == 1.0

    def test_step_count_metric(self):
        metric = Metric("m", "step_count", target_count=1)
        suite = define_suite([case("one-step", "compute: 2+3", "", metric)],
                             1.0)
        report = evaluate(golden_eval_config(), suite)
        assert report.per_case["one-step"].passed

    def test_aggregate_and_pass_rate(self):
        suite = define_suite([
            case("ok1", "compute: 2+3", "5"),
            case("ok2", "compute: 2+3", "5"),
            case("bad1", "compute: 2+3", "6"),
            case("bad2", "compute: 2+3", "7"),
        ], 1.0)
        report = evaluate(golden_eval_config(), suite)
        assert report.aggregate == 0.5
        assert report.pass_rate == 0.5
        # Recompute both from per-case scores (the aggregate oracle).
        scores = [o.score for o in report.per_case.values()]
        assert report.aggregate == sum(scores) / len(scores)

    def test_case_failure_isolated(self):
        # "unplannable" matches no plan rule -> per-case failure, suite runs.
        suite = define_suite([
            case("broken", "unplannable goal", "x"),
            case("fine", "compute: 2+3", "5"),
        ], 1.0)
        report = evaluate(golden_eval_config(), suite)
        assert report.per_case["broken"].score == 0.0
        assert report.per_case["broken"].failure_reason
        assert report.per_case["fine"].passed

    def test_reproducible_reports(self):
        suite = define_suite([case("calc", "compute: 2+3", "5")], 1.0)
        first = report_to_dict(evaluate(golden_eval_config(), suite))
        second = report_to_dict(evaluate(golden_eval_config(), suite))
        assert first == second

    def test_assembly_failure_raised(self):
        config = dataclasses.replace(baseline_config(),
                                     rules_path="missing.txt")
        suite = define_suite([case("c", "x", "y")], 1.0)
        with pytest.raises(AgentAssemblyFailure):
            evaluate(config, suite)

    def test_contains_metric(self):
        metric = Metric("m", "contains")
        suite = define_suite([case("sub", "compute: 2+3", "5", metric)], 1.0)
        report = evaluate(golden_eval_config(), suite)
        assert report.per_case["sub"].passed


class TestReportOutput:
    def test_table_lines(self):
        report_obj = evaluate(
            golden_eval_config(),
            define_suite([case("calc", "compute: 2+3", "5")], 1.0))
        table = report_table(report_obj)
        assert "[PASS] calc" in table

    def test_near_miss_flagged(self):
        suite = define_suite([case("miss", "compute: 2+3", "6")], 1.0, 0.0)
        report = evaluate(golden_eval_config(), suite)
        outcome = report.per_case["miss"]
        assert not outcome.passed
        assert outcome.near_miss  # score 0 >= near-miss threshold 0


class TestSuiteFiles:
    def test_load_with_grid(self, tmp_path):
        path = tmp_path / "suite.json"
        path.write_text(json.dumps({
            "suite_id": "s1",
            "pass_threshold": 1.0,
            "cases": [
                {"case_id": "calc", "input": "compute: {x}+1",
                 "expected": "{x}", "grid": {"x": ["1", "2"]},
                 "metric": {"kind": "exact_match"}},
                {"case_id": "single", "input": "compute: 2+3",
                 "expected": "5", "metric": {"kind": "exact_match"}},
            ],
        }))
        suite = load_suite(path)
        assert len(suite.cases) == 3
        assert suite.suite_id == "s1"
