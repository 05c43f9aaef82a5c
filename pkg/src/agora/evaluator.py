"""Scenario-based agent evaluation: suites of cases, deterministic grid
expansion, mechanical metrics and a report that surfaces near-misses.

Every case runs against a freshly assembled runtime with a seed derived
from the case id, so reports are reproducible and case failures cannot
leak into each other.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .config import PatternConfig
from .errors import (AgentAssemblyFailure, DuplicateCase, ThresholdOrder,
                     UnknownSlot)
from .textutil import stable_seed

METRIC_KINDS = ("exact_match", "contains", "numeric_tolerance", "step_count")

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class Metric:
    metric_id: str
    kind: str
    tolerance: float = 0.0
    target_count: int = 0

    def __post_init__(self) -> None:
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind: {self.kind}")
        if self.kind == "numeric_tolerance" and self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")


@dataclass(frozen=True)
class EvalCase:
    case_id: str
    scenario: str
    input: str
    expected: str
    metric: Metric


@dataclass(frozen=True)
class Suite:
    suite_id: str
    cases: tuple[EvalCase, ...]
    pass_threshold: float
    near_miss_threshold: float


@dataclass
class CaseOutcome:
    score: float
    passed: bool
    near_miss: bool
    actual: Optional[str] = None
    failure_reason: Optional[str] = None


@dataclass
class EvalReport:
    suite_id: str
    per_case: dict[str, CaseOutcome] = field(default_factory=dict)
    aggregate: float = 0.0
    pass_rate: float = 0.0


def define_suite(cases: list[EvalCase], pass_threshold: float,
                 near_miss_threshold: Optional[float] = None, *,
                 suite_id: str = "suite") -> Suite:
    """Validate thresholds and case uniqueness, then freeze the suite."""
    if near_miss_threshold is None:
        near_miss_threshold = pass_threshold / 2
    if not (0 <= near_miss_threshold <= pass_threshold <= 1):
        raise ThresholdOrder(
            f"need 0 <= near_miss ({near_miss_threshold}) <= pass "
            f"({pass_threshold}) <= 1")
    seen: set[str] = set()
    for case in cases:
        if case.case_id in seen:
            raise DuplicateCase(f"duplicate case id: {case.case_id}")
        seen.add(case.case_id)
    return Suite(suite_id, tuple(cases), pass_threshold, near_miss_threshold)


def generate_cases(template: EvalCase,
                   grid: dict[str, list[str]]) -> list[EvalCase]:
    """Cartesian expansion of ``{param}`` slots, sorted-key then list order."""
    declared = set(_SLOT_RE.findall(template.input)) \
        | set(_SLOT_RE.findall(template.expected))
    for param, values in grid.items():
        if param not in declared:
            raise UnknownSlot(f"template declares no slot {{{param}}}")
        if not values:
            raise ValueError(f"grid values for {param} must be non-empty")

    names = sorted(grid)
    cases = []
    for combo in itertools.product(*(grid[name] for name in names)):
        binding = dict(zip(names, (str(v) for v in combo)))

        def fill(text: str) -> str:
            return _SLOT_RE.sub(
                lambda m: binding.get(m.group(1), m.group(0)), text)

        suffix = ",".join(f"{name}={binding[name]}" for name in names)
        cases.append(EvalCase(f"{template.case_id}[{suffix}]",
                              template.scenario, fill(template.input),
                              fill(template.expected), template.metric))
    return cases


def _score(metric: Metric, actual: str, expected: str,
           plan_length: int) -> float:
    if metric.kind == "exact_match":
        return 1.0 if actual.strip() == expected.strip() else 0.0
    if metric.kind == "contains":
        return 1.0 if expected in actual else 0.0
    if metric.kind == "numeric_tolerance":
        try:
            return 1.0 if abs(float(actual) - float(expected)) \
                <= metric.tolerance else 0.0
        except ValueError:
            return 0.0
    return 1.0 if plan_length == metric.target_count else 0.0


def evaluate(agent_config: PatternConfig, suite: Suite) -> EvalReport:
    """Run every case end to end on a fresh runtime; never abort the suite."""
    from .runtime import assemble  # deferred: runtime pulls in most modules

    try:
        assemble(agent_config)
    except Exception as exc:
        raise AgentAssemblyFailure(str(exc)) from exc

    report = EvalReport(suite.suite_id)
    for case in sorted(suite.cases, key=lambda c: c.case_id):
        seed = stable_seed(case.case_id)
        try:
            runtime = assemble(agent_config)
            result = runtime.run(case.input, seed)
            if result.status != "complete":
                outcome = CaseOutcome(0.0, False, False, None,
                                      f"run {result.status}: {result.error}")
            else:
                plan_length = len(result.final_plan.steps) \
                    if result.final_plan else 0
                actual = result.final_answer or ""
                score = _score(case.metric, actual, case.expected,
                               plan_length)
                outcome = CaseOutcome(score,
                                      score >= suite.pass_threshold,
                                      False, actual)
        except Exception as exc:  # per-case isolation
            outcome = CaseOutcome(0.0, False, False, None,
                                  f"{type(exc).__name__}: {exc}")
        outcome.near_miss = (not outcome.passed
                             and outcome.score >= suite.near_miss_threshold)
        report.per_case[case.case_id] = outcome

    scores = [o.score for o in report.per_case.values()]
    report.aggregate = sum(scores) / len(scores) if scores else 0.0
    passed = sum(1 for o in report.per_case.values() if o.passed)
    report.pass_rate = passed / len(scores) if scores else 0.0
    return report


def report_to_dict(report: EvalReport) -> dict:
    return {
        "suite_id": report.suite_id,
        "aggregate": report.aggregate,
        "pass_rate": report.pass_rate,
        "per_case": {
            case_id: {
                "score": outcome.score,
                "passed": outcome.passed,
                "near_miss": outcome.near_miss,
                "actual": outcome.actual,
                "failure_reason": outcome.failure_reason,
            }
            for case_id, outcome in sorted(report.per_case.items())
        },
    }


def report_table(report: EvalReport) -> str:
    """Plain-text summary, one line per case."""
    lines = [f"suite {report.suite_id}: aggregate={report.aggregate:.3f} "
             f"pass_rate={report.pass_rate:.3f}"]
    for case_id, outcome in sorted(report.per_case.items()):
        mark = "PASS" if outcome.passed else (
            "NEAR" if outcome.near_miss else "FAIL")
        note = f" ({outcome.failure_reason})" if outcome.failure_reason else ""
        lines.append(f"  [{mark}] {case_id}: score={outcome.score:.2f}{note}")
    return "\n".join(lines)


def load_suite(path: str | Path) -> Suite:
    """Load a JSON suite file, expanding any case generators."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    cases: list[EvalCase] = []
    for entry in raw.get("cases", []):
        metric_raw = entry["metric"]
        metric = Metric(metric_raw.get("metric_id", entry["case_id"]),
                        metric_raw["kind"],
                        float(metric_raw.get("tolerance", 0.0)),
                        int(metric_raw.get("target_count", 0)))
        case = EvalCase(entry["case_id"], entry.get("scenario", "default"),
                        entry["input"], str(entry.get("expected", "")),
                        metric)
        if "grid" in entry:
            cases.extend(generate_cases(case, {
                key: [str(v) for v in values]
                for key, values in entry["grid"].items()}))
        else:
            cases.append(case)
    return define_suite(cases, float(raw.get("pass_threshold", 1.0)),
                        raw.get("near_miss_threshold"),
                        suite_id=raw.get("suite_id", Path(path).stem))
