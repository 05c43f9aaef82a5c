"""Rule-pipeline guardrails interposed on model inputs and outputs.

Rules apply in ``order`` (ties by rule id); the first block stops
processing, transforms compose left to right, and a decision records every
rule that fired. Shipped named patterns: EMAIL and PHONE; their redaction
labels never re-match, so redaction is idempotent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .errors import DuplicateId, MalformedRule, ShapeMismatch
from .prompts import OutputSpec, optimise_response
from .textutil import tokens

SCOPES = ("input", "output", "both")
MODALITIES = ("text", "image_descriptor", "any")
KINDS = ("keyword_block", "pattern_redact", "max_length", "schema_check")

NAMED_PATTERNS: dict[str, re.Pattern] = {
    "EMAIL": re.compile(
        r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"),
    "PHONE": re.compile(
        r"(?:\+\d{1,3}[-\s]?)?(?:\(\d{3}\)|\d{3})[-\s.]\d{3}[-\s.]\d{4}"),
}


@dataclass(frozen=True)
class GuardRule:
    rule_id: str
    scope: str
    modality: str
    kind: str
    parameters: Mapping[str, Any]
    order: int = 0

    def __post_init__(self) -> None:
        if self.scope not in SCOPES:
            raise MalformedRule(f"unknown scope: {self.scope}")
        if self.modality not in MODALITIES:
            raise MalformedRule(f"unknown modality: {self.modality}")
        if self.kind not in KINDS:
            raise MalformedRule(f"unknown kind: {self.kind}")
        params = self.parameters
        if self.kind == "keyword_block" and not params.get("keywords"):
            raise MalformedRule("keyword_block needs keywords")
        if self.kind == "pattern_redact":
            if not params.get("pattern"):
                raise MalformedRule("pattern_redact needs a pattern name")
            if not params.get("label"):
                raise MalformedRule("pattern_redact needs a replacement label")
        if self.kind == "max_length":
            if not isinstance(params.get("limit"), int) \
                    or params["limit"] <= 0:
                raise MalformedRule("max_length needs a positive limit")
            if params.get("action", "block") not in ("block", "truncate"):
                raise MalformedRule("max_length action is block or truncate")
        if self.kind == "schema_check" and not params.get("shape"):
            raise MalformedRule("schema_check needs a shape")

    def regex(self) -> re.Pattern:
        pattern = self.parameters["pattern"]
        return NAMED_PATTERNS.get(pattern) or re.compile(pattern)


@dataclass(frozen=True)
class GuardDecision:
    verdict: str  # pass | transform | block
    content_out: Optional[str]
    fired_rules: tuple[str, ...] = ()
    rationale: str = "no rule fired"


class GuardrailPipeline:
    """Ordered rule pipeline; immutable once checks begin."""

    def __init__(self, rules: Optional[list[GuardRule]] = None):
        self._rules: dict[str, GuardRule] = {}
        for rule in rules or []:
            self.register_rule(rule)

    def register_rule(self, rule: GuardRule) -> str:
        if rule.rule_id in self._rules:
            raise DuplicateId(f"guard rule exists: {rule.rule_id}")
        self._rules[rule.rule_id] = rule
        return rule.rule_id

    def rules(self, scope: str | None = None,
              modality: str | None = None) -> list[GuardRule]:
        selected = [
            rule for rule in self._rules.values()
            if (scope is None or rule.scope in (scope, "both"))
            and (modality is None or rule.modality in (modality, "any"))
        ]
        return sorted(selected, key=lambda r: (r.order, r.rule_id))

    def _check(self, content: str, modality: str,
               scope: str) -> GuardDecision:
        fired: list[str] = []
        notes: list[str] = []
        current = content
        for rule in self.rules(scope, modality):
            if rule.kind == "keyword_block":
                lowered = current.casefold()
                hit = next((kw for kw in rule.parameters["keywords"]
                            if kw.casefold() in lowered), None)
                if hit is not None:
                    fired.append(rule.rule_id)
                    return GuardDecision(
                        "block", None, tuple(fired),
                        f"{rule.rule_id}: blocked keyword {hit!r}")
            elif rule.kind == "pattern_redact":
                label = rule.parameters["label"]
                redacted = rule.regex().sub(f"[REDACTED:{label}]", current)
                if redacted != current:
                    fired.append(rule.rule_id)
                    notes.append(f"{rule.rule_id}: redacted {label}")
                    current = redacted
            elif rule.kind == "max_length":
                limit = rule.parameters["limit"]
                words = tokens(current)
                if len(words) > limit:
                    fired.append(rule.rule_id)
                    if rule.parameters.get("action", "block") == "truncate":
                        current = " ".join(words[:limit])
                        notes.append(f"{rule.rule_id}: truncated to {limit}")
                    else:
                        return GuardDecision(
                            "block", None, tuple(fired),
                            f"{rule.rule_id}: {len(words)} tokens over "
                            f"limit {limit}")
            else:  # schema_check
                params = rule.parameters
                spec = OutputSpec("guard", params["shape"],
                                  frozenset(params.get("required_keys", [])),
                                  params.get("item_pattern", ""))
                try:
                    optimise_response(current, spec)
                except ShapeMismatch as exc:
                    fired.append(rule.rule_id)
                    return GuardDecision("block", None, tuple(fired),
                                         f"{rule.rule_id}: {exc}")
        if current == content:
            return GuardDecision("pass", content, tuple(fired))
        return GuardDecision("transform", current, tuple(fired),
                             "; ".join(notes))

    def check_input(self, content: str,
                    modality: str = "text") -> GuardDecision:
        return self._check(content, modality, "input")

    def check_output(self, content: str,
                     modality: str = "text") -> GuardDecision:
        return self._check(content, modality, "output")


def load_guard_rules(path: str | Path) -> GuardrailPipeline:
    """Load a JSON list of guard rule records."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    pipeline = GuardrailPipeline()
    for entry in raw:
        pipeline.register_rule(GuardRule(
            entry["rule_id"], entry.get("scope", "both"),
            entry.get("modality", "any"), entry["kind"],
            entry.get("parameters", {}), int(entry.get("order", 0))))
    return pipeline
