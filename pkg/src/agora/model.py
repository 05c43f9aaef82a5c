"""Deterministic model backend, querying patterns and usage metering.

The scripted backend is the only model implementation: rules map prompt
matchers to response templates, the request seed picks among template
variants, and every call lands in an append-only call log. One-shot and
incremental querying are thin contracts over ``generate`` that make the
call-count, window and budget forces checkable.
"""

from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass, field, replace
from fnmatch import fnmatchcase
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

from .errors import (BudgetExceeded, InvalidWindow, NoRuleMatch,
                     WindowExceeded)
from .textutil import count_tokens, tokens

PURPOSES = ("plan", "reflect", "debate", "optimise", "other")


@dataclass(frozen=True)
class ModelRequest:
    prompt_text: str
    max_completion_tokens: int = 256
    seed: int = 0
    actor_id: str = "agent"
    purpose: str = "other"

    def __post_init__(self) -> None:
        if not self.prompt_text:
            raise ValueError("prompt_text must be non-empty")
        if self.max_completion_tokens <= 0:
            raise ValueError("max_completion_tokens must be positive")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose: {self.purpose}")

    @property
    def prompt_tokens(self) -> int:
        return count_tokens(self.prompt_text)


@dataclass(frozen=True)
class ModelResponse:
    text: str
    finish_reason: str  # complete | truncated | blocked
    prompt_tokens: int
    completion_tokens: int
    cost_units: Fraction


@dataclass(frozen=True)
class ScriptedRule:
    """Prompt matcher plus seed-indexed response variants.

    The matcher is a glob pattern over the whole prompt when it contains
    ``*``, ``?`` or ``[``; otherwise plain substring containment. Variant
    selection is ``responses[seed % len(responses)]``; templates may embed
    ``{prompt}`` and ``{seed}``.
    """

    rule_id: str
    matcher: str
    responses: tuple[str, ...]
    priority: int = 0

    def __post_init__(self) -> None:
        if not self.responses:
            raise ValueError(f"rule {self.rule_id} has no responses")

    def matches(self, prompt: str) -> bool:
        if any(ch in self.matcher for ch in "*?["):
            return fnmatchcase(prompt, self.matcher)
        return self.matcher in prompt


@dataclass
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_units: Fraction = Fraction(0)

    def add(self, prompt_tokens: int, completion_tokens: int,
            cost_units: Fraction) -> None:
        self.prompt_tokens += prompt_tokens
        self.completion_tokens += completion_tokens
        self.cost_units += cost_units


class UsageMeter:
    """Per-actor and grand token/cost totals; monotonically non-decreasing."""

    def __init__(self, cap: Fraction | None = None):
        self.cap = cap
        self._per_actor: dict[str, Usage] = {}
        self._lock = threading.Lock()

    def record(self, actor_id: str, prompt_tokens: int,
               completion_tokens: int, cost_units: Fraction) -> None:
        with self._lock:
            self._per_actor.setdefault(actor_id, Usage()).add(
                prompt_tokens, completion_tokens, cost_units)

    def actor(self, actor_id: str) -> Usage:
        usage = self._per_actor.get(actor_id, Usage())
        return Usage(usage.prompt_tokens, usage.completion_tokens,
                     usage.cost_units)

    @property
    def grand_total(self) -> Usage:
        total = Usage()
        for usage in self._per_actor.values():
            total.add(usage.prompt_tokens, usage.completion_tokens,
                      usage.cost_units)
        return total

    def snapshot(self) -> dict:
        return {
            "per_actor": {
                actor: dataclasses.asdict(usage)
                for actor, usage in sorted(self._per_actor.items())
            },
            "grand_total": dataclasses.asdict(self.grand_total),
        }


@dataclass(frozen=True)
class BackendCall:
    seq: int
    request: ModelRequest
    response: ModelResponse


class ScriptedBackend:
    """Rule-driven backend; pure function of (rules, request) plus call log."""

    def __init__(self, rules: Iterable[ScriptedRule] = (), *,
                 window_tokens: int = 4096,
                 unit_price: Fraction = Fraction(0),
                 default_response: str | None = None,
                 meter: UsageMeter | None = None,
                 name: str = "scripted"):
        self.name = name
        self.window_tokens = window_tokens
        self.unit_price = unit_price
        self.default_response = default_response
        self.meter = meter if meter is not None else UsageMeter()
        self.call_log: list[BackendCall] = []
        self._lock = threading.Lock()
        self._rules: dict[str, ScriptedRule] = {}
        for rule in rules:
            self.add_rule(rule)

    def add_rule(self, rule: ScriptedRule) -> None:
        if rule.rule_id in self._rules:
            raise ValueError(f"duplicate rule_id: {rule.rule_id}")
        self._rules[rule.rule_id] = rule

    @property
    def rules(self) -> list[ScriptedRule]:
        return list(self._rules.values())

    def call_count(self) -> int:
        return len(self.call_log)

    def generate(self, request: ModelRequest) -> ModelResponse:
        """Answer one request; exactly one call-log entry on success.

        Highest-priority matching rule wins, ties broken by lowest rule_id.
        """
        prompt_tokens = request.prompt_tokens
        if prompt_tokens > self.window_tokens:
            raise WindowExceeded(
                f"prompt of {prompt_tokens} tokens exceeds window "
                f"{self.window_tokens}")
        matching = [r for r in self._rules.values()
                    if r.matches(request.prompt_text)]
        if matching:
            rule = min(matching, key=lambda r: (-r.priority, r.rule_id))
            template = rule.responses[request.seed % len(rule.responses)]
            text = (template.replace("{prompt}", request.prompt_text)
                            .replace("{seed}", str(request.seed)))
        elif self.default_response is not None:
            text = self.default_response
        else:
            raise NoRuleMatch(
                f"no rule matches prompt: {request.prompt_text[:80]!r}")

        finish_reason = "complete"
        completion_tokens = count_tokens(text)
        if completion_tokens > request.max_completion_tokens:
            text = " ".join(tokens(text)[:request.max_completion_tokens])
            completion_tokens = request.max_completion_tokens
            finish_reason = "truncated"
        cost = (prompt_tokens + completion_tokens) * self.unit_price
        response = ModelResponse(text, finish_reason, prompt_tokens,
                                 completion_tokens, cost)
        with self._lock:
            self.call_log.append(
                BackendCall(len(self.call_log) + 1, request, response))
        self.meter.record(request.actor_id, prompt_tokens,
                          completion_tokens, cost)
        return response


def generate(backend, request: ModelRequest) -> ModelResponse:
    return backend.generate(request)


def one_shot_query(backend, request: ModelRequest) -> ModelResponse:
    """Single backend call for a fully assembled prompt (call-log delta 1).

    When the backend meter carries a cost cap, admission uses the worst
    case: prompt tokens plus the full completion budget at the unit price.
    """
    meter = backend.meter
    if meter.cap is not None:
        worst = ((request.prompt_tokens + request.max_completion_tokens)
                 * backend.unit_price)
        if meter.grand_total.cost_units + worst > meter.cap:
            raise BudgetExceeded(
                f"call would cross cost cap {meter.cap}")
    return backend.generate(request)


@dataclass
class ModelSession:
    """Single-owner incremental-query session.

    ``header`` is a fixed instruction prefix whose budget is carved out by
    ``reserved_tokens``; prior turns are replayed newest-first into the
    remaining window, truncating oldest-first when they no longer fit.
    """

    session_id: str
    window_tokens: int
    reserved_tokens: int = 0
    header: str = ""
    history: list[tuple[ModelRequest, ModelResponse]] = field(
        default_factory=list)

    def __post_init__(self) -> None:
        if self.reserved_tokens >= self.window_tokens:
            raise InvalidWindow(
                f"reserved {self.reserved_tokens} >= window "
                f"{self.window_tokens}")
        if count_tokens(self.header) > self.reserved_tokens:
            raise InvalidWindow("header longer than reserved budget")

    @property
    def query_count(self) -> int:
        return len(self.history)


def incremental_query(session: ModelSession, backend, increment: str, *,
                      seed: int = 0, actor_id: str = "agent",
                      purpose: str = "plan",
                      max_completion_tokens: int = 256) -> ModelResponse:
    """One step of step-by-step querying within the session window."""
    inc_tokens = count_tokens(increment)
    budget = session.window_tokens - session.reserved_tokens
    if inc_tokens > budget:
        raise WindowExceeded(
            f"increment of {inc_tokens} tokens cannot fit alone "
            f"(window {session.window_tokens}, reserved "
            f"{session.reserved_tokens})")

    # Prior turns contribute their response text, newest kept first.
    remaining = budget - inc_tokens
    kept: list[str] = []
    for _, response in reversed(session.history):
        need = count_tokens(response.text)
        if need > remaining:
            break
        kept.append(response.text)
        remaining -= need
    kept.reverse()
    dropped = len(session.history) - len(kept)

    parts = ([session.header] if session.header else []) + kept + [increment]
    request = ModelRequest("\n".join(parts),
                           max_completion_tokens=max_completion_tokens,
                           seed=seed, actor_id=actor_id, purpose=purpose)
    response = backend.generate(request)
    if dropped > 0 and response.finish_reason == "complete":
        response = replace(response, finish_reason="truncated")
    session.history.append((request, response))
    return response


def split_context(text: str, window_tokens: int,
                  reserved_tokens: int) -> list[str]:
    """Chunk text so each piece fits window minus reserved tokens.

    Joining the chunks token-wise reproduces the input token sequence.
    """
    if reserved_tokens >= window_tokens:
        raise InvalidWindow(
            f"reserved {reserved_tokens} >= window {window_tokens}")
    words = tokens(text)
    size = window_tokens - reserved_tokens
    return [" ".join(words[i:i + size]) for i in range(0, len(words), size)]


def replay_usage(call_log: Iterable[BackendCall]) -> UsageMeter:
    """Recompute a meter from scratch off the call log (the metering oracle)."""
    meter = UsageMeter()
    for call in call_log:
        meter.record(call.request.actor_id, call.response.prompt_tokens,
                     call.response.completion_tokens, call.response.cost_units)
    return meter


def parse_rule_line(line: str) -> Optional[ScriptedRule]:
    """Parse one ``rule_id | priority | matcher | resp1 ;; resp2`` record."""
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    parts = [p.strip() for p in line.split("|", 3)]
    if len(parts) != 4:
        raise ValueError(f"malformed rule line: {line!r}")
    rule_id, priority, matcher, responses = parts
    variants = tuple(r.strip().replace("\\n", "\n")
                     for r in responses.split(";;"))
    return ScriptedRule(rule_id, matcher, variants, int(priority))


def load_rules(path: str | Path) -> list[ScriptedRule]:
    """Load the line-oriented scripted rule file (UTF-8, # comments)."""
    rules = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        rule = parse_rule_line(line)
        if rule is not None:
            rules.append(rule)
    return rules
