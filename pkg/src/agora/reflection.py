"""Reflection over draft plans: self, cross (other agents) and human, plus
the refine-until-approved loop.

Critic output parses against a key_value contract: a ``verdict`` of approve
or revise, ``critiques`` as ``step_id=comment`` pairs separated by
semicolons, and an optional ``suggested`` list of replacement step
descriptions separated by ``/``. A revise without critiques is unparseable
by definition.
"""

from __future__ import annotations

import hashlib
import queue
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .errors import (ChannelClosed, HumanTimeout, MaxIterationsExceeded,
                     ReviewerUnavailable, UnparseableFeedback)
from .events import canonical_json
from .model import ModelRequest, one_shot_query
from .planning import Plan, chain_steps, parse_steps, split_capability
from .prompts import OutputSpec, optimise_response
from .errors import ShapeMismatch, AgoraError

REFLECT_PROMPT_PREFIX = "REFLECT plan:"
REVISE_PROMPT_PREFIX = "REVISE plan:"

_FEEDBACK_SPEC = OutputSpec("reflection-feedback", "key_value",
                            frozenset({"verdict"}))


@dataclass(frozen=True)
class ReflectionFeedback:
    source: str  # "self" | "agent:<reviewer_id>" | "human:<channel_id>"
    verdict: str  # approve | revise
    critiques: tuple[tuple[str, str], ...] = ()
    suggested_steps: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.verdict not in ("approve", "revise"):
            raise ValueError(f"unknown verdict: {self.verdict}")
        if self.verdict == "revise" and not self.critiques:
            raise ValueError("revise verdict requires critiques")


@dataclass
class RefinementHistory:
    iterations: list[tuple[str, ReflectionFeedback]] = field(
        default_factory=list)
    terminated_by: str = ""  # approved | max_iterations | human_timeout


def plan_digest(plan: Plan) -> str:
    payload = [(s.step_id, s.description, sorted(s.depends_on),
                s.required_capability) for s in plan.steps]
    return hashlib.sha256(
        canonical_json(payload).encode("utf-8")).hexdigest()


def reflection_prompt(plan: Plan) -> str:
    lines = [REFLECT_PROMPT_PREFIX]
    lines.extend(f"{i + 1}. {step.description}"
                 for i, step in enumerate(plan.steps))
    return "\n".join(lines)


def parse_feedback(raw: str, source: str) -> ReflectionFeedback:
    """Parse critic output; raises UnparseableFeedback on any violation."""
    try:
        structured = optimise_response(raw, _FEEDBACK_SPEC)
    except ShapeMismatch as exc:
        raise UnparseableFeedback(str(exc)) from exc
    verdict = structured.values["verdict"].strip().casefold()
    critiques = []
    for chunk in structured.values.get("critiques", "").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        step_id, sep, comment = chunk.partition("=")
        if not sep:
            raise UnparseableFeedback(f"bad critique entry: {chunk!r}")
        critiques.append((step_id.strip(), comment.strip()))
    suggested = None
    if "suggested" in structured.values:
        suggested = tuple(part.strip() for part
                          in structured.values["suggested"].split("/")
                          if part.strip())
    try:
        return ReflectionFeedback(source, verdict, tuple(critiques),
                                  suggested)
    except ValueError as exc:
        raise UnparseableFeedback(str(exc)) from exc


def self_reflect(plan: Plan, backend, *, seed: int = 0,
                 actor_id: str = "agent") -> ReflectionFeedback:
    """Query the agent's own backend to review its draft plan."""
    request = ModelRequest(reflection_prompt(plan), seed=seed,
                           actor_id=actor_id, purpose="reflect")
    response = one_shot_query(backend, request)
    return parse_feedback(response.text, "self")


def cross_reflect(plan: Plan, reviewers, policy: str = "unanimity", *,
                  seed: int = 0) -> tuple[str, list[ReflectionFeedback]]:
    """Query reviewer agents once each; aggregate per policy.

    Majority ties resolve to revise (the conservative outcome). A failing
    reviewer raises ReviewerUnavailable with the other feedback attached;
    feedback order follows the roster regardless of completion order.
    """
    if not reviewers:
        raise ValueError("reviewers must be non-empty")
    if policy not in ("unanimity", "majority"):
        raise ValueError(f"unknown policy: {policy}")
    feedback: list[ReflectionFeedback] = []
    failed: Optional[str] = None
    for reviewer in reviewers:
        request = ModelRequest(reflection_prompt(plan), seed=seed,
                               actor_id=reviewer.agent_id, purpose="reflect")
        try:
            response = one_shot_query(reviewer.backend, request)
            feedback.append(parse_feedback(
                response.text, f"agent:{reviewer.agent_id}"))
        except AgoraError:
            if failed is None:
                failed = reviewer.agent_id
    if failed is not None:
        raise ReviewerUnavailable(failed, feedback)

    approvals = sum(1 for fb in feedback if fb.verdict == "approve")
    if policy == "unanimity":
        verdict = "approve" if approvals == len(feedback) else "revise"
    else:
        verdict = "approve" if approvals > len(feedback) - approvals \
            else "revise"
    return verdict, feedback


class FeedbackChannel:
    """Single-consumer human feedback channel.

    Feedback is posted from another task (or pre-seeded); ``request`` waits
    up to ``timeout_ticks`` seconds, forever when None, and not at all when
    zero.
    """

    def __init__(self, channel_id: str, *, emit=None):
        self.channel_id = channel_id
        self._queue: queue.Queue = queue.Queue()
        self._open = True
        self._emit = emit  # optional (event_type, payload) sink

    @property
    def is_open(self) -> bool:
        return self._open

    def close(self) -> None:
        self._open = False

    def pending(self) -> bool:
        return not self._queue.empty()

    def post(self, feedback: ReflectionFeedback) -> None:
        if not self._open:
            raise ChannelClosed(f"channel closed: {self.channel_id}")
        self._queue.put(feedback)
        if self._emit:
            self._emit("feedback_posted", {
                "channel_id": self.channel_id,
                "verdict": feedback.verdict,
                "critiques": list(feedback.critiques),
            })

    def request(self, plan: Plan,
                timeout_ticks: float | None = None) -> ReflectionFeedback:
        if not self._open:
            raise ChannelClosed(f"channel closed: {self.channel_id}")
        if self._emit:
            self._emit("feedback_requested", {
                "channel_id": self.channel_id,
                "plan_digest": plan_digest(plan),
                "steps": plan.descriptions(),
            })
        try:
            if timeout_ticks is None:
                feedback = self._queue.get()
            elif timeout_ticks == 0:
                feedback = self._queue.get_nowait()
            else:
                feedback = self._queue.get(timeout=timeout_ticks)
        except queue.Empty:
            raise HumanTimeout(
                f"no feedback within {timeout_ticks} ticks") from None
        return replace(feedback, source=f"human:{self.channel_id}")


def human_reflect(plan: Plan, channel: FeedbackChannel, *,
                  timeout_ticks: float | None = None) -> ReflectionFeedback:
    """Block the run on the channel until the human posts a verdict."""
    return channel.request(plan, timeout_ticks)


def apply_revision(plan: Plan, feedback: ReflectionFeedback, backend, *,
                   seed: int = 0, actor_id: str = "agent") -> Plan:
    """Produce the next draft: suggested steps replace the step list
    wholesale; absent suggestions, the backend regenerates from critiques."""
    if feedback.suggested_steps:
        parsed = [split_capability(description)
                  for description in feedback.suggested_steps]
    else:
        lines = [REVISE_PROMPT_PREFIX]
        lines.extend(f"{i + 1}. {step.description}"
                     for i, step in enumerate(plan.steps))
        lines.append("critiques:")
        lines.extend(f"{step_id}: {comment}"
                     for step_id, comment in feedback.critiques)
        request = ModelRequest("\n".join(lines), seed=seed,
                               actor_id=actor_id, purpose="reflect")
        response = one_shot_query(backend, request)
        parsed = parse_steps(response.text)
        if not parsed:
            raise UnparseableFeedback(
                "revision response did not parse as a step list")
    return Plan(plan.plan_id, plan.goal_id, chain_steps(parsed),
                plan.kind, "draft")


def refine_until_approved(plan: Plan,
                          reflector: Callable[[Plan], ReflectionFeedback],
                          backend, max_iterations: int, *,
                          actor_id: str = "agent",
                          ) -> tuple[Plan, RefinementHistory]:
    """Reflect/revise until approval; at most max_iterations reflections."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    history = RefinementHistory()
    for iteration in range(max_iterations):
        try:
            feedback = reflector(plan)
        except HumanTimeout as exc:
            history.terminated_by = "human_timeout"
            raise HumanTimeout(str(exc), plan=plan, history=history) from None
        history.iterations.append((plan_digest(plan), feedback))
        if feedback.verdict == "approve":
            history.terminated_by = "approved"
            plan.status = "approved"
            return plan, history
        plan = apply_revision(plan, feedback, backend,
                              seed=iteration, actor_id=actor_id)
    history.terminated_by = "max_iterations"
    raise MaxIterationsExceeded(plan, history)
