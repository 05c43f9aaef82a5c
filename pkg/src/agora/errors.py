"""Exception taxonomy for the agora package.

Every error carries enough context to be rendered as an event payload;
errors that report partial results expose them as attributes.
"""

from __future__ import annotations

from typing import Any


class AgoraError(Exception):
    """Base class for all agora errors."""


# -- model gateway -----------------------------------------------------------

class WindowExceeded(AgoraError):
    """Prompt or increment does not fit the model context window."""


class NoRuleMatch(AgoraError):
    """No scripted rule matches the prompt and no fallback is configured."""


class BudgetExceeded(AgoraError):
    """A query would cross the configured usage-meter cost cap."""


class InvalidWindow(AgoraError):
    """reserved_tokens must be strictly smaller than window_tokens."""


# -- goal creation -----------------------------------------------------------

class EmptyUtterance(AgoraError):
    """Passive goal creation requires a non-empty utterance."""


class NoSignal(AgoraError):
    """No utterance and no detector event above the admission threshold."""


# -- prompt optimiser --------------------------------------------------------

class DuplicateId(AgoraError):
    """Identifier already registered."""


class MalformedTemplate(AgoraError):
    """Template violates its own declaration (e.g. missing required slot)."""


class MissingSlot(AgoraError):
    """A slot in the template body has no binding."""

    def __init__(self, slot: str):
        super().__init__(f"unresolved slot: {slot}")
        self.slot = slot


class ConstraintViolation(AgoraError):
    """Rendered prompt violates a template constraint; never silently fixed."""


class ShapeMismatch(AgoraError):
    """Raw response does not satisfy the output specification."""


# -- memory / RAG ------------------------------------------------------------

class DuplicateDoc(AgoraError):
    """Document id already indexed."""


# -- planning ----------------------------------------------------------------

class UnparseablePlan(AgoraError):
    """No sampled response parses as an enumerated step list."""


class UnparseableOptions(AgoraError):
    """An expansion response parses to zero step options."""


class InvalidDepth(AgoraError):
    """Tree expansion needs depth >= 1 and branching >= 1."""


class UnknownNode(AgoraError):
    """Node id not present in the plan tree."""


class NotAChild(AgoraError):
    """Option node is not a child of the given node."""


class IncompleteChoices(AgoraError):
    """Linearization hit a depth with no chosen branch."""

    def __init__(self, depth: int):
        super().__init__(f"no chosen branch at depth {depth}")
        self.depth = depth


# -- reflection --------------------------------------------------------------

class UnparseableFeedback(AgoraError):
    """Critic output does not parse into a verdict plus critiques."""


class ReviewerUnavailable(AgoraError):
    """A reviewer backend failed; feedback from the others is attached."""

    def __init__(self, reviewer_id: str, feedback: list[Any]):
        super().__init__(f"reviewer unavailable: {reviewer_id}")
        self.reviewer_id = reviewer_id
        self.feedback = feedback


class HumanTimeout(AgoraError):
    """Configured human-feedback timeout elapsed without a post."""

    def __init__(self, message: str = "human feedback timed out", *,
                 plan: Any = None, history: Any = None):
        super().__init__(message)
        self.plan = plan
        self.history = history


class ChannelClosed(AgoraError):
    """Feedback channel is closed."""


class MaxIterationsExceeded(AgoraError):
    """Refinement loop hit its iteration cap; last plan and history attached."""

    def __init__(self, plan: Any, history: Any):
        super().__init__("refinement exceeded max iterations")
        self.plan = plan
        self.history = history


# -- cooperation -------------------------------------------------------------

class AllAbstained(AgoraError):
    """No voter produced a countable ballot."""


class MissingRole(AgoraError):
    """Roster must contain exactly one agent for the named role."""

    def __init__(self, role: str, count: int = 0):
        super().__init__(f"roster needs exactly one {role}, found {count}")
        self.role = role
        self.count = count


class NoCapableWorker(AgoraError):
    """Step requires a capability no worker has and no creator exists."""

    def __init__(self, step_id: str, capability: str):
        super().__init__(f"no worker for step {step_id} ({capability})")
        self.step_id = step_id
        self.capability = capability


# -- guardrails --------------------------------------------------------------

class MalformedRule(AgoraError):
    """Guard rule parameters incomplete for its kind."""


class GuardBlocked(AgoraError):
    """Content was blocked by an input guard rule before any model call."""

    def __init__(self, decision: Any):
        super().__init__(f"blocked by guardrails: {decision.rationale}")
        self.decision = decision


# -- tooling -----------------------------------------------------------------

class MalformedEntry(AgoraError):
    """Registry entry violates its invariants (e.g. empty capability set)."""


class NoCandidate(AgoraError):
    """No registry entry satisfies the capability and constraint filter."""


class MalformedManual(AgoraError):
    """Tool manual violates the sectioned format; carries the line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class UnknownOperation(AgoraError):
    """No descriptor operation matches the step."""


class MissingParam(AgoraError):
    """Required tool parameter absent from the call arguments."""

    def __init__(self, name: str):
        super().__init__(f"missing param: {name}")
        self.name = name


class UnknownParam(AgoraError):
    """Argument not declared by the tool descriptor."""

    def __init__(self, name: str):
        super().__init__(f"undeclared param: {name}")
        self.name = name


class ToolFailure(AgoraError):
    """Bound tool implementation raised; raw output preserved."""

    def __init__(self, raw: str):
        super().__init__(f"tool failed: {raw}")
        self.raw = raw


# -- evaluator ---------------------------------------------------------------

class ThresholdOrder(AgoraError):
    """Suite thresholds must satisfy 0 <= near_miss <= pass <= 1."""


class DuplicateCase(AgoraError):
    """Case id already present in the suite."""


class UnknownSlot(AgoraError):
    """Grid parameter names a slot the case template does not declare."""


class AgentAssemblyFailure(AgoraError):
    """Agent could not be assembled from the evaluation config."""


# -- orchestrator ------------------------------------------------------------

class UnknownRequirement(AgoraError):
    """Requirement tag outside the documented quality vocabulary."""

    def __init__(self, tag: str):
        super().__init__(f"unknown requirement tag: {tag}")
        self.tag = tag


class ConflictUnresolvable(AgoraError):
    """Two requirements contest one decision and no precedence entry exists."""


class InvalidConfig(AgoraError):
    """Pattern configuration violates an invariant; names the violation."""


class MissingResource(AgoraError):
    """A path referenced by the configuration does not exist."""

    def __init__(self, path: str):
        super().__init__(f"missing resource: {path}")
        self.path = path


class UnknownRun(AgoraError):
    """Run id not present in the runtime."""


class NotAwaiting(AgoraError):
    """Feedback/choice posted while the run is not awaiting_human."""
