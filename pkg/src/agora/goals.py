"""Passive and proactive goal creation.

Passive creation turns a user utterance plus ranked memory context into a
structured goal; proactive creation additionally admits detector events at
or above a confidence threshold and always notifies which detectors were
captured. Constraints are extracted with a fixed marker grammar: a token
ending in ``:`` binds the following token as its value, scanned left to
right; the remaining tokens form the description (falling back to the whole
utterance when nothing remains).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import EmptyUtterance, NoSignal
from .memory import KnowledgeBase, retrieve

DEFAULT_PROACTIVE_THRESHOLD = 0.5
DEFAULT_MEMORY_K = 3

SOURCES = ("user", "memory", "detector", "rag")
MODALITIES = ("text", "image_descriptor", "ui_layout", "gesture")


@dataclass(frozen=True)
class ContextItem:
    source: str
    modality: str
    content: str
    confidence: float = 1.0
    timestamp: int = 0

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown source: {self.source}")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality: {self.modality}")
        # Confidence is a detector notion; everything else is taken as given.
        if self.source != "detector" and self.confidence != 1.0:
            raise ValueError("confidence fixed at 1 for non-detector items")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class DetectorEvent:
    detector_id: str
    modality: str
    payload: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class Notification:
    captured_detectors: tuple[str, ...]
    message: str


@dataclass
class Goal:
    goal_id: str
    description: str
    constraints: dict[str, str] = field(default_factory=dict)
    context: list[ContextItem] = field(default_factory=list)
    origin: str = "passive"
    created_seq: int = 0

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError("goal description must be non-empty")
        if self.origin == "proactive" and not any(
                item.source == "detector" for item in self.context):
            raise ValueError("proactive goal needs a detector context item")


def parse_constraints(utterance: str) -> tuple[str, dict[str, str]]:
    """Apply the marker grammar; returns (description, constraints)."""
    words = utterance.split()
    constraints: dict[str, str] = {}
    rest: list[str] = []
    i = 0
    while i < len(words):
        word = words[i]
        if word.endswith(":") and len(word) > 1 and i + 1 < len(words):
            constraints[word[:-1]] = words[i + 1]
            i += 2
        else:
            rest.append(word)
            i += 1
    description = " ".join(rest) if rest else utterance.strip()
    return description, constraints


def _memory_items(memory: KnowledgeBase | None, query: str,
                  k: int) -> list[ContextItem]:
    if memory is None or k <= 0 or len(memory) == 0:
        return []
    items = []
    for doc_id, _score in retrieve(memory, query, k):
        doc = memory.get(doc_id)
        items.append(ContextItem("memory", "text", doc.text,
                                 timestamp=doc.seq))
    return items


def _next_timestamp(items: list[ContextItem]) -> int:
    return max((item.timestamp for item in items), default=0) + 1


def create_goal_passive(utterance: str, memory: KnowledgeBase | None,
                        k: int = DEFAULT_MEMORY_K, *,
                        goal_id: str = "goal-1") -> Goal:
    """Goal from an articulated utterance plus top-k memory context."""
    if not utterance or not utterance.strip():
        raise EmptyUtterance("utterance must be non-empty")
    description, constraints = parse_constraints(utterance)
    context = _memory_items(memory, utterance, k)
    context.sort(key=lambda item: item.timestamp)
    return Goal(goal_id, description, constraints, context,
                origin="passive", created_seq=_next_timestamp(context))


def create_goal_proactive(utterance: Optional[str],
                          events: list[DetectorEvent],
                          memory: KnowledgeBase | None,
                          threshold: float = DEFAULT_PROACTIVE_THRESHOLD, *,
                          k: int = DEFAULT_MEMORY_K,
                          goal_id: str = "goal-1",
                          ) -> tuple[Goal, Notification]:
    """Goal from detector events and an optional utterance.

    Events at or above the threshold become detector context items; the
    notification lists every captured detector id. With no admitted event
    the call falls back to passive semantics (and the notification is
    empty); with neither an utterance nor an admitted event there is no
    signal to act on.
    """
    if not events and not utterance:
        raise ValueError("events non-empty or utterance required")
    admitted = [e for e in events if e.confidence >= threshold]
    if not admitted and not utterance:
        raise NoSignal("all detector events below threshold and no utterance")

    if utterance:
        description, constraints = parse_constraints(utterance)
    else:
        description = "; ".join(e.payload for e in admitted)
        constraints = {}

    context = _memory_items(memory, utterance or description, k)
    ts = _next_timestamp(context)
    if utterance:
        context.append(ContextItem("user", "text", utterance, timestamp=ts))
        ts += 1
    for event in admitted:
        context.append(ContextItem("detector", event.modality, event.payload,
                                   confidence=event.confidence, timestamp=ts))
        ts += 1
    context.sort(key=lambda item: item.timestamp)

    origin = "proactive" if admitted else "passive"
    goal = Goal(goal_id, description, constraints, context,
                origin=origin, created_seq=ts)
    notification = Notification(
        tuple(e.detector_id for e in admitted),
        "captured context from: " + ", ".join(
            e.detector_id for e in admitted) if admitted
        else "no detector context captured")
    return goal, notification


def retrieve_recent_context(memory: KnowledgeBase | None,
                            k: int) -> list[ContextItem]:
    """At most k memory items, most-recent-first by sequence number."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if memory is None:
        return []
    return [ContextItem("memory", "text", doc.text, timestamp=doc.seq)
            for doc in memory.recent(k)]


def load_detector_events(path: str | Path) -> list[DetectorEvent]:
    """Load a JSON-lines detector fixture, one event per line."""
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        raw = json.loads(line)
        events.append(DetectorEvent(raw["detector_id"], raw["modality"],
                                    raw["payload"], float(raw["confidence"])))
    return events
