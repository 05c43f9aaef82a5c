"""Prompt construction and response standardisation.

Templates are factories for prompts: a body with named ``{slot}``s, few-shot
examples, and hard constraints (token budget, forbidden terms) that are
enforced, never silently repaired. Output specs standardise raw model text
into one of three shapes with strict parsing.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .errors import (ConstraintViolation, DuplicateId, MalformedTemplate,
                     MissingSlot, ShapeMismatch)
from .goals import Goal
from .model import ModelRequest
from .textutil import count_tokens

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

SHAPES = ("plain", "key_value", "enumerated_list")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    required_slots: frozenset[str] = frozenset()
    few_shot_examples: tuple[tuple[str, str], ...] = ()
    max_tokens: int | None = None
    forbidden_terms: frozenset[str] = frozenset()

    def slots(self) -> set[str]:
        return set(_SLOT_RE.findall(self.body))


@dataclass(frozen=True)
class OutputSpec:
    spec_id: str
    shape: str = "plain"
    required_keys: frozenset[str] = frozenset()
    item_pattern: str = ""

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape: {self.shape}")
        if self.required_keys and self.shape != "key_value":
            raise ValueError("required_keys only apply to key_value")


@dataclass(frozen=True)
class StructuredResponse:
    shape: str
    text: str = ""
    values: Mapping[str, str] = field(default_factory=dict)
    items: tuple[str, ...] = ()


class TemplateRegistry:
    """Concurrent-read registry of templates and output specs."""

    def __init__(self) -> None:
        self._templates: dict[str, PromptTemplate] = {}
        self._specs: dict[str, OutputSpec] = {}
        self._lock = threading.Lock()

    def register_template(self, template: PromptTemplate) -> str:
        missing = template.required_slots - template.slots()
        if missing:
            raise MalformedTemplate(
                f"template {template.template_id} body lacks required "
                f"slots: {sorted(missing)}")
        with self._lock:
            if template.template_id in self._templates:
                raise DuplicateId(
                    f"template already registered: {template.template_id}")
            self._templates[template.template_id] = template
        return template.template_id

    def register_spec(self, spec: OutputSpec) -> str:
        with self._lock:
            if spec.spec_id in self._specs:
                raise DuplicateId(f"spec already registered: {spec.spec_id}")
            self._specs[spec.spec_id] = spec
        return spec.spec_id

    def template(self, template_id: str) -> PromptTemplate:
        return self._templates[template_id]

    def spec(self, spec_id: str) -> OutputSpec:
        return self._specs[spec_id]

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._templates


def goal_bindings(goal: Goal) -> dict[str, str]:
    """Slot bindings derived from a goal.

    The description answers the generic slots (task/goal/description);
    each constraint binds under its own key.
    """
    bindings = {
        "description": goal.description,
        "goal": goal.description,
        "task": goal.description,
        "goal_id": goal.goal_id,
    }
    bindings.update(goal.constraints)
    return bindings


def optimise_prompt(goal: Goal, registry: TemplateRegistry,
                    template_id: str,
                    extra_slots: Optional[Mapping[str, str]] = None, *,
                    actor_id: str = "agent", purpose: str = "optimise",
                    seed: int = 0,
                    max_completion_tokens: int = 256) -> ModelRequest:
    """Render a template into a model request under its constraints.

    Sections: body with slots bound (extra_slots override goal bindings),
    few-shot examples in registration order, the goal description (unless a
    slot already received it) and constraints as ``key: value`` lines.
    Token overflow and forbidden terms are reported, never repaired.
    """
    template = registry.template(template_id)
    bindings = goal_bindings(goal)
    if extra_slots:
        bindings.update(extra_slots)

    def fill(match: re.Match) -> str:
        slot = match.group(1)
        if slot not in bindings:
            raise MissingSlot(slot)
        return str(bindings[slot])

    rendered = _SLOT_RE.sub(fill, template.body)
    sections = [rendered]
    for example_in, example_out in template.few_shot_examples:
        sections.append(f"example: {example_in} -> {example_out}")
    body_slots = template.slots()
    description_bound = any(bindings.get(slot) == goal.description
                            for slot in body_slots)
    if not description_bound:
        sections.append(goal.description)
    for key, value in goal.constraints.items():
        sections.append(f"{key}: {value}")
    text = "\n".join(sections)

    for term in sorted(template.forbidden_terms):
        if term in text:
            raise ConstraintViolation(f"forbidden term present: {term!r}")
    if template.max_tokens is not None:
        total = count_tokens(text)
        if total > template.max_tokens:
            raise ConstraintViolation(
                f"rendered prompt is {total} tokens, budget "
                f"{template.max_tokens}")
    return ModelRequest(text, max_completion_tokens=max_completion_tokens,
                        seed=seed, actor_id=actor_id, purpose=purpose)


def optimise_response(raw: str, spec: OutputSpec) -> StructuredResponse:
    """Standardise raw text against the spec; strict, trim-only parsing."""
    if spec.shape == "plain":
        return StructuredResponse("plain", text=raw.strip())

    if spec.shape == "key_value":
        values: dict[str, str] = {}
        for line in raw.splitlines():
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition(":")
            if sep and key.strip():
                values.setdefault(key.strip(), value.strip())
        for key in sorted(spec.required_keys):
            if key not in values:
                raise ShapeMismatch(f"missing required key: {key}")
        return StructuredResponse("key_value", text=raw.strip(),
                                  values=values)

    pattern = re.compile(spec.item_pattern) if spec.item_pattern else None
    items = []
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        if pattern is not None and not pattern.search(line):
            raise ShapeMismatch(
                f"line does not match item pattern "
                f"{spec.item_pattern!r}: {line!r}")
        items.append(line)
    return StructuredResponse("enumerated_list", text=raw.strip(),
                              items=tuple(items))


def render_key_value(values: Mapping[str, str]) -> str:
    """Emit a key_value payload that round-trips through optimise_response."""
    return "\n".join(f"{key}: {value}" for key, value in values.items())


def load_template_file(path: str | Path) -> PromptTemplate:
    """Parse a template file: front-matter header lines, then the body.

    Header lines before the first blank line: ``id:``, ``max_tokens:``,
    ``forbidden:`` (comma separated), ``required:`` (comma separated) and
    ``example:`` (``input -> output``). Everything after the blank line is
    the body.
    """
    text = Path(path).read_text(encoding="utf-8")
    head, _, body = text.partition("\n\n")
    template_id = None
    max_tokens: int | None = None
    forbidden: set[str] = set()
    required: set[str] = set()
    examples: list[tuple[str, str]] = []
    for line in head.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise MalformedTemplate(f"bad header line: {line!r}")
        key, value = key.strip(), value.strip()
        if key == "id":
            template_id = value
        elif key == "max_tokens":
            max_tokens = int(value)
        elif key == "forbidden":
            forbidden = {t.strip() for t in value.split(",") if t.strip()}
        elif key == "required":
            required = {t.strip() for t in value.split(",") if t.strip()}
        elif key == "example":
            before, arrow, after = value.partition("->")
            if not arrow:
                raise MalformedTemplate(f"bad example line: {line!r}")
            examples.append((before.strip(), after.strip()))
        else:
            raise MalformedTemplate(f"unknown header key: {key}")
    if not template_id:
        raise MalformedTemplate("template file missing id header")
    if not body.strip():
        raise MalformedTemplate("template file has an empty body")
    return PromptTemplate(template_id, body.strip(),
                          frozenset(required), tuple(examples),
                          max_tokens, frozenset(forbidden))


def load_templates_dir(directory: str | Path,
                       registry: TemplateRegistry) -> list[str]:
    """Register every ``*.prompt`` file under the directory."""
    ids = []
    for path in sorted(Path(directory).glob("*.prompt")):
        ids.append(registry.register_template(load_template_file(path)))
    return ids
