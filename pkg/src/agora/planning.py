"""Plan generation: linear chains with self-consistency, option trees with
per-step choices, and structural validation.

Plans parse from enumerated-list model output, one ``N. text`` line per
step; a ``:: capability`` suffix marks the executor capability a step
needs. Self-consistency samples n seeded generations and keeps the modal
parse (normalized), ties resolved toward the lowest seed.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (IncompleteChoices, InvalidDepth, NotAChild, UnknownNode,
                     UnparseableOptions, UnparseablePlan)
from .goals import Goal
from .model import ModelRequest, ModelSession, incremental_query, one_shot_query
from .textutil import normalize_text

_ITEM_RE = re.compile(r"^\s*\d+[.)]\s+(.*\S)\s*$")

PLAN_PROMPT_PREFIX = "PLAN:"
OPTIONS_PROMPT_PREFIX = "OPTIONS:"


@dataclass
class Step:
    step_id: str
    description: str
    depends_on: frozenset[str] = frozenset()
    required_capability: Optional[str] = None
    status: str = "pending"


@dataclass
class Plan:
    plan_id: str
    goal_id: str
    steps: list[Step] = field(default_factory=list)
    kind: str = "single_path"
    status: str = "draft"

    def step(self, step_id: str) -> Step:
        for step in self.steps:
            if step.step_id == step_id:
                return step
        raise KeyError(step_id)

    def descriptions(self) -> list[str]:
        return [s.description for s in self.steps]


@dataclass(frozen=True)
class StepOption:
    option_id: str
    description: str
    rationale: str = ""

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError("option description must be non-empty")


@dataclass
class TreeNode:
    node_id: str
    option: StepOption
    parent: Optional[str] = None
    chosen: bool = False


@dataclass
class PlanTree:
    tree_id: str
    goal_id: str
    nodes: dict[str, TreeNode] = field(default_factory=dict)
    depth: int = 0
    branching: int = 0

    @property
    def root_id(self) -> str:
        for node in self.nodes.values():
            if node.parent is None:
                return node.node_id
        raise ValueError("tree has no root")

    def children(self, node_id: str) -> list[TreeNode]:
        return [n for n in self.nodes.values() if n.parent == node_id]


def split_capability(text: str) -> tuple[str, Optional[str]]:
    """Split an optional trailing ``:: capability`` marker off a step text."""
    body, sep, capability = text.rpartition("::")
    if sep and body.strip() and capability.strip():
        return body.strip(), capability.strip()
    return text.strip(), None


def parse_steps(text: str) -> list[tuple[str, Optional[str]]]:
    """Parse ``N. text [:: capability]`` lines; empty list when none parse."""
    parsed = []
    for line in text.splitlines():
        if not line.strip():
            continue
        match = _ITEM_RE.match(line)
        if not match:
            return []
        parsed.append(split_capability(match.group(1)))
    return parsed


def chain_steps(parsed: list[tuple[str, Optional[str]]]) -> list[Step]:
    """Build the linear dependency chain s1 <- s2 <- ... from parsed steps."""
    steps = []
    for i, (description, capability) in enumerate(parsed):
        depends = frozenset() if i == 0 else frozenset({f"s{i}"})
        steps.append(Step(f"s{i + 1}", description, depends, capability))
    return steps


def plan_signature(parsed: list[tuple[str, Optional[str]]]) -> tuple[str, ...]:
    """Normalized form used for self-consistency grouping."""
    return tuple(normalize_text(description) for description, _ in parsed)


def default_plan_prompt(goal: Goal) -> str:
    lines = [f"{PLAN_PROMPT_PREFIX} {goal.description}"]
    lines.extend(f"{key}: {value}" for key, value in goal.constraints.items())
    lines.extend(f"context[{item.source}]: {item.content}"
                 for item in goal.context)
    return "\n".join(lines)


def generate_single_path(goal: Goal, backend, n_samples: int = 1, *,
                         prompt_builder: Callable[[Goal], str] | None = None,
                         actor_id: str = "planner", seed_base: int = 0,
                         max_completion_tokens: int = 256,
                         plan_id: str | None = None) -> Plan:
    """Sample n seeded generations, keep the modal parse as a linear plan."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    build = prompt_builder or default_plan_prompt
    prompt = build(goal)

    samples: list[tuple[int, list[tuple[str, Optional[str]]]]] = []
    for i in range(n_samples):
        request = ModelRequest(prompt, seed=seed_base + i, actor_id=actor_id,
                               purpose="plan",
                               max_completion_tokens=max_completion_tokens)
        response = one_shot_query(backend, request)
        parsed = parse_steps(response.text)
        if parsed:
            samples.append((seed_base + i, parsed))
    if not samples:
        raise UnparseablePlan(
            f"none of {n_samples} samples parsed as an enumerated plan")

    counts = Counter(plan_signature(parsed) for _, parsed in samples)
    best = max(counts.values())
    # Modal parse; among tied groups the one first produced (lowest seed).
    for seed, parsed in samples:
        if counts[plan_signature(parsed)] == best:
            winner = parsed
            break
    return Plan(plan_id or f"plan-{goal.goal_id}", goal.goal_id,
                chain_steps(winner))


def sampled_signatures(goal: Goal, backend, n_samples: int, *,
                       prompt_builder: Callable[[Goal], str] | None = None,
                       actor_id: str = "planner", seed_base: int = 0,
                       ) -> list[tuple[int, tuple[str, ...]]]:
    """Seed/signature pairs for the same sampling run (vote candidates)."""
    build = prompt_builder or default_plan_prompt
    prompt = build(goal)
    out = []
    for i in range(n_samples):
        request = ModelRequest(prompt, seed=seed_base + i, actor_id=actor_id,
                               purpose="plan")
        parsed = parse_steps(one_shot_query(backend, request).text)
        if parsed:
            out.append((seed_base + i, plan_signature(parsed)))
    return out


def parse_options(text: str) -> list[StepOption]:
    """Parse option lines ``N. description [| rationale]``."""
    options = []
    for line in text.splitlines():
        if not line.strip():
            continue
        match = _ITEM_RE.match(line)
        if not match:
            return []
        body = match.group(1)
        description, sep, rationale = body.partition("|")
        options.append(StepOption("", description.strip(),
                                  rationale.strip() if sep else ""))
    return options


def generate_multi_path(goal: Goal, backend, depth: int, branching: int, *,
                        actor_id: str = "planner",
                        window_tokens: int | None = None,
                        reserved_tokens: int = 0,
                        tree_id: str | None = None) -> PlanTree:
    """Breadth-limited expansion: every frontier node queried once for up to
    ``branching`` options, seeded by BFS expansion ordinal."""
    if depth < 1 or branching < 1:
        raise InvalidDepth(f"depth {depth} and branching {branching} "
                           "must both be >= 1")
    window = window_tokens or getattr(backend, "window_tokens", 4096)
    session = ModelSession(f"tree-{goal.goal_id}", window, reserved_tokens)

    tree = PlanTree(tree_id or f"tree-{goal.goal_id}", goal.goal_id,
                    depth=depth, branching=branching)
    root = TreeNode("r", StepOption("r", goal.description, "goal"))
    tree.nodes[root.node_id] = root

    frontier = [root]
    ordinal = 0
    for level in range(1, depth + 1):
        next_frontier = []
        for node in frontier:
            increment = (f"{OPTIONS_PROMPT_PREFIX} {goal.description} "
                         f"| step {level} after: {node.option.description}")
            response = incremental_query(session, backend, increment,
                                         seed=ordinal, actor_id=actor_id,
                                         purpose="plan")
            ordinal += 1
            options = parse_options(response.text)
            if not options:
                raise UnparseableOptions(
                    f"no options parsed at node {node.node_id}")
            for idx, option in enumerate(options[:branching]):
                child_id = f"{node.node_id}.{idx}"
                child = TreeNode(
                    child_id,
                    StepOption(child_id, option.description,
                               option.rationale),
                    parent=node.node_id)
                tree.nodes[child_id] = child
                next_frontier.append(child)
        frontier = next_frontier
    return tree


def select_branch(tree: PlanTree, node_id: str,
                  option_node_id: str) -> PlanTree:
    """Mark one child as chosen, unmarking any previously chosen sibling."""
    if node_id not in tree.nodes:
        raise UnknownNode(f"unknown node: {node_id}")
    if option_node_id not in tree.nodes:
        raise UnknownNode(f"unknown node: {option_node_id}")
    if tree.nodes[option_node_id].parent != node_id:
        raise NotAChild(f"{option_node_id} is not a child of {node_id}")
    for sibling in tree.children(node_id):
        sibling.chosen = sibling.node_id == option_node_id
    return tree


def linearize(tree: PlanTree, *, plan_id: str | None = None) -> Plan:
    """Linear plan from the chosen path; a sole child counts as chosen."""
    steps_parsed: list[tuple[str, Optional[str]]] = []
    current = tree.nodes[tree.root_id]
    depth = 1
    while True:
        children = tree.children(current.node_id)
        if not children:
            break
        chosen = [c for c in children if c.chosen]
        if len(chosen) == 1:
            current = chosen[0]
        elif len(children) == 1:
            current = children[0]
        else:
            raise IncompleteChoices(depth)
        steps_parsed.append(split_capability(current.option.description))
        depth += 1
    plan = Plan(plan_id or f"plan-{tree.goal_id}", tree.goal_id,
                chain_steps(steps_parsed))
    violations = validate_plan(plan)
    if violations:
        raise ValueError(f"linearized plan invalid: {violations}")
    return plan


def validate_plan(plan: Plan) -> list[str]:
    """Structural checks; violations returned as data, empty means ok."""
    violations = []
    seen: set[str] = set()
    for step in plan.steps:
        if step.step_id in seen:
            violations.append(f"duplicate step id: {step.step_id}")
        seen.add(step.step_id)

    ids = {s.step_id for s in plan.steps}
    for step in plan.steps:
        for dep in step.depends_on:
            if dep == step.step_id:
                violations.append(f"self-dependency: {step.step_id}")
            elif dep not in ids:
                violations.append(
                    f"unknown dependency: {step.step_id} -> {dep}")

    # Cycle check over the known-id subgraph.
    graph = {s.step_id: {d for d in s.depends_on if d in ids and
                         d != s.step_id}
             for s in plan.steps}
    state: dict[str, int] = {}

    def has_cycle(node: str) -> bool:
        state[node] = 1
        for dep in graph[node]:
            mark = state.get(dep, 0)
            if mark == 1 or (mark == 0 and has_cycle(dep)):
                return True
        state[node] = 2
        return False

    if len(ids) == len(plan.steps) and any(
            state.get(n, 0) == 0 and has_cycle(n) for n in graph):
        violations.append("dependency cycle")

    if plan.kind == "single_path" and not violations:
        for i, step in enumerate(plan.steps):
            expected = (frozenset() if i == 0
                        else frozenset({plan.steps[i - 1].step_id}))
            if step.depends_on != expected:
                violations.append(
                    f"chain law: step {step.step_id} must depend exactly "
                    f"on its predecessor")
        dependents = Counter()
        for step in plan.steps:
            for dep in step.depends_on:
                dependents[dep] += 1
        terminals = [s.step_id for s in plan.steps
                     if dependents[s.step_id] == 0]
        if plan.steps and len(terminals) != 1:
            violations.append(
                f"chain law: expected exactly one terminal step, "
                f"found {len(terminals)}")
    return violations
