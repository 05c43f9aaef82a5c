"""Tool/agent registry and invocation adapter.

The registry is an in-process metadata catalogue (capabilities, price,
context window) with constrained discovery. The adapter learns a tool's
call surface from a sectioned text manual, converts plan steps into
canonical call records, invokes the bound local implementation and parses
the raw result against the declared shape.

Manual format, one directive per line (# comments allowed)::

    tool: calculator
    op: add
    param: a number required
    param: b number required
    result: key_value sum

``result`` is ``plain``, ``key_value <keys...>`` or
``enumerated_list <regex>``. Required params must precede optional ones.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from .errors import (DuplicateId, MalformedEntry, MalformedManual,
                     MissingParam, NoCandidate, ShapeMismatch, ToolFailure,
                     UnknownOperation, UnknownParam)
from .events import EventLog
from .memory import KnowledgeBase, retrieve
from .planning import Step
from .prompts import OutputSpec, StructuredResponse, optimise_response

OBJECTIVES = ("min_price", "max_window")


@dataclass(frozen=True)
class RegistryEntry:
    entry_id: str
    kind: str  # tool | agent
    capabilities: frozenset[str]
    price_per_call: Fraction = Fraction(0)
    context_window: int = 0
    descriptor_ref: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("tool", "agent"):
            raise MalformedEntry(f"unknown kind: {self.kind}")
        if not self.capabilities:
            raise MalformedEntry(f"entry {self.entry_id} has no capabilities")
        if self.price_per_call < 0:
            raise MalformedEntry("price_per_call must be non-negative")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    semantic_type: str
    required: bool


@dataclass(frozen=True)
class Operation:
    name: str
    params: tuple[ParamSpec, ...]
    result_shape: OutputSpec


@dataclass(frozen=True)
class ToolDescriptor:
    tool_id: str
    operations: tuple[Operation, ...]

    def operation(self, name: str) -> Optional[Operation]:
        for op in self.operations:
            if op.name == name:
                return op
        return None


@dataclass
class ToolResult:
    tool_id: str
    operation: str
    raw: str
    parsed: Optional[StructuredResponse]
    status: str  # ok | failed
    call_record: str = ""


class Registry:
    """Metadata catalogue; reads concurrent, writes serialized by caller."""

    def __init__(self) -> None:
        self._entries: dict[str, RegistryEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[RegistryEntry]:
        return list(self._entries.values())

    def get(self, entry_id: str) -> RegistryEntry:
        return self._entries[entry_id]

    def register_entry(self, entry: RegistryEntry) -> str:
        if entry.entry_id in self._entries:
            raise DuplicateId(f"entry exists: {entry.entry_id}")
        self._entries[entry.entry_id] = entry
        return entry.entry_id

    def discover(self, required_capabilities: set[str],
                 constraints: Optional[dict] = None,
                 objective: str = "min_price") -> list[RegistryEntry]:
        """Entries covering the capabilities, ranked by the objective."""
        if not required_capabilities:
            raise ValueError("required_capabilities must be non-empty")
        if objective not in OBJECTIVES:
            raise ValueError(f"unknown objective: {objective}")
        constraints = constraints or {}
        max_price = constraints.get("max_price")
        min_window = constraints.get("min_window")
        found = []
        for entry in self._entries.values():
            if not set(required_capabilities) <= set(entry.capabilities):
                continue
            if max_price is not None and entry.price_per_call > max_price:
                continue
            if min_window is not None and entry.context_window < min_window:
                continue
            found.append(entry)
        if not found:
            raise NoCandidate(
                f"no entry offers {sorted(required_capabilities)} under "
                f"{constraints}")
        if objective == "min_price":
            found.sort(key=lambda e: (e.price_per_call, e.entry_id))
        else:
            found.sort(key=lambda e: (-e.context_window, e.entry_id))
        return found


_RESULT_SHAPES = ("plain", "key_value", "enumerated_list")


def learn_interface(manual: str) -> ToolDescriptor:
    """Parse a tool manual into a descriptor, in document order."""
    tool_id: Optional[str] = None
    operations: list[Operation] = []
    current_name: Optional[str] = None
    current_params: list[ParamSpec] = []
    current_result: Optional[OutputSpec] = None

    def close_op(line_no: int) -> None:
        nonlocal current_name, current_params, current_result
        if current_name is None:
            return
        if any(op.name == current_name for op in operations):
            raise MalformedManual(line_no, f"duplicate op: {current_name}")
        operations.append(Operation(
            current_name, tuple(current_params),
            current_result or OutputSpec(f"{current_name}-result", "plain")))
        current_name, current_params, current_result = None, [], None

    for line_no, raw_line in enumerate(manual.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        directive, sep, rest = line.partition(":")
        directive, rest = directive.strip(), rest.strip()
        if not sep:
            raise MalformedManual(line_no, f"not a directive: {line!r}")
        if tool_id is None:
            if directive != "tool" or not rest:
                raise MalformedManual(line_no, "first directive must be tool:")
            tool_id = rest
            continue
        if directive == "tool":
            raise MalformedManual(line_no, "duplicate tool: header")
        if directive == "op":
            if not rest:
                raise MalformedManual(line_no, "op needs a name")
            close_op(line_no)
            current_name = rest
        elif directive == "param":
            if current_name is None:
                raise MalformedManual(line_no, "param before any op")
            fields = rest.split()
            if len(fields) != 3 or fields[2] not in ("required", "optional"):
                raise MalformedManual(
                    line_no, "param needs: name type required|optional")
            required = fields[2] == "required"
            if required and current_params and not current_params[-1].required:
                raise MalformedManual(
                    line_no, "required param after optional")
            current_params.append(ParamSpec(fields[0], fields[1], required))
        elif directive == "result":
            if current_name is None:
                raise MalformedManual(line_no, "result before any op")
            if current_result is not None:
                raise MalformedManual(line_no, "duplicate result for op")
            fields = rest.split()
            if not fields or fields[0] not in _RESULT_SHAPES:
                raise MalformedManual(
                    line_no, f"result shape must be one of {_RESULT_SHAPES}")
            shape = fields[0]
            if shape == "key_value":
                current_result = OutputSpec(f"{current_name}-result", shape,
                                            frozenset(fields[1:]))
            elif shape == "enumerated_list":
                current_result = OutputSpec(
                    f"{current_name}-result", shape,
                    item_pattern=rest.partition(" ")[2].strip())
            else:
                current_result = OutputSpec(f"{current_name}-result", shape)
        else:
            raise MalformedManual(line_no, f"unknown directive: {directive}")
    if tool_id is None:
        raise MalformedManual(1, "manual missing tool: header")
    close_op(len(manual.splitlines()) + 1)
    return ToolDescriptor(tool_id, tuple(operations))


def render_manual(descriptor: ToolDescriptor) -> str:
    """Canonical manual form; learn_interface(render_manual(d)) == d."""
    lines = [f"tool: {descriptor.tool_id}"]
    for op in descriptor.operations:
        lines.append(f"op: {op.name}")
        for param in op.params:
            flag = "required" if param.required else "optional"
            lines.append(f"param: {param.name} {param.semantic_type} {flag}")
        spec = op.result_shape
        if spec.shape == "key_value":
            lines.append("result: key_value " +
                         " ".join(sorted(spec.required_keys)))
        elif spec.shape == "enumerated_list":
            lines.append(f"result: enumerated_list {spec.item_pattern}".rstrip())
        else:
            lines.append("result: plain")
    return "\n".join(lines) + "\n"


ToolImpl = Callable[[dict[str, str]], str]


class Toolbox:
    """Bindings from (tool_id, op) to local implementations."""

    def __init__(self) -> None:
        self._descriptors: dict[str, ToolDescriptor] = {}
        self._impls: dict[tuple[str, str], ToolImpl] = {}

    def bind(self, descriptor: ToolDescriptor,
             impls: dict[str, ToolImpl]) -> None:
        self._descriptors[descriptor.tool_id] = descriptor
        for op_name, impl in impls.items():
            if descriptor.operation(op_name) is None:
                raise UnknownOperation(
                    f"{descriptor.tool_id} declares no op {op_name}")
            self._impls[(descriptor.tool_id, op_name)] = impl

    def descriptor(self, tool_id: str) -> ToolDescriptor:
        return self._descriptors[tool_id]

    def __contains__(self, tool_id: str) -> bool:
        return tool_id in self._descriptors

    def invoke(self, tool_id: str, op_name: str,
               args: dict[str, str]) -> str:
        impl = self._impls.get((tool_id, op_name))
        if impl is None:
            raise UnknownOperation(f"no binding for {tool_id}.{op_name}")
        return impl(args)


_ARG_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)=(\"[^\"]*\"|\S+)")


def extract_args(text: str) -> dict[str, str]:
    """Pull ``name=value`` pairs (value = quoted string or single token)."""
    args = {}
    for name, value in _ARG_RE.findall(text):
        if value.startswith('"') and value.endswith('"'):
            value = value[1:-1]
        args[name] = value
    return args


def resolve_operation(descriptor: ToolDescriptor, step: Step) -> Operation:
    """Match by the step capability first, then a unique op name mention."""
    if step.required_capability:
        op = descriptor.operation(step.required_capability)
        if op is not None:
            return op
    words = set(step.description.casefold().split())
    mentioned = [op for op in descriptor.operations
                 if op.name.casefold() in words]
    if len(mentioned) == 1:
        return mentioned[0]
    raise UnknownOperation(
        f"no operation of {descriptor.tool_id} matches step "
        f"{step.step_id!r} ({step.description!r})")


def adapt_invoke(descriptor: ToolDescriptor, step: Step,
                 args: dict[str, str], *, toolbox: Toolbox,
                 event_log: Optional[EventLog] = None,
                 actor_id: str = "adapter") -> ToolResult:
    """Validate args, invoke the bound tool, parse the raw result.

    A raw result that fails its declared shape yields status=failed with
    the raw text preserved; a raising tool is a ToolFailure error.
    """
    op = resolve_operation(descriptor, step)
    declared = {p.name for p in op.params}
    for name in args:
        if name not in declared:
            raise UnknownParam(name)
    for param in op.params:
        if param.required and param.name not in args:
            raise MissingParam(param.name)

    ordered = [(p.name, args[p.name]) for p in op.params if p.name in args]
    call_record = (f"{descriptor.tool_id}.{op.name}("
                   + ",".join(f"{k}={v}" for k, v in ordered) + ")")
    try:
        raw = toolbox.invoke(descriptor.tool_id, op.name, dict(ordered))
    except (UnknownOperation, MissingParam, UnknownParam):
        raise
    except Exception as exc:
        if event_log is not None:
            event_log.append(actor_id, "tool_failed", {
                "call": call_record, "error": str(exc)})
        raise ToolFailure(str(exc)) from exc

    try:
        parsed = optimise_response(raw, op.result_shape)
        status = "ok"
    except ShapeMismatch:
        parsed = None
        status = "failed"
    if event_log is not None:
        event_log.append(actor_id, "tool_invoked", {
            "call": call_record, "raw": raw, "status": status})
    return ToolResult(descriptor.tool_id, op.name, raw, parsed, status,
                      call_record)


def result_summary(result: ToolResult) -> str:
    """Single-line essence of a tool result for step outputs."""
    if result.status != "ok" or result.parsed is None:
        return result.raw.strip()
    parsed = result.parsed
    if parsed.shape == "key_value" and len(parsed.values) == 1:
        return next(iter(parsed.values.values()))
    if parsed.shape == "enumerated_list":
        return "\n".join(parsed.items)
    return parsed.text


# -- bundled local tools -------------------------------------------------------

_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant,
                  ast.Add, ast.Sub, ast.Mult, ast.Div, ast.USub, ast.UAdd,
                  ast.Mod, ast.Pow, ast.FloorDiv)


def _safe_eval(expression: str) -> float | int:
    tree = ast.parse(expression, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"unsupported syntax: {expression!r}")
        if isinstance(node, ast.Constant) \
                and not isinstance(node.value, (int, float)):
            raise ValueError(f"non-numeric constant in {expression!r}")
    return eval(compile(tree, "<calc>", "eval"))  # noqa: S307


def _format_number(value: float | int) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _to_number(raw: str) -> float | int:
    try:
        return int(raw)
    except ValueError:
        return float(raw)


CALCULATOR_MANUAL = """\
tool: calculator
op: add
param: a number required
param: b number required
result: key_value sum
op: eval
param: expression text required
result: key_value result
"""

SEARCH_MANUAL = """\
tool: search
op: search
param: query text required
param: k number optional
result: enumerated_list ^\\d+\\.
"""

ECHO_MANUAL = """\
tool: echo
op: echo
param: text text required
result: plain
"""


def builtin_toolbox(kb: Optional[KnowledgeBase] = None,
                    ) -> tuple[Toolbox, list[RegistryEntry]]:
    """Calculator, corpus keyword search and echo, with registry entries."""
    toolbox = Toolbox()

    def calc_add(args: dict[str, str]) -> str:
        total = _to_number(args["a"]) + _to_number(args["b"])
        return f"sum: {_format_number(total)}"

    def calc_eval(args: dict[str, str]) -> str:
        return f"result: {_format_number(_safe_eval(args['expression']))}"

    toolbox.bind(learn_interface(CALCULATOR_MANUAL),
                 {"add": calc_add, "eval": calc_eval})

    def do_search(args: dict[str, str]) -> str:
        store = kb if kb is not None else KnowledgeBase()
        k = int(args.get("k", "3"))
        hits = retrieve(store, args["query"], k)
        return "\n".join(f"{i + 1}. {doc_id}"
                         for i, (doc_id, _score) in enumerate(hits))

    toolbox.bind(learn_interface(SEARCH_MANUAL), {"search": do_search})

    toolbox.bind(learn_interface(ECHO_MANUAL),
                 {"echo": lambda args: args["text"]})

    entries = [
        RegistryEntry("calculator", "tool", frozenset({"calculator", "math"}),
                      Fraction(0), 128, "calculator"),
        RegistryEntry("search", "tool", frozenset({"search"}),
                      Fraction(0), 512, "search"),
        RegistryEntry("echo", "tool", frozenset({"echo"}),
                      Fraction(0), 4096, "echo"),
    ]
    return toolbox, entries


def load_registry(path: str | Path, registry: Optional[Registry] = None,
                  ) -> Registry:
    """Load a JSON list of registry entries."""
    registry = registry if registry is not None else Registry()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    for entry in raw:
        registry.register_entry(RegistryEntry(
            entry["entry_id"], entry.get("kind", "tool"),
            frozenset(entry["capabilities"]),
            Fraction(str(entry.get("price_per_call", 0))),
            int(entry.get("context_window", 0)),
            entry.get("descriptor_ref")))
    return registry
