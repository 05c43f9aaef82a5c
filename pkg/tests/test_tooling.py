import random
from fractions import Fraction

import pytest

from agora.errors import (DuplicateId, MalformedEntry, MalformedManual,
                          MissingParam, NoCandidate, ToolFailure,
                          UnknownOperation, UnknownParam)
from agora.memory import Document, KnowledgeBase, index
from agora.planning import Step
from agora.tooling import (CALCULATOR_MANUAL, Registry, RegistryEntry,
                           Toolbox, adapt_invoke, builtin_toolbox,
                           extract_args, learn_interface, load_registry,
                           render_manual, result_summary)


def entry(entry_id, price, window, caps) -> RegistryEntry:
    return RegistryEntry(entry_id, "tool", frozenset(caps),
                         Fraction(price), window)


class TestRegistry:
    def test_register_and_list(self):
        registry = Registry()
        registry.register_entry(entry("t1", 5, 4000, {"search"}))
        assert [e.entry_id for e in registry.entries()] == ["t1"]

    def test_duplicate(self):
        registry = Registry()
        registry.register_entry(entry("t1", 5, 4000, {"search"}))
        with pytest.raises(DuplicateId):
            registry.register_entry(entry("t1", 2, 100, {"x"}))

    def test_empty_capabilities_rejected(self):
        with pytest.raises(MalformedEntry):
            entry("t1", 1, 10, set())


class TestDiscover:
    def setup_method(self):
        self.registry = Registry()
        self.registry.register_entry(entry("T1", 5, 4000, {"search"}))
        self.registry.register_entry(entry("T2", 2, 8000, {"search"}))

    def test_min_price_ordering(self):
        found = self.registry.discover({"search"}, objective="min_price")
        assert [e.entry_id for e in found] == ["T2", "T1"]

    def test_unsatisfiable_capabilities(self):
        with pytest.raises(NoCandidate):
            self.registry.discover({"search", "math"})

    def test_price_constraint(self):
        found = self.registry.discover({"search"}, {"max_price": 3})
        assert [e.entry_id for e in found] == ["T2"]

    def test_window_constraint_and_objective(self):
        found = self.registry.discover({"search"}, {"min_window": 5000},
                                       objective="max_window")
        assert [e.entry_id for e in found] == ["T2"]

    def test_tie_breaks_by_entry_id(self):
        self.registry.register_entry(entry("T0", 2, 8000, {"search"}))
        found = self.registry.discover({"search"}, objective="min_price")
        assert [e.entry_id for e in found] == ["T0", "T2", "T1"]

    def test_matches_brute_force_oracle(self):
        rng = random.Random(5)
        registry = Registry()
        pool = []
        for i in range(60):
            e = entry(f"e{i:02d}", rng.randint(0, 9),
                      rng.randint(100, 9000),
                      set(rng.sample(["a", "b", "c", "d"],
                                     rng.randint(1, 3))))
            registry.register_entry(e)
            pool.append(e)
        for _ in range(40):
            need = set(rng.sample(["a", "b", "c"], rng.randint(1, 2)))
            constraints = {"max_price": rng.randint(0, 9)}
            objective = rng.choice(["min_price", "max_window"])
            expected = [e for e in pool
                        if need <= set(e.capabilities)
                        and e.price_per_call <= constraints["max_price"]]
            if objective == "min_price":
                expected.sort(key=lambda e: (e.price_per_call, e.entry_id))
            else:
                expected.sort(key=lambda e: (-e.context_window, e.entry_id))
            if not expected:
                with pytest.raises(NoCandidate):
                    registry.discover(need, constraints, objective)
            else:
                got = registry.discover(need, constraints, objective)
                assert [e.entry_id for e in got] == \
                    [e.entry_id for e in expected]


class TestLearnInterface:
    def test_calculator_manual(self):
        descriptor = learn_interface(CALCULATOR_MANUAL)
        assert descriptor.tool_id == "calculator"
        add = descriptor.operation("add")
        assert [p.name for p in add.params] == ["a", "b"]
        assert all(p.required for p in add.params)
        assert add.result_shape.shape == "key_value"
        assert add.result_shape.required_keys == frozenset({"sum"})

    def test_missing_tool_header_reports_line_one(self):
        with pytest.raises(MalformedManual) as err:
            learn_interface("op: add\nparam: a number required")
        assert err.value.line == 1

    def test_empty_ops_valid_but_unusable(self):
        descriptor = learn_interface("tool: shell")
        assert descriptor.operations == ()

    def test_param_before_op_rejected(self):
        with pytest.raises(MalformedManual) as err:
            learn_interface("tool: t\nparam: a number required")
        assert err.value.line == 2

    def test_required_after_optional_rejected(self):
        manual = ("tool: t\nop: f\nparam: a number optional\n"
                  "param: b number required")
        with pytest.raises(MalformedManual) as err:
            learn_interface(manual)
        assert err.value.line == 4

    def test_duplicate_op_rejected(self):
        manual = "tool: t\nop: f\nresult: plain\nop: f"
        with pytest.raises(MalformedManual):
            learn_interface(manual)

    def test_round_trip_through_canonical_form(self):
        descriptor = learn_interface(CALCULATOR_MANUAL)
        assert learn_interface(render_manual(descriptor)) == descriptor

    def test_enumerated_result_round_trip(self):
        manual = ("tool: lister\nop: list\nparam: q text required\n"
                  "result: enumerated_list ^\\d+\\.")
        descriptor = learn_interface(manual)
        assert learn_interface(render_manual(descriptor)) == descriptor


class TestAdaptInvoke:
    def setup_method(self):
        self.toolbox, _ = builtin_toolbox()
        self.descriptor = self.toolbox.descriptor("calculator")

    def step(self, description, capability=None) -> Step:
        return Step("s1", description, frozenset(), capability)

    def test_calculator_add(self):
        result = adapt_invoke(self.descriptor,
                              self.step("add the numbers", "add"),
                              {"a": "2", "b": "3"}, toolbox=self.toolbox)
        assert result.status == "ok"
        assert dict(result.parsed.values) == {"sum": "5"}
        assert result.call_record == "calculator.add(a=2,b=3)"
        assert result_summary(result) == "5"

    def test_missing_required_param(self):
        with pytest.raises(MissingParam) as err:
            adapt_invoke(self.descriptor, self.step("add", "add"),
                         {"a": "2"}, toolbox=self.toolbox)
        assert err.value.name == "b"

    def test_undeclared_param_rejected(self):
        with pytest.raises(UnknownParam):
            adapt_invoke(self.descriptor, self.step("add", "add"),
                         {"a": "1", "b": "2", "c": "3"},
                         toolbox=self.toolbox)

    def test_unknown_operation(self):
        with pytest.raises(UnknownOperation):
            adapt_invoke(self.descriptor, self.step("frobnicate"),
                         {}, toolbox=self.toolbox)

    def test_op_matched_by_description_mention(self):
        result = adapt_invoke(self.descriptor,
                              self.step("eval the expression", None),
                              {"expression": "2*3+1"},
                              toolbox=self.toolbox)
        assert dict(result.parsed.values) == {"result": "7"}

    def test_tool_failure_preserves_raw(self):
        with pytest.raises(ToolFailure):
            adapt_invoke(self.descriptor, self.step("eval it", "eval"),
                         {"expression": "import os"}, toolbox=self.toolbox)

    def test_unparseable_result_is_failed_status(self):
        manual = "tool: t\nop: f\nresult: key_value must_have"
        descriptor = learn_interface(manual)
        toolbox = Toolbox()
        toolbox.bind(descriptor, {"f": lambda args: "prose, not keys"})
        result = adapt_invoke(descriptor, self.step("f it", "f"), {},
                              toolbox=toolbox)
        assert result.status == "failed"
        assert result.parsed is None
        assert result.raw == "prose, not keys"


class TestBuiltinTools:
    def test_search_over_corpus(self):
        kb = KnowledgeBase()
        index(kb, Document("d1", "alpha beta"))
        index(kb, Document("d2", "gamma"))
        toolbox, entries = builtin_toolbox(kb)
        raw = toolbox.invoke("search", "search", {"query": "alpha", "k": "1"})
        assert raw == "1. d1"
        assert {e.entry_id for e in entries} == {"calculator", "search",
                                                 "echo"}

    def test_echo(self):
        toolbox, _ = builtin_toolbox()
        assert toolbox.invoke("echo", "echo", {"text": "hi"}) == "hi"


class TestArgExtraction:
    def test_plain_and_quoted(self):
        args = extract_args('search query="alpha beta" k=2 :: search')
        assert args == {"query": "alpha beta", "k": "2"}

    def test_no_args(self):
        assert extract_args("just words") == {}


class TestRegistryFile:
    def test_load(self, tmp_path):
        path = tmp_path / "registry.json"
        path.write_text(
            '[{"entry_id": "x1", "kind": "agent", '
            '"capabilities": ["review"], "price_per_call": "1/2", '
            '"context_window": 2048}]')
        registry = load_registry(path)
        assert registry.get("x1").price_per_call == Fraction(1, 2)
        assert registry.get("x1").kind == "agent"
