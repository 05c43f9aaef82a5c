"""Built-in scripted rules and prompt templates.

These make a bare config runnable end to end without fixture files: plans
resolve to one generic step, critics approve, debates converge. A config
that names a rules file replaces the built-ins entirely, so fixture gaps
surface as NoRuleMatch instead of being masked.
"""

from __future__ import annotations

from .model import ScriptedRule
from .prompts import PromptTemplate

# Substring matchers: incremental prompts carry prior turns as a prefix.
DEFAULT_RULES: tuple[ScriptedRule, ...] = (
    ScriptedRule("builtin-plan", "PLAN:",
                 ("1. address the goal",), -100),
    ScriptedRule("builtin-options", "OPTIONS:",
                 ("1. proceed directly | quickest\n"
                  "2. gather context first | safer",), -100),
    ScriptedRule("builtin-reflect", "REFLECT",
                 ("verdict: approve",), -100),
    ScriptedRule("builtin-revise", "REVISE",
                 ("1. address the goal",), -100),
    ScriptedRule("builtin-debate", "DEBATE:",
                 ("proceed as planned",), -100),
    ScriptedRule("builtin-execute", "EXECUTE:",
                 ("done",), -100),
)

PLAN_TEMPLATE = PromptTemplate(
    "plan", "PLAN: {task}", frozenset({"task"}))

ANSWER_TEMPLATE = PromptTemplate(
    "answer", "ANSWER: {task}", frozenset({"task"}))

DEFAULT_TEMPLATES: tuple[PromptTemplate, ...] = (PLAN_TEMPLATE,
                                                 ANSWER_TEMPLATE)
