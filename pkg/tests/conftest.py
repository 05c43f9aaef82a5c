from __future__ import annotations

from pathlib import Path

import pytest

from agora.model import ScriptedBackend, ScriptedRule

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_backend(*rules: tuple, **kwargs) -> ScriptedBackend:
    """Backend from (rule_id, matcher, responses[, priority]) tuples."""
    built = []
    for rule in rules:
        rule_id, matcher, responses = rule[0], rule[1], rule[2]
        priority = rule[3] if len(rule) > 3 else 0
        if isinstance(responses, str):
            responses = (responses,)
        built.append(ScriptedRule(rule_id, matcher, tuple(responses),
                                  priority))
    return ScriptedBackend(built, **kwargs)
