"""Pattern configuration: which patterns are wired into a runtime, plus
their parameters. JSON round-trippable; validation names the violated
invariant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .errors import InvalidConfig

GOAL_CREATORS = ("passive", "proactive")
QUERYING = ("one_shot", "incremental")
PLANNERS = ("single_path", "multi_path")
REFLECTORS = ("self", "cross", "human")
COOPERATION = ("voting", "role_based", "debate")
BRANCH_POLICIES = ("first",)


@dataclass(frozen=True)
class PatternConfig:
    goal_creator: str = "passive"
    optimiser_enabled: bool = True
    rag_enabled: bool = False
    querying: str = "one_shot"
    planner: str = "single_path"
    reflectors: tuple[str, ...] = ("self",)
    cooperation: tuple[str, ...] = ()
    guardrails_enabled: bool = True
    registry_enabled: bool = True
    adapter_enabled: bool = True
    evaluator_enabled: bool = False

    # model backend
    rules_path: Optional[str] = None
    window_tokens: int = 4096
    reserved_tokens: int = 64
    unit_price: str = "0"  # Fraction literal
    budget_cap: Optional[str] = None
    max_completion_tokens: int = 256

    # goals
    proactive_threshold: float = 0.5
    detectors_path: Optional[str] = None
    memory_k: int = 3

    # rag
    corpus_path: Optional[str] = None
    rag_k: int = 3
    rag_min_similarity: float = 0.0

    # planning
    n_samples: int = 3
    tree_depth: int = 2
    tree_branching: int = 2
    branch_choice_policy: Optional[str] = None

    # reflection
    max_reflection_iterations: int = 3
    reviewers: tuple[str, ...] = ()
    cross_policy: str = "unanimity"
    human_timeout_ticks: Optional[float] = None

    # cooperation
    roster: tuple[dict, ...] = ()
    roster_path: Optional[str] = None
    vote_method: str = "head_count"
    debate_max_rounds: int = 3

    # guardrails / registry / prompts
    guardrails_path: Optional[str] = None
    registry_path: Optional[str] = None
    prompts_dir: Optional[str] = None

    def validate(self) -> None:
        """Raise InvalidConfig naming the first violated invariant."""
        if self.goal_creator not in GOAL_CREATORS:
            raise InvalidConfig(f"goal_creator must be one of "
                                f"{GOAL_CREATORS}: {self.goal_creator}")
        if self.querying not in QUERYING:
            raise InvalidConfig(f"querying must be one of {QUERYING}: "
                                f"{self.querying}")
        if self.planner not in PLANNERS:
            raise InvalidConfig(f"planner must be one of {PLANNERS}: "
                                f"{self.planner}")
        for reflector in self.reflectors:
            if reflector not in REFLECTORS:
                raise InvalidConfig(f"unknown reflector: {reflector}")
        for protocol in self.cooperation:
            if protocol not in COOPERATION:
                raise InvalidConfig(f"unknown cooperation: {protocol}")
        if self.planner == "multi_path" and "human" not in self.reflectors \
                and self.branch_choice_policy is None:
            raise InvalidConfig(
                "multi_path planning needs the human reflector or an "
                "automatic branch_choice_policy")
        if self.branch_choice_policy is not None \
                and self.branch_choice_policy not in BRANCH_POLICIES:
            raise InvalidConfig(
                f"unknown branch_choice_policy: {self.branch_choice_policy}")
        if "cross" in self.reflectors and not self.reviewers:
            raise InvalidConfig("cross reflection needs a reviewer roster")
        if self.cooperation and not (self.roster or self.roster_path):
            raise InvalidConfig("cooperation needs a roster")
        if self.cross_policy not in ("unanimity", "majority"):
            raise InvalidConfig(f"unknown cross_policy: {self.cross_policy}")
        if self.vote_method not in ("head_count", "weighted",
                                    "average_score"):
            raise InvalidConfig(f"unknown vote_method: {self.vote_method}")
        if self.reserved_tokens >= self.window_tokens:
            raise InvalidConfig("reserved_tokens must be < window_tokens")
        if self.n_samples < 1:
            raise InvalidConfig("n_samples must be >= 1")
        if self.tree_depth < 1 or self.tree_branching < 1:
            raise InvalidConfig("tree depth and branching must be >= 1")
        if self.max_reflection_iterations < 1:
            raise InvalidConfig("max_reflection_iterations must be >= 1")
        if self.debate_max_rounds < 1:
            raise InvalidConfig("debate_max_rounds must be >= 1")
        try:
            Fraction(self.unit_price)
            if self.budget_cap is not None:
                Fraction(self.budget_cap)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidConfig(f"bad price/cap literal: {exc}") from exc

    @property
    def unit_price_fraction(self) -> Fraction:
        return Fraction(self.unit_price)

    @property
    def budget_cap_fraction(self) -> Optional[Fraction]:
        return Fraction(self.budget_cap) if self.budget_cap else None

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["reflectors"] = list(self.reflectors)
        raw["cooperation"] = list(self.cooperation)
        raw["reviewers"] = list(self.reviewers)
        raw["roster"] = [dict(entry) for entry in self.roster]
        return raw

    @classmethod
    def from_dict(cls, raw: dict) -> "PatternConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        data = dict(raw)
        for key in ("reflectors", "cooperation", "reviewers"):
            if key in data:
                data[key] = tuple(data[key])
        if "roster" in data:
            data["roster"] = tuple(dict(e) for e in data["roster"])
        return cls(**data)


def baseline_config() -> PatternConfig:
    """Documented baseline: passive goals, optimiser on, one-shot querying,
    single-path planning, self-reflection, no cooperation, guardrails on,
    registry and adapter on."""
    return PatternConfig()


def load_config(path: str | Path) -> PatternConfig:
    config = PatternConfig.from_dict(
        json.loads(Path(path).read_text(encoding="utf-8")))
    config.validate()
    return config


def save_config(config: PatternConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
