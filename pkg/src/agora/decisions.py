"""Quality-attribute decision model: requirements in, pattern config out.

Each decision maps to a solution space. Alternative decisions carry only
the attributes that distinguish their two options (attributes common to
both sides satisfy either choice and select nothing); complementary
options are simply enabled by any requirement among their strengths. When
two requirements pull one alternative decision both ways, the documented
precedence resolves it: quality/assurance attributes outrank economy
attributes (efficiency, cost, simplicity), and the overridden tag is
flagged in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .config import PatternConfig, baseline_config
from .errors import ConflictUnresolvable, UnknownRequirement


@dataclass(frozen=True)
class DecisionOption:
    answer: str
    patterns: tuple[str, ...]
    strengths: frozenset[str]
    tradeoffs: frozenset[str]


@dataclass(frozen=True)
class DecisionNode:
    decision_id: str
    question: str
    relation: str  # alternative | complement
    options: tuple[DecisionOption, ...]
    common: frozenset[str] = frozenset()


def _opt(answer: str, patterns: tuple[str, ...], strengths: set[str],
         tradeoffs: set[str]) -> DecisionOption:
    return DecisionOption(answer, patterns, frozenset(strengths),
                          frozenset(tradeoffs))


DECISION_GRAPH: tuple[DecisionNode, ...] = (
    DecisionNode(
        "goal_creator", "How are user goals captured?", "alternative",
        (
            _opt("passive", ("passive_goal_creator",),
                 {"efficiency"},
                 {"reasoning_uncertainty"}),
            _opt("proactive", ("proactive_goal_creator",),
                 {"accessibility"},
                 {"overhead"}),
        ),
        common=frozenset({"interactivity", "goal_seeking"}),
    ),
    DecisionNode(
        "querying", "How often is the model queried per purpose?",
        "alternative",
        (
            _opt("one_shot", ("one_shot_querying",),
                 {"efficiency", "cost_efficiency", "simplicity",
                  "limited_budget"},
                 {"oversimplification", "lack_of_explainability",
                  "context_window_limit"}),
            _opt("incremental", ("incremental_querying",),
                 {"supplementary_context", "reasoning_certainty",
                  "explainability"},
                 {"overhead"}),
        ),
    ),
    DecisionNode(
        "planner", "What plan structure is generated?", "alternative",
        (
            _opt("single_path", ("single_path_planner",),
                 {"efficiency"},
                 {"flexibility_limit", "oversimplification"}),
            _opt("multi_path", ("multi_path_planner",),
                 {"human_preference_alignment", "inclusiveness"},
                 {"overhead"}),
        ),
        common=frozenset({"reasoning_certainty", "coherence"}),
    ),
    DecisionNode(
        "optimiser", "Standardise prompts and responses?", "complement",
        (
            _opt("enabled", ("prompt_response_optimiser",),
                 {"standardisation", "goal_alignment", "interoperability",
                  "adaptability"},
                 {"underspecification", "maintenance_overhead"}),
        ),
    ),
    DecisionNode(
        "rag", "Retrieve external knowledge at query time?", "complement",
        (
            _opt("enabled", ("retrieval_augmented_generation",),
                 {"knowledge_retrieval", "updatability", "data_privacy",
                  "cost_efficiency"},
                 {"maintenance_overhead", "data_limitation"}),
        ),
    ),
    DecisionNode(
        "reflection", "Who reviews draft plans?", "complement",
        (
            _opt("self", ("self_reflection",),
                 {"reasoning_certainty", "explainability",
                  "continuous_improvement", "efficiency"},
                 {"reasoning_uncertainty", "overhead"}),
            _opt("cross", ("cross_reflection",),
                 {"reasoning_certainty", "explainability", "inclusiveness",
                  "scalability"},
                 {"reasoning_uncertainty", "fairness_preservation",
                  "complex_accountability", "overhead"}),
            _opt("human", ("human_reflection",),
                 {"human_preference_alignment", "contestability",
                  "effectiveness"},
                 {"fairness_preservation", "limited_capability",
                  "underspecification", "overhead"}),
        ),
    ),
    DecisionNode(
        "cooperation", "How do multiple agents finalise decisions?",
        "complement",
        (
            _opt("voting", ("voting_cooperation",),
                 {"fairness", "accountability", "collective_intelligence"},
                 {"centralisation", "overhead"}),
            _opt("role_based", ("role_based_cooperation",),
                 {"division_of_labor", "fault_tolerance", "scalability",
                  "accountability"},
                 {"overhead"}),
            _opt("debate", ("debate_cooperation",),
                 {"adaptability", "explainability", "critical_thinking"},
                 {"limited_capability", "data_privacy_risk", "overhead",
                  "scalability_preservation"}),
        ),
    ),
    DecisionNode(
        "guardrails", "Interpose checks on model inputs/outputs?",
        "complement",
        (
            _opt("enabled", ("multimodal_guardrails",),
                 {"robustness", "safety", "standard_alignment",
                  "adaptability"},
                 {"overhead", "lack_of_explainability"}),
        ),
    ),
    DecisionNode(
        "registry", "Discover tools/agents through a catalogue?",
        "complement",
        (
            _opt("enabled", ("tool_agent_registry",),
                 {"discoverability", "efficiency", "tool_appropriateness",
                  "scalability"},
                 {"centralisation", "overhead"}),
        ),
    ),
    DecisionNode(
        "adapter", "Convert between steps and tool interfaces?",
        "complement",
        (
            _opt("enabled", ("agent_adapter",),
                 {"interoperability", "adaptability",
                  "reduced_development_cost"},
                 {"maintenance_overhead"}),
        ),
    ),
    DecisionNode(
        "evaluator", "Assess the assembled agent against scenarios?",
        "complement",
        (
            _opt("enabled", ("agent_evaluator",),
                 {"functional_suitability", "adaptability", "flexibility"},
                 {"metric_quantification", "evaluation_quality"}),
        ),
    ),
)

QUALITY_VOCABULARY: frozenset[str] = frozenset().union(
    *(option.strengths for node in DECISION_GRAPH
      for option in node.options),
    *(node.common for node in DECISION_GRAPH))

# Economy attributes lose contested alternative decisions to everything else.
_ECONOMY_TAGS = frozenset({"efficiency", "cost_efficiency", "simplicity",
                           "limited_budget"})


def _precedence(tag: str) -> int:
    return 0 if tag in _ECONOMY_TAGS else 1


@dataclass
class Selection:
    decision_id: str
    answer: str
    matched_requirements: list[str] = field(default_factory=list)
    strengths: list[str] = field(default_factory=list)
    tradeoffs: list[str] = field(default_factory=list)
    overridden: list[str] = field(default_factory=list)


def decide_patterns(requirements: set[str] | list[str],
                    ) -> tuple[PatternConfig, dict]:
    """Walk the decision graph and emit a config plus a selection report."""
    tags = sorted(set(requirements))
    for tag in tags:
        if tag not in QUALITY_VOCABULARY:
            raise UnknownRequirement(tag)

    config = baseline_config()
    selections: list[Selection] = []
    notes: list[str] = []

    for node in DECISION_GRAPH:
        matched: dict[str, list[str]] = {}
        for option in node.options:
            hits = [t for t in tags if t in option.strengths]
            if hits:
                matched[option.answer] = hits
        shared = [t for t in tags if t in node.common]
        if shared:
            notes.append(
                f"{node.decision_id}: {', '.join(shared)} satisfied by "
                f"either option")

        if node.relation == "alternative":
            if not matched:
                continue
            if len(matched) == 1:
                answer = next(iter(matched))
                overridden: list[str] = []
            else:
                ranked = {ans: max(_precedence(t) for t in hits)
                          for ans, hits in matched.items()}
                best = max(ranked.values())
                winners = [ans for ans, rank in ranked.items()
                           if rank == best]
                if len(winners) != 1:
                    raise ConflictUnresolvable(
                        f"{node.decision_id}: no precedence entry separates "
                        f"{sorted(matched)}")
                answer = winners[0]
                overridden = [t for ans, hits in matched.items()
                              if ans != answer for t in hits]
            option = next(o for o in node.options if o.answer == answer)
            config = _apply(config, node.decision_id, answer)
            selections.append(Selection(
                node.decision_id, answer, matched[answer],
                sorted(option.strengths), sorted(option.tradeoffs),
                sorted(overridden)))
        else:
            for option in node.options:
                if option.answer not in matched:
                    continue
                config = _apply(config, node.decision_id, option.answer)
                selections.append(Selection(
                    node.decision_id, option.answer, matched[option.answer],
                    sorted(option.strengths), sorted(option.tradeoffs)))

    config = _close_invariants(config)
    report = {
        "requirements": tags,
        "selections": [vars(s) for s in selections],
        "notes": notes,
        "config": config.to_dict(),
    }
    return config, report


def _apply(config: PatternConfig, decision_id: str,
           answer: str) -> PatternConfig:
    if decision_id == "goal_creator":
        return replace(config, goal_creator=answer)
    if decision_id == "querying":
        return replace(config, querying=answer)
    if decision_id == "planner":
        return replace(config, planner=answer)
    if decision_id == "optimiser":
        return replace(config, optimiser_enabled=True)
    if decision_id == "rag":
        return replace(config, rag_enabled=True)
    if decision_id == "reflection":
        reflectors = list(config.reflectors)
        if answer not in reflectors:
            reflectors.append(answer)
        return replace(config, reflectors=tuple(reflectors))
    if decision_id == "cooperation":
        cooperation = list(config.cooperation)
        if answer not in cooperation:
            cooperation.append(answer)
        return replace(config, cooperation=tuple(cooperation))
    if decision_id == "guardrails":
        return replace(config, guardrails_enabled=True)
    if decision_id == "registry":
        return replace(config, registry_enabled=True)
    if decision_id == "adapter":
        return replace(config, adapter_enabled=True)
    if decision_id == "evaluator":
        return replace(config, evaluator_enabled=True)
    raise ValueError(f"unknown decision: {decision_id}")


def _close_invariants(config: PatternConfig) -> PatternConfig:
    """Fill the parameters the selected patterns need to assemble."""
    if config.planner == "multi_path" and "human" not in config.reflectors \
            and config.branch_choice_policy is None:
        config = replace(config, branch_choice_policy="first")
    if "cross" in config.reflectors and not config.reviewers:
        config = replace(config, reviewers=("reviewer-1", "reviewer-2",
                                            "reviewer-3"))
    if config.cooperation and not config.roster:
        config = replace(config, roster=default_roster_spec())
    return config


def default_roster_spec() -> tuple[dict, ...]:
    """Self-contained roster covering every cooperation protocol."""
    return (
        {"agent_id": "coordinator", "roles": ["planner"],
         "capabilities": ["planning"], "weight": 1},
        {"agent_id": "dispatcher", "roles": ["assigner"],
         "capabilities": [], "weight": 1},
        {"agent_id": "maker", "roles": ["creator"],
         "capabilities": [], "weight": 1},
        {"agent_id": "worker-a", "roles": ["worker"],
         "capabilities": ["general"], "weight": 1},
        {"agent_id": "worker-b", "roles": ["worker"],
         "capabilities": ["general"], "weight": 1},
    )
