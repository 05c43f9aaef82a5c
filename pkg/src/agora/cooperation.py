"""Multi-agent cooperation protocols: voting, role-based workflows and
round-structured debate over a deterministic in-process roster.

Scheduling is round-barriered and all orderings are total (roster order for
ballots, agent id within debate rounds, lexicographic tie-breaks with a
``tied`` flag), so transcripts and tallies are byte-reproducible. Tallies
use exact rational arithmetic, which makes the weighted winner invariant
under any positive rescaling of the weights. Every ballot, statement,
assignment and spawn can be logged and the results rebuilt from the log
alone.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

from .errors import AllAbstained, MissingRole, NoCapableWorker
from .events import EventLog, EventRecord
from .goals import Goal
from .model import ModelRequest, ScriptedBackend, load_rules, one_shot_query
from .planning import Plan, generate_single_path
from .textutil import normalize_text

VOTE_METHODS = ("head_count", "weighted", "average_score")

VOTE_PROMPT_PREFIX = "VOTE:"
SCORE_PROMPT_PREFIX = "SCORE:"
DEBATE_PROMPT_PREFIX = "DEBATE:"
EXECUTE_PROMPT_PREFIX = "EXECUTE:"

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass
class AgentHandle:
    agent_id: str
    backend: object
    roles: frozenset[str] = frozenset()
    capabilities: frozenset[str] = frozenset()
    weight: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError("agent weight must be positive")


@dataclass(frozen=True)
class Ballot:
    voter_id: str
    choice_id: str
    weight_applied: Fraction
    seq: int


@dataclass
class VoteResult:
    method: str
    tally: dict[str, Fraction]
    winner: str
    tied: bool
    ballots: list[Ballot] = field(default_factory=list)
    abstained: list[str] = field(default_factory=list)


@dataclass
class DebateTranscript:
    question: str
    rounds: list[list[tuple[str, str]]] = field(default_factory=list)
    consensus: Optional[str] = None
    terminated_by: str = "round_limit"


@dataclass
class WorkflowResult:
    plan_id: str
    assignments: dict[str, str] = field(default_factory=dict)
    spawned_agents: list[str] = field(default_factory=list)
    step_results: dict[str, str] = field(default_factory=dict)


def _emit(event_log: Optional[EventLog], actor_id: str, event_type: str,
          payload: dict) -> None:
    if event_log is not None:
        event_log.append(actor_id, event_type, payload)


def _decide_winner(tally: dict[str, Fraction]) -> tuple[str, bool]:
    best = max(tally.values())
    winners = sorted(cid for cid, score in tally.items() if score == best)
    return winners[0], len(winners) > 1


def _parse_choice(text: str, candidates: list[str]) -> Optional[str]:
    """A ballot names its candidate exactly, or as the only id mentioned."""
    stripped = text.strip()
    if stripped in candidates:
        return stripped
    mentioned = {c for c in candidates if c in text.split()}
    if len(mentioned) == 1:
        return mentioned.pop()
    return None


def _parse_score(text: str) -> Optional[Fraction]:
    match = _NUMBER_RE.search(text)
    if not match:
        return None
    score = Fraction(match.group(0))
    return score if 0 <= score <= 10 else None


def run_vote(question: str, candidates: list[str], voters: list[AgentHandle],
             method: str = "head_count", *,
             event_log: Optional[EventLog] = None,
             seed: int = 0) -> VoteResult:
    """Hold one vote; abstentions are logged and skipped, not fatal."""
    if len(candidates) < 2:
        raise ValueError("need at least 2 candidates")
    if not voters:
        raise ValueError("need at least 1 voter")
    if method not in VOTE_METHODS:
        raise ValueError(f"unknown vote method: {method}")

    _emit(event_log, "vote", "vote_started", {
        "question": question, "candidates": candidates, "method": method})
    tally: dict[str, Fraction] = {c: Fraction(0) for c in candidates}
    ballots: list[Ballot] = []
    abstained: list[str] = []

    if method == "average_score":
        scores: dict[str, list[Fraction]] = {c: [] for c in candidates}
        for voter in voters:
            for candidate in candidates:
                prompt = (f"{SCORE_PROMPT_PREFIX} {question}\n"
                          f"candidate: {candidate}")
                request = ModelRequest(prompt, seed=seed,
                                       actor_id=voter.agent_id,
                                       purpose="other")
                score = _parse_score(
                    one_shot_query(voter.backend, request).text)
                if score is None:
                    if voter.agent_id not in abstained:
                        abstained.append(voter.agent_id)
                    _emit(event_log, voter.agent_id, "vote_abstained",
                          {"candidate": candidate})
                    continue
                scores[candidate].append(score)
                _emit(event_log, voter.agent_id, "score_given",
                      {"candidate": candidate, "score": score})
        if all(not given for given in scores.values()):
            raise AllAbstained("no voter produced a score")
        tally = {c: (sum(given) / len(given) if given else Fraction(0))
                 for c, given in scores.items()}
    else:
        for ordinal, voter in enumerate(voters, start=1):
            prompt = (f"{VOTE_PROMPT_PREFIX} {question}\n"
                      f"candidates: {' | '.join(candidates)}")
            request = ModelRequest(prompt, seed=seed,
                                   actor_id=voter.agent_id, purpose="other")
            choice = _parse_choice(
                one_shot_query(voter.backend, request).text, candidates)
            if choice is None:
                abstained.append(voter.agent_id)
                _emit(event_log, voter.agent_id, "vote_abstained", {})
                continue
            weight = voter.weight if method == "weighted" else Fraction(1)
            ballot = Ballot(voter.agent_id, choice, weight, ordinal)
            ballots.append(ballot)
            tally[choice] += weight
            _emit(event_log, voter.agent_id, "ballot_cast", {
                "choice": choice, "weight": weight, "seq": ordinal})
        if not ballots:
            raise AllAbstained("no voter produced a countable ballot")

    winner, tied = _decide_winner(tally)
    result = VoteResult(method, tally, winner, tied, ballots, abstained)
    _emit(event_log, "vote", "vote_result", {
        "method": method, "tally": tally, "winner": winner, "tied": tied})
    return result


def recount(method: str, ballots: Iterable[Ballot],
            candidates: Iterable[str]) -> tuple[dict[str, Fraction], str, bool]:
    """Independent recount used by accountability replay."""
    tally = {c: Fraction(0) for c in candidates}
    for ballot in ballots:
        tally[ballot.choice_id] += (ballot.weight_applied
                                    if method == "weighted" else Fraction(1))
    winner, tied = _decide_winner(tally)
    return tally, winner, tied


def detect_consensus(statements: list[str]) -> bool:
    """True iff all statements agree after normalization."""
    if not statements:
        raise ValueError("statements must be non-empty")
    normalized = {normalize_text(s) for s in statements}
    return len(normalized) == 1


def run_debate(question: str, agents: list[AgentHandle],
               max_rounds: int, *,
               event_log: Optional[EventLog] = None,
               seed: int = 0) -> DebateTranscript:
    """Round-barriered debate; stops early on consensus.

    Round 0 holds the initial answers; every later round each agent sees
    all the others' latest statements. Request seeds advance with the round
    index so scripted fixtures can converge or diverge deterministically.
    """
    if len(agents) < 2:
        raise ValueError("need at least 2 agents")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")

    _emit(event_log, "debate", "debate_started", {
        "question": question, "agents": [a.agent_id for a in agents],
        "max_rounds": max_rounds})
    roster = sorted(agents, key=lambda a: a.agent_id)
    transcript = DebateTranscript(question)
    latest: dict[str, str] = {}

    for round_index in range(max_rounds):
        statements: list[tuple[str, str]] = []
        for agent in roster:
            if round_index == 0:
                prompt = f"{DEBATE_PROMPT_PREFIX} {question}"
            else:
                others = "\n".join(
                    f"{other.agent_id}: {latest[other.agent_id]}"
                    for other in roster if other.agent_id != agent.agent_id)
                prompt = (f"{DEBATE_PROMPT_PREFIX} {question}\n"
                          f"others:\n{others}")
            request = ModelRequest(prompt, seed=seed + round_index,
                                   actor_id=agent.agent_id, purpose="debate")
            statement = one_shot_query(agent.backend, request).text
            statements.append((agent.agent_id, statement))
            _emit(event_log, agent.agent_id, "statement", {
                "round": round_index, "text": statement})
        transcript.rounds.append(statements)
        latest = dict(statements)
        if detect_consensus([text for _, text in statements]):
            transcript.terminated_by = "consensus"
            transcript.consensus = normalize_text(statements[0][1])
            break

    _emit(event_log, "debate", "debate_result", {
        "terminated_by": transcript.terminated_by,
        "consensus": transcript.consensus,
        "rounds": len(transcript.rounds)})
    return transcript


def _single_role(roster: list[AgentHandle], role: str) -> AgentHandle:
    matches = [a for a in roster if role in a.roles]
    if len(matches) != 1:
        raise MissingRole(role, len(matches))
    return matches[0]


def run_role_workflow(goal: Goal, roster: list[AgentHandle], *,
                      event_log: Optional[EventLog] = None,
                      seed: int = 0) -> WorkflowResult:
    """Planner plans, assigner delegates by capability, workers execute.

    Steps without a capability run on the assigner itself; capable workers
    are chosen by lowest agent id; a creator spawns ``worker-<capability>``
    when nobody qualifies.
    """
    planner = _single_role(roster, "planner")
    plan = generate_single_path(goal, planner.backend, 1,
                                actor_id=planner.agent_id, seed_base=seed)
    _emit(event_log, planner.agent_id, "workflow_plan", {
        "plan_id": plan.plan_id, "steps": plan.descriptions()})
    return assign_and_execute(plan, roster, event_log=event_log, seed=seed)


def assign_and_execute(plan: Plan, roster: list[AgentHandle], *,
                       event_log: Optional[EventLog] = None,
                       seed: int = 0) -> WorkflowResult:
    """Role-based assignment and execution of an already generated plan."""
    assigner = _single_role(roster, "assigner")
    creators = [a for a in roster if "creator" in a.roles]
    workers = sorted((a for a in roster if "worker" in a.roles),
                     key=lambda a: a.agent_id)

    result = WorkflowResult(plan.plan_id)
    pool = list(workers)
    by_agent = {a.agent_id: a for a in roster}

    for step in plan.steps:
        if step.required_capability is None:
            assignee = assigner
        else:
            eligible = [w for w in pool
                        if step.required_capability in w.capabilities]
            if eligible:
                assignee = min(eligible, key=lambda a: a.agent_id)
            elif creators:
                creator = creators[0]
                assignee = AgentHandle(
                    f"worker-{step.required_capability}", creator.backend,
                    frozenset({"worker"}),
                    frozenset({step.required_capability}))
                pool.append(assignee)
                result.spawned_agents.append(assignee.agent_id)
                _emit(event_log, creator.agent_id, "agent_spawned", {
                    "agent_id": assignee.agent_id,
                    "capability": step.required_capability})
            else:
                raise NoCapableWorker(step.step_id, step.required_capability)
        by_agent[assignee.agent_id] = assignee
        result.assignments[step.step_id] = assignee.agent_id
        _emit(event_log, assigner.agent_id, "step_assigned", {
            "step_id": step.step_id, "agent_id": assignee.agent_id,
            "capability": step.required_capability})

    # Single-path plans execute in list order, which is dependency order.
    for step in plan.steps:
        executor = by_agent[result.assignments[step.step_id]]
        request = ModelRequest(f"{EXECUTE_PROMPT_PREFIX} {step.description}",
                               seed=seed, actor_id=executor.agent_id,
                               purpose="other")
        text = one_shot_query(executor.backend, request).text
        step.status = "done"
        result.step_results[step.step_id] = text
        _emit(event_log, executor.agent_id, "workflow_step_executed", {
            "step_id": step.step_id, "result": text})

    _emit(event_log, assigner.agent_id, "workflow_result", {
        "plan_id": result.plan_id, "assignments": result.assignments,
        "spawned": result.spawned_agents,
        "step_results": result.step_results})
    return result


# -- accountability replay ----------------------------------------------------

def replay_vote(records: list[EventRecord]) -> VoteResult:
    """Rebuild a VoteResult purely from logged events."""
    started = next(r for r in records if r.event_type == "vote_started")
    method = started.payload["method"]
    candidates = list(started.payload["candidates"])
    if method == "average_score":
        scores: dict[str, list[Fraction]] = {c: [] for c in candidates}
        for record in records:
            if record.event_type == "score_given":
                scores[record.payload["candidate"]].append(
                    Fraction(record.payload["score"]))
        tally = {c: (sum(given) / len(given) if given else Fraction(0))
                 for c, given in scores.items()}
        winner, tied = _decide_winner(tally)
        return VoteResult(method, tally, winner, tied)
    ballots = [Ballot(r.actor_id, r.payload["choice"],
                      Fraction(r.payload["weight"]), r.payload["seq"])
               for r in records if r.event_type == "ballot_cast"]
    tally, winner, tied = recount(method, ballots, candidates)
    abstained = [r.actor_id for r in records
                 if r.event_type == "vote_abstained"]
    return VoteResult(method, tally, winner, tied, ballots, abstained)


def replay_debate(records: list[EventRecord]) -> DebateTranscript:
    """Rebuild a DebateTranscript purely from logged events."""
    started = next(r for r in records if r.event_type == "debate_started")
    transcript = DebateTranscript(started.payload["question"])
    rounds: dict[int, list[tuple[str, str]]] = {}
    for record in records:
        if record.event_type == "statement":
            rounds.setdefault(record.payload["round"], []).append(
                (record.actor_id, record.payload["text"]))
    transcript.rounds = [rounds[i] for i in sorted(rounds)]
    ended = next(r for r in records if r.event_type == "debate_result")
    transcript.terminated_by = ended.payload["terminated_by"]
    transcript.consensus = ended.payload["consensus"]
    return transcript


def replay_workflow(records: list[EventRecord]) -> WorkflowResult:
    """Rebuild a WorkflowResult purely from logged events."""
    planned = next(r for r in records if r.event_type == "workflow_plan")
    result = WorkflowResult(planned.payload["plan_id"])
    for record in records:
        if record.event_type == "step_assigned":
            result.assignments[record.payload["step_id"]] = \
                record.payload["agent_id"]
        elif record.event_type == "agent_spawned":
            result.spawned_agents.append(record.payload["agent_id"])
        elif record.event_type == "workflow_step_executed":
            result.step_results[record.payload["step_id"]] = \
                record.payload["result"]
    return result


# -- roster files --------------------------------------------------------------

def load_roster(path: str | Path, *,
                default_backend=None) -> list[AgentHandle]:
    """Load a JSON roster of {agent_id, roles, capabilities, weight,
    rules_path}; agents without rules share the default backend."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    roster = []
    base = Path(path).parent
    for entry in raw:
        rules_path = entry.get("rules_path")
        if rules_path:
            rules_file = Path(rules_path)
            if not rules_file.is_absolute():
                rules_file = base / rules_file
            backend = ScriptedBackend(load_rules(rules_file),
                                      name=entry["agent_id"])
        elif default_backend is not None:
            backend = default_backend
        else:
            backend = ScriptedBackend(name=entry["agent_id"],
                                      default_response="ok")
        roster.append(AgentHandle(
            entry["agent_id"], backend,
            frozenset(entry.get("roles", [])),
            frozenset(entry.get("capabilities", [])),
            Fraction(str(entry.get("weight", 1)))))
    return roster
