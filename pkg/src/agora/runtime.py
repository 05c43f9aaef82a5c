"""Runtime assembly and the run state machine.

``assemble`` wires the configured patterns into an ``AgentRuntime``; ``run``
drives a goal through the fixed stage order: goal creation, prompt
optimisation, retrieval, planning (with branch choices for option trees),
the reflection loop, cooperation over contested outcomes, step execution
and response optimisation. Guardrails, when enabled, wrap every model call
of every backend. Runs awaiting human feedback or branch choices suspend
durably and resume when the console posts.

Cooperation semantics in the pipeline (the protocols themselves live in
``cooperation``): a vote decides between refinement snapshots when the
reflection loop produced more than one; debate collectively answers
tool-less steps; role-based delegation executes the whole plan through the
roster instead of the local executor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from . import planning as planning_mod
from .config import PatternConfig
from .cooperation import (AgentHandle, assign_and_execute, run_debate,
                          run_vote)
from .defaults import DEFAULT_RULES, DEFAULT_TEMPLATES
from .errors import (AgoraError, GuardBlocked, HumanTimeout, InvalidConfig,
                     MaxIterationsExceeded, MissingResource, NotAwaiting,
                     UnknownRun)
from .events import EventLog, to_jsonable
from .goals import (ContextItem, Goal, create_goal_passive,
                    create_goal_proactive, load_detector_events)
from .guardrails import GuardrailPipeline, load_guard_rules
from .memory import KnowledgeBase, load_corpus, rerank_filter, retrieve
from .model import (ModelRequest, ModelResponse, ScriptedBackend, UsageMeter,
                    load_rules)
from .planning import (Plan, PlanTree, linearize, select_branch,
                       validate_plan)
from .prompts import (OutputSpec, TemplateRegistry, optimise_prompt,
                      optimise_response)
from .reflection import (FeedbackChannel, ReflectionFeedback,
                         RefinementHistory, apply_revision, cross_reflect,
                         parse_feedback, plan_digest, reflection_prompt)
from .tooling import (Registry, Toolbox, adapt_invoke, builtin_toolbox,
                      extract_args, load_registry, result_summary)


class GuardedBackend:
    """Backend wrapper: guardrail interposition plus model-call events.

    A blocked input raises before the inner backend is touched, so the
    call log stays clean; a blocked output comes back with
    ``finish_reason="blocked"`` and empty text.
    """

    def __init__(self, inner: ScriptedBackend,
                 pipeline: Optional[GuardrailPipeline] = None,
                 event_log: Optional[EventLog] = None):
        self.inner = inner
        self.pipeline = pipeline
        self.event_log = event_log

    @property
    def window_tokens(self) -> int:
        return self.inner.window_tokens

    @property
    def unit_price(self):
        return self.inner.unit_price

    @property
    def meter(self) -> UsageMeter:
        return self.inner.meter

    @property
    def call_log(self):
        return self.inner.call_log

    def call_count(self) -> int:
        return self.inner.call_count()

    def _emit(self, event_type: str, actor_id: str, payload: dict) -> None:
        if self.event_log is not None:
            self.event_log.append(actor_id, event_type, payload)

    def generate(self, request: ModelRequest) -> ModelResponse:
        if self.pipeline is not None:
            decision = self.pipeline.check_input(request.prompt_text)
            if decision.fired_rules:
                self._emit("guard_decision", request.actor_id, {
                    "direction": "input", "verdict": decision.verdict,
                    "fired_rules": list(decision.fired_rules),
                    "rationale": decision.rationale})
            if decision.verdict == "block":
                raise GuardBlocked(decision)
            if decision.verdict == "transform":
                request = replace(request, prompt_text=decision.content_out)

        response = self.inner.generate(request)

        if self.pipeline is not None:
            decision = self.pipeline.check_output(response.text)
            if decision.fired_rules:
                self._emit("guard_decision", request.actor_id, {
                    "direction": "output", "verdict": decision.verdict,
                    "fired_rules": list(decision.fired_rules),
                    "rationale": decision.rationale})
            if decision.verdict == "block":
                response = replace(response, text="",
                                   finish_reason="blocked")
            elif decision.verdict == "transform":
                response = replace(response, text=decision.content_out)

        self._emit("model_call", request.actor_id, {
            "purpose": request.purpose,
            "prompt": request.prompt_text,
            "response": response.text,
            "finish_reason": response.finish_reason,
            "prompt_tokens": response.prompt_tokens,
            "completion_tokens": response.completion_tokens,
            "cost_units": response.cost_units,
        })
        return response


@dataclass
class RunState:
    run_id: str
    goal_text: str
    seed: int
    stage: str = "goal"
    status: str = "running"
    pending_action: Optional[str] = None  # feedback | choice
    goal: Optional[Goal] = None
    tree: Optional[PlanTree] = None
    plan: Optional[Plan] = None
    snapshots: list[Plan] = field(default_factory=list)
    history: RefinementHistory = field(default_factory=RefinementHistory)
    reflect_iteration: int = 0
    step_results: dict[str, str] = field(default_factory=dict)
    final_answer: Optional[str] = None
    error: Optional[str] = None
    first_seq: int = 0
    last_seq: int = 0


@dataclass
class RunResult:
    run_id: str
    goal: Optional[Goal]
    final_plan: Optional[Plan]
    step_results: dict[str, str]
    status: str
    usage: dict
    event_range: tuple[int, int]
    final_answer: Optional[str] = None
    error: Optional[str] = None


def _require(path: Optional[str]) -> Optional[Path]:
    if path is None:
        return None
    resolved = Path(path)
    if not resolved.exists():
        raise MissingResource(str(path))
    return resolved


def assemble(config: PatternConfig) -> "AgentRuntime":
    """Build a runtime whose wiring matches the config exactly."""
    config.validate()
    return AgentRuntime(config)


class AgentRuntime:
    """Everything a run needs, wired once per config."""

    def __init__(self, config: PatternConfig):
        self.config = config
        self.event_log = EventLog()
        self.meter = UsageMeter(cap=config.budget_cap_fraction)

        rules_file = _require(config.rules_path)
        rules = load_rules(rules_file) if rules_file else list(DEFAULT_RULES)
        self._raw_backend = ScriptedBackend(
            rules, window_tokens=config.window_tokens,
            unit_price=config.unit_price_fraction, meter=self.meter)

        if config.guardrails_enabled:
            guard_file = _require(config.guardrails_path)
            self.guard_pipeline = (load_guard_rules(guard_file)
                                   if guard_file else GuardrailPipeline())
        else:
            self.guard_pipeline = None
        self.backend = GuardedBackend(self._raw_backend, self.guard_pipeline,
                                      self.event_log)

        self.kb = KnowledgeBase()
        if config.rag_enabled:
            corpus_file = _require(config.corpus_path)
            if corpus_file:
                load_corpus(corpus_file, self.kb)

        self.templates = TemplateRegistry()
        prompts_dir = _require(config.prompts_dir)
        if prompts_dir:
            from .prompts import load_templates_dir
            load_templates_dir(prompts_dir, self.templates)
        for template in DEFAULT_TEMPLATES:
            if template.template_id not in self.templates:
                self.templates.register_template(template)

        self.registry = Registry()
        self.toolbox: Toolbox = Toolbox()
        if config.registry_enabled:
            self.toolbox, builtin_entries = builtin_toolbox(self.kb)
            for entry in builtin_entries:
                self.registry.register_entry(entry)
            registry_file = _require(config.registry_path)
            if registry_file:
                load_registry(registry_file, self.registry)

        self.reviewers = [
            AgentHandle(reviewer_id,
                        self._agent_backend(None))
            for reviewer_id in config.reviewers
        ] if "cross" in config.reflectors else []

        self.roster = []
        if config.cooperation:
            roster_spec = list(config.roster)
            if config.roster_path:
                from .cooperation import load_roster
                self.roster = load_roster(_require(config.roster_path),
                                          default_backend=self.backend)
            else:
                from fractions import Fraction
                for entry in roster_spec:
                    backend = self._agent_backend(entry.get("rules_path"))
                    self.roster.append(AgentHandle(
                        entry["agent_id"], backend,
                        frozenset(entry.get("roles", [])),
                        frozenset(entry.get("capabilities", [])),
                        Fraction(str(entry.get("weight", 1)))))

        self._runs: dict[str, RunState] = {}
        self._channels: dict[str, FeedbackChannel] = {}
        self._run_counter = 0
        self.state_dir: Optional[Path] = None

    def _agent_backend(self, rules_path: Optional[str]) -> GuardedBackend:
        """Per-agent backend sharing the meter, guardrails and event log."""
        if rules_path:
            rules = load_rules(_require(rules_path))
        else:
            rules = self._raw_backend.rules
        inner = ScriptedBackend(rules,
                                window_tokens=self.config.window_tokens,
                                unit_price=self.config.unit_price_fraction,
                                meter=self.meter)
        return GuardedBackend(inner, self.guard_pipeline, self.event_log)

    def active_patterns(self) -> dict[str, Any]:
        config = self.config
        return {
            "goal_creator": config.goal_creator,
            "optimiser": config.optimiser_enabled,
            "rag": config.rag_enabled,
            "querying": config.querying,
            "planner": config.planner,
            "reflectors": list(config.reflectors),
            "cooperation": list(config.cooperation),
            "guardrails": config.guardrails_enabled,
            "registry": config.registry_enabled,
            "adapter": config.adapter_enabled,
            "evaluator": config.evaluator_enabled,
        }

    # -- run lifecycle -------------------------------------------------------

    def run(self, goal_text: str, seed: int = 0) -> RunResult:
        self._run_counter += 1
        state = RunState(f"run-{self._run_counter:04d}", goal_text, seed)
        state.first_seq = self.event_log.next_seq
        self._runs[state.run_id] = state
        self._channels[state.run_id] = FeedbackChannel(
            state.run_id, emit=lambda t, p: self._emit(state, "human", t, p))
        self._emit(state, "user", "run_started", {
            "run_id": state.run_id, "goal_text": goal_text, "seed": seed})
        return self._drive(state)

    def resume(self, run_id: str) -> RunResult:
        state = self._state(run_id)
        if state.status != "awaiting_human":
            return self._result(state)
        state.status = "running"
        state.pending_action = None
        return self._drive(state)

    def post_feedback(self, run_id: str, verdict: str,
                      critiques: list[tuple[str, str]] | None = None,
                      suggested_steps: list[str] | None = None) -> RunResult:
        state = self._state(run_id)
        if state.status != "awaiting_human" \
                or state.pending_action != "feedback":
            raise NotAwaiting(f"run {run_id} is not awaiting feedback")
        feedback = ReflectionFeedback(
            f"human:{run_id}", verdict,
            tuple((sid, comment) for sid, comment in (critiques or [])),
            tuple(suggested_steps) if suggested_steps else None)
        self._channels[run_id].post(feedback)
        return self.resume(run_id)

    def post_choice(self, run_id: str, node_id: str,
                    option_id: str) -> RunResult:
        state = self._state(run_id)
        if state.status != "awaiting_human" \
                or state.pending_action != "choice":
            raise NotAwaiting(f"run {run_id} is not awaiting a choice")
        select_branch(state.tree, node_id, option_id)
        self._emit(state, "human", "branch_chosen", {
            "node_id": node_id, "option_id": option_id})
        return self.resume(run_id)

    def run_result(self, run_id: str) -> RunResult:
        return self._result(self._state(run_id))

    def run_ids(self) -> list[str]:
        return list(self._runs)

    def _state(self, run_id: str) -> RunState:
        if run_id not in self._runs:
            raise UnknownRun(f"unknown run: {run_id}")
        return self._runs[run_id]

    # -- the state machine ---------------------------------------------------

    _STAGES = ("goal", "plan", "choose", "reflect", "cooperate", "execute",
               "finish")

    def _drive(self, state: RunState) -> RunResult:
        try:
            while state.status == "running":
                before = state.stage
                getattr(self, f"_stage_{state.stage}")(state)
                if state.status == "running" and state.stage == before:
                    raise AgoraError(f"stage {before} did not advance")
        except GuardBlocked as exc:
            state.status = "aborted"
            state.error = str(exc)
            self._emit(state, "guardrails", "run_aborted", {
                "reason": exc.decision.rationale})
        except AgoraError as exc:
            state.status = "failed"
            state.error = f"{type(exc).__name__}: {exc}"
            self._emit(state, "orchestrator", "run_failed", {
                "error": state.error, "stage": state.stage})
        state.last_seq = len(self.event_log)
        self._persist(state)
        return self._result(state)

    def _emit(self, state: RunState, actor_id: str, event_type: str,
              payload: dict) -> None:
        payload = {"run_id": state.run_id, **payload}
        self.event_log.append(actor_id, event_type, payload)

    def _stage_goal(self, state: RunState) -> None:
        config = self.config
        if self.guard_pipeline is not None:
            decision = self.guard_pipeline.check_input(state.goal_text)
            if decision.verdict == "block":
                raise GuardBlocked(decision)
            if decision.verdict == "transform":
                self._emit(state, "guardrails", "guard_decision", {
                    "direction": "input", "verdict": "transform",
                    "fired_rules": list(decision.fired_rules),
                    "rationale": decision.rationale})
                state.goal_text = decision.content_out

        memory = self.kb if len(self.kb) else None
        if config.goal_creator == "proactive":
            events = (load_detector_events(_require(config.detectors_path))
                      if config.detectors_path else [])
            goal, notification = create_goal_proactive(
                state.goal_text or None, events, memory,
                config.proactive_threshold, k=config.memory_k,
                goal_id=f"goal-{state.run_id}")
            self._emit(state, "goal_creator", "notification", {
                "captured_detectors": list(notification.captured_detectors),
                "message": notification.message})
        else:
            goal = create_goal_passive(state.goal_text, memory,
                                       config.memory_k,
                                       goal_id=f"goal-{state.run_id}")
        state.goal = goal
        self._emit(state, "goal_creator", "goal_created", {
            "goal_id": goal.goal_id, "description": goal.description,
            "constraints": goal.constraints, "origin": goal.origin,
            "context_items": len(goal.context)})

        if config.rag_enabled and len(self.kb):
            hits = rerank_filter(
                retrieve(self.kb, goal.description, config.rag_k),
                config.rag_min_similarity)
            ts = goal.created_seq
            for doc_id, score in hits:
                ts += 1
                goal.context.append(ContextItem(
                    "rag", "text", self.kb.get(doc_id).text, timestamp=ts))
            self._emit(state, "memory", "context_retrieved", {
                "query": goal.description,
                "hits": [[doc_id, float(score)] for doc_id, score in hits]})
        state.stage = "plan"

    def _plan_prompt_builder(self, state: RunState):
        config = self.config
        if not config.optimiser_enabled:
            return planning_mod.default_plan_prompt

        def build(goal: Goal) -> str:
            request = optimise_prompt(goal, self.templates, "plan",
                                      purpose="plan")
            prompt = request.prompt_text
            context_lines = [f"context[{item.source}]: {item.content}"
                             for item in goal.context]
            if context_lines:
                prompt = prompt + "\n" + "\n".join(context_lines)
            self._emit(state, "optimiser", "prompt_built", {
                "template_id": "plan", "prompt": prompt})
            return prompt

        return build

    def _stage_plan(self, state: RunState) -> None:
        config = self.config
        builder = self._plan_prompt_builder(state)
        if config.planner == "multi_path":
            state.tree = planning_mod.generate_multi_path(
                state.goal, self.backend, config.tree_depth,
                config.tree_branching,
                reserved_tokens=min(config.reserved_tokens,
                                    config.window_tokens - 1))
            self._emit(state, "planner", "tree_generated", {
                "tree_id": state.tree.tree_id,
                "nodes": len(state.tree.nodes),
                "depth": config.tree_depth,
                "branching": config.tree_branching})
            state.stage = "choose"
            return

        plan = planning_mod.generate_single_path(
            state.goal, self.backend, config.n_samples,
            prompt_builder=builder, seed_base=state.seed)
        state.plan = plan
        state.snapshots = [plan]
        self._emit(state, "planner", "plan_generated", {
            "plan_id": plan.plan_id, "steps": plan.descriptions(),
            "n_samples": config.n_samples})
        state.stage = "reflect"

    def _stage_choose(self, state: RunState) -> None:
        tree = state.tree
        config = self.config
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
            elif "human" in config.reflectors:
                state.status = "awaiting_human"
                state.pending_action = "choice"
                self._emit(state, "planner", "choice_requested", {
                    "node_id": current.node_id,
                    "options": [[c.node_id, c.option.description]
                                for c in children]})
                return
            else:  # automatic policy: first child in creation order
                select_branch(tree, current.node_id, children[0].node_id)
                self._emit(state, "planner", "branch_chosen", {
                    "node_id": current.node_id,
                    "option_id": children[0].node_id,
                    "policy": config.branch_choice_policy})
                current = children[0]
            depth += 1

        plan = linearize(tree, plan_id=f"plan-{state.goal.goal_id}")
        state.plan = plan
        state.snapshots = [plan]
        self._emit(state, "planner", "plan_linearized", {
            "plan_id": plan.plan_id, "steps": plan.descriptions()})
        state.stage = "reflect"

    def _reflect_once(self, state: RunState,
                      reflector: str) -> ReflectionFeedback:
        seed = state.seed + state.reflect_iteration
        plan = state.plan
        if reflector == "self":
            request = ModelRequest(reflection_prompt(plan), seed=seed,
                                   actor_id="agent", purpose="reflect")
            response = self.backend.generate(request)
            return parse_feedback(response.text, "self")
        if reflector == "cross":
            verdict, feedback = cross_reflect(plan, self.reviewers,
                                              self.config.cross_policy,
                                              seed=seed)
            for fb in feedback:
                self._emit(state, fb.source, "reflection_feedback", {
                    "verdict": fb.verdict,
                    "critiques": list(fb.critiques)})
            merged = [c for fb in feedback for c in fb.critiques]
            if verdict == "revise" and not merged:
                merged = [("s1", "cross reviewers returned revise")]
            return ReflectionFeedback("agent:aggregate", verdict,
                                      tuple(merged))
        # human
        channel = self._channels[state.run_id]
        if channel.pending():
            return channel.request(plan, timeout_ticks=0)
        if self.config.human_timeout_ticks is not None:
            return channel.request(
                plan, timeout_ticks=self.config.human_timeout_ticks)
        # No timeout configured: suspend instead of blocking forever.
        raise _Suspend()

    def _stage_reflect(self, state: RunState) -> None:
        config = self.config
        while state.reflect_iteration < config.max_reflection_iterations:
            revise: Optional[ReflectionFeedback] = None
            for reflector in config.reflectors:
                try:
                    feedback = self._reflect_once(state, reflector)
                except _Suspend:
                    state.status = "awaiting_human"
                    state.pending_action = "feedback"
                    return
                except HumanTimeout:
                    state.history.terminated_by = "human_timeout"
                    raise
                state.history.iterations.append(
                    (plan_digest(state.plan), feedback))
                self._emit(state, feedback.source, "reflection_verdict", {
                    "iteration": state.reflect_iteration,
                    "verdict": feedback.verdict,
                    "critiques": list(feedback.critiques)})
                if feedback.verdict == "revise":
                    revise = feedback
                    break
            state.reflect_iteration += 1
            if revise is None:
                state.history.terminated_by = "approved"
                state.plan.status = "approved"
                self._emit(state, "agent", "plan_approved", {
                    "plan_id": state.plan.plan_id,
                    "digest": plan_digest(state.plan),
                    "iterations": state.reflect_iteration})
                state.stage = "cooperate"
                return
            state.plan = apply_revision(state.plan, revise, self.backend,
                                        seed=state.reflect_iteration)
            state.snapshots.append(state.plan)
            self._emit(state, "agent", "plan_revised", {
                "plan_id": state.plan.plan_id,
                "steps": state.plan.descriptions()})
        raise MaxIterationsExceeded(state.plan, state.history)

    def _stage_cooperate(self, state: RunState) -> None:
        config = self.config
        if "voting" in config.cooperation and len(state.snapshots) > 1:
            candidates = [f"rev-{i}" for i in range(len(state.snapshots))]
            result = run_vote(
                f"final plan for: {state.goal.description}", candidates,
                self.roster, config.vote_method,
                event_log=self.event_log, seed=state.seed)
            index = candidates.index(result.winner)
            state.plan = state.snapshots[index]
            state.plan.status = "approved"
            self._emit(state, "vote", "plan_ratified", {
                "winner": result.winner, "tied": result.tied})
        state.stage = "execute"

    def _stage_execute(self, state: RunState) -> None:
        config = self.config
        plan = state.plan
        plan.status = "executing"
        violations = validate_plan(plan)
        if violations:
            raise AgoraError(f"plan failed validation: {violations}")

        if "role_based" in config.cooperation:
            workflow = assign_and_execute(plan, self.roster,
                                          event_log=self.event_log,
                                          seed=state.seed)
            state.step_results = dict(workflow.step_results)
            for step in plan.steps:
                step.status = "done"
            plan.status = "complete"
            state.stage = "finish"
            return

        for step in plan.steps:
            step.status = "in_progress"
            if step.required_capability and config.registry_enabled \
                    and config.adapter_enabled:
                entries = self.registry.discover(
                    {step.required_capability})
                entry = entries[0]
                descriptor = self.toolbox.descriptor(
                    entry.descriptor_ref or entry.entry_id)
                args = extract_args(step.description)
                tool_result = adapt_invoke(descriptor, step, args,
                                           toolbox=self.toolbox,
                                           event_log=self.event_log)
                if tool_result.status != "ok":
                    step.status = "failed"
                    raise AgoraError(
                        f"tool result unparseable for {step.step_id}: "
                        f"{tool_result.raw!r}")
                text = result_summary(tool_result)
            elif "debate" in config.cooperation and len(self.roster) >= 2:
                transcript = run_debate(step.description, self.roster,
                                        config.debate_max_rounds,
                                        event_log=self.event_log,
                                        seed=state.seed)
                if transcript.consensus is not None:
                    text = transcript.consensus
                else:
                    final_round = transcript.rounds[-1]
                    text = final_round[0][1]
            else:
                request = ModelRequest(f"EXECUTE: {step.description}",
                                       seed=state.seed, actor_id="agent",
                                       purpose="other")
                text = self.backend.generate(request).text
            step.status = "done"
            state.step_results[step.step_id] = text
            self._emit(state, "executor", "step_executed", {
                "step_id": step.step_id, "result": text})
        plan.status = "complete"
        state.stage = "finish"

    def _stage_finish(self, state: RunState) -> None:
        plan = state.plan
        terminal = plan.steps[-1] if plan.steps else None
        raw = state.step_results.get(terminal.step_id, "") if terminal else ""
        answer = optimise_response(raw, OutputSpec("final", "plain")).text
        if self.guard_pipeline is not None:
            decision = self.guard_pipeline.check_output(answer)
            if decision.verdict == "block":
                raise AgoraError(
                    f"final answer blocked: {decision.rationale}")
            if decision.verdict == "transform":
                answer = decision.content_out
        state.final_answer = answer
        state.status = "complete"
        self._emit(state, "orchestrator", "run_completed", {
            "final_answer": answer,
            "steps": len(plan.steps)})

    # -- results & persistence -------------------------------------------------

    def _result(self, state: RunState) -> RunResult:
        last = state.last_seq or len(self.event_log)
        return RunResult(state.run_id, state.goal, state.plan,
                         dict(state.step_results), state.status,
                         self.meter.snapshot(),
                         (state.first_seq, last),
                         state.final_answer, state.error)

    def run_view(self, run_id: str) -> dict:
        """JSON snapshot served over the API."""
        state = self._state(run_id)
        view: dict[str, Any] = {
            "run_id": state.run_id,
            "status": state.status,
            "stage": state.stage,
            "pending_action": state.pending_action,
            "goal": None,
            "plan": None,
            "tree": None,
            "final_answer": state.final_answer,
            "error": state.error,
            "event_range": [state.first_seq,
                            state.last_seq or len(self.event_log)],
            "usage": to_jsonable(self.meter.snapshot()),
        }
        if state.goal:
            view["goal"] = {
                "goal_id": state.goal.goal_id,
                "description": state.goal.description,
                "constraints": state.goal.constraints,
                "origin": state.goal.origin,
            }
        if state.plan:
            view["plan"] = {
                "plan_id": state.plan.plan_id,
                "status": state.plan.status,
                "steps": [{
                    "step_id": s.step_id,
                    "description": s.description,
                    "depends_on": sorted(s.depends_on),
                    "required_capability": s.required_capability,
                    "status": s.status,
                    "result": state.step_results.get(s.step_id),
                } for s in state.plan.steps],
            }
        if state.tree:
            view["tree"] = {
                "tree_id": state.tree.tree_id,
                "nodes": [{
                    "node_id": n.node_id,
                    "parent": n.parent,
                    "description": n.option.description,
                    "rationale": n.option.rationale,
                    "chosen": n.chosen,
                } for n in state.tree.nodes.values()],
            }
        return view

    def _persist(self, state: RunState) -> None:
        if self.state_dir is None:
            return
        runs_dir = self.state_dir / "runs"
        runs_dir.mkdir(parents=True, exist_ok=True)
        (runs_dir / f"{state.run_id}.json").write_text(
            json.dumps(_state_to_snapshot(state), indent=2, sort_keys=True)
            + "\n", encoding="utf-8")
        self.event_log.write_jsonl(self.state_dir / "events.jsonl")

    def load_state(self, state_dir: Path | str) -> list[str]:
        """Adopt persisted runs and the event log from a state directory.

        Suspended runs become resumable again; returns the loaded run ids.
        """
        self.state_dir = Path(state_dir)
        events_file = self.state_dir / "events.jsonl"
        if events_file.exists():
            from .events import read_jsonl
            records = read_jsonl(events_file)
            bad = None
            from .events import verify_log
            bad = verify_log(records)
            if bad is not None:
                raise AgoraError(
                    f"persisted event log fails verification at seq {bad}")
            self.event_log._records = records
        loaded = []
        runs_dir = self.state_dir / "runs"
        if runs_dir.exists():
            for path in sorted(runs_dir.glob("run-*.json")):
                snapshot = json.loads(path.read_text(encoding="utf-8"))
                state = _state_from_snapshot(snapshot)
                self._runs[state.run_id] = state
                self._channels[state.run_id] = FeedbackChannel(
                    state.run_id,
                    emit=lambda t, p, s=state: self._emit(s, "human", t, p))
                loaded.append(state.run_id)
                number = int(state.run_id.split("-")[1])
                self._run_counter = max(self._run_counter, number)
        return loaded


class _Suspend(Exception):
    """Internal: human reflection wants to suspend the run."""


# -- durable snapshots ---------------------------------------------------------

def _plan_to_dict(plan: Plan) -> dict:
    return {
        "plan_id": plan.plan_id,
        "goal_id": plan.goal_id,
        "kind": plan.kind,
        "status": plan.status,
        "steps": [{
            "step_id": s.step_id,
            "description": s.description,
            "depends_on": sorted(s.depends_on),
            "required_capability": s.required_capability,
            "status": s.status,
        } for s in plan.steps],
    }


def _plan_from_dict(raw: dict) -> Plan:
    from .planning import Step
    steps = [Step(s["step_id"], s["description"],
                  frozenset(s["depends_on"]), s["required_capability"],
                  s["status"]) for s in raw["steps"]]
    return Plan(raw["plan_id"], raw["goal_id"], steps, raw["kind"],
                raw["status"])


def _state_to_snapshot(state: RunState) -> dict:
    snapshot = {
        "run_id": state.run_id,
        "goal_text": state.goal_text,
        "seed": state.seed,
        "stage": state.stage,
        "status": state.status,
        "pending_action": state.pending_action,
        "reflect_iteration": state.reflect_iteration,
        "final_answer": state.final_answer,
        "error": state.error,
        "first_seq": state.first_seq,
        "last_seq": state.last_seq,
        "step_results": state.step_results,
        "goal": None,
        "plan": None,
        "snapshots": [_plan_to_dict(p) for p in state.snapshots],
        "tree": None,
    }
    if state.goal is not None:
        snapshot["goal"] = {
            "goal_id": state.goal.goal_id,
            "description": state.goal.description,
            "constraints": state.goal.constraints,
            "origin": state.goal.origin,
            "created_seq": state.goal.created_seq,
            "context": [{
                "source": item.source,
                "modality": item.modality,
                "content": item.content,
                "confidence": item.confidence,
                "timestamp": item.timestamp,
            } for item in state.goal.context],
        }
    if state.plan is not None:
        snapshot["plan"] = _plan_to_dict(state.plan)
    if state.tree is not None:
        snapshot["tree"] = {
            "tree_id": state.tree.tree_id,
            "goal_id": state.tree.goal_id,
            "depth": state.tree.depth,
            "branching": state.tree.branching,
            "nodes": [{
                "node_id": n.node_id,
                "parent": n.parent,
                "option_id": n.option.option_id,
                "description": n.option.description,
                "rationale": n.option.rationale,
                "chosen": n.chosen,
            } for n in state.tree.nodes.values()],
        }
    return snapshot


def _state_from_snapshot(snapshot: dict) -> RunState:
    from .planning import PlanTree, StepOption, TreeNode

    state = RunState(snapshot["run_id"], snapshot["goal_text"],
                     snapshot["seed"])
    state.stage = snapshot["stage"]
    state.status = snapshot["status"]
    state.pending_action = snapshot["pending_action"]
    state.reflect_iteration = snapshot["reflect_iteration"]
    state.final_answer = snapshot["final_answer"]
    state.error = snapshot["error"]
    state.first_seq = snapshot["first_seq"]
    state.last_seq = snapshot["last_seq"]
    state.step_results = dict(snapshot["step_results"])
    if snapshot["goal"] is not None:
        raw = snapshot["goal"]
        context = [ContextItem(c["source"], c["modality"], c["content"],
                               c["confidence"], c["timestamp"])
                   for c in raw["context"]]
        state.goal = Goal(raw["goal_id"], raw["description"],
                          dict(raw["constraints"]), context, raw["origin"],
                          raw["created_seq"])
    if snapshot["plan"] is not None:
        state.plan = _plan_from_dict(snapshot["plan"])
    state.snapshots = [_plan_from_dict(p) for p in snapshot["snapshots"]]
    if snapshot["tree"] is not None:
        raw = snapshot["tree"]
        tree = PlanTree(raw["tree_id"], raw["goal_id"], {},
                        raw["depth"], raw["branching"])
        for node in raw["nodes"]:
            tree.nodes[node["node_id"]] = TreeNode(
                node["node_id"],
                StepOption(node["option_id"], node["description"],
                           node["rationale"]),
                node["parent"], node["chosen"])
        state.tree = tree
    return state
