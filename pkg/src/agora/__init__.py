"""agora: composable foundation-model agent patterns over a deterministic
scripted backend.

The package turns an agent-pattern catalogue into executable contracts:
goal creation, prompt optimisation, retrieval, single/multi-path planning,
reflection loops, cooperation protocols, guardrails, tool discovery and
adaptation, evaluation, and a quality-attribute decision model — all wired
by an orchestrator with a hash-chained accountability log.
"""

from .config import PatternConfig, baseline_config
from .decisions import decide_patterns
from .errors import AgoraError
from .events import EventLog, verify_log
from .runtime import AgentRuntime, RunResult, assemble

__all__ = [
    "AgentRuntime",
    "AgoraError",
    "EventLog",
    "PatternConfig",
    "RunResult",
    "assemble",
    "baseline_config",
    "decide_patterns",
    "verify_log",
]

__version__ = "0.1.0"
