"""Tool-orchestrating agent: registry, planners, execution, composition."""

from .compose import audit_grounding, compose_response, compose_template
from .llm import LlmClient, LlmConfig
from .planner import (MAX_PLAN_STEPS, Plan, StepStatus, ToolCall,
                      plan_deterministic, plan_with_llm, validate_plan)
from .registry import (ParamSpec, ToolRegistry, ToolSpec, default_registry,
                       register_builtin_tools)
from .session import Artifact, Session, TurnRecord, TurnResult, execute_plan, respond

__all__ = [
    "Artifact", "LlmClient", "LlmConfig", "MAX_PLAN_STEPS", "ParamSpec",
    "Plan", "Session", "StepStatus", "ToolCall", "ToolRegistry", "ToolSpec",
    "TurnRecord", "TurnResult", "audit_grounding", "compose_response",
    "compose_template", "default_registry", "execute_plan",
    "plan_deterministic", "plan_with_llm", "register_builtin_tools", "respond",
]
