"""Specialist agent roles over pluggable model backends."""

from .backend import (
    BackendError,
    InvalidUsage,
    ModelBackend,
    OpenAIChatBackend,
    SCRIPTED_STEP_USAGE,
    ScriptExhausted,
    ScriptedBackend,
    StepResult,
    Usage,
    extract_json_document,
)
from .roles import (
    AgentError,
    AnalysisResult,
    ChallengeResult,
    MalformedRoleOutput,
    OracleGenerationResult,
    ROLES,
    ROLE_ANALYZER,
    ROLE_CHALLENGER,
    ROLE_DATA_COLLECTOR,
    ROLE_ORACLE_GENERATOR,
    ROLE_REPRODUCER,
    ROLE_VALIDATOR,
    ReproducerResult,
    RoleRun,
    TurnBudgetExceeded,
    UnknownRole,
    ValidationResult,
    build_role_prompt,
    load_template,
    run_role,
    validate_role_output,
)

__all__ = [
    "AgentError",
    "AnalysisResult",
    "BackendError",
    "ChallengeResult",
    "InvalidUsage",
    "MalformedRoleOutput",
    "ModelBackend",
    "OpenAIChatBackend",
    "OracleGenerationResult",
    "ROLES",
    "ROLE_ANALYZER",
    "ROLE_CHALLENGER",
    "ROLE_DATA_COLLECTOR",
    "ROLE_ORACLE_GENERATOR",
    "ROLE_REPRODUCER",
    "ROLE_VALIDATOR",
    "ReproducerResult",
    "RoleRun",
    "SCRIPTED_STEP_USAGE",
    "ScriptExhausted",
    "ScriptedBackend",
    "StepResult",
    "TurnBudgetExceeded",
    "UnknownRole",
    "Usage",
    "ValidationResult",
    "build_role_prompt",
    "extract_json_document",
    "load_template",
    "run_role",
    "validate_role_output",
]
