from .metrics import exact_match, normalize_answer
from .oracle import OracleWorld, OracleWorldParams, build_oracle_world, generate_oracle_world
from .runner import (
    EvalReport,
    QuestionResult,
    Strategy,
    run_eval,
    sweep_dth,
    sweep_k,
    sweep_to_csv,
    validate_report,
)

__all__ = [
    "EvalReport",
    "OracleWorld",
    "OracleWorldParams",
    "QuestionResult",
    "Strategy",
    "build_oracle_world",
    "exact_match",
    "generate_oracle_world",
    "normalize_answer",
    "run_eval",
    "sweep_dth",
    "sweep_k",
    "sweep_to_csv",
    "validate_report",
]
