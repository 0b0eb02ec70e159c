"""Tube MPC with iterative model-error learning (Python bindings)."""

from ._core import (
    Controller,
    DirectOptimizer,
    EsilcError,
    IterationSummary,
    LearningReport,
    Polytope,
    Scenario,
    TrialRecord,
    load_scenario,
    parse_scenario,
    run_learning,
    run_trial,
    serialize_scenario,
    synthesize,
)

__all__ = [
    "Controller",
    "DirectOptimizer",
    "EsilcError",
    "IterationSummary",
    "LearningReport",
    "Polytope",
    "Scenario",
    "TrialRecord",
    "load_scenario",
    "parse_scenario",
    "run_learning",
    "run_trial",
    "serialize_scenario",
    "synthesize",
]
