"""Experiments that estimate the constants of the boundedness argument on refined grids."""

from .config import EXPERIMENTS, PRESETS, SCHEMA, ExperimentConfig, load_config
from .estimators import (ChainCheck, RatioReport, Sample, Workspace, admissible_exponent,
                         certify_for_theorem, check_chain, check_decay, class_norm,
                         diening_probe, estimate_maximal_bound, estimate_operator_bound,
                         estimate_pointwise_constant, refine_families, theorem_gate,
                         verify_fefferman_stein)
from .runner import RunResult, build_class_spec, build_exponent, run_experiment

__all__ = [
    "EXPERIMENTS", "PRESETS", "SCHEMA", "ExperimentConfig", "load_config",
    "ChainCheck", "RatioReport", "Sample", "Workspace", "admissible_exponent",
    "certify_for_theorem", "check_chain", "check_decay", "class_norm", "diening_probe",
    "estimate_maximal_bound", "estimate_operator_bound", "estimate_pointwise_constant",
    "refine_families", "theorem_gate", "verify_fefferman_stein",
    "RunResult", "build_class_spec", "build_exponent", "run_experiment",
]
