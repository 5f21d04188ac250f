"""Asymptotic predictions and Monte Carlo validation for perceptron transfer
learning: source / hard-transfer / soft-transfer scalar saddle problems,
phase-transition boundaries, and seeded finite-size simulations."""

from tlphase._core import (
    Activation,
    EnvelopeEval,
    Moments,
    SaddleSolution,
    SummaryStat,
    TrialRecord,
    TrialSummary,
    apply_activation,
    delta_star_numeric,
    g_threshold,
    moments,
    moments_quadrature,
    moreau,
    predict_gen_error,
    predict_train_error,
    prox,
    rho_c,
    run_trials,
    solve_source,
    solve_target,
    spectral_T,
    trial_records_csv,
    validate_spec,
)

__all__ = [
    "Activation",
    "EnvelopeEval",
    "Moments",
    "SaddleSolution",
    "SummaryStat",
    "TrialRecord",
    "TrialSummary",
    "apply_activation",
    "delta_star_numeric",
    "g_threshold",
    "moments",
    "moments_quadrature",
    "moreau",
    "predict_gen_error",
    "predict_train_error",
    "prox",
    "rho_c",
    "run_trials",
    "solve_source",
    "solve_target",
    "spectral_T",
    "trial_records_csv",
    "validate_spec",
]
