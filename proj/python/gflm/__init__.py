"""Penalized functional linear models: fits, likelihood ratio and adaptive tests."""

from ._gflm import (
    GflmError,
    adaptive_test,
    brownian_eigenvalues,
    fit_gcv,
    lambda_schedule,
    plrt,
    run_table,
    simulate,
    solve_Bn,
)

__all__ = [
    "GflmError",
    "adaptive_test",
    "brownian_eigenvalues",
    "fit_gcv",
    "lambda_schedule",
    "plrt",
    "run_table",
    "simulate",
    "solve_Bn",
]
