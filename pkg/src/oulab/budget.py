"""Evaluation budgets for Monte Carlo estimators.

A budget caps the number of sample evaluations and states the target
standard error.  Estimators stop early once the target is met and flag
the result when the budget runs out first.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Budget:
    max_evals: int = 200_000
    target_std_error: float = 5e-3

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        if self.target_std_error <= 0:
            raise ValueError("target_std_error must be positive")


DEFAULT_BUDGET = Budget()
