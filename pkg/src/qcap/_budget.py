"""Dimension budget guard for dense tensor-power computations."""

from __future__ import annotations

import os

DEFAULT_DIM_BUDGET = 4096
ENV_VAR = "QCAP_BUDGET_DIM"


class BudgetExceededError(ValueError):
    """Raised when a requested dense dimension exceeds the configured budget."""


def dim_budget(override: int | None = None) -> int:
    """Resolve the dimension budget: explicit override > QCAP_BUDGET_DIM > default."""
    if override is not None:
        return int(override)
    env = os.environ.get(ENV_VAR)
    if env is not None:
        return int(env)
    return DEFAULT_DIM_BUDGET


def check_dim(product: int, budget: int | None = None, what: str = "composite dimension") -> None:
    limit = dim_budget(budget)
    if product > limit:
        raise BudgetExceededError(
            f"{what} {product} exceeds the dimension budget {limit} "
            f"(raise it via --budget-dim or {ENV_VAR})"
        )
