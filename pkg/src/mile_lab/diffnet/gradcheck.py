"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FD_STEP = 1e-5


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    passed: bool
    worst_index: int


def grad_check(
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    params: np.ndarray,
    tol: float = 1e-4,
    max_coords: int = 200,
    rng: np.random.Generator | None = None,
    step: float = FD_STEP,
) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    Checks every coordinate when the parameter vector is small, otherwise a
    random subset of at least ``max_coords`` coordinates. The loss function is
    evaluated at perturbed copies; the analytic gradient comes from a single
    call at the unperturbed point.
    """
    params = np.asarray(params, dtype=np.float64)
    _, grad = loss_and_grad(params)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape:
        raise ValueError("analytic gradient shape does not match parameters")

    n = params.size
    if n <= max_coords:
        coords = np.arange(n)
    else:
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(n, size=max_coords, replace=False)

    max_rel = 0.0
    worst = -1
    for i in coords:
        delta = np.zeros_like(params)
        delta[i] = step
        hi, _ = loss_and_grad(params + delta)
        lo, _ = loss_and_grad(params - delta)
        fd = (hi - lo) / (2.0 * step)
        denom = max(abs(grad[i]), abs(fd), 1e-6)
        rel = abs(grad[i] - fd) / denom
        if rel > max_rel:
            max_rel, worst = rel, int(i)
    return GradCheckReport(
        max_rel_err=max_rel, n_checked=len(coords), passed=max_rel < tol, worst_index=worst
    )
