"""Small Levenberg-Marquardt solver for real-valued residual vectors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float                     # 0.5 * ||r||^2 at x
    n_iter: int
    converged: bool
    jac: np.ndarray
    residual: np.ndarray
    cost_history: list[float] = field(default_factory=list)
    message: str = ""


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    xtol: float = 1e-10,
    ftol: float = 1e-12,
    max_iter: int = 500,
    lam0: float = 1e-3,
    max_step: float | np.ndarray = np.inf,
) -> LMResult:
    """Minimize ``0.5 * ||fun(x)||^2`` with Marquardt diagonal scaling.

    Stops when the accepted step is below ``xtol * (||x|| + xtol)`` or the
    relative cost decrease of an accepted step is below ``ftol``.  Only steps
    that lower the cost are accepted, so ``cost_history`` is monotone.  Steps
    with any component larger than ``max_step`` are rejected like uphill ones.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = fun(x)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lam0
    J = jac(x)
    converged = False
    message = "max_iter reached"
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1e-300
        accepted = False
        while lam < 1e16:
            try:
                step = -np.linalg.solve(A + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            if np.any(np.abs(step) > max_step):
                lam *= 10
                continue
            x_new = x + step
            r_new = fun(x_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged = True
            message = "no further decrease possible"
            break
        rel_drop = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        J = jac(x)
        lam = max(lam / 10, 1e-12)
        if np.linalg.norm(step) < xtol * (np.linalg.norm(x) + xtol):
            converged = True
            message = "step tolerance"
            break
        if rel_drop < ftol:
            converged = True
            message = "cost tolerance"
            break
    return LMResult(x, cost, it, converged, J, r, history, message)
