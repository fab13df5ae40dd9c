"""Limited-memory BFGS with Armijo backtracking.

Small and dependency free on purpose: the caller supplies an initial
inverse-Hessian action (a preconditioner) and a hook that may move the
iterate along an exact symmetry of the objective after each accepted step.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IterationLimitError, NumericalInconsistencyError


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    evaluations: int
    converged: bool
    history: list


def lbfgs(
    fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    gtol: float,
    max_iters: int = 2000,
    memory: int = 20,
    precondition: Callable[[np.ndarray], np.ndarray] | None = None,
    recenter: Callable[[np.ndarray], np.ndarray] | None = None,
    c1: float = 1e-4,
    max_backtracks: int = 40,
    raise_on_failure: bool = True,
) -> LBFGSResult:
    """Minimize ``f`` from ``x0`` until ``|grad f| <= gtol``.

    Every accepted step satisfies the Armijo condition, so the objective
    never increases along the iterates.  ``recenter`` must leave ``f``
    unchanged (translations of a translation-invariant energy, say).
    """
    x = np.array(x0, dtype=float)
    if recenter is not None:
        x = recenter(x)
    f, g = fun_grad(x)
    evals = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalInconsistencyError("objective or gradient is not finite at the starting point")
    pairs: deque = deque(maxlen=memory)
    h0 = precondition if precondition is not None else (lambda v: v)
    history = [f]
    it = 0
    gnorm = float(np.linalg.norm(g))
    while gnorm > gtol:
        if it >= max_iters:
            if raise_on_failure:
                raise IterationLimitError(
                    f"L-BFGS stopped after {it} iterations with |grad| = {gnorm:.3e}",
                    best=x, value=f, iterations=it,
                )
            break
        d = -_two_loop(g, pairs, h0)
        slope = float(g @ d)
        if slope >= 0:
            pairs.clear()
            d = -h0(g)
            slope = float(g @ d)
        step = 1.0
        finite_seen = False
        for _ in range(max_backtracks):
            x_new = x + step * d
            if recenter is not None:
                x_new = recenter(x_new)
            f_new, g_new = fun_grad(x_new)
            evals += 1
            finite = bool(np.isfinite(f_new) and np.all(np.isfinite(g_new)))
            finite_seen |= finite
            if finite and f_new <= f + c1 * step * slope:
                break
            step *= 0.5
        else:
            if not finite_seen:
                raise NumericalInconsistencyError(
                    f"objective overflows along every trial step at iteration {it}"
                )
            if raise_on_failure:
                raise IterationLimitError(
                    f"line search failed at iteration {it} (|grad| = {gnorm:.3e})",
                    best=x, value=f, iterations=it,
                )
            break
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            pairs.append((s, yv, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        history.append(f)
        it += 1
    return LBFGSResult(x, f, gnorm, it, evals, gnorm <= gtol, history)


def _two_loop(g, pairs, h0):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    r = h0(q)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y @ r)
        r += (a - b) * s
    return r
