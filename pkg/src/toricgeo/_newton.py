"""Batched damped Newton minimization for smooth strictly convex functions."""
from __future__ import annotations

from typing import Callable

import numpy as np

ARMIJO = 1e-4
NEWTON_TOL = 1e-12
MAX_ITER = 100


class NoConvergence(RuntimeError):
    """Newton iteration did not reach the gradient tolerance."""


def minimize(
    oracle: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]],
    x0: np.ndarray,
    tol: float | None = None,
    max_iter: int = MAX_ITER,
    raise_on_failure: bool = True,
):
    """Minimize independent problems row by row.

    Parameters
    ----------
    oracle : callable
        ``oracle(x, rows)`` returns value ``(n,)``, gradient ``(n, d)`` and
        Hessian ``(n, d, d)`` for the points ``x`` belonging to problem
        indices ``rows``.
    x0 : ndarray, shape (n, d)
        Starting points.
    tol : float, optional
        Gradient tolerance (max norm); defaults to the module value
        ``NEWTON_TOL``.

    Returns
    -------
    x : ndarray, shape (n, d)
    converged : ndarray of bool, shape (n,)
    """
    tol = NEWTON_TOL if tol is None else tol
    x = np.array(x0, dtype=float, copy=True)
    n, d = x.shape
    converged = np.zeros(n, dtype=bool)
    if d == 0:
        converged[:] = True
        return x, converged
    active = np.arange(n)
    for _ in range(max_iter + 1):
        if active.size == 0:
            break
        val, grad, hess = oracle(x[active], active)
        gnorm = np.max(np.abs(grad), axis=1)
        done = gnorm <= tol
        converged[active[done]] = True
        keep = ~done
        active, val, grad, hess, gnorm = active[keep], val[keep], grad[keep], hess[keep], gnorm[keep]
        if active.size == 0:
            break
        step = -_solve(hess, grad)
        slope = np.einsum("ij,ij->i", grad, step)
        # close to the minimizer the pure Newton step is taken; rounding makes
        # the Armijo test unreliable there
        alpha = np.ones(active.size)
        pending = gnorm > 1e-7
        for _ in range(60):
            if not pending.any():
                break
            idx = np.flatnonzero(pending)
            trial = x[active[idx]] + alpha[idx, None] * step[idx]
            tv, _, _ = oracle(trial, active[idx])
            ok = np.isfinite(tv) & (tv <= val[idx] + ARMIJO * alpha[idx] * slope[idx])
            pending[idx[ok]] = False
            alpha[idx[~ok]] *= 0.5
        x[active] += alpha[:, None] * step
    if raise_on_failure and not converged.all():
        bad = np.flatnonzero(~converged)
        raise NoConvergence(f"Newton failed for {bad.size} of {n} problems (first index {bad[0]})")
    return x, converged


def _solve(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(hess, grad[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(grad)
        for i in range(len(grad)):
            out[i] = np.linalg.lstsq(hess[i], grad[i], rcond=None)[0]
        return out
