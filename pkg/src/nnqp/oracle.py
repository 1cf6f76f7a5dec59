"""Reference solvers and checkers, independent of the multiplicative path.

Everything here exists to certify the production solvers from the outside:
an exhaustive active-set enumeration (exact for small problems), a
projected-gradient method with backtracking (structurally unrelated to the
multiplicative rules), and a symmetric eigenvalue-based PSD check. None of
it is ever called from the solve path.
"""

from dataclasses import dataclass

import numpy as np
from itertools import combinations

import scipy.linalg

from .solver import KktReport, kkt_report

# Gradient slack allowed on the active set when accepting an enumerated
# candidate; pure roundoff scale.
GRAD_SLACK = 1e-10


@dataclass
class OracleSolution:
    """A certified solution: point, objective, active set, KKT residuals."""

    x: np.ndarray
    objective: float
    active_set: tuple
    certificate: KktReport
    converged: bool = True


def active_set_enumerate(q):
    """Exact NNQP solution by enumerating all free/active index splits.

    For each candidate free set F, solves Q[F,F] x_F = h[F] and accepts
    when x_F >= 0 and the gradient on the complement is >= -1e-10. For
    positive definite Q any accepted candidate is the unique global
    minimizer, so enumeration proceeds from the largest free sets down and
    returns on first acceptance (which also resolves degenerate ties in
    favor of the larger free set).

    Limited to n <= 20; cost is 2^n linear solves.
    """
    if q.n > 20:
        raise ValueError("enumeration limited to n <= 20, got n = %d" % q.n)
    if not q.is_positive_definite():
        raise ValueError("enumeration requires positive definite Q")

    idx = np.arange(q.n)
    for size in range(q.n, -1, -1):
        for free in combinations(range(q.n), size):
            free = np.asarray(free, dtype=int)
            x = np.zeros(q.n)
            if free.size:
                try:
                    x[free] = scipy.linalg.solve(
                        q.Q[np.ix_(free, free)], q.h[free], assume_a="pos"
                    )
                except np.linalg.LinAlgError:
                    continue
                if (x[free] < 0).any():
                    continue
            g = q.gradient(x)
            bound = np.setdiff1d(idx, free, assume_unique=True)
            if (g[bound] < -GRAD_SLACK).any():
                continue
            return OracleSolution(
                x=x,
                objective=q.objective(x),
                active_set=tuple(int(i) for i in bound),
                certificate=kkt_report(q, x),
            )
    raise RuntimeError("no free set accepted: numerical breakdown in enumeration")


def _spectral_norm_estimate(Q, iters=60):
    """Power-iteration estimate of ||Q||_2 for a symmetric Q."""
    n = Q.shape[0]
    # Deterministic start, slightly tilted so it is not orthogonal to the
    # top eigenvector by accident.
    v = np.ones(n) + 0.01 * np.arange(n)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = Q @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 1.0
        lam = nw
        v = w / nw
    return float(lam)


def projected_gradient(q, x0, tol=1e-10, max_iter=50_000):
    """Projected-gradient NNQP solve with backtracking halving.

    Steps from 1/L (L a power-iteration estimate of ||Q||_2), projects onto
    x >= 0, and halves the step until the quadratic upper bound holds. Stops
    when the projected gradient's infinity norm reaches ``tol``; if
    ``max_iter`` runs out first, returns the best iterate with
    ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.maximum(np.asarray(x0, dtype=float), 0.0)
    if x.shape != (q.n,):
        raise ValueError("x0 must have length %d" % q.n)
    L = max(_spectral_norm_estimate(q.Q), np.finfo(float).tiny)
    t0 = 1.0 / L

    def projected_grad_norm(x, g):
        pg = np.where(x > 0, g, np.minimum(g, 0.0))
        return float(np.abs(pg).max(initial=0.0))

    converged = False
    for _ in range(max_iter):
        g = q.gradient(x)
        if projected_grad_norm(x, g) <= tol:
            converged = True
            break
        t = t0
        f = q.objective(x)
        while True:
            x_new = np.maximum(x - t * g, 0.0)
            d = x_new - x
            bound = f + float(g @ d) + 0.5 / t * float(d @ d)
            if q.objective(x_new) <= bound + 1e-15 * (1.0 + abs(f)) or t < 1e-20:
                break
            t *= 0.5
        x = x_new
    else:
        converged = projected_grad_norm(x, q.gradient(x)) <= tol

    return OracleSolution(
        x=x,
        objective=q.objective(x),
        active_set=tuple(int(i) for i in np.flatnonzero(x == 0)),
        certificate=kkt_report(q, x),
        converged=converged,
    )


def psd_check(M, tol_scale=1e-10):
    """Check symmetric M for positive semi-definiteness.

    Returns (flag, min_eigenvalue): flag is True when the smallest
    eigenvalue is >= -tol_scale * (1 + ||M||_inf).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    if np.abs(M - M.T).max(initial=0.0) > 1e-10 * (1.0 + np.abs(M).max(initial=0.0)):
        raise ValueError("M must be symmetric")
    lam_min = float(scipy.linalg.eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0])
    norm = float(np.abs(M).sum(axis=1).max(initial=0.0))
    return lam_min >= -tol_scale * (1.0 + norm), lam_min
