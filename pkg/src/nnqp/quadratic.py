"""Quadratic problem data for nonnegative quadratic programming (NNQP).

The problem is  min 0.5*x'Qx - x'h  subject to x >= 0, with Q symmetric.
This module holds the problem container, its element-wise sign split
(Q+, Q-, |Q|, h+, h-) used by the multiplicative solvers, and the diagonal
majorizer that underpins their monotone-decrease guarantee.
"""

import numpy as np

# Default stabilizer added to the numerator and denominator of the
# multiplicative factor; keeps the diagonal majorizer strictly positive.
DEFAULT_DELTA = 1e-16

# Relative asymmetry above this is rejected instead of silently averaged.
SYMMETRY_RTOL = 1e-12


def symmetrize(M):
    """Return (M + M.T)/2 for callers whose data is noisily asymmetric."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def _relative_asymmetry(Q):
    scale = max(1.0, float(np.abs(Q).max()) if Q.size else 1.0)
    return float(np.abs(Q - Q.T).max()) / scale


class Quadratic:
    """Symmetric quadratic objective F(x) = 0.5*x'Qx - x'h.

    Parameters
    ----------
    Q : (n, n) array_like
        Symmetric matrix. Matrices with relative asymmetry above 1e-12
        are rejected; use :func:`symmetrize` first if the asymmetry is
        numerical noise.
    h : (n,) array_like
        Linear term.
    """

    def __init__(self, Q, h):
        Q = np.asarray(Q, dtype=float)
        h = np.asarray(h, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be a square matrix, got shape %s" % (Q.shape,))
        if h.ndim != 1 or h.shape[0] != Q.shape[0]:
            raise ValueError(
                "h must be a vector of length %d, got shape %s" % (Q.shape[0], h.shape)
            )
        if not (np.isfinite(Q).all() and np.isfinite(h).all()):
            raise ValueError("Q and h must be finite")
        asym = _relative_asymmetry(Q)
        if asym > SYMMETRY_RTOL:
            raise ValueError(
                "Q is asymmetric (relative asymmetry %.3e > %.1e); "
                "symmetrize it explicitly if this is noise" % (asym, SYMMETRY_RTOL)
            )
        # Tiny asymmetry within tolerance is averaged away so downstream
        # identities (e.g. gradient = Qx - h with symmetric Q) hold exactly.
        self.Q = symmetrize(Q) if asym > 0.0 else Q
        self.h = h
        self.n = Q.shape[0]

    @classmethod
    def from_least_squares(cls, A, b):
        """Build the normal-equation problem Q = A'A, h = A'b.

        Minimizing ||Ax - b||^2 over x >= 0 and minimizing the resulting
        quadratic over x >= 0 have the same solutions.
        """
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a matrix, got shape %s" % (A.shape,))
        if b.ndim != 1 or b.shape[0] != A.shape[0]:
            raise ValueError(
                "b must have length %d (rows of A), got shape %s"
                % (A.shape[0], b.shape)
            )
        # BLAS products are not guaranteed bit-symmetric; average the halves.
        return cls(symmetrize(A.T @ A), A.T @ b)

    def objective(self, x):
        """Evaluate F(x) = 0.5*x'Qx - x'h."""
        x = self._check_vector(x)
        return 0.5 * float(x @ (self.Q @ x)) - float(x @ self.h)

    def gradient(self, x):
        """Evaluate grad F(x) = Qx - h."""
        x = self._check_vector(x)
        return self.Q @ x - self.h

    def is_positive_definite(self):
        """Probe Q for positive definiteness with a Cholesky factorization.

        Opt-in: never called implicitly, since large problems cannot
        afford the factorization.
        """
        try:
            np.linalg.cholesky(self.Q)
        except np.linalg.LinAlgError:
            return False
        return True

    def _check_vector(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError("expected vector of length %d, got shape %s" % (self.n, x.shape))
        return x

    def __repr__(self):
        return "Quadratic(n=%d)" % self.n


class SplitQuadratic:
    """Sign decomposition of a :class:`Quadratic` plus the stabilizer delta.

    Qplus = max(Q, 0), Qminus = max(-Q, 0), Qabs = Qplus + Qminus, and
    likewise hplus/hminus, all element-wise and all nonnegative. The
    reconstruction Qplus - Qminus == Q is exact bit for bit.

    Built via :func:`split`; treat instances as immutable.
    """

    def __init__(self, base, delta=DEFAULT_DELTA):
        if not isinstance(base, Quadratic):
            raise TypeError("base must be a Quadratic")
        if not delta > 0:
            raise ValueError("delta must be positive, got %r" % (delta,))
        self.base = base
        self.delta = float(delta)
        self.Qplus = np.maximum(base.Q, 0.0)
        self.Qminus = np.maximum(-base.Q, 0.0)
        self.Qabs = self.Qplus + self.Qminus
        self.hplus = np.maximum(base.h, 0.0)
        self.hminus = np.maximum(-base.h, 0.0)

    @property
    def n(self):
        return self.base.n

    def __repr__(self):
        return "SplitQuadratic(n=%d, delta=%g)" % (self.n, self.delta)


def split(q, delta=DEFAULT_DELTA):
    """Sign-split a quadratic: returns the SplitQuadratic for ``q``."""
    return SplitQuadratic(q, delta=delta)


class ScalingDiagonal:
    """Diagonal majorizer D(y) with entries ((|Q|y)_i + hminus_i + delta)/y_i.

    D(y) - Q is positive definite for any strictly positive y and delta > 0,
    which is what makes the surrogate in :func:`auxiliary_value` dominate
    the objective.
    """

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 1:
            raise ValueError("entries must be a vector")
        self.entries = entries

    def as_matrix(self):
        return np.diag(self.entries)


def _check_positive_vector(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError("%s must have length %d, got shape %s" % (name, n, x.shape))
    if not np.all(x > 0):
        raise ValueError("%s must be strictly positive" % name)
    return x


def scaling_diagonal(s, y):
    """Diagonal of the surrogate curvature at y (strictly positive y only)."""
    y = _check_positive_vector(y, s.n, "y")
    entries = (s.Qabs @ y + s.hminus + s.delta) / y
    return ScalingDiagonal(entries)


def auxiliary_value(s, x, y):
    """Evaluate the quadratic surrogate G(x, y) anchored at y.

    G(x, y) = F(y) + (x-y)'grad F(y) + 0.5*(x-y)'D(y)(x-y) with the
    diagonal D(y) from :func:`scaling_diagonal`. G dominates F:
    G(x, y) >= F(x) with equality exactly at x = y, so minimizing G over
    x at fixed y can only decrease F.
    """
    x = _check_positive_vector(x, s.n, "x")
    y = _check_positive_vector(y, s.n, "y")
    d = x - y
    D = scaling_diagonal(s, y).entries
    return s.base.objective(y) + float(d @ s.base.gradient(y)) + 0.5 * float(d @ (D * d))
