"""Multiplicative steppers for NNQP and the solve loop around them.

Four element-wise update rules, each of which maps a positive iterate to a
positive iterate and never needs a line search:

``main``
    x_i <- x_i * (2(Qminus x)_i + hplus_i + delta) / ((Qabs x)_i + hminus_i + delta)

``isra``
    x_i <- x_i * h_i / (Qx)_i, valid only for element-wise nonnegative Q, h

``sha``
    x_i <- x_i * (h_i + sqrt(h_i^2 + 4(Qplus x)_i (Qminus x)_i)) / (2(Qplus x)_i)

``brand_chen``
    x_i <- x_i * ((Qminus x)_i + hplus_i) / ((Qplus x)_i + hminus_i)

All four leave every Karush-Kuhn-Tucker point fixed, and the objective is
monotonically non-increasing along the iterates (isra requires nonnegative
data for that guarantee). The ``main`` rule is a gradient-projection step in
disguise: with gamma_i = x_i / ((Qabs x)_i + hminus_i + delta) it equals
x - gamma * (Qx - h) exactly; see :func:`step_size_diagnostic`.

Each update needs two matrix-vector products (one for isra), and the solve
loop reuses them for the gradient, objective and KKT residuals, so a full
iteration costs little more than the products themselves.
"""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .quadratic import DEFAULT_DELTA, SplitQuadratic

# Objective-stall window: relative change is measured across this many
# iterations, because single-step changes go quiet long before convergence.
STALL_WINDOW = 10

# Traces longer than this are decimated (every other entry dropped and the
# recording stride doubled) so unbounded runs stay bounded in memory.
TRACE_CAP = 1_000_000


class StopReason(enum.Enum):
    KKT_CONVERGED = "kkt_converged"
    STALLED = "stalled"
    MAX_ITER = "max_iter"
    UNDERFLOW = "underflow"

    def __str__(self):
        return self.value


VARIANTS = ("main", "isra", "sha", "brand_chen")


@dataclass
class SolverConfig:
    """Knobs for :func:`solve`.

    Stopping is two-pronged: a KKT residual test (all three components of
    :func:`kkt_report` at or below ``tol_kkt``) and a stall test on the
    relative objective change across a 10-iteration window. Multiplicative
    methods crawl near the boundary, so objective-based stopping alone can
    declare false convergence; the KKT test is the one that certifies.
    """

    variant: str = "main"
    max_iter: int = 10_000
    tol_kkt: float = 1e-8
    tol_rel_change: float = 1e-12
    delta: float = DEFAULT_DELTA
    record_trace: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError("variant must be one of %s, got %r" % (VARIANTS, self.variant))
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.tol_kkt > 0 and self.tol_rel_change > 0 and self.delta > 0):
            raise ValueError("tolerances and delta must be positive")


@dataclass
class KktReport:
    """First-order optimality residuals at a point x.

    complementarity   = max_i |x_i * (Qx - h)_i|
    dual_feasibility  = max_i |min((Qx - h)_i, 0)|
    primal_feasibility= max_i |min(x_i, 0)|

    All three vanish exactly at a KKT point of min F(x) s.t. x >= 0; the
    implicit multiplier on the active set is max(-(Qx - h), 0).
    """

    complementarity: float
    dual_feasibility: float
    primal_feasibility: float

    @property
    def max_residual(self):
        return max(self.complementarity, self.dual_feasibility, self.primal_feasibility)

    def satisfied(self, tol):
        return self.max_residual <= tol


@dataclass
class SolveState:
    """Iterate and diagnostics carried through (and returned by) a solve.

    ``trace`` rows are (iter, objective, kkt_complementarity, kkt_dual),
    recorded every ``trace_stride`` iterations. ``underflow`` flags
    coordinates that hit exact floating-point zero; they are frozen there
    (zero is feasible and often exactly right on the active set), never an
    error.
    """

    x: np.ndarray
    iter: int = 0
    objective: float = np.inf
    kkt_residual: float = np.inf
    trace: list = field(default_factory=list)
    trace_stride: int = 1
    underflow: bool = False


def kkt_report(q, x):
    """KKT residuals of x for the problem held by ``q``."""
    x = np.asarray(x, dtype=float)
    g = q.gradient(x)
    return KktReport(
        complementarity=float(np.abs(x * g).max(initial=0.0)),
        dual_feasibility=float(np.abs(np.minimum(g, 0.0)).max(initial=0.0)),
        primal_feasibility=float(np.abs(np.minimum(x, 0.0)).max(initial=0.0)),
    )


def _check_iterate(x, n):
    """Steppers accept nonnegative iterates; exact zeros stay frozen at zero."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError("x must have length %d, got shape %s" % (n, x.shape))
    if np.isnan(x).any():
        raise ValueError("x contains NaN")
    if (x < 0).any():
        raise ValueError("x must be nonnegative")
    return x


def _main_update(s, x):
    """Main-rule update plus the gradient, sharing the two products."""
    qm = s.Qminus @ x
    qa = s.Qabs @ x
    g = qa - 2.0 * qm - s.base.h
    num = 2.0 * qm + s.hplus + s.delta
    den = qa + s.hminus + s.delta
    return x * (num / den), g


def _isra_update(q, x):
    Qx = q.Q @ x
    if np.any((Qx == 0) & (x > 0)):
        raise ValueError("isra hit (Qx)_i = 0 on a live coordinate")
    den = np.where(Qx > 0, Qx, 1.0)  # dead coordinates stay at zero anyway
    return x * (q.h / den), Qx - q.h


def _sha_update(s, x):
    qp = s.Qplus @ x
    qm = s.Qminus @ x
    h = s.base.h
    g = qp - qm - h
    radicand = h * h + 4.0 * qp * qm
    if (radicand < 0).any():
        # Impossible for finite inputs; a negative value means corrupt data.
        raise FloatingPointError("negative radicand in sha update")
    den = 2.0 * qp
    den = np.where(den > 0, den, s.delta)
    return x * ((h + np.sqrt(radicand)) / den), g


def _brand_chen_update(s, x):
    qp = s.Qplus @ x
    qm = s.Qminus @ x
    g = qp - qm - s.base.h
    num = qm + s.hplus
    den = qp + s.hminus
    den = np.where(den > 0, den, s.delta)
    return x * (num / den), g


def step_main(s, x):
    """One main-rule update. Monotone for any symmetric Q and any h."""
    x = _check_iterate(x, s.n)
    out, _ = _main_update(s, x)
    if np.isnan(out).any():
        raise FloatingPointError("NaN produced in multiplicative update")
    return out


def step_isra(q, x):
    """One ISRA update x_i * h_i / (Qx)_i; requires Q >= 0 and h >= 0."""
    if (q.Q < 0).any() or (q.h < 0).any():
        raise ValueError("isra requires element-wise nonnegative Q and h")
    x = _check_iterate(x, q.n)
    out, _ = _isra_update(q, x)
    return out


def step_sha(s, x):
    """One update of the square-root rule of Sha, Lin, Saul and Lee."""
    x = _check_iterate(x, s.n)
    out, _ = _sha_update(s, x)
    if np.isnan(out).any():
        raise FloatingPointError("NaN produced in multiplicative update")
    return out


def step_brand_chen(s, x):
    """One update of the Brand-Chen ratio rule."""
    x = _check_iterate(x, s.n)
    out, _ = _brand_chen_update(s, x)
    if np.isnan(out).any():
        raise FloatingPointError("NaN produced in multiplicative update")
    return out


def step_size_diagnostic(s, x):
    """Per-coordinate step sizes gamma that expose the main rule as a
    gradient-projection step: step_main(s, x) == x - gamma * (Qx - h)
    exactly (up to floating-point roundoff)."""
    x = _check_iterate(x, s.n)
    return x / (s.Qabs @ x + s.hminus + s.delta)


def default_start(q):
    """All-ones start scaled by max(||h||_inf / ||Q||_inf, 1).

    A multiplicative iterate can never leave a coordinate that starts at
    exactly zero, so the default start is strictly positive and roughly on
    the scale of the unconstrained solution.
    """
    hn = float(np.abs(q.h).max(initial=0.0))
    qn = float(np.abs(q.Q).sum(axis=1).max(initial=0.0))
    scale = max(hn / qn, 1.0) if qn > 0 else 1.0
    return np.full(q.n, scale)


def _updater(s, cfg):
    if cfg.variant == "main":
        return lambda x: _main_update(s, x)
    if cfg.variant == "isra":
        if (s.base.Q < 0).any() or (s.base.h < 0).any():
            raise ValueError("variant 'isra' requires element-wise nonnegative Q and h")
        return lambda x: _isra_update(s.base, x)
    if cfg.variant == "sha":
        return lambda x: _sha_update(s, x)
    return lambda x: _brand_chen_update(s, x)


def solve(s, x0=None, config=None):
    """Run a multiplicative solve on a split problem.

    Parameters
    ----------
    s : SplitQuadratic
        Problem data; ``s.delta`` is overridden by ``config.delta`` if
        they differ.
    x0 : (n,) array, optional
        Strictly positive start; defaults to :func:`default_start`.
    config : SolverConfig, optional

    Returns
    -------
    state : SolveState
    reason : StopReason
        KKT_CONVERGED when all residuals reach ``tol_kkt``; STALLED when
        the objective moved less than ``tol_rel_change`` (relative) across
        a 10-iteration window; UNDERFLOW when every coordinate underflowed
        to zero; MAX_ITER otherwise.
    """
    cfg = config or SolverConfig()
    if cfg.delta != s.delta:
        s = SplitQuadratic(s.base, delta=cfg.delta)
    q = s.base

    if x0 is None:
        x = default_start(q)
    else:
        x = np.asarray(x0, dtype=float).copy()
        if x.shape != (q.n,):
            raise ValueError("x0 must have length %d" % q.n)
        if not np.all(x > 0):
            raise ValueError(
                "x0 must be strictly positive: multiplicative updates cannot "
                "leave a coordinate that starts at zero"
            )

    update = _updater(s, cfg)
    h = q.h
    state = SolveState(x=x)
    recent = []

    def record(k, f, comp, dual):
        state.trace.append((k, f, comp, dual))
        if len(state.trace) >= TRACE_CAP:
            # Keep iterations that are multiples of the doubled stride.
            del state.trace[1::2]
            state.trace_stride *= 2

    reason = StopReason.MAX_ITER
    for k in range(cfg.max_iter + 1):
        x_new, g = update(x)
        comp = float(np.abs(x * g).max(initial=0.0))
        dual = float(np.abs(np.minimum(g, 0.0)).max(initial=0.0))
        # Iterates stay nonnegative by construction, so the primal residual
        # is identically zero here.
        f = 0.5 * (float(x @ g) - float(x @ h))

        state.x = x
        state.iter = k
        state.objective = f
        state.kkt_residual = max(comp, dual)
        if cfg.record_trace and k % state.trace_stride == 0:
            record(k, f, comp, dual)

        if comp <= cfg.tol_kkt and dual <= cfg.tol_kkt:
            reason = StopReason.KKT_CONVERGED
            break
        if not x.any():
            # Every coordinate hit exact zero; the iteration cannot move.
            reason = StopReason.UNDERFLOW
            break
        recent.append(f)
        if len(recent) > STALL_WINDOW:
            f_old = recent.pop(0)
            if abs(f_old - f) <= cfg.tol_rel_change * (1.0 + abs(f_old)):
                reason = StopReason.STALLED
                break
        if k == cfg.max_iter:
            break

        if np.isnan(x_new).any():
            raise FloatingPointError("NaN produced in multiplicative update")
        if np.any((x_new == 0) & (x > 0)):
            state.underflow = True
        x = x_new

    return state, reason


def write_trace_csv(trace, path):
    """Write solve trace rows with the header iter,objective,kkt_complementarity,kkt_dual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "objective", "kkt_complementarity", "kkt_dual"])
        for row in trace:
            w.writerow(["%d" % row[0], "%.17g" % row[1], "%.17g" % row[2], "%.17g" % row[3]])
