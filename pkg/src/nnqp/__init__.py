"""Multiplicative solvers for nonnegative quadratic programming.

Core problem containers live in :mod:`nnqp.quadratic`, the solver loop and
its update rules in :mod:`nnqp.solver`, independent reference solvers in
:mod:`nnqp.oracle`, and the two image applications in :mod:`nnqp.superres`
and :mod:`nnqp.labeling`.
"""

from .quadratic import (
    DEFAULT_DELTA,
    Quadratic,
    ScalingDiagonal,
    SplitQuadratic,
    auxiliary_value,
    scaling_diagonal,
    split,
    symmetrize,
)
from .solver import (
    KktReport,
    SolveState,
    SolverConfig,
    StopReason,
    default_start,
    kkt_report,
    solve,
    step_brand_chen,
    step_isra,
    step_main,
    step_sha,
    step_size_diagnostic,
    write_trace_csv,
)
from .oracle import OracleSolution, active_set_enumerate, projected_gradient, psd_check

__all__ = [
    "DEFAULT_DELTA",
    "Quadratic",
    "ScalingDiagonal",
    "SplitQuadratic",
    "auxiliary_value",
    "scaling_diagonal",
    "split",
    "symmetrize",
    "KktReport",
    "SolveState",
    "SolverConfig",
    "StopReason",
    "default_start",
    "kkt_report",
    "solve",
    "step_brand_chen",
    "step_isra",
    "step_main",
    "step_sha",
    "step_size_diagnostic",
    "write_trace_csv",
    "OracleSolution",
    "active_set_enumerate",
    "projected_gradient",
    "psd_check",
]

__version__ = "0.1.0"
