"""Batched adaptive ODE solving with per-instance step-size control."""

from .controller import (
    PID_PRESETS,
    ControllerState,
    PidCoefficients,
    Tolerances,
    adapt_step,
    error_norm,
    initial_step,
    integral_controller,
    pid_controller,
)
from .problems import (
    AnalyticProblem,
    VdpParams,
    analytic_problems,
    vdp_batch,
    vdp_dynamics,
    vdp_limit_cycle,
)
from .solver import (
    BatchSolver,
    IvpBatch,
    Solution,
    SolveStats,
    SolveStatus,
    solve,
    solve_joint,
)
from .stepper import StepResult, Stepper, interpolate, rk_step
from .tableau import ButcherTableau, dopri5, tsit5

__version__ = "0.1.0"

__all__ = [
    "PID_PRESETS",
    "AnalyticProblem",
    "BatchSolver",
    "ButcherTableau",
    "ControllerState",
    "IvpBatch",
    "PidCoefficients",
    "Solution",
    "SolveStats",
    "SolveStatus",
    "StepResult",
    "Stepper",
    "Tolerances",
    "VdpParams",
    "adapt_step",
    "analytic_problems",
    "dopri5",
    "error_norm",
    "initial_step",
    "integral_controller",
    "interpolate",
    "pid_controller",
    "rk_step",
    "solve",
    "solve_joint",
    "tsit5",
    "vdp_batch",
    "vdp_dynamics",
    "vdp_limit_cycle",
]
