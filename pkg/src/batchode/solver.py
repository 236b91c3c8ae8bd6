"""Batched adaptive integration loop with per-instance solver state.

Every problem instance in a batch carries its own time, step size,
accept/reject decisions, and termination status. The dynamics function is
always evaluated on the full batch; instances that have already terminated
keep flowing through the arithmetic with ``dt = 0`` ("overhanging"
evaluations) and are frozen by masked commits, so the number of dynamics
evaluations is identical for all instances of one solve.

:func:`solve_joint` deliberately reproduces the naive-concatenation
pathology: the whole batch becomes one problem with a single shared error
norm, step size, and accept decision.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .controller import (
    ControllerState,
    PidCoefficients,
    Tolerances,
    adapt_step,
    error_norm,
    initial_step,
    integral_controller,
)
from .stepper import Dynamics, Stepper
from .tableau import ButcherTableau, dopri5

__all__ = [
    "IvpBatch",
    "SolveStatus",
    "SolveStats",
    "Solution",
    "BatchSolver",
    "solve",
    "solve_joint",
]

DEFAULT_MAX_STEPS = 10_000


class SolveStatus(enum.IntEnum):
    RUNNING = 0
    SUCCESS = 1
    MAX_STEPS_EXCEEDED = 2
    STEP_UNDERFLOW = 3
    INFINITE_DYNAMICS = 4


@dataclass
class IvpBatch:
    """A batch of independent initial value problems.

    ``t_eval`` is a list of per-instance sorted evaluation-time arrays;
    lengths may differ across instances and may be empty. Each instance may
    have its own integration interval and direction.
    """

    y0: np.ndarray  # (n, d)
    t_start: np.ndarray  # (n,)
    t_end: np.ndarray  # (n,)
    t_eval: list[np.ndarray]

    def __post_init__(self):
        self.y0 = np.atleast_2d(np.asarray(self.y0, dtype=float))
        self.t_start = np.asarray(self.t_start, dtype=float)
        self.t_end = np.asarray(self.t_end, dtype=float)
        n, d = self.y0.shape
        if n < 1 or d < 1:
            raise ValueError("need at least one instance and one state component")
        if self.t_start.shape != (n,) or self.t_end.shape != (n,):
            raise ValueError("t_start/t_end must have one entry per instance")
        if np.any(self.t_end == self.t_start):
            raise ValueError("t_end must differ from t_start for every instance")
        if len(self.t_eval) != n:
            raise ValueError("t_eval must have one (possibly empty) array per instance")
        self.t_eval = [np.asarray(te, dtype=float) for te in self.t_eval]
        direction = np.sign(self.t_end - self.t_start)
        for i, te in enumerate(self.t_eval):
            if te.size == 0:
                continue
            pos = (te - self.t_start[i]) * direction[i]
            if np.any(np.diff(pos) < 0):
                raise ValueError(f"t_eval of instance {i} is not sorted in integration direction")
            if pos[0] < 0 or pos[-1] > abs(self.t_end[i] - self.t_start[i]):
                raise ValueError(f"t_eval of instance {i} leaves the integration interval")

    @property
    def batch_size(self) -> int:
        return self.y0.shape[0]

    @property
    def n_features(self) -> int:
        return self.y0.shape[1]

    @property
    def direction(self) -> np.ndarray:
        return np.sign(self.t_end - self.t_start)


@dataclass
class SolveStats:
    """Per-instance solver statistics.

    ``n_f_evals`` counts the dynamics evaluations of the integration loop
    (initial FSAL seed included, step-size-selection probe excluded); the
    dynamics run on the full batch, so the count is identical for every
    instance of one solve. ``extra`` is an open key -> per-instance-array
    map that custom components can use to report internal state.
    """

    n_steps: np.ndarray
    n_accepted: np.ndarray
    n_f_evals: np.ndarray
    final_dt: np.ndarray
    extra: dict = field(default_factory=dict)


@dataclass
class Solution:
    """Outputs at requested evaluation times plus statistics and statuses.

    ``ys[i]`` holds only the evaluation points actually reached before the
    instance terminated: exactly ``len(t_eval[i])`` rows for SUCCESS
    instances, fewer for failed ones. Unreached points are absent rather
    than filled with sentinels.
    """

    ys: list[np.ndarray]
    stats: SolveStats
    status: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.status == SolveStatus.SUCCESS))


class BatchSolver:
    """The batched integration loop, one instance per batch row.

    Exposed so tests and custom loops can drive :meth:`step_once` directly;
    :func:`solve` is the plain run-to-completion entry point.
    """

    def __init__(
        self,
        problem: IvpBatch,
        f: Dynamics,
        tableau: ButcherTableau | None = None,
        tol: Tolerances | None = None,
        controller: PidCoefficients | None = None,
        max_steps: int = DEFAULT_MAX_STEPS,
        dt0: np.ndarray | float | None = None,
        record_trace: bool = False,
    ):
        if max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        self.problem = problem
        self.f = f
        self.tableau = tableau if tableau is not None else dopri5()
        self.tol = tol if tol is not None else Tolerances()
        self.controller = controller if controller is not None else integral_controller()
        self.max_steps = max_steps
        self.record_trace = record_trace

        n, d = problem.batch_size, problem.n_features
        self.t = problem.t_start.copy()
        self.y = problem.y0.copy()
        self.direction = problem.direction
        self.status = np.full(n, SolveStatus.RUNNING, dtype=np.int64)
        self.stepper = Stepper(self.tableau, n, d)

        if dt0 is None:
            dt, f0 = initial_step(
                f, self.t, self.y, self.tableau.order, self.tol, self.direction
            )
        else:
            dt = np.broadcast_to(np.asarray(dt0, dtype=float), (n,)).copy()
            f0 = np.asarray(f(self.t, self.y), dtype=float)
            dt = np.where(np.all(np.isfinite(f0), axis=1), dt, np.nan)
        self.n_f_evals = 1  # the FSAL seed; the heuristic's probe is controller overhead
        bad = ~np.isfinite(dt)
        self.status[bad] = SolveStatus.INFINITE_DYNAMICS
        dt = np.where(bad, 0.0, dt)
        self.f0 = f0
        self.fsal_valid = np.ones(n, dtype=bool)
        self.ctrl = ControllerState.initial(dt)

        self.n_steps = np.zeros(n, dtype=np.int64)
        self.n_accepted = np.zeros(n, dtype=np.int64)
        self._cursor = np.zeros(n, dtype=np.int64)
        self._ys: list[list[np.ndarray]] = [[] for _ in range(n)]
        if record_trace:
            self._trace_t: list[list[float]] = [[] for _ in range(n)]
            self._trace_dt: list[list[float]] = [[] for _ in range(n)]
            self._trace_accept: list[list[bool]] = [[] for _ in range(n)]

        # evaluation points that coincide with t_start are emitted up front
        for i in range(n):
            te = problem.t_eval[i]
            while self._cursor[i] < te.size and te[self._cursor[i]] == self.t[i]:
                self._ys[i].append(self.y[i].copy())
                self._cursor[i] += 1

    def step_once(self) -> bool:
        """One loop iteration; returns False once every instance terminated.

        Clamps each running instance's dt to land exactly on its t_end,
        takes one trial step on the full batch, decides accept/reject per
        instance, commits accepted instances, emits crossed evaluation
        points via dense output, and updates statistics and statuses.
        """
        running = self.status == SolveStatus.RUNNING
        if not np.any(running):
            return False

        # Rejected steps invalidate the FSAL cache; refresh it with one
        # full-batch evaluation so every attempt starts from a live k1.
        if self.tableau.fsal and np.any(running & ~self.fsal_valid):
            fresh = np.asarray(self.f(self.t, self.y), dtype=float)
            self.n_f_evals += 1
            self.f0 = np.where(self.fsal_valid[:, None], self.f0, fresh)
            self.fsal_valid[:] = True

        remaining = self.problem.t_end - self.t
        dt = self.ctrl.dt
        truncated = running & (np.abs(dt) >= np.abs(remaining))
        dt_used = np.where(truncated, remaining, dt)
        dt_used = np.where(running, dt_used, 0.0)
        frozen_dt = self.ctrl.dt
        frozen_prev = self.ctrl.norm_prev
        frozen_prev2 = self.ctrl.norm_prev2
        self.ctrl.dt = dt_used

        step = self.stepper.step(self.f, self.t, dt_used, self.y, self.f0)
        self.n_f_evals += step.n_evals
        norms = error_norm(step.error_estimate, self.y, step.y_next, self.tol)
        accept, dt_next = adapt_step(
            self.ctrl, norms, self.tableau.error_order, self.controller
        )
        # terminated instances flow through the arithmetic but their
        # controller state stays frozen
        self.ctrl.dt = np.where(running, self.ctrl.dt, frozen_dt)
        self.ctrl.norm_prev = np.where(running, self.ctrl.norm_prev, frozen_prev)
        self.ctrl.norm_prev2 = np.where(running, self.ctrl.norm_prev2, frozen_prev2)

        acc = running & accept
        rej = running & ~accept
        t_old = self.t.copy()
        y_old = self.y

        self.n_steps[running] += 1
        self.n_accepted[acc] += 1
        if self.record_trace:
            for i in np.flatnonzero(running):
                self._trace_t[i].append(t_old[i])
                self._trace_dt[i].append(dt_used[i])
                self._trace_accept[i].append(bool(accept[i]))

        # masked commit of accepted instances
        self.y = np.where(acc[:, None], step.y_next, self.y)
        t_new = t_old + dt_used
        t_new = np.where(truncated, self.problem.t_end, t_new)
        self.t = np.where(acc, t_new, t_old)
        if self.tableau.fsal:
            self.f0 = np.where(acc[:, None], step.f_next, self.f0)
        self.fsal_valid = np.where(rej, False, self.fsal_valid)

        self._emit(acc, t_old, y_old, dt_used, step)

        finished = acc & truncated
        self.status[finished] = SolveStatus.SUCCESS

        still = self.status == SolveStatus.RUNNING
        underflow = still & (self.t + self.ctrl.dt == self.t)
        self.status[underflow] = SolveStatus.STEP_UNDERFLOW
        exceeded = (self.status == SolveStatus.RUNNING) & (self.n_steps >= self.max_steps)
        self.status[exceeded] = SolveStatus.MAX_STEPS_EXCEEDED
        return bool(np.any(self.status == SolveStatus.RUNNING))

    def _emit(
        self,
        acc: np.ndarray,
        t_old: np.ndarray,
        y_old: np.ndarray,
        dt_used: np.ndarray,
        step,
    ):
        """Emit every evaluation point crossed by an accepted step.

        Each instance advances a cursor into its sorted t_eval list; points
        with normalized position theta in (0, 1] are interpolated. Points
        at theta = 0 were already emitted by the step that landed there.
        """
        n = self.t.shape[0]
        crossed: list[np.ndarray] = [np.empty(0)] * n
        max_count = 0
        for i in np.flatnonzero(acc):
            te = self.problem.t_eval[i]
            c = self._cursor[i]
            if c >= te.size or dt_used[i] == 0.0:
                continue
            theta = (te[c:] - t_old[i]) / dt_used[i]
            count = int(np.searchsorted(theta, 1.0, side="right"))
            if count > 0:
                # points left marginally behind by roundoff sit at theta = 0
                crossed[i] = np.maximum(theta[:count], 0.0)
                max_count = max(max_count, count)
        for r in range(max_count):
            theta = np.zeros(n)
            mask = np.zeros(n, dtype=bool)
            for i in range(n):
                if crossed[i].size > r:
                    theta[i] = crossed[i][r]
                    mask[i] = True
            vals = self.stepper.interpolate(step, y_old, dt_used, theta)
            for i in np.flatnonzero(mask):
                self._ys[i].append(vals[i].copy())
                self._cursor[i] += 1

    def run(self) -> Solution:
        """Iterate :meth:`step_once` to completion and package the result."""
        while self.step_once():
            pass
        return self.solution()

    def solution(self) -> Solution:
        n = self.problem.batch_size
        d = self.problem.n_features
        ys = [
            np.array(rows).reshape(len(rows), d) if rows else np.empty((0, d))
            for rows in self._ys
        ]
        extra: dict = {}
        if self.record_trace:
            extra["trace_t"] = [np.array(v) for v in self._trace_t]
            extra["trace_dt"] = [np.array(v) for v in self._trace_dt]
            extra["trace_accept"] = [np.array(v, dtype=bool) for v in self._trace_accept]
        stats = SolveStats(
            n_steps=self.n_steps.copy(),
            n_accepted=self.n_accepted.copy(),
            n_f_evals=np.full(n, self.n_f_evals, dtype=np.int64),
            final_dt=self.ctrl.dt.copy(),
            extra=extra,
        )
        return Solution(ys=ys, stats=stats, status=self.status.copy())


def solve(
    problem: IvpBatch,
    f: Dynamics,
    tableau: ButcherTableau | None = None,
    tol: Tolerances | None = None,
    controller: PidCoefficients | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    dt0: np.ndarray | float | None = None,
    record_trace: bool = False,
) -> Solution:
    """Integrate every instance independently with adaptive steps.

    Each instance runs under its own step-size trajectory and accept/reject
    decisions; the batch only shares the (full-batch) dynamics evaluations.
    """
    return BatchSolver(
        problem, f, tableau, tol, controller, max_steps, dt0, record_trace
    ).run()


def solve_joint(
    problem: IvpBatch,
    f: Dynamics,
    tableau: ButcherTableau | None = None,
    tol: Tolerances | None = None,
    controller: PidCoefficients | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    dt0: np.ndarray | float | None = None,
    record_trace: bool = False,
) -> Solution:
    """Integrate the batch as one concatenated problem of size ``n * d``.

    All instances must share identical time bounds and evaluation points.
    The batch gets a single RMS error norm over all components, one shared
    step size, and one shared accept decision; statistics report the shared
    trajectory replicated per instance. This is the naive-batching behavior
    that independent solving avoids.
    """
    n, d = problem.batch_size, problem.n_features
    if np.any(problem.t_start != problem.t_start[0]) or np.any(
        problem.t_end != problem.t_end[0]
    ):
        raise ValueError("joint mode requires identical integration bounds")
    te0 = problem.t_eval[0]
    for te in problem.t_eval[1:]:
        if te.shape != te0.shape or np.any(te != te0):
            raise ValueError("joint mode requires identical evaluation points")
    if np.asarray(tol.atol if tol else 0.0).ndim > 0 or np.asarray(
        tol.rtol if tol else 0.0
    ).ndim > 0:
        raise ValueError("joint mode supports scalar tolerances only")

    flat = IvpBatch(
        y0=problem.y0.reshape(1, n * d),
        t_start=problem.t_start[:1],
        t_end=problem.t_end[:1],
        t_eval=[te0],
    )

    def f_flat(t, y):
        tt = np.broadcast_to(t, (n,))
        return np.asarray(f(tt, y.reshape(n, d)), dtype=float).reshape(1, n * d)

    sol = solve(flat, f_flat, tableau, tol, controller, max_steps, dt0, record_trace)

    ys_flat = sol.ys[0]  # (m, n*d)
    ys = [ys_flat.reshape(-1, n, d)[:, i, :] for i in range(n)]
    extra = {k: [v[0]] * n for k, v in sol.stats.extra.items()}
    stats = SolveStats(
        n_steps=np.repeat(sol.stats.n_steps, n),
        n_accepted=np.repeat(sol.stats.n_accepted, n),
        n_f_evals=np.repeat(sol.stats.n_f_evals, n),
        final_dt=np.repeat(sol.stats.final_dt, n),
        extra=extra,
    )
    return Solution(ys=ys, stats=stats, status=np.repeat(sol.status, n))
