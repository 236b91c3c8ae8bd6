"""Batched explicit Runge-Kutta trial steps and dense-output evaluation.

All state lives in arrays of shape ``(n, d)`` where ``n`` is the batch size
and ``d`` the number of state components; each row belongs to one problem
instance. Every stage is evaluated on the full batch, so instances that
have already finished keep flowing through the arithmetic (with ``dt = 0``)
and are masked out by the caller.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tableau import ButcherTableau

__all__ = ["StepResult", "Stepper", "rk_step", "interpolate"]

# f(t, y) with t of shape (n,) and y of shape (n, d), returning (n, d).
Dynamics = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class StepResult:
    """One trial step for every instance in the batch.

    ``stage_derivs`` aliases the owning stepper's scratch buffer and is only
    valid until the next call to :meth:`Stepper.step`.
    """

    y_next: np.ndarray
    error_estimate: np.ndarray
    stage_derivs: np.ndarray  # (stages, n, d)
    f_next: np.ndarray | None  # f(t + dt, y_next) for FSAL tableaus

    #: number of dynamics evaluations performed by the producing step
    n_evals: int = 0


class Stepper:
    """Executes trial steps for one solve, reusing pre-allocated buffers.

    A stepper owns mutable scratch arrays and must be confined to a single
    solve at a time; create separate instances for concurrent solves.
    """

    def __init__(self, tableau: ButcherTableau, batch_size: int, n_features: int):
        self.tableau = tableau
        s = tableau.stages
        self._k = np.empty((s, batch_size, n_features))
        self._acc = np.empty((batch_size, n_features))
        self._y_stage = np.empty((batch_size, n_features))

    def step(
        self,
        f: Dynamics,
        t: np.ndarray,
        dt: np.ndarray,
        y: np.ndarray,
        f0: np.ndarray,
    ) -> StepResult:
        """One embedded RK trial step on the full batch.

        ``f0`` must equal ``f(t, y)`` (the FSAL cache of the previous
        accepted step or a fresh evaluation). Stage accumulation runs in
        ascending stage order so results are bit-reproducible regardless of
        batch composition. Non-finite stage values propagate into the error
        estimate instead of raising, which forces rejection downstream.
        """
        tab = self.tableau
        s = tab.stages
        k = self._k
        dt_col = dt[:, None]
        n_evals = 0
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if tab.fsal:
                k[0] = f0
            else:
                k[0] = f(t, y)
                n_evals += 1
            for i in range(1, s):
                acc = self._acc
                np.multiply(tab.a[i, 0], k[0], out=acc)
                for j in range(1, i):
                    acc += tab.a[i, j] * k[j]
                y_stage = self._y_stage
                np.multiply(dt_col, acc, out=y_stage)
                y_stage += y
                k[i] = f(t + tab.c[i] * dt, y_stage)
                n_evals += 1

            acc = self._acc
            np.multiply(tab.b[0], k[0], out=acc)
            for i in range(1, s):
                acc += tab.b[i] * k[i]
            y_next = y + dt_col * acc

            err_acc = np.multiply(tab.b_err[0], k[0])
            for i in range(1, s):
                err_acc += tab.b_err[i] * k[i]
            error_estimate = dt_col * err_acc

        f_next = k[s - 1] if tab.fsal else None
        return StepResult(
            y_next=y_next,
            error_estimate=error_estimate,
            stage_derivs=k,
            f_next=f_next,
            n_evals=n_evals,
        )

    def interpolate(
        self,
        step: StepResult,
        y0: np.ndarray,
        dt: np.ndarray,
        theta: np.ndarray,
    ) -> np.ndarray:
        """Dense-output evaluation ``y(t + theta * dt)`` per instance.

        ``theta`` must lie in ``[0, 1]`` per instance; values outside are an
        argument error, extrapolation is never performed silently. The
        per-stage weight polynomials are evaluated with Horner's rule, one
        multiply-add per coefficient.
        """
        if np.any((theta < 0.0) | (theta > 1.0)):
            raise ValueError("theta must lie in [0, 1]")
        coeffs = self.tableau.interp_coeffs  # (s, m), ascending theta^1..theta^m
        s, m = coeffs.shape
        # Horner pass over theta for all stages at once: w has shape (s, n).
        w = np.broadcast_to(coeffs[:, m - 1 : m], (s, theta.shape[0])).copy()
        for j in range(m - 2, -1, -1):
            w *= theta
            w += coeffs[:, j : j + 1]
        w *= theta
        acc = w[0][:, None] * step.stage_derivs[0]
        for i in range(1, s):
            acc += w[i][:, None] * step.stage_derivs[i]
        return y0 + dt[:, None] * acc


def rk_step(
    f: Dynamics,
    tableau: ButcherTableau,
    t: np.ndarray,
    dt: np.ndarray,
    y: np.ndarray,
    f0: np.ndarray,
) -> StepResult:
    """Convenience wrapper around :class:`Stepper` for one-off steps."""
    n, d = np.atleast_2d(y).shape
    return Stepper(tableau, n, d).step(f, t, dt, y, f0)


def interpolate(
    step: StepResult,
    tableau: ButcherTableau,
    y0: np.ndarray,
    dt: np.ndarray,
    theta: np.ndarray,
) -> np.ndarray:
    """Dense-output evaluation without an explicit stepper instance."""
    stepper = Stepper.__new__(Stepper)
    stepper.tableau = tableau
    return Stepper.interpolate(stepper, step, y0, dt, theta)
