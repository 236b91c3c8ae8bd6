"""Test dynamics and batch constructors.

The Van der Pol oscillator is the workhorse: its stiffness varies over a
cycle with the damping strength, which makes it the canonical probe for
step-size behavior and for the shared-step-size pathology of jointly
batched solves. A small suite of analytic problems with closed-form
solutions serves as accuracy oracles.
"""

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controller import Tolerances
from .solver import IvpBatch, SolveStatus, solve

__all__ = [
    "VdpParams",
    "vdp_dynamics",
    "vdp_limit_cycle",
    "vdp_batch",
    "AnalyticProblem",
    "analytic_problems",
]


@dataclass(frozen=True)
class VdpParams:
    """Damping strength of the Van der Pol oscillator; may be per instance."""

    mu: float | np.ndarray = 2.0

    def __post_init__(self):
        mu = np.asarray(self.mu)
        if np.any(~np.isfinite(mu)) or np.any(mu < 0):
            raise ValueError("mu must be finite and nonnegative")


def vdp_dynamics(params: VdpParams) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """First-order Van der Pol dynamics on state columns (x, xdot)."""
    mu = np.asarray(params.mu, dtype=float)

    def f(t, y):
        x = y[:, 0]
        v = y[:, 1]
        return np.stack([v, mu * (1.0 - x * x) * v - x], axis=1)

    return f


@functools.lru_cache(maxsize=None)
def vdp_limit_cycle(mu: float, tol: float = 1e-10) -> tuple[tuple[float, float], float]:
    """A point on the limit cycle and the cycle period, for one mu.

    Pre-integrates from (2, 0) for several cycles at tight tolerance so the
    trajectory settles on the limit cycle, then measures the period as the
    time between consecutive same-direction zero crossings of xdot (a
    Poincare-section return). Crossing times are refined by linear
    interpolation on a dense sampling grid.

    Returns ``(anchor, period)`` where ``anchor`` is the state at the start
    of the last measured cycle.
    """
    # generous horizon: the relaxation-oscillation period grows like
    # (3 - 2 ln 2) mu for large mu and tends to 2 pi for mu -> 0
    horizon = 4.0 * (6.3 + 1.7 * mu)
    n_grid = 8000
    grid = np.linspace(0.0, horizon, n_grid)
    problem = IvpBatch(
        y0=np.array([[2.0, 0.0]]),
        t_start=np.array([0.0]),
        t_end=np.array([horizon]),
        t_eval=[grid],
    )
    sol = solve(
        problem,
        vdp_dynamics(VdpParams(mu)),
        tol=Tolerances(atol=tol, rtol=tol),
        max_steps=5_000_000,
    )
    if sol.status[0] != SolveStatus.SUCCESS:
        raise RuntimeError(f"limit-cycle pre-integration failed for mu={mu}")
    states = sol.ys[0]
    v = states[:, 1]

    # downward zero crossings of xdot, skipping the t = 0 boundary crossing
    sign_change = (v[:-1] > 0.0) & (v[1:] <= 0.0)
    idx = np.flatnonzero(sign_change)
    idx = idx[grid[idx] > horizon * 0.02]
    if idx.size < 2:
        raise RuntimeError(f"not enough Poincare returns for mu={mu}")
    t_cross = grid[idx] + (grid[idx + 1] - grid[idx]) * v[idx] / (v[idx] - v[idx + 1])
    period = float(t_cross[-1] - t_cross[-2])
    anchor_state = states[idx[-2]]
    return (float(anchor_state[0]), float(anchor_state[1])), period


def vdp_batch(
    n: int,
    mu: float,
    phase_spread: float = 2.0 * np.pi,
    n_eval: int = 0,
) -> IvpBatch:
    """A batch of Van der Pol problems phase-shifted along the limit cycle.

    Initial conditions sit at ``n`` evenly spread phases covering
    ``phase_spread`` radians of the cycle (``2 pi`` spreads them over the
    whole cycle without duplicating the endpoint); every instance
    integrates over one cycle period. ``n_eval > 0`` attaches that many
    evenly spaced evaluation points per instance.
    """
    if n < 1:
        raise ValueError("need at least one instance")
    if not (0.0 <= phase_spread <= 2.0 * np.pi):
        raise ValueError("phase_spread must lie in [0, 2 pi]")
    anchor, period = vdp_limit_cycle(float(mu))
    f = vdp_dynamics(VdpParams(mu))
    offsets = period * phase_spread * np.arange(n) / (2.0 * np.pi * n)
    if n == 1 or phase_spread == 0.0:
        y0 = np.tile(np.asarray(anchor), (n, 1))
    else:
        sampler = IvpBatch(
            y0=np.array([list(anchor)]),
            t_start=np.array([0.0]),
            t_end=np.array([period]),
            t_eval=[offsets],
        )
        sampled = solve(sampler, f, tol=Tolerances(1e-10, 1e-10), max_steps=5_000_000)
        if sampled.status[0] != SolveStatus.SUCCESS:
            raise RuntimeError(f"phase sampling failed for mu={mu}")
        y0 = sampled.ys[0]
    t_eval = [
        np.linspace(0.0, period, n_eval) if n_eval > 0 else np.empty(0)
        for _ in range(n)
    ]
    return IvpBatch(
        y0=y0,
        t_start=np.zeros(n),
        t_end=np.full(n, period),
        t_eval=t_eval,
    )


@dataclass(frozen=True)
class AnalyticProblem:
    """Dynamics paired with a closed-form solution for oracle checks.

    ``exact(t, y0)`` maps per-instance times ``(n,)`` and initial states
    ``(n, d)`` to the exact states ``(n, d)``.
    """

    name: str
    n_features: int
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray]


def analytic_problems(lam: float = 1.0) -> list[AnalyticProblem]:
    """Exponential, harmonic oscillator, and logistic growth."""

    def exp_f(t, y):
        return lam * y

    def exp_exact(t, y0):
        return y0 * np.exp(lam * t)[:, None]

    def harmonic_f(t, y):
        return np.stack([y[:, 1], -y[:, 0]], axis=1)

    def harmonic_exact(t, y0):
        c, s = np.cos(t), np.sin(t)
        x = y0[:, 0] * c + y0[:, 1] * s
        v = -y0[:, 0] * s + y0[:, 1] * c
        return np.stack([x, v], axis=1)

    def logistic_f(t, y):
        return y * (1.0 - y)

    def logistic_exact(t, y0):
        e = np.exp(t)[:, None]
        return y0 * e / (1.0 + y0 * (e - 1.0))

    return [
        AnalyticProblem("exponential", 1, exp_f, exp_exact),
        AnalyticProblem("harmonic", 2, harmonic_f, harmonic_exact),
        AnalyticProblem("logistic", 1, logistic_f, logistic_exact),
    ]
