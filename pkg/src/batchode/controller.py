"""Error norms, initial step selection, and per-instance step-size control.

The controller treats every batch row independently: norms, accept/reject
decisions, and step-size factors are computed per instance, which is what
keeps batched solves identical to their batch-size-1 counterparts.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tolerances",
    "PidCoefficients",
    "ControllerState",
    "PID_PRESETS",
    "integral_controller",
    "pid_controller",
    "error_norm",
    "initial_step",
    "adapt_step",
]

#: Norms are floored at this value before exponentiation so a zero error
#: estimate yields the maximum growth factor instead of infinity.
NORM_FLOOR = 1e-10

#: Named PID gain presets (beta1, beta2, beta3). Plain configuration data;
#: pass any other triple to :class:`PidCoefficients` directly.
PID_PRESETS: dict[str, tuple[float, float, float]] = {
    "PI42": (0.6, -0.2, 0.0),
    "PI33": (2 / 3, -1 / 3, 0.0),
    "PI34": (0.7, -0.4, 0.0),
    "H211": (1 / 6, 1 / 6, 0.0),
    "H312": (1 / 18, 1 / 9, 1 / 18),
}


@dataclass(frozen=True)
class Tolerances:
    """Absolute and relative tolerances, scalar or per-instance arrays.

    Array-valued tolerances broadcast against the batch, so each problem
    instance may carry its own ``atol``/``rtol``.
    """

    atol: float | np.ndarray = 1e-6
    rtol: float | np.ndarray = 1e-6

    def __post_init__(self):
        if np.any(np.asarray(self.atol) < 0) or np.any(np.asarray(self.rtol) < 0):
            raise ValueError("tolerances must be nonnegative")
        if np.all(np.asarray(self.atol) == 0) and np.all(np.asarray(self.rtol) == 0):
            raise ValueError("atol and rtol must not both be zero")


@dataclass(frozen=True)
class PidCoefficients:
    """Step-size controller gains and clamps.

    The step factor is ``safety * norm**(-beta1/k) * prev**(-beta2/k)
    * prev2**(-beta3/k)`` with ``k = error_order + 1``, clamped to
    ``[factor_min, factor_max]``. With ``beta2 = beta3 = 0`` this is the
    classical integral controller.

    ``update_history_on_reject`` selects whether the error-norm history
    shifts on every attempted step (the digital-filter reading, default) or
    only on accepted ones; both behaviors are testable.
    """

    beta1: float = 1.0
    beta2: float = 0.0
    beta3: float = 0.0
    safety: float = 0.9
    factor_min: float = 0.2
    factor_max: float = 10.0
    update_history_on_reject: bool = True

    def __post_init__(self):
        if not (0.0 < self.safety <= 1.0):
            raise ValueError("safety must be in (0, 1]")
        if not (0.0 < self.factor_min < 1.0 < self.factor_max):
            raise ValueError("need 0 < factor_min < 1 < factor_max")


def integral_controller(safety: float = 0.9) -> PidCoefficients:
    """The classical I controller: react to the current norm only."""
    return PidCoefficients(beta1=1.0, beta2=0.0, beta3=0.0, safety=safety)


def pid_controller(preset: str, **overrides) -> PidCoefficients:
    """Look up a named gain preset from :data:`PID_PRESETS`."""
    try:
        b1, b2, b3 = PID_PRESETS[preset]
    except KeyError:
        raise ValueError(
            f"unknown PID preset {preset!r}; available: {sorted(PID_PRESETS)}"
        ) from None
    return PidCoefficients(beta1=b1, beta2=b2, beta3=b3, **overrides)


@dataclass
class ControllerState:
    """Per-instance controller memory: two previous norms and current dt.

    Histories are initialized to 1 so the first steps of a PID controller
    reduce to integral behavior.
    """

    norm_prev: np.ndarray
    norm_prev2: np.ndarray
    dt: np.ndarray

    @classmethod
    def initial(cls, dt: np.ndarray) -> "ControllerState":
        n = dt.shape[0]
        return cls(norm_prev=np.ones(n), norm_prev2=np.ones(n), dt=dt.copy())


def error_norm(
    error_estimate: np.ndarray,
    y0: np.ndarray,
    y1: np.ndarray,
    tol: Tolerances,
) -> np.ndarray:
    """Mixed-tolerance RMS norm of the error estimate, per instance.

    ``sqrt(mean_j((e_j / (atol + rtol * max(|y0_j|, |y1_j|)))**2))``; a
    value <= 1 means the step meets tolerance. Non-finite error components
    yield ``inf`` for the owning instance so the step is rejected.
    """
    atol = np.asarray(tol.atol)
    rtol = np.asarray(tol.rtol)
    if atol.ndim == 1:
        atol = atol[:, None]
    if rtol.ndim == 1:
        rtol = rtol[:, None]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
        ratio = error_estimate / scale
        norm = np.sqrt(np.mean(ratio * ratio, axis=1))
    return np.where(np.isfinite(norm), norm, np.inf)


def initial_step(
    f,
    t0: np.ndarray,
    y0: np.ndarray,
    order: int,
    tol: Tolerances,
    direction: np.ndarray | float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Starting step sizes via the classical two-evaluation heuristic.

    Per instance: scaled norms ``d0`` of the state and ``d1`` of the
    derivative give a first guess ``h0 = 0.01 * d0 / d1`` (or ``1e-6`` in
    the degenerate branches), an explicit Euler probe estimates the second
    difference ``d2``, and ``h1 = (0.01 / max(d1, d2))**(1/(order+1))``.
    The result is ``min(100 * h0, h1)``, sign-adjusted to the integration
    direction.

    Returns ``(dt, f0)`` where ``f0 = f(t0, y0)`` so the caller can seed its
    FSAL cache without re-evaluating. Rows where ``f0`` is non-finite get
    ``dt = nan``; the solver turns those into INFINITE_DYNAMICS before
    stepping.
    """
    direction = np.broadcast_to(np.asarray(direction, dtype=float), t0.shape)
    atol = np.asarray(tol.atol)
    rtol = np.asarray(tol.rtol)
    if atol.ndim == 1:
        atol = atol[:, None]
    if rtol.ndim == 1:
        rtol = rtol[:, None]

    f0 = np.asarray(f(t0, y0), dtype=float)
    bad = ~np.all(np.isfinite(f0), axis=1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        scale = atol + rtol * np.abs(y0)
        d0 = np.sqrt(np.mean((y0 / scale) ** 2, axis=1))
        d1 = np.sqrt(np.mean((f0 / scale) ** 2, axis=1))
        degenerate = (d0 < 1e-5) | (d1 < 1e-5) | ~np.isfinite(d1)
        h0 = np.where(degenerate, 1e-6, 0.01 * d0 / np.where(degenerate, 1.0, d1))

        y1 = y0 + (h0 * direction)[:, None] * f0
        f1 = np.asarray(f(t0 + h0 * direction, y1), dtype=float)
        d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2, axis=1)) / h0

        d_max = np.maximum(d1, d2)
        small = (d_max <= 1e-15) | ~np.isfinite(d_max)
        h1 = np.where(
            small,
            np.maximum(1e-6, h0 * 1e-3),
            (0.01 / np.where(small, 1.0, d_max)) ** (1.0 / (order + 1)),
        )
        dt = np.minimum(100.0 * h0, h1) * direction
    dt = np.where(bad, np.nan, dt)
    return dt, f0


def adapt_step(
    state: ControllerState,
    norm: np.ndarray,
    error_order: int,
    coeffs: PidCoefficients,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance accept decision and next step size.

    Accepts where ``norm <= 1``. The step factor uses the current and two
    previous norms (floored at :data:`NORM_FLOOR`) and is clamped to
    ``[factor_min, factor_max]``; on rejection ``dt_next`` retries the same
    interval with the shrunken size. ``state`` is updated in place: ``dt``
    becomes ``dt_next`` and the norm history shifts according to
    ``coeffs.update_history_on_reject``.
    """
    k = error_order + 1
    accept = norm <= 1.0
    n = np.maximum(norm, NORM_FLOOR)
    n1 = np.maximum(state.norm_prev, NORM_FLOOR)
    n2 = np.maximum(state.norm_prev2, NORM_FLOOR)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        factor = (
            coeffs.safety
            * n ** (-coeffs.beta1 / k)
            * n1 ** (-coeffs.beta2 / k)
            * n2 ** (-coeffs.beta3 / k)
        )
    factor = np.where(np.isfinite(factor), factor, coeffs.factor_min)
    factor = np.clip(factor, coeffs.factor_min, coeffs.factor_max)
    dt_next = state.dt * factor

    if coeffs.update_history_on_reject:
        shift = np.ones_like(accept, dtype=bool)
    else:
        shift = accept
    state.norm_prev2 = np.where(shift, state.norm_prev, state.norm_prev2)
    state.norm_prev = np.where(shift, np.maximum(norm, NORM_FLOOR), state.norm_prev)
    state.dt = dt_next
    return accept, dt_next
