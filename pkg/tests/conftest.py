import numpy as np

from batchode import Stepper


def fixed_step_solve(f, tableau, t0, t1, y0, n_steps):
    """Integrate a single instance with constant steps; returns y(t1).

    Used as the scaffolding for empirical convergence-order checks; no
    error control, every step is accepted.
    """
    y = np.atleast_2d(np.asarray(y0, dtype=float))
    t = np.array([t0], dtype=float)
    dt = np.array([(t1 - t0) / n_steps])
    stepper = Stepper(tableau, y.shape[0], y.shape[1])
    f0 = np.asarray(f(t, y), dtype=float)
    for _ in range(n_steps):
        step = stepper.step(f, t, dt, y, f0)
        y = step.y_next
        t = t + dt
        f0 = step.f_next.copy() if tableau.fsal else np.asarray(f(t, y), dtype=float)
    return y
