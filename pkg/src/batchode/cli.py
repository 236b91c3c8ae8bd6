"""Experiment command line: batching pathology, PID sweep, loop-time bench.

Every command emits CSV with a fixed column schema and row order so
downstream plotting stays stable; figures are optional and rendered from
the same rows. Exit code 0 on success, 1 when any instance fails, 2 on
invalid flags.
"""

import argparse
import csv
import sys
import time

import numpy as np

from .controller import PID_PRESETS, PidCoefficients, Tolerances, integral_controller, pid_controller
from .problems import vdp_batch, vdp_limit_cycle
from .solver import IvpBatch, SolveStatus, solve, solve_joint
from .tableau import dopri5, tsit5

__all__ = ["main", "cmd_vdp_batching", "cmd_pid_sweep", "cmd_looptime"]

METHODS = {"dopri5": dopri5, "tsit5": tsit5}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _parse_controller(spec: str) -> PidCoefficients:
    if spec == "integral":
        return integral_controller()
    if spec.startswith("pid:"):
        return pid_controller(spec[4:])
    raise argparse.ArgumentTypeError(
        f"controller must be 'integral' or 'pid:<preset>' with preset in {sorted(PID_PRESETS)}"
    )


def cmd_vdp_batching(args) -> int:
    """One batch of phase-shifted Van der Pol problems, independent or joint."""
    tableau = METHODS[args.method]()
    tol = Tolerances(atol=args.atol, rtol=args.rtol)
    if args.random_phases:
        rng = np.random.default_rng(args.seed)
        base = vdp_batch(args.n, args.mu, phase_spread=0.0, n_eval=args.n_eval)
        _, period = vdp_limit_cycle(float(args.mu))
        offsets = np.sort(rng.uniform(0.0, period, size=args.n))
        sampler = vdp_batch(1, args.mu, n_eval=0)
        probe = IvpBatch(
            y0=sampler.y0,
            t_start=sampler.t_start,
            t_end=sampler.t_end,
            t_eval=[offsets],
        )
        from .problems import VdpParams, vdp_dynamics

        sampled = solve(
            probe, vdp_dynamics(VdpParams(args.mu)), tol=Tolerances(1e-10, 1e-10),
            max_steps=5_000_000,
        )
        batch = IvpBatch(
            y0=sampled.ys[0],
            t_start=base.t_start,
            t_end=base.t_end,
            t_eval=base.t_eval,
        )
    else:
        batch = vdp_batch(args.n, args.mu, phase_spread=args.phase_spread, n_eval=args.n_eval)

    from .problems import VdpParams, vdp_dynamics

    f = vdp_dynamics(VdpParams(args.mu))
    runner = solve_joint if args.mode == "joint" else solve
    sol = runner(
        batch, f, tableau=tableau, tol=tol,
        controller=args.controller, max_steps=args.max_steps, record_trace=True,
    )

    rows = []
    for i in range(args.n):
        rows.append(
            (
                i,
                args.mode,
                args.mu,
                int(sol.stats.n_steps[i]),
                int(sol.stats.n_accepted[i]),
                int(sol.stats.n_f_evals[i]),
                SolveStatus(sol.status[i]).name.lower(),
            )
        )
    _write_csv(args.out, ["instance", "mode", "mu", "n_steps", "n_accepted", "n_f_evals", "status"], rows)

    trace_rows = []
    trace_dicts = []
    for i in range(args.n):
        ts = sol.stats.extra["trace_t"][i]
        dts = sol.stats.extra["trace_dt"][i]
        accs = sol.stats.extra["trace_accept"][i]
        step_idx = 0
        for t, dt, acc in zip(ts, dts, accs):
            if not acc:
                continue
            trace_rows.append((i, step_idx, float(t), float(dt)))
            trace_dicts.append({"instance": i, "mode": args.mode, "t": float(t), "dt": abs(float(dt))})
            step_idx += 1
    if args.trace_out:
        _write_csv(args.trace_out, ["instance", "step", "t", "dt"], trace_rows)
    if args.figure:
        from .plots import save_step_trace_figure

        save_step_trace_figure(trace_dicts, args.figure, mu=args.mu)

    failed = sol.status != SolveStatus.SUCCESS
    if np.any(failed):
        for i in np.flatnonzero(failed):
            print(
                f"instance {i} failed: {SolveStatus(sol.status[i]).name}",
                file=sys.stderr,
            )
        return 1
    return 0


def cmd_pid_sweep(args) -> int:
    """Steps per cycle for each PID preset relative to the integral baseline."""
    tableau = METHODS[args.method]()
    tol = Tolerances(atol=args.atol, rtol=args.rtol)
    mus = [float(m) for m in args.mu.split(",")]
    presets = args.presets.split(",") if args.presets else sorted(PID_PRESETS)
    for p in presets:
        if p not in PID_PRESETS:
            print(f"unknown preset {p!r}", file=sys.stderr)
            return 2

    rows = []
    dicts = []
    any_failed = False
    for mu in mus:
        batch = vdp_batch(1, mu)
        from .problems import VdpParams, vdp_dynamics

        f = vdp_dynamics(VdpParams(mu))
        configs = [("integral", integral_controller())] + [
            (p, pid_controller(p)) for p in presets
        ]
        baseline_steps = None
        for name, ctrl in configs:
            sol = solve(
                batch, f, tableau=tableau, tol=tol, controller=ctrl,
                max_steps=args.max_steps,
            )
            ok = sol.status[0] == SolveStatus.SUCCESS
            steps = int(sol.stats.n_steps[0])
            accepted = int(sol.stats.n_accepted[0])
            if name == "integral":
                baseline_steps = steps if ok else None
            if not ok:
                any_failed = True
                ratio = float("nan")
            elif baseline_steps is None:
                ratio = float("nan")
            else:
                ratio = steps / baseline_steps
            rows.append((mu, name, steps, accepted, ratio))
            dicts.append({"mu": mu, "preset": name, "ratio_vs_integral": ratio})
    _write_csv(args.out, ["mu", "preset", "n_steps", "n_accepted", "ratio_vs_integral"], rows)
    if args.figure:
        from .plots import save_pid_sweep_figure

        save_pid_sweep_figure(dicts, args.figure)
    return 1 if any_failed else 0


def cmd_looptime(args) -> int:
    """Per-step solver overhead with a trivially cheap dynamics function.

    Solves a zero dynamics over [0, 1] with a near-constant step size so
    the attempted step count is controlled by ``--steps``; the separately
    measured dynamics time is subtracted before dividing by the step count.
    Timing columns are measured, never asserted.
    """
    n, d, steps = args.n, args.d, args.steps

    def f(t, y):
        return np.zeros_like(y)

    problem = IvpBatch(
        y0=np.ones((n, d)),
        t_start=np.zeros(n),
        t_end=np.ones(n),
        t_eval=[np.empty(0)] * n,
    )
    # zero dynamics always accept; a flat clamp keeps dt ~ 1/steps
    ctrl = PidCoefficients(factor_min=0.5, factor_max=1.0 + 1e-9)

    rows = []
    loop_times = []
    for run in range(1, args.repeats + 1):
        t0 = time.perf_counter()
        sol = solve(
            problem, f, tol=Tolerances(1e-6, 1e-6), controller=ctrl,
            dt0=1.0 / steps, max_steps=max(10 * steps, 100),
        )
        t_total = time.perf_counter() - t0
        n_evals = int(sol.stats.n_f_evals[0])
        tt = problem.t_start
        yy = problem.y0
        t0 = time.perf_counter()
        for _ in range(n_evals):
            f(tt, yy)
        t_dyn = time.perf_counter() - t0
        attempted = int(sol.stats.n_steps[0])
        loop_time_us = (t_total - t_dyn) / attempted * 1e6
        loop_times.append(loop_time_us)
        rows.append((run, n, d, attempted, loop_time_us))
    mean = float(np.mean(loop_times))
    sd = float(np.std(loop_times, ddof=1)) if len(loop_times) > 1 else 0.0
    rows.append(("mean+-sd", n, d, attempted, f"{mean:.3f}+-{sd:.3f}"))
    _write_csv(args.out, ["run", "n", "d", "steps", "loop_time_us"], rows)
    return 0


def _positive_int(value: str) -> int:
    iv = int(value)
    if iv < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return iv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batchode",
        description="Batched ODE solver experiments: batching pathology, PID sweep, loop time.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vdp-batching", help="independent vs joint batched Van der Pol solves")
    p.add_argument("--n", type=_positive_int, default=4)
    p.add_argument("--mu", type=float, default=25.0)
    p.add_argument("--atol", type=float, default=1e-5)
    p.add_argument("--rtol", type=float, default=1e-5)
    p.add_argument("--mode", choices=["independent", "joint"], default="independent")
    p.add_argument("--method", choices=sorted(METHODS), default="dopri5")
    p.add_argument("--controller", type=_parse_controller, default=integral_controller())
    p.add_argument("--max-steps", type=_positive_int, default=100_000)
    p.add_argument("--phase-spread", type=float, default=2.0 * np.pi)
    p.add_argument("--n-eval", type=int, default=200)
    p.add_argument("--random-phases", action="store_true",
                   help="draw phases uniformly instead of evenly spreading them")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None,
                   help="CSV of per-accepted-step (t, dt) rows for trace plots")
    p.add_argument("--figure", default=None, help="render a step-size trace figure")
    p.set_defaults(func=cmd_vdp_batching)

    p = sub.add_parser("pid-sweep", help="PID presets vs integral controller step counts")
    p.add_argument("--mu", default="5,15,25,40", help="comma-separated damping strengths")
    p.add_argument("--presets", default=None, help="comma-separated preset names")
    p.add_argument("--atol", type=float, default=1e-5)
    p.add_argument("--rtol", type=float, default=1e-5)
    p.add_argument("--method", choices=sorted(METHODS), default="dopri5")
    p.add_argument("--max-steps", type=_positive_int, default=1_000_000)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None, help="render the steps-vs-mu trade-off figure")
    p.set_defaults(func=cmd_pid_sweep)

    p = sub.add_parser("looptime", help="per-step solver overhead microbenchmark")
    p.add_argument("--n", type=_positive_int, default=256)
    p.add_argument("--d", type=_positive_int, default=2)
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_looptime)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
