"""Figure rendering for the experiment CLI.

Figures are rendered straight from the same row data that goes into the
CSV files, so a saved figure and its CSV always agree.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_step_trace_figure", "save_pid_sweep_figure"]


def save_step_trace_figure(trace_rows, path, mu=None):
    """Step-size traces over time, one line per (mode, instance).

    ``trace_rows`` are dicts with keys ``instance``, ``mode``, ``t``,
    ``dt`` as emitted by the vdp-batching command.
    """
    series = {}
    for row in trace_rows:
        key = (row["mode"], row["instance"])
        series.setdefault(key, ([], []))
        series[key][0].append(row["t"])
        series[key][1].append(row["dt"])

    fig, ax = plt.subplots(figsize=(7, 4))
    for (mode, instance), (ts, dts) in sorted(series.items()):
        style = dict(alpha=0.8)
        if mode == "joint":
            style.update(color="k", linewidth=1.8, zorder=3)
            label = "joint" if instance == min(i for m, i in series if m == "joint") else None
        else:
            label = f"instance {instance}"
        ax.plot(ts, dts, label=label, **style)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("accepted step size")
    title = "Step sizes over one cycle"
    if mu is not None:
        title += f" (mu = {mu:g})"
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_pid_sweep_figure(rows, path):
    """Steps relative to the integral controller, one line per preset.

    ``rows`` are dicts with keys ``mu``, ``preset``, ``ratio_vs_integral``.
    """
    presets = {}
    for row in rows:
        presets.setdefault(row["preset"], ([], []))
        presets[row["preset"]][0].append(row["mu"])
        presets[row["preset"]][1].append(row["ratio_vs_integral"])

    fig, ax = plt.subplots(figsize=(7, 4))
    for preset, (mus, ratios) in sorted(presets.items()):
        if preset == "integral":
            continue
        ax.plot(mus, ratios, marker="o", label=preset)
    ax.axhline(1.0, color="k", linewidth=0.8, linestyle="--")
    ax.set_xlabel("damping strength mu")
    ax.set_ylabel("steps relative to integral controller")
    ax.set_title("PID step-size control vs integral baseline")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
