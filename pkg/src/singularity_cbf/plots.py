"""SVG figures for scenario runs.

Figures are rendered off-screen and written atomically.  The SVG id salt is
fixed and the date stamp dropped so repeated runs give identical files.
"""
from __future__ import annotations

import io
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ._io import atomic_write_text  # noqa: E402
from .errors import ContractViolation  # noqa: E402
from .trajectory import TrajectoryLog  # noqa: E402

STYLE = {
    "svg.hashsalt": "singularity-cbf",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}
COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red")


def save_svg(fig, path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_text(path, buf.getvalue())


def _angle_velocity_panels(log, baseline, labels, units):
    fig, (ax_q, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0))
    t = log.t
    for k, (qc, uc) in enumerate(labels):
        color = COLORS[k % len(COLORS)]
        ax_q.plot(t, log[qc], color=color, label=f"{qc} (CBF)")
        ax_u.plot(t, log[uc], color=color, label=f"{uc} (CBF)")
        if baseline is not None:
            ax_q.plot(baseline.t, baseline[qc], color=color, ls="--", lw=0.9, label=f"{qc} (no CBF)")
            ax_u.plot(baseline.t, baseline[uc], color=color, ls="--", lw=0.9, label=f"{uc} (no CBF)")
    ax_q.set_ylabel(f"joint angle [{units[0]}]")
    ax_u.set_ylabel(f"joint velocity [{units[1]}]")
    ax_u.set_xlabel("time [s]")
    ax_q.legend(loc="best", ncol=2)
    ax_u.legend(loc="best", ncol=2)
    if baseline is not None:
        # the unfiltered spike dwarfs everything else; keep the filtered run readable
        lim = 1.5 * max(np.max(np.abs(log[uc])) for _, uc in labels) + 1e-9
        peak = max(np.max(np.abs(baseline[uc])) for _, uc in labels)
        if peak > lim:
            ax_u.set_ylim(-lim, lim)
            ax_u.text(0.01, 0.02, f"no-CBF peak {peak:.3g} (clipped)", transform=ax_u.transAxes, fontsize=7)
    fig.tight_layout()
    return fig


def plot_arm(log: TrajectoryLog, outdir, baseline: Optional[TrajectoryLog] = None) -> List[Path]:
    outdir = Path(outdir)
    paths = []
    with plt.rc_context(STYLE):
        fig = _angle_velocity_panels(log, baseline, [("q1", "u1"), ("q2", "u2")], ("rad", "rad/s"))
        paths.append(save_svg(fig, outdir / "arm_joints.svg"))

        fig, ax = plt.subplots(figsize=(6.0, 2.6))
        ax.plot(log.t, log["lambda1"], label="lambda1 (CBF)")
        if baseline is not None:
            ax.plot(baseline.t, baseline["lambda1"], ls="--", label="lambda1 (no CBF)")
        eps = log.meta.get("epsilon")
        if eps is not None:
            ax.axhline(float(eps), color="k", lw=0.8, ls=":", label="epsilon")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("smallest eigenvalue of J J^T [m^2]")
        ax.legend(loc="best")
        fig.tight_layout()
        paths.append(save_svg(fig, outdir / "arm_barrier.svg"))
    return paths


def plot_suture(log: TrajectoryLog, outdir, baseline: Optional[TrajectoryLog] = None) -> List[Path]:
    outdir = Path(outdir)
    unit = log.meta.get("position_unit", "mm")
    paths = []
    with plt.rc_context(STYLE):
        fig, (ax_p, ax_th, ax_h) = plt.subplots(3, 1, sharex=True, figsize=(6.0, 6.0))
        t = log.t
        ax_p.plot(t, log["ex"], label="x error")
        ax_p.plot(t, log["ey"], label="y error")
        ax_p.set_ylabel(f"position error [{unit}]")
        ax_p.legend(loc="best")
        ax_th.plot(t, log["theta"], label="theta")
        theta_ref = log["theta"] - log["etheta"]
        ax_th.plot(t, theta_ref, ls="--", color="k", lw=0.8, label="reference")
        ax_th.set_ylabel("heading [rad]")
        ax_th.legend(loc="best")
        h = log["h_min"]
        if np.any(np.isfinite(h)):
            ax_h.plot(t, h, color="tab:red")
        ax_h.axhline(0.0, color="k", lw=0.8, ls=":")
        ax_h.set_ylabel("min barrier h [unit cube^2]")
        ax_h.set_xlabel("time [s]")
        fig.tight_layout()
        paths.append(save_svg(fig, outdir / "suture_pose.svg"))

        fig, ax = plt.subplots(figsize=(6.0, 2.8))
        for k, c in enumerate(log.columns_like("I")):
            ax.plot(t, log[c], color=COLORS[k % len(COLORS)], label=c)
            if baseline is not None:
                ax.plot(baseline.t, baseline[c], color=COLORS[k % len(COLORS)], ls="--", lw=0.8)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("coil current [A]")
        ax.legend(loc="best", ncol=4)
        fig.tight_layout()
        paths.append(save_svg(fig, outdir / "suture_currents.svg"))
    return paths


def plot_singular_cloud(points, outdir, names=("x [mm]", "y [mm]", "theta [rad]")) -> List[Path]:
    """Three axis-pair projections of a sampled singular set."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.0))
        for ax, (i, j) in zip(axes, ((0, 1), (0, 2), (1, 2))):
            ax.scatter(pts[:, i], pts[:, j], s=1.5, color="tab:purple", rasterized=False)
            ax.set_xlabel(names[i])
            ax.set_ylabel(names[j])
        fig.tight_layout()
        return [save_svg(fig, Path(outdir) / "singular_cloud.svg")]


def emit_plots(log: TrajectoryLog, outdir, baseline: Optional[TrajectoryLog] = None) -> List[Path]:
    """Write the figures that fit the log's scenario; ``outdir`` is created if needed."""
    if log is None or len(log) == 0:
        raise ContractViolation("cannot plot an empty log")
    Path(outdir).mkdir(parents=True, exist_ok=True)
    scenario = log.meta.get("scenario")
    if scenario == "arm" or "lambda1" in log.columns:
        return plot_arm(log, outdir, baseline)
    return plot_suture(log, outdir, baseline)
