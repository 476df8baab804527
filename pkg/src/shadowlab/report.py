"""Figure rendering for the delimited outputs.

Every plot goes straight to a file through the Agg backend, so the
report path works on headless machines.  Figures accompany the CSV/JSON
artifacts; they are presentation, not data — nothing downstream parses
them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

from typing import Optional

from .maps import MapSpec, orbit
from .pseudo import Pseudotrajectory

__all__ = ["scaling_figure", "trajectory_figure"]

_DPI = 150


def scaling_figure(result, config, path) -> str:
    """Log-log threshold plot with the fitted power law overlaid."""
    eps = np.array([row[0] for row in result.rows])
    dmax = np.array([row[1] for row in result.rows])

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.loglog(eps, dmax, "o", color="#1f77b4", label="measured threshold")
    grid = np.geomspace(eps.min(), eps.max(), 64)
    ax.loglog(
        grid,
        result.fit_c * grid**result.fit_p,
        "-",
        color="#d62728",
        label=f"fit: {result.fit_c:.3g} * eps^{result.fit_p:.3g}",
    )
    ax.set_xlabel("tolerance eps")
    ax.set_ylabel("largest feasible step error")
    ax.set_title(f"step-error threshold scaling (residual {result.residual:.2g})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def trajectory_figure(
    traj: Pseudotrajectory,
    spec: MapSpec,
    path,
    eps: Optional[float] = None,
    shadow_point=None,
) -> str:
    """Trajectory plot; optionally overlays the tracing orbit and tube.

    One-dimensional trajectories are drawn against the step index with
    the eps-tube as a band; planar ones as a phase portrait.
    """
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    pts = traj.points
    steps = np.arange(len(pts))

    if traj.dim == 1:
        if eps is not None:
            ax.fill_between(
                steps, pts - eps, pts + eps, color="#1f77b4", alpha=0.15,
                label="tolerance tube",
            )
        ax.plot(steps, pts, ".-", color="#1f77b4", label="pseudotrajectory")
        if shadow_point is not None:
            orbit_pts = orbit(spec, shadow_point, len(pts) - 1)
            ax.plot(
                np.arange(len(orbit_pts)), orbit_pts, "-", color="#d62728",
                label="tracing orbit",
            )
        ax.set_xlabel("step")
        ax.set_ylabel("x")
    else:
        ax.plot(pts[:, 0], pts[:, 1], ".-", color="#1f77b4", label="pseudotrajectory")
        ax.plot(pts[0, 0], pts[0, 1], "s", color="#1f77b4", ms=7)
        if shadow_point is not None:
            orbit_pts = orbit(spec, shadow_point, len(pts) - 1)
            ax.plot(
                orbit_pts[:, 0], orbit_pts[:, 1], "-", color="#d62728",
                label="tracing orbit",
            )
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal", adjustable="datalim")

    title = f"{len(pts) - 1} steps"
    if traj.truncated:
        title += " (truncated at the neighborhood boundary)"
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)
