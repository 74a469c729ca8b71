"""Figure builders for the four plot kinds.

Each builder returns the matplotlib figure plus the numbers it displays, so
tests can assert the figures show exactly the file contents (no resampling,
no recomputation beyond the annotated least-squares fit).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, load_compare, load_convergence, load_trajectory

KINDS = ("sphere3d", "energy", "convergence", "compare")


@dataclass(frozen=True)
class PlotRequest:
    kind: str
    input_path: str
    output_path: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind '{self.kind}' (expected one of {KINDS})")


def _sphere_wireframe(ax, radius):
    theta = np.linspace(0, np.pi, 13)
    phi = np.linspace(0, 2 * np.pi, 25)
    T, P = np.meshgrid(theta, phi)
    ax.plot_wireframe(
        radius * np.sin(T) * np.cos(P),
        radius * np.sin(T) * np.sin(P),
        radius * np.cos(T),
        color="0.8",
        linewidth=0.4,
    )


def build_sphere3d(data):
    fig = plt.figure(figsize=(7.0, 6.5))
    ax = fig.add_subplot(projection="3d")
    for radius in sorted({round(r, 6) for r in data.norms[0]}):
        _sphere_wireframe(ax, radius)
    n = data.states.shape[1]
    for i in range(n):
        path = data.states[:, i, :]
        ax.plot(path[:, 0], path[:, 1], path[:, 2], linewidth=1.0, label=f"spin {i}")
        ax.scatter(*path[0], s=12)
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    if n <= 10:
        ax.legend(loc="upper left", fontsize=8)
    ax.set_title("spin trajectories")
    return fig, {}


def build_energy(data):
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    deviation = data.energies - data.energies[0]
    ax.plot(data.times, deviation, linewidth=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("H(t) - H(0)")
    ax.set_title("energy deviation")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    return fig, {"deviation": deviation}


def build_convergence(data):
    log_dt, log_err = np.log(data.dts), np.log(data.errors)
    slope, intercept = np.polyfit(log_dt, log_err, 1)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(data.dts, data.errors, "o", label="measured error")
    fit = np.exp(intercept) * data.dts**slope
    ax.loglog(data.dts, fit, "--", label=f"fitted slope {slope:.4f}")
    ax.set_xlabel("dt")
    ax.set_ylabel("global error")
    ax.set_title("convergence")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    return fig, {"slope": float(slope)}


def build_compare(data):
    defect_cols = ["max_drift", "orbit_defect", "symplectic_defect"]
    k = len(data.methods)
    x = np.arange(k)
    width = 0.25
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(10.0, 4.5), width_ratios=[2.2, 1.0])
    floor = 1e-17
    for j, col in enumerate(defect_cols):
        ax.bar(x + (j - 1) * width, np.maximum(data.columns[col], floor), width, label=col)
    ax.set_yscale("log")
    ax.set_xticks(x, data.methods, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("defect / drift")
    ax.legend(fontsize=8)
    ax.set_title("method comparison")
    ax2.bar(x, data.columns["mean_solver_iters"], 0.5, color="0.5")
    ax2.set_xticks(x, data.methods, rotation=20, ha="right", fontsize=8)
    ax2.set_ylabel("mean solver iterations")
    fig.tight_layout()
    return fig, {}


def build_figure(request: PlotRequest):
    """Load the input for the requested kind and build its figure."""
    if request.kind == "sphere3d":
        return build_sphere3d(load_trajectory(request.input_path))
    if request.kind == "energy":
        return build_energy(load_trajectory(request.input_path))
    if request.kind == "convergence":
        return build_convergence(load_convergence(request.input_path))
    return build_compare(load_compare(request.input_path))


def plot(request: PlotRequest) -> Path:
    """Render the requested figure to the output image path."""
    fig, _ = build_figure(request)
    out = Path(request.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, dpi=130)
    finally:
        plt.close(fig)
    return out
