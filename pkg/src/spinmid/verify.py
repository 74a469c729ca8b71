"""Numerical certification of the steppers' structural properties.

Everything here is a measurement: defects are computed from finite
differences and direct comparisons, reported together with the stencils and
tolerances used, and never silently thresholded.  The acceptance suite pins
the thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import HamiltonianModel, Trajectory, as_spin_array, cross3, rotate_model, spin_norms
from .errors import ConfigurationError, GeometryError
from .integrate import StepperSpec, make_stepper, run_trajectory

TANGENCY_TOL = 1e-8


@dataclass(frozen=True)
class TangentBasis:
    """Per spin, two orthonormal vectors spanning the tangent plane at w_i."""

    e1: np.ndarray
    e2: np.ndarray

    def vectors(self) -> list[np.ndarray]:
        """Embedded basis of the product tangent space: 2n arrays of shape (n, 3)."""
        n = self.e1.shape[0]
        out = []
        for i in range(n):
            for e in (self.e1[i], self.e2[i]):
                vec = np.zeros((n, 3))
                vec[i] = e
                out.append(vec)
        return out


@dataclass(frozen=True)
class DefectReport:
    defect: float
    context: dict


@dataclass(frozen=True)
class ConvergenceReport:
    dts: np.ndarray
    errors: np.ndarray
    slope: float
    monotone: bool


def tangent_basis(w) -> TangentBasis:
    """Deterministic orthonormal tangent pair at each spin."""
    arr = as_spin_array(w)
    u = arr / spin_norms(arr)[:, None]
    helpers = np.eye(3)[np.argmin(np.abs(u), axis=1)]
    e1 = cross3(u, helpers)
    e1 = e1 / spin_norms(e1)[:, None]
    e2 = cross3(u, e1)
    return TangentBasis(e1=e1, e2=e2)


def symplectic_form(w_i, u, v) -> float:
    """Area form of the sphere through w_i: w . (u x v) / |w|^2.

    u and v must be tangent to that sphere.
    """
    w_i = np.asarray(w_i, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(w_i)
    for name, vec in (("u", u), ("v", v)):
        nv = np.linalg.norm(vec)
        if nv > 0 and abs(vec @ w_i) / (nv * r) > TANGENCY_TOL:
            raise GeometryError(f"{name} is not tangent to the sphere through w (beyond {TANGENCY_TOL:.0e})")
    return float(w_i @ np.cross(u, v) / (r * r))


def _total_form(warr: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum((warr * cross3(u, v)).sum(axis=1) / (warr * warr).sum(axis=1)))


def symplectic_defect(stepper: Callable[[np.ndarray], np.ndarray], w, fd_step: float = 1e-5,
                      context: Optional[dict] = None) -> DefectReport:
    """Deviation of a step map's tangent action from preserving the area form.

    The tangent map is assembled on a tangent basis by central differences
    with the given step; columns are projected back to the tangent spaces at
    the image.  The defect is the worst |form(Ju, Jv) - form(u, v)| over
    basis pairs, so it carries O(fd_step^2) stencil noise on top of the map's
    own defect.
    """
    warr = as_spin_array(w)
    basis = tangent_basis(warr).vectors()
    W0 = stepper(warr)
    U0 = W0 / spin_norms(W0)[:, None]
    cols = []
    for e in basis:
        col = (stepper(warr + fd_step * e) - stepper(warr - fd_step * e)) / (2.0 * fd_step)
        col = col - (col * U0).sum(axis=1)[:, None] * U0
        cols.append(col)
    defect = 0.0
    for a in range(len(basis)):
        for b in range(a + 1, len(basis)):
            defect = max(defect, abs(_total_form(W0, cols[a], cols[b]) - _total_form(warr, basis[a], basis[b])))
    ctx = {"fd_step": fd_step}
    if context:
        ctx.update(context)
    return DefectReport(defect=defect, context=ctx)


def orbit_defect(traj: Trajectory) -> float:
    """Worst radius drift: max over steps and spins of | |w_i(t)| - |w_i(0)| |."""
    if len(traj) == 0:
        raise ConfigurationError("orbit_defect requires a nonempty trajectory")
    return float(np.max(np.abs(traj.norms - traj.norms[0])))


def energy_drift(traj: Trajectory, model: HamiltonianModel) -> tuple[float, float]:
    """Max |H(t) - H(0)| along the trajectory and the linear drift rate.

    The trend is the least-squares slope of H(t) over time; for a method
    without secular energy growth it is orders of magnitude below
    max_drift / t_final.
    """
    if len(traj) == 0:
        raise ConfigurationError("energy_drift requires a nonempty trajectory")
    energies = np.array([model.value_fn(state) for state in traj.states])
    deviation = energies - energies[0]
    max_drift = float(np.max(np.abs(deviation)))
    trend = float(np.polyfit(traj.times, deviation, 1)[0]) if len(traj) > 1 else 0.0
    return max_drift, trend


def convergence_order(model: HamiltonianModel, w0, spec: StepperSpec,
                      reference: Callable[[np.ndarray, float], np.ndarray],
                      dts: Sequence[float], total_time: float = 1.0) -> ConvergenceReport:
    """Fit the global-error order against a reference flow.

    For each dt the model is integrated to ``total_time`` (dt is snapped so
    the horizon is hit exactly) and compared with ``reference(w0, t)``.
    Returns the least-squares slope of log error against log dt; a
    non-monotone error sequence is flagged rather than hidden.
    """
    w0arr = as_spin_array(w0)
    errors = []
    used_dts = []
    for dt in dts:
        steps = max(1, round(total_time / dt))
        actual_dt = total_time / steps
        traj = run_trajectory(model, w0arr, replace(spec, dt=actual_dt), steps)
        exact = reference(w0arr, total_time)
        errors.append(float(np.max(np.abs(traj.states[-1] - exact))))
        used_dts.append(actual_dt)
    errors_arr = np.array(errors)
    dts_arr = np.array(used_dts)
    order = np.argsort(dts_arr)[::-1]
    monotone = bool(np.all(np.diff(errors_arr[order]) < 0)) and bool(np.all(errors_arr > 0))
    slope = float(np.polyfit(np.log(dts_arr), np.log(errors_arr), 1)[0]) if np.all(errors_arr > 0) else float("nan")
    return ConvergenceReport(dts=dts_arr, errors=errors_arr, slope=slope, monotone=monotone)


def intertwining_defect(upper_step, lower_step, projection, points) -> float:
    """max over points z of |projection(upper_step(z)) - lower_step(projection(z))|."""
    defect = 0.0
    for z in points:
        down_then_step = lower_step(projection(z))
        step_then_down = projection(upper_step(z))
        defect = max(defect, float(np.max(np.abs(np.asarray(step_then_down) - np.asarray(down_then_step)))))
    return defect


def equivariance_defect(model: HamiltonianModel, spec: StepperSpec, rotation: np.ndarray, w) -> float:
    """|step(R w; H o R^-1) - R step(w; H)| for a common rotation R."""
    R = np.asarray(rotation, dtype=float)
    warr = as_spin_array(w)
    step_fn = make_stepper(model, spec)
    step_rot = make_stepper(rotate_model(model, R), spec)
    left = step_rot(warr @ R.T)
    right = step_fn(warr) @ R.T
    return float(np.max(np.abs(left - right)))


# ---------------------------------------------------------------------------
# Reference flows and rotation utilities
# ---------------------------------------------------------------------------


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` by ``angle``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly random rotation from a normalized Gaussian quaternion."""
    q = rng.normal(size=4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
        ]
    )


def field_reference_flow(b) -> Callable[[np.ndarray, float], np.ndarray]:
    """Closed-form flow of dw/dt = w x B: rotation about B by angle -|B| t."""
    barr = np.asarray(b, dtype=float)
    speed = np.linalg.norm(barr)

    def flow(w0: np.ndarray, t: float) -> np.ndarray:
        R = rotation_matrix(barr, -speed * t)
        return as_spin_array(w0) @ R.T

    return flow
