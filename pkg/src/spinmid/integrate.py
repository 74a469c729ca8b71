"""One-step midpoint methods and the trajectory driver.

Five methods share one implicit-solve skeleton; they differ only in where the
vector field is evaluated between the current state ``w`` and the unknown
state ``W``:

  classical           chordal midpoint (w + W) / 2 in the ambient space
  spherical           chordal midpoint projected to the unit spheres
  extended_spherical  chordal midpoint rescaled to the geometric radius mean
  collective          classical midpoint upstairs in quaternion space,
                      projected back through the Hopf map
  riemannian          geodesic midpoint for a chosen metric (euclidean,
                      round_sphere, or the 1/|w|-scaled metric)

All solves run in ambient flat coordinates; staying on the spheres is a
consequence of the schemes, never a projection step, so conservation tests
measure the methods themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import (
    ANTIPODAL_EPSILON,
    HamiltonianModel,
    SpinConfiguration,
    Trajectory,
    _gamma,
    _unit,
    as_spin_array,
    cross3,
    spin_norms,
)
from .errors import (
    AntipodalError,
    ConfigurationError,
    GeometryError,
    SingularRayError,
    StepError,
    TrajectoryError,
)
from .quat import hopf, hopf_section, hopf_tangent, phase_align, collective_model, quat_hamiltonian_vf
from .solve import SolveReport, SolverSettings, blockwise_max_norm, solve_fixed_point, solve_newton

METHODS = ("classical", "spherical", "extended_spherical", "collective", "riemannian")
METRICS = ("euclidean", "round_sphere", "scaled")

# Reject steps that rotate any spin by more than this chordal angle; all the
# midpoint constructions are injective well inside it.
MAX_STEP_ANGLE = np.pi / 2


@dataclass(frozen=True)
class StepperSpec:
    """Method selection, time step, and solver settings for one-step maps.

    ``dt`` may be negative so that time-reversibility is directly testable;
    the CLI restricts configured runs to dt > 0.
    """

    method: str
    dt: float
    metric: Optional[str] = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown stepper method '{self.method}'")
        if self.dt == 0 or not np.isfinite(self.dt):
            raise ConfigurationError("dt must be nonzero and finite")
        if self.method == "riemannian":
            if self.metric not in METRICS:
                raise ConfigurationError(f"riemannian method requires metric in {METRICS}")
        elif self.metric is not None:
            raise ConfigurationError("metric is only meaningful for the riemannian method")


def _run_solver(update, residual, x0: np.ndarray, spec: StepperSpec, block: int) -> SolveReport:
    norm = blockwise_max_norm(block)
    if spec.solver.method == "newton":
        report = solve_newton(residual, x0, spec.solver, norm)
    else:
        report = solve_fixed_point(update, x0, spec.solver, norm)
    if not report.converged:
        raise StepError(
            f"implicit solve did not converge: residual {report.residual:.3e} "
            f"after {report.iterations} iterations (tol {spec.solver.tol:.1e})"
        )
    return report


def _check_step_angle(warr: np.ndarray, Warr: np.ndarray) -> None:
    cosines = np.sum(_unit(warr) * _unit(Warr), axis=1)
    if np.any(cosines < np.cos(MAX_STEP_ANGLE)):
        raise GeometryError(
            "step rotates a spin beyond the quarter-turn guard; reduce dt to stay "
            "inside the midpoint constructions' injectivity domain"
        )


def classical_midpoint_step(X: Callable[[np.ndarray], np.ndarray], x, spec: StepperSpec):
    """Implicit midpoint rule (Z - z)/dt = X((Z + z)/2) on a flat space.

    ``x`` may be any float array; the result has the same shape.  Returns the
    new point only; see ``make_stepper`` for diagnostics access.
    """
    arr = np.asarray(x, dtype=float)
    new, _ = _classical_arrays(X, arr, spec)
    return new


def _classical_arrays(X, arr: np.ndarray, spec: StepperSpec, block: Optional[int] = None):
    dt = spec.dt

    def update(Z):
        return arr + dt * np.asarray(X(0.5 * (arr + Z)))

    def residual(Z):
        return Z - update(Z)

    report = _run_solver(update, residual, arr, spec, block or arr.shape[-1])
    return report.x, report


def _spin_field(model: HamiltonianModel) -> Callable[[np.ndarray], np.ndarray]:
    return lambda arr: cross3(arr, model.gradient_fn(arr))


def _ray_field(model: HamiltonianModel) -> Callable[[np.ndarray], np.ndarray]:
    def X(arr):
        u = _unit(arr)
        return cross3(u, model.gradient_fn(u))

    return X


def _spherical_arrays(model: HamiltonianModel, warr: np.ndarray, spec: StepperSpec):
    norms = spin_norms(warr)
    if np.max(np.abs(norms - 1.0)) > 1e-6:
        raise ConfigurationError("spherical midpoint requires unit spins; use extended_spherical for other radii")
    try:
        Warr, report = _classical_arrays(_ray_field(model), warr, spec)
    except SingularRayError as exc:
        raise AntipodalError(f"chordal midpoint crossed the origin during the solve: {exc}") from exc
    _check_step_angle(warr, Warr)
    # the scheme preserves each |w_i| exactly at the root, so unit input
    # stays unit up to the solve tolerance
    if np.max(np.abs(spin_norms(Warr) - norms)) > 10.0 * max(spec.solver.tol, 1e-15):
        raise StepError("spherical step drifted off the spheres beyond 10x solver tol")
    return Warr, report


def _extended_arrays(model: HamiltonianModel, warr: np.ndarray, spec: StepperSpec):
    X = _spin_field(model)
    dt = spec.dt

    def update(W):
        return warr + dt * X(_gamma(warr, W))

    def residual(W):
        return W - update(W)

    report = _run_solver(update, residual, warr, spec, 3)
    _check_step_angle(warr, report.x)
    return report.x, report


def _collective_arrays(model: HamiltonianModel, warr: np.ndarray, spec: StepperSpec):
    if not model.ray_constant:
        raise ConfigurationError(
            "collective midpoint requires a ray-constant model; wrap it with ray_extension first"
        )
    F = collective_model(model)
    z = hopf_section(warr)
    Z, report = _classical_arrays(lambda mq: quat_hamiltonian_vf(F, mq), z, spec, block=4)
    Warr = hopf(Z)
    _check_step_angle(warr, Warr)
    return Warr, report


def geodesic_midpoint_scaled(w, W):
    """Geodesic midpoint and unit-interval midpoint velocity for the metric
    g_w(u, v) = sum_i u_i . v_i / |w_i|.

    Constructed through horizontal straight-line lifts: lift both endpoints,
    align the fibre phases so the connecting segment is horizontal, and push
    the flat midpoint and segment velocity back down.
    """
    warr, Warr = as_spin_array(w), as_spin_array(W)
    if warr.shape != Warr.shape:
        raise ConfigurationError("geodesic_midpoint_scaled requires matching shapes")
    z = hopf_section(warr)
    Z = phase_align(z, hopf_section(Warr))
    mq = 0.5 * (z + Z)
    return hopf(mq), hopf_tangent(mq, Z - z)


def _round_sphere_midpoint(warr: np.ndarray, Warr: np.ndarray, radii: np.ndarray):
    """Great-circle midpoint and velocity factor for per-spin spheres."""
    u, U = _unit(warr), _unit(Warr)
    s = u + U
    s_norms = spin_norms(s)
    if np.any(s_norms <= ANTIPODAL_EPSILON):
        raise GeometryError("great-circle midpoint undefined for antipodal spins")
    mid = s * (radii / s_norms)[:, None]
    cos_theta = np.clip(np.sum(u * U, axis=1), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    half = 0.5 * theta
    # theta / (2 sin(theta/2)) -> 1 as theta -> 0
    factor = np.where(theta > 1e-9, theta / np.maximum(2.0 * np.sin(half), 1e-300), 1.0 + theta * theta / 24.0)
    return mid, factor


def _riemannian_arrays(metric: str, X, warr: np.ndarray, spec: StepperSpec):
    dt = spec.dt
    if metric == "euclidean":
        # straight-line geodesics: identical to the classical midpoint rule
        Warr, report = _classical_arrays(X, warr, spec)
        return Warr, report

    if metric == "round_sphere":
        radii = spin_norms(warr)

        def update(W):
            mid, factor = _round_sphere_midpoint(warr, W, radii)
            return warr + (dt / factor)[:, None] * np.asarray(X(mid))

        def residual(W):
            mid, factor = _round_sphere_midpoint(warr, W, radii)
            return factor[:, None] * (W - warr) - dt * np.asarray(X(mid))

        report = _run_solver(update, residual, warr, spec, 3)
        _check_step_angle(warr, report.x)
        return report.x, report

    if metric == "scaled":

        def update(W):
            mid, vel = geodesic_midpoint_scaled(warr, W)
            return W + dt * np.asarray(X(mid)) - vel

        def residual(W):
            mid, vel = geodesic_midpoint_scaled(warr, W)
            return vel - dt * np.asarray(X(mid))

        report = _run_solver(update, residual, warr, spec, 3)
        _check_step_angle(warr, report.x)
        return report.x, report

    raise ConfigurationError(f"unknown metric '{metric}'")


def riemannian_midpoint_step(metric: str, X, w, spec: StepperSpec) -> SpinConfiguration:
    """Riemannian midpoint rule: geodesic-midpoint velocity = dt * X(midpoint)."""
    arr, _ = _riemannian_arrays(metric, X, as_spin_array(w), spec)
    return SpinConfiguration(arr)


def spherical_midpoint_step(model: HamiltonianModel, w, spec: StepperSpec) -> SpinConfiguration:
    """Midpoint rule with the chordal midpoint projected to the unit spheres."""
    arr, _ = _spherical_arrays(model, as_spin_array(w), spec)
    return SpinConfiguration(arr)


def extended_spherical_midpoint_step(model: HamiltonianModel, w, spec: StepperSpec) -> SpinConfiguration:
    """Midpoint rule with the geometric-mean chordal midpoint; preserves every |w_i|."""
    arr, _ = _extended_arrays(model, as_spin_array(w), spec)
    return SpinConfiguration(arr)


def collective_midpoint_step(model: HamiltonianModel, w, spec: StepperSpec) -> SpinConfiguration:
    """Classical midpoint for the lifted Hamiltonian in quaternion space,
    projected back down through the Hopf map."""
    arr, _ = _collective_arrays(model, as_spin_array(w), spec)
    return SpinConfiguration(arr)


def _step_arrays(model: HamiltonianModel, warr: np.ndarray, spec: StepperSpec):
    if spec.method == "classical":
        return _classical_arrays(_spin_field(model), warr, spec)
    if spec.method == "spherical":
        return _spherical_arrays(model, warr, spec)
    if spec.method == "extended_spherical":
        return _extended_arrays(model, warr, spec)
    if spec.method == "collective":
        return _collective_arrays(model, warr, spec)
    if spec.method == "riemannian":
        return _riemannian_arrays(spec.metric, _spin_field(model), warr, spec)
    raise ConfigurationError(f"unknown stepper method '{spec.method}'")


def step(model: HamiltonianModel, w, spec: StepperSpec) -> SpinConfiguration:
    """Apply one step of the method selected by ``spec``."""
    arr, _ = _step_arrays(model, as_spin_array(w), spec)
    return SpinConfiguration(arr)


def make_stepper(model: HamiltonianModel, spec: StepperSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Array-in, array-out one-step map for the given model and spec."""

    def step_fn(arr: np.ndarray) -> np.ndarray:
        new, _ = _step_arrays(model, as_spin_array(arr), spec)
        return new

    return step_fn


def run_trajectory(model: HamiltonianModel, w0, spec: StepperSpec, steps: int) -> Trajectory:
    """Apply the chosen stepper ``steps`` times, recording diagnostics.

    On a step failure the partial trajectory is attached to the raised
    TrajectoryError.
    """
    if steps < 0:
        raise ConfigurationError("steps must be >= 0")
    arr = as_spin_array(w0).copy()
    n = arr.shape[0]
    m = steps + 1
    states = np.empty((m, n, 3))
    energies = np.empty(m)
    norms = np.empty((m, n))
    iters = np.zeros(m, dtype=int)
    residuals = np.zeros(m)
    states[0] = arr
    energies[0] = model.value_fn(arr)
    norms[0] = spin_norms(arr)

    def partial(k: int) -> Trajectory:
        times = spec.dt * np.arange(k, dtype=float)
        return Trajectory(
            times=times,
            states=states[:k].copy(),
            energies=energies[:k].copy(),
            norms=norms[:k].copy(),
            iterations=iters[:k].copy(),
            residuals=residuals[:k].copy(),
        )

    for k in range(1, m):
        try:
            arr, report = _step_arrays(model, arr, spec)
        except StepError as exc:
            raise TrajectoryError(k, exc, partial(k)) from exc
        except (AntipodalError, GeometryError, SingularRayError) as exc:
            raise TrajectoryError(k, exc, partial(k)) from exc
        states[k] = arr
        energies[k] = model.value_fn(arr)
        norms[k] = spin_norms(arr)
        iters[k] = report.iterations
        residuals[k] = report.residual

    return Trajectory(
        times=spec.dt * np.arange(m, dtype=float),
        states=states,
        energies=energies,
        norms=norms,
        iterations=iters,
        residuals=residuals,
    )
