"""Acceptance suite: every structural property the package promises, run at
its pinned tolerance.  One printed pass/fail line per criterion (run with
``pytest -s`` to see them all).
"""

import json

import numpy as np
import pytest

from spinmid.cli import main as cli_main
from spinmid.core import make_model, ray_extension
from spinmid.integrate import StepperSpec, classical_midpoint_step, make_stepper, run_trajectory
from spinmid.quat import QK, collective_model, hopf, hopf_section, qinv, qmul, quat_hamiltonian_vf
from spinmid.solve import SolverSettings
from spinmid.verify import (
    convergence_order,
    equivariance_defect,
    field_reference_flow,
    intertwining_defect,
    orbit_defect,
    random_rotation,
    symplectic_defect,
)

SEED = 20240801


def check(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def unit_spins(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def test_orbit_preservation_extended_midpoint():
    # extended spherical midpoint on mixed radii (1, 2, 3), rigid body
    # I = (1, 2, 3), dt = 0.1, 1e4 steps, solver tol 1e-12
    rng = np.random.default_rng(SEED)
    model = make_model("rigid_body", inertia=(1.0, 2.0, 3.0), n=3)
    w0 = unit_spins(rng, 3) * np.array([[1.0], [2.0], [3.0]])
    spec = StepperSpec("extended_spherical", 0.1, solver=SolverSettings(tol=1e-12))
    traj = run_trajectory(model, w0, spec, 10_000)
    defect = orbit_defect(traj)
    check("orbit preservation (extended midpoint)", defect <= 1e-9, f"defect {defect:.3e} <= 1e-9")


def test_symplecticity_and_round_sphere_negative():
    # spherical midpoint symplectic to measurement noise at 20 random states;
    # the great-circle (round-sphere) midpoint misses by >= 100x at each
    rng = np.random.default_rng(SEED + 1)
    model = make_model("rigid_body", inertia=(1.0, 2.0, 3.0))
    sph = make_stepper(model, StepperSpec("spherical", 0.1))
    rnd = make_stepper(model, StepperSpec("riemannian", 0.1, metric="round_sphere"))
    worst_sph, worst_ratio = 0.0, np.inf
    for _ in range(20):
        w = unit_spins(rng, 1)
        ds = symplectic_defect(sph, w, fd_step=1e-5).defect
        dr = symplectic_defect(rnd, w, fd_step=1e-5).defect
        worst_sph = max(worst_sph, ds)
        worst_ratio = min(worst_ratio, dr / ds)
    check("symplecticity (spherical midpoint)", worst_sph <= 1e-6, f"max defect {worst_sph:.3e} <= 1e-6")
    check(
        "round-sphere midpoint is not symplectic",
        worst_ratio >= 100.0,
        f"min defect ratio {worst_ratio:.1f} >= 100",
    )


def test_collective_intertwines_extended():
    # collective vs extended spherical step, chain n=4, 100 random unit
    # states, dt in {0.05, 0.1}
    rng = np.random.default_rng(SEED + 2)
    model = ray_extension(make_model("chain", n=4))
    worst = 0.0
    for dt in (0.05, 0.1):
        coll = make_stepper(model, StepperSpec("collective", dt))
        ext = make_stepper(model, StepperSpec("extended_spherical", dt))
        for _ in range(100):
            w = unit_spins(rng, 4)
            worst = max(worst, float(np.max(np.abs(coll(w) - ext(w)))))
    check("collective/extended intertwining", worst <= 1e-10, f"max deviation {worst:.3e} <= 1e-10")


def test_scaled_metric_midpoint_equals_extended():
    # scaled-metric geodesic midpoint vs extended spherical midpoint for the
    # ray-constant chain extension at 50 random states
    rng = np.random.default_rng(SEED + 3)
    model = ray_extension(make_model("chain", n=4))
    scaled = make_stepper(model, StepperSpec("riemannian", 0.1, metric="scaled"))
    ext = make_stepper(model, StepperSpec("extended_spherical", 0.1))
    worst = 0.0
    for _ in range(50):
        w = unit_spins(rng, 4) * rng.uniform(0.5, 2.0, size=(4, 1))
        worst = max(worst, float(np.max(np.abs(scaled(w) - ext(w)))))
    check("scaled-metric/extended equality", worst <= 1e-8, f"max deviation {worst:.3e} <= 1e-8")


def test_double_cover_intertwining():
    # componentwise squaring carries the midpoint map for a circle-tangent
    # field onto the midpoint map for its ray-constant pushforward
    rng = np.random.default_rng(SEED + 4)

    def c2r(z):
        return np.stack([z.real, z.imag], axis=-1)

    def r2c(a):
        return a[..., 0] + 1j * a[..., 1]

    def X_complex(w):
        u = w / np.abs(w)
        return 1j * u * (1.0 + 0.3 * np.real(np.roll(u, -1)))

    def Y_complex(z):
        return X_complex(z * z) / (2.0 * z)

    spec = StepperSpec("classical", 0.1, solver=SolverSettings(tol=1e-13, max_iter=200))
    upper = lambda a: classical_midpoint_step(lambda v: c2r(Y_complex(r2c(v))), a, spec)
    lower = lambda a: classical_midpoint_step(lambda v: c2r(X_complex(r2c(v))), a, spec)
    points = []
    for _ in range(50):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        z *= rng.uniform(0.6, 1.5, size=3) / np.abs(z)
        points.append(c2r(z))
    defect = intertwining_defect(upper, lower, lambda a: c2r(r2c(a) ** 2), points)
    check("double-cover intertwining", defect <= 1e-10, f"defect {defect:.3e} <= 1e-10")


def test_second_order_convergence_all_steppers():
    # global error against the closed-form rotation of the field model
    dts = [0.2, 0.1, 0.05, 0.025]
    w0 = np.array([[1.0, 0.0, 0.0]])
    reference = field_reference_flow([0.0, 0.0, 1.0])
    raw = make_model("field", b=(0.0, 0.0, 1.0))
    ray = ray_extension(raw)
    cases = [
        ("spherical", StepperSpec("spherical", 0.1), raw),
        ("extended", StepperSpec("extended_spherical", 0.1), raw),
        ("collective", StepperSpec("collective", 0.1), ray),
        ("scaled-riemannian", StepperSpec("riemannian", 0.1, metric="scaled"), ray),
    ]
    for name, spec, model in cases:
        report = convergence_order(model, w0, spec, reference, dts, total_time=1.0)
        ok = report.monotone and 1.9 <= report.slope <= 2.1
        check(f"second order ({name})", ok, f"slope {report.slope:.3f} in [1.9, 2.1]")


@pytest.mark.slow
def test_bounded_energy_drift_long_run():
    # chain n=10, dt=0.1, 1e5 steps: no secular growth, and the drift
    # amplitude scales as dt^2 over a 3-point sweep
    rng = np.random.default_rng(SEED + 5)
    model = make_model("chain", n=10)
    w0 = unit_spins(rng, 10)
    traj = run_trajectory(model, w0, StepperSpec("spherical", 0.1), 100_000)
    dev = np.abs(traj.energies - traj.energies[0])
    half = len(dev) // 2
    first, second = float(np.max(dev[:half])), float(np.max(dev[half:]))
    check("bounded energy drift (1e5 steps)", second <= 2.0 * first, f"halves {first:.3e} / {second:.3e}")

    drifts = []
    sweep = [0.2, 0.1, 0.05]
    for dt in sweep:
        tr = run_trajectory(model, w0, StepperSpec("spherical", dt), round(200.0 / dt))
        drifts.append(float(np.max(np.abs(tr.energies - tr.energies[0]))))
    slope = float(np.polyfit(np.log(sweep), np.log(drifts), 1)[0])
    # bracket pinned from the initial measurement run (max-over-window noise)
    check("energy drift scales as dt^2", 1.8 <= slope <= 2.2, f"sweep slope {slope:.3f} in [1.8, 2.2]")


def test_equivariance_under_rotations():
    rng = np.random.default_rng(SEED + 6)
    model = make_model("rigid_body", inertia=(1.0, 2.0, 3.0), n=2)
    for name, spec in [
        ("spherical", StepperSpec("spherical", 0.1)),
        ("round-sphere riemannian", StepperSpec("riemannian", 0.1, metric="round_sphere")),
        ("scaled riemannian", StepperSpec("riemannian", 0.1, metric="scaled")),
    ]:
        worst = 0.0
        for _ in range(5):
            worst = max(worst, equivariance_defect(model, spec, random_rotation(rng), unit_spins(rng, 2)))
        check(f"equivariance ({name})", worst <= 1e-10, f"max defect {worst:.3e} <= 1e-10")


def test_lifted_field_tangency_and_orthogonality():
    # ray-constant lifts are tangent to 3-spheres and orthogonal to the
    # fibres; a non-ray-constant energy violates orthogonality outright
    rng = np.random.default_rng(SEED + 7)
    ray = collective_model(ray_extension(make_model("chain", n=4)))
    raw = collective_model(make_model("chain", n=4))
    worst_tan = worst_orth = 0.0
    violation = np.inf
    for _ in range(100):
        w = unit_spins(rng, 4) * rng.uniform(0.5, 2.0, size=(4, 1))
        z = hopf_section(w)
        theta = rng.uniform(0, 2 * np.pi, size=4)
        ph = np.zeros((4, 4))
        ph[:, 0], ph[:, 3] = np.cos(theta), np.sin(theta)
        z = qmul(z, ph)
        t = qmul(qinv(z), quat_hamiltonian_vf(ray, z))
        worst_tan = max(worst_tan, float(np.max(np.abs(t[:, 0]))))
        worst_orth = max(worst_orth, float(np.max(np.abs(qmul(np.broadcast_to(QK, t.shape), t)[:, 0]))))
        tr = qmul(qinv(z), quat_hamiltonian_vf(raw, z))
        violation = min(violation, float(np.max(np.abs(qmul(np.broadcast_to(QK, tr.shape), tr)[:, 0]))))
    check("lifted field sphere tangency", worst_tan <= 1e-10, f"residual {worst_tan:.3e} <= 1e-10")
    check("lifted field fibre orthogonality", worst_orth <= 1e-10, f"residual {worst_orth:.3e} <= 1e-10")
    check(
        "non-ray-constant lift violates orthogonality",
        violation >= 1e-2,
        f"min residual {violation:.3e} >= 1e-2",
    )


def test_cli_determinism(tmp_path, capsys):
    # any CLI command repeated with identical config + seed reproduces every
    # output file byte for byte
    base = {
        "model": {"kind": "chain", "params": {"n": 4}, "ray_extension": True},
        "initial_state": {"random": {}},
        "stepper": {"method": "spherical", "dt": 0.1},
        "seed": 7,
    }
    commands = {
        "simulate": {**base, "steps": 50},
        "verify": {**base, "steps": 200, "checks": ["symplectic", "orbit", "energy", "intertwine", "equivariance"]},
        "converge": {
            **base,
            "model": {"kind": "field", "params": {"b": [0.0, 0.0, 1.0]}},
            "initial_state": {"spins": [[1.0, 0.0, 0.0]]},
            "dts": [0.2, 0.1, 0.05],
            "total_time": 1.0,
        },
        "compare": {**base, "steps": 20, "methods": ["spherical", "collective", "riemannian:scaled"]},
    }
    for command, cfg in commands.items():
        outdir = tmp_path / command
        cfg = {**cfg, "outputs": str(outdir)}
        cfg_path = tmp_path / f"{command}.json"
        cfg_path.write_text(json.dumps(cfg))
        assert cli_main([command, "--config", str(cfg_path)]) == 0
        first = {p.name: p.read_bytes() for p in sorted(outdir.iterdir())}
        assert cli_main([command, "--config", str(cfg_path)]) == 0
        second = {p.name: p.read_bytes() for p in sorted(outdir.iterdir())}
        capsys.readouterr()
        with capsys.disabled():
            check(f"determinism ({command})", first == second, f"{len(first)} files byte-identical")
