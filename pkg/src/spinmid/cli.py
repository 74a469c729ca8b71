"""Command-line entry point: config validation, experiment orchestration,
and bit-stable serialization.

Subcommands::

    spinmid simulate --config cfg.json [--out DIR] [--seed N]
    spinmid verify   --config cfg.json [--out DIR] [--seed N]
    spinmid converge --config cfg.json [--out DIR] [--seed N]
    spinmid compare  --config cfg.json [--out DIR] [--seed N]

Configs are strict JSON: unknown keys are errors.  All randomness derives
from the seed, so identical config + seed reproduces every output byte for
byte.  stdout carries a single JSON summary; diagnostics go to stderr.
The file schemas are documented in the README.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import HamiltonianModel, Trajectory, make_model, ray_extension, spin_norms
from .errors import ConfigurationError, SpinSystemError, StepError, TrajectoryError
from .integrate import METHODS, METRICS, StepperSpec, make_stepper, run_trajectory
from .solve import SolverSettings
from .verify import (
    convergence_order,
    energy_drift,
    equivariance_defect,
    field_reference_flow,
    orbit_defect,
    random_rotation,
    symplectic_defect,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_STEP = 3

CHECK_NAMES = ("symplectic", "orbit", "energy", "intertwine", "equivariance")

# Pass thresholds for `spinmid verify`, pinned from the certification runs in
# the test suite.  "energy" is a ratio bound (second-half max drift over
# first-half max drift); the others bound the defect itself.
CHECK_THRESHOLDS = {
    "symplectic": 1e-6,
    "orbit": 1e-9,
    "energy": 2.0,
    "intertwine": 1e-10,
    "equivariance": 1e-10,
}

SYMPLECTIC_FD_STEP = 1e-5
INTERTWINE_SAMPLES = 10

_MODEL_KEYS = {"kind", "params", "ray_extension"}
_SOLVER_KEYS = {"method", "tol", "max_iter", "fd_step"}
_STEPPER_KEYS = {"method", "metric", "dt", "solver"}
_COMMON_KEYS = {"model", "initial_state", "stepper", "outputs", "seed"}
_COMMAND_KEYS = {
    "simulate": _COMMON_KEYS | {"steps", "csv_format"},
    "verify": _COMMON_KEYS | {"steps", "checks"},
    "converge": _COMMON_KEYS | {"dts", "total_time"},
    "compare": _COMMON_KEYS | {"steps", "methods"},
}

PRESETS = ("aligned", "tilted", "wave")


def _fail(msg: str) -> ConfigurationError:
    return ConfigurationError(msg)


def _require_keys(obj: dict, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise _fail(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise _fail(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise _fail(f"missing keys in {where}: {sorted(missing)}")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise _fail(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _fail(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise _fail("config root must be a JSON object")
    return cfg


def build_model(model_cfg: dict) -> HamiltonianModel:
    _require_keys(model_cfg, _MODEL_KEYS, {"kind"}, "model")
    params = model_cfg.get("params", {})
    if not isinstance(params, dict):
        raise _fail("model.params must be an object")
    model = make_model(model_cfg["kind"], **params)
    if model_cfg.get("ray_extension", False):
        model = ray_extension(model)
    return model


def build_stepper_spec(stepper_cfg: dict) -> StepperSpec:
    _require_keys(stepper_cfg, _STEPPER_KEYS, {"method", "dt"}, "stepper")
    solver_cfg = stepper_cfg.get("solver", {})
    _require_keys(solver_cfg, _SOLVER_KEYS, set(), "stepper.solver")
    solver = SolverSettings(**solver_cfg)
    dt = float(stepper_cfg["dt"])
    if dt <= 0:
        raise _fail("stepper.dt must be positive")
    return StepperSpec(
        method=stepper_cfg["method"],
        dt=dt,
        metric=stepper_cfg.get("metric"),
        solver=solver,
    )


def build_initial_state(state_cfg: dict, model: HamiltonianModel, rng: np.random.Generator) -> np.ndarray:
    _require_keys(state_cfg, {"spins", "preset", "random"}, set(), "initial_state")
    given = [k for k in ("spins", "preset", "random") if k in state_cfg]
    if len(given) != 1:
        raise _fail("initial_state must contain exactly one of: spins, preset, random")
    n = model.n

    if "spins" in state_cfg:
        arr = np.asarray(state_cfg["spins"], dtype=float)
        if arr.shape != (n, 3):
            raise _fail(f"initial_state.spins must have shape ({n}, 3)")
        return arr

    if "preset" in state_cfg:
        name = state_cfg["preset"]
        if name == "aligned":
            arr = np.tile([0.0, 0.0, 1.0], (n, 1))
        elif name == "tilted":
            arr = np.tile([np.sin(0.3), 0.0, np.cos(0.3)], (n, 1))
        elif name == "wave":
            phases = 2.0 * np.pi * np.arange(n) / n
            theta = 0.5
            arr = np.stack(
                [np.sin(theta) * np.cos(phases), np.sin(theta) * np.sin(phases), np.full(n, np.cos(theta))],
                axis=1,
            )
        else:
            raise _fail(f"unknown preset '{name}'; available: {PRESETS}")
        return arr

    rand_cfg = state_cfg["random"]
    _require_keys(rand_cfg, {"radii"}, set(), "initial_state.random")
    directions = rng.normal(size=(n, 3))
    directions /= spin_norms(directions)[:, None]
    radii = np.broadcast_to(np.asarray(rand_cfg.get("radii", 1.0), dtype=float), (n,))
    if np.any(radii <= 0):
        raise _fail("initial_state.random.radii must be positive")
    return directions * radii[:, None]


def config_hash(effective: dict) -> str:
    """Hash of the experiment identity: everything except the output location."""
    payload = {k: v for k, v in effective.items() if k != "outputs"}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path: Path, traj: Trajectory, cfg_hash: str, fmt: str = "long") -> None:
    lines = [f"# config_hash={cfg_hash}"]
    if fmt == "long":
        lines.append("step,time,i,wx,wy,wz,H,norm_i,iters,residual")
        for k in range(len(traj)):
            t, H = traj.times[k], traj.energies[k]
            it, res = traj.iterations[k], traj.residuals[k]
            for i in range(traj.n_spins):
                w = traj.states[k, i]
                lines.append(
                    f"{k},{_fmt(t)},{i},{_fmt(w[0])},{_fmt(w[1])},{_fmt(w[2])},"
                    f"{_fmt(H)},{_fmt(traj.norms[k, i])},{it},{_fmt(res)}"
                )
    elif fmt == "wide":
        cols = ["step", "time", "H", "iters", "residual"]
        for i in range(traj.n_spins):
            cols += [f"w{i}x", f"w{i}y", f"w{i}z"]
        lines.append(",".join(cols))
        for k in range(len(traj)):
            row = [str(k), _fmt(traj.times[k]), _fmt(traj.energies[k]), str(traj.iterations[k]), _fmt(traj.residuals[k])]
            row += [_fmt(v) for v in traj.states[k].ravel()]
            lines.append(",".join(row))
    else:
        raise _fail(f"unknown csv_format '{fmt}' (expected 'long' or 'wide')")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_manifest(outdir: Path, command: str, effective: dict, cfg_hash: str, outputs: dict, status: str) -> Path:
    manifest = {
        "command": command,
        "config": effective,
        "config_hash": cfg_hash,
        "outputs": {name: {"path": str(p), "sha256": file_sha256(p)} for name, p in outputs.items()},
        "status": status,
        "versions": {
            "numpy": np.__version__,
            "python": platform.python_version(),
            "spinmid": __version__,
        },
    }
    path = outdir / "manifest.json"
    write_json(path, manifest)
    return path


def _max_workers(njobs: int) -> int:
    cap = os.environ.get("SPINMID_THREADS")
    if cap is not None:
        try:
            cap_n = int(cap)
        except ValueError as exc:
            raise _fail("SPINMID_THREADS must be an integer") from exc
        if cap_n < 1:
            raise _fail("SPINMID_THREADS must be >= 1")
        return min(njobs, cap_n)
    return min(njobs, os.cpu_count() or 1)


def _run_jobs(jobs):
    """Run callables concurrently, returning results in submission order."""
    if len(jobs) == 1:
        return [jobs[0]()]
    with ThreadPoolExecutor(max_workers=_max_workers(len(jobs))) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(effective: dict, outdir: Path) -> dict:
    _require_keys(effective, _COMMAND_KEYS["simulate"], {"model", "initial_state", "stepper", "steps", "seed"}, "config")
    cfg_hash = config_hash(effective)
    model = build_model(effective["model"])
    spec = build_stepper_spec(effective["stepper"])
    rng = np.random.default_rng(int(effective["seed"]))
    w0 = build_initial_state(effective["initial_state"], model, rng)
    steps = int(effective["steps"])
    if steps < 0:
        raise _fail("steps must be >= 0")
    fmt = effective.get("csv_format", "long")

    csv_path = outdir / "trajectory.csv"
    try:
        traj = run_trajectory(model, w0, spec, steps)
    except TrajectoryError as exc:
        write_trajectory_csv(csv_path, exc.partial, cfg_hash, fmt)
        write_manifest(outdir, "simulate", effective, cfg_hash, {"trajectory": csv_path}, "step_failure")
        raise

    write_trajectory_csv(csv_path, traj, cfg_hash, fmt)
    manifest_path = write_manifest(outdir, "simulate", effective, cfg_hash, {"trajectory": csv_path}, "ok")
    max_drift, trend = energy_drift(traj, model)
    return {
        "command": "simulate",
        "config_hash": cfg_hash,
        "files": {"manifest": str(manifest_path), "trajectory": str(csv_path)},
        "summary": {
            "steps": steps,
            "final_energy": traj.energies[-1],
            "max_energy_drift": max_drift,
            "max_orbit_defect": orbit_defect(traj),
            "mean_solver_iterations": float(np.mean(traj.iterations[1:])) if steps else 0.0,
        },
    }


def _check_intertwine(model, spec, w0, rng):
    if not model.ray_constant:
        raise _fail("intertwine check requires a ray-constant model (set model.ray_extension)")
    collective = make_stepper(model, replace(spec, method="collective", metric=None))
    extended = make_stepper(model, replace(spec, method="extended_spherical", metric=None))
    defect = 0.0
    radii = spin_norms(w0)
    states = [w0]
    for _ in range(INTERTWINE_SAMPLES - 1):
        directions = rng.normal(size=w0.shape)
        directions /= spin_norms(directions)[:, None]
        states.append(directions * radii[:, None])
    for state in states:
        defect = max(defect, float(np.max(np.abs(collective(state) - extended(state)))))
    return defect, {"samples": len(states)}


def cmd_verify(effective: dict, outdir: Path) -> dict:
    _require_keys(effective, _COMMAND_KEYS["verify"], {"model", "initial_state", "stepper", "checks", "seed"}, "config")
    cfg_hash = config_hash(effective)
    checks = effective["checks"]
    if not isinstance(checks, list):
        raise _fail("checks must be a list of check names")
    for name in checks:
        if name not in CHECK_NAMES:
            raise _fail(f"unknown check name '{name}'; available: {CHECK_NAMES}")
    model = build_model(effective["model"])
    spec = build_stepper_spec(effective["stepper"])
    rng = np.random.default_rng(int(effective["seed"]))
    w0 = build_initial_state(effective["initial_state"], model, rng)
    steps = int(effective.get("steps", 1000))

    outputs: dict[str, Path] = {}
    traj = None

    def trajectory():
        nonlocal traj
        if traj is None:
            traj = run_trajectory(model, w0, spec, steps)
            path = outdir / "trajectory.csv"
            write_trajectory_csv(path, traj, cfg_hash, "long")
            outputs["trajectory"] = path
        return traj

    records = []
    for name in checks:
        details: dict = {}
        if name == "symplectic":
            report = symplectic_defect(make_stepper(model, spec), w0, SYMPLECTIC_FD_STEP)
            defect = report.defect
            details = {"fd_step": SYMPLECTIC_FD_STEP}
        elif name == "orbit":
            defect = orbit_defect(trajectory())
            details = {"steps": steps}
        elif name == "energy":
            tr = trajectory()
            energies = tr.energies - tr.energies[0]
            half = len(energies) // 2
            first = float(np.max(np.abs(energies[:half])))
            second = float(np.max(np.abs(energies[half:])))
            defect = second / first if first > 0 else 0.0
            details = {"first_half_max": first, "second_half_max": second, "steps": steps}
        elif name == "intertwine":
            defect, details = _check_intertwine(model, spec, w0, rng)
        elif name == "equivariance":
            R = random_rotation(rng)
            defect = equivariance_defect(model, spec, R, w0)
            details = {"rotation": R.tolist()}
        threshold = CHECK_THRESHOLDS[name]
        records.append(
            {"name": name, "defect": defect, "threshold": threshold, "passed": bool(defect <= threshold), "details": details}
        )

    report_path = outdir / "report.json"
    payload = {
        "config_hash": cfg_hash,
        "checks": records,
        "trajectories": {name: {"path": str(p), "sha256": file_sha256(p)} for name, p in outputs.items()},
    }
    write_json(report_path, payload)
    outputs["report"] = report_path
    manifest_path = write_manifest(outdir, "verify", effective, cfg_hash, outputs, "ok")
    return {
        "command": "verify",
        "config_hash": cfg_hash,
        "files": {"manifest": str(manifest_path), "report": str(report_path)},
        "summary": {r["name"]: {"defect": r["defect"], "passed": r["passed"]} for r in records},
    }


def cmd_converge(effective: dict, outdir: Path) -> dict:
    _require_keys(
        effective, _COMMAND_KEYS["converge"], {"model", "initial_state", "stepper", "dts", "total_time", "seed"}, "config"
    )
    cfg_hash = config_hash(effective)
    dts = [float(d) for d in effective["dts"]]
    if len(dts) < 3:
        raise _fail("converge requires at least 3 dt values")
    if any(d <= 0 for d in dts):
        raise _fail("all dt values must be positive")
    total_time = float(effective["total_time"])
    if total_time <= 0:
        raise _fail("total_time must be positive")
    model = build_model(effective["model"])
    spec = build_stepper_spec(effective["stepper"])
    rng = np.random.default_rng(int(effective["seed"]))
    w0 = build_initial_state(effective["initial_state"], model, rng)

    if model.kind in ("field", "ray_field"):
        reference = field_reference_flow(model.params["b"])
        reference_kind = "closed_form_rotation"
    else:
        fine_dt = min(dts) / 100.0
        fine_steps = max(1, round(total_time / fine_dt))

        def reference(w0arr, t):
            fine = run_trajectory(model, w0arr, replace(spec, dt=t / fine_steps), fine_steps)
            return fine.states[-1]

        reference_kind = f"fine_run(dt={total_time / fine_steps:.3e})"

    report = convergence_order(model, w0, spec, reference, dts, total_time)

    csv_path = outdir / "convergence.csv"
    lines = [f"# config_hash={cfg_hash}", "dt,error"]
    for dt, err in zip(report.dts, report.errors):
        lines.append(f"{_fmt(dt)},{_fmt(err)}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    report_path = outdir / "report.json"
    write_json(
        report_path,
        {
            "config_hash": cfg_hash,
            "dts": list(report.dts),
            "errors": list(report.errors),
            "monotone": report.monotone,
            "reference": reference_kind,
            "slope": report.slope,
            "table": {"path": str(csv_path), "sha256": file_sha256(csv_path)},
        },
    )
    manifest_path = write_manifest(
        outdir, "converge", effective, cfg_hash, {"table": csv_path, "report": report_path}, "ok"
    )
    return {
        "command": "converge",
        "config_hash": cfg_hash,
        "files": {"manifest": str(manifest_path), "report": str(report_path), "table": str(csv_path)},
        "summary": {"slope": report.slope, "monotone": report.monotone},
    }


def _parse_method_entry(entry: str):
    if ":" in entry:
        method, metric = entry.split(":", 1)
    else:
        method, metric = entry, None
    if method not in METHODS:
        raise _fail(f"unknown method '{method}' in methods list")
    if method == "riemannian" and metric not in METRICS:
        raise _fail("riemannian entries must be written riemannian:<metric>")
    if method != "riemannian" and metric is not None:
        raise _fail(f"method '{method}' does not take a metric")
    return method, metric


def cmd_compare(effective: dict, outdir: Path) -> dict:
    _require_keys(
        effective, _COMMAND_KEYS["compare"], {"model", "initial_state", "stepper", "steps", "methods", "seed"}, "config"
    )
    cfg_hash = config_hash(effective)
    methods = effective["methods"]
    if not isinstance(methods, list) or len(methods) < 2:
        raise _fail("compare requires at least 2 methods")
    parsed = [_parse_method_entry(m) for m in methods]
    model = build_model(effective["model"])
    base_spec = build_stepper_spec(effective["stepper"])
    rng = np.random.default_rng(int(effective["seed"]))
    w0 = build_initial_state(effective["initial_state"], model, rng)
    steps = int(effective["steps"])
    if steps < 1:
        raise _fail("compare requires steps >= 1")

    def job(method, metric):
        spec = replace(base_spec, method=method, metric=metric)
        traj = run_trajectory(model, w0, spec, steps)
        max_drift, _ = energy_drift(traj, model)
        defect = symplectic_defect(make_stepper(model, spec), w0, SYMPLECTIC_FD_STEP).defect
        return {
            "method": method if metric is None else f"{method}:{metric}",
            "max_drift": max_drift,
            "orbit_defect": orbit_defect(traj),
            "symplectic_defect": defect,
            "mean_solver_iters": float(np.mean(traj.iterations[1:])),
        }

    rows = _run_jobs([lambda m=m, g=g: job(m, g) for m, g in parsed])

    csv_path = outdir / "compare.csv"
    lines = [f"# config_hash={cfg_hash}", "method,max_drift,orbit_defect,symplectic_defect,mean_solver_iters"]
    for row in rows:
        lines.append(
            f"{row['method']},{_fmt(row['max_drift'])},{_fmt(row['orbit_defect'])},"
            f"{_fmt(row['symplectic_defect'])},{_fmt(row['mean_solver_iters'])}"
        )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest_path = write_manifest(outdir, "compare", effective, cfg_hash, {"table": csv_path}, "ok")
    return {
        "command": "compare",
        "config_hash": cfg_hash,
        "files": {"manifest": str(manifest_path), "table": str(csv_path)},
        "summary": {row["method"]: row["max_drift"] for row in rows},
    }


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "converge": cmd_converge,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinmid", description="Structure-preserving spin-system integrators")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config 'outputs')")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    return parser


def _error_record(exc: Exception, exit_code: int) -> str:
    return json.dumps(
        {"error": {"exit_code": exit_code, "message": str(exc), "type": type(exc).__name__}}, sort_keys=True
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        effective = load_config(args.config)
        if args.out is not None:
            effective["outputs"] = args.out
        if args.seed is not None:
            effective["seed"] = args.seed
        if "outputs" not in effective:
            raise _fail("config needs an 'outputs' directory (or pass --out)")
        if "seed" not in effective:
            raise _fail("config needs a 'seed' (or pass --seed)")
        outdir = Path(effective["outputs"])
        outdir.mkdir(parents=True, exist_ok=True)
        summary = _COMMANDS[args.command](effective, outdir)
    except ConfigurationError as exc:
        print(_error_record(exc, EXIT_CONFIG), file=sys.stderr)
        return EXIT_CONFIG
    except (StepError, TrajectoryError) as exc:
        print(_error_record(exc, EXIT_STEP), file=sys.stderr)
        return EXIT_STEP
    except SpinSystemError as exc:
        print(_error_record(exc, EXIT_INTERNAL), file=sys.stderr)
        return EXIT_INTERNAL
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
