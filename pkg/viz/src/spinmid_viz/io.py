"""Readers for the spinmid CLI file formats.

All inputs are validated against the documented schemas before use; a
violation raises SchemaError with a one-line reason.  Files are opened
read-only and never modified.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRAJECTORY_HEADER = ["step", "time", "i", "wx", "wy", "wz", "H", "norm_i", "iters", "residual"]
CONVERGENCE_HEADER = ["dt", "error"]
COMPARE_HEADER = ["method", "max_drift", "orbit_defect", "symplectic_defect", "mean_solver_iters"]

SUPPORTED_SCHEMA_VERSION = "0.1"


class SchemaError(Exception):
    """An input file does not match the documented schema."""


@dataclass(frozen=True)
class TrajectoryData:
    times: np.ndarray          # (m,)
    states: np.ndarray         # (m, n, 3)
    energies: np.ndarray       # (m,)
    norms: np.ndarray          # (m, n)
    config_hash: str


@dataclass(frozen=True)
class ConvergenceData:
    dts: np.ndarray
    errors: np.ndarray
    config_hash: str


@dataclass(frozen=True)
class CompareData:
    methods: list
    columns: dict              # column name -> (k,) array
    config_hash: str


def check_manifest_version(input_path: Path) -> None:
    """If a run manifest sits next to the input, require a schema version we
    can read (major.minor prefix of the producing package version)."""
    manifest_path = input_path.parent / "manifest.json"
    if not manifest_path.exists():
        return
    try:
        manifest = json.loads(manifest_path.read_text())
        version = manifest["versions"]["spinmid"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaError(f"unreadable manifest next to input: {manifest_path}") from exc
    if not str(version).startswith(SUPPORTED_SCHEMA_VERSION):
        raise SchemaError(f"unsupported schema version {version} (supported: {SUPPORTED_SCHEMA_VERSION}.x)")


def _read_csv(path: Path, expected_header: list) -> tuple[list, str]:
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    config_hash = ""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first.startswith("# config_hash="):
            config_hash = first.split("=", 1)[1]
            header_line = fh.readline()
        else:
            header_line = first + "\n"
        header = header_line.strip().split(",")
        if header != expected_header:
            raise SchemaError(f"unexpected header in {path.name}: expected {expected_header}, got {header}")
        rows = [row for row in csv.reader(fh) if row]
    for row in rows:
        if len(row) != len(expected_header):
            raise SchemaError(f"malformed row in {path.name}: {row}")
    return rows, config_hash


def load_trajectory(path) -> TrajectoryData:
    """Load a long-format trajectory CSV."""
    path = Path(path)
    check_manifest_version(path)
    rows, config_hash = _read_csv(path, TRAJECTORY_HEADER)
    if not rows:
        raise SchemaError(f"{path.name} has no data rows")
    try:
        steps = np.array([int(r[0]) for r in rows])
        spins = np.array([int(r[2]) for r in rows])
        values = np.array([[float(x) for x in (r[1], r[3], r[4], r[5], r[6], r[7])] for r in rows])
    except ValueError as exc:
        raise SchemaError(f"non-numeric entry in {path.name}") from exc
    n = spins.max() + 1
    m = steps.max() + 1
    if len(rows) != n * m or not np.all(spins == np.tile(np.arange(n), m)):
        raise SchemaError(f"{path.name} is not a dense step-major long-format table")
    times = values[::n, 0]
    energies = values[::n, 5]
    states = values[:, 1:4].reshape(m, n, 3)
    norms = values[:, 4].reshape(m, n)
    return TrajectoryData(times=times, states=states, energies=energies, norms=norms, config_hash=config_hash)


def load_convergence(path) -> ConvergenceData:
    path = Path(path)
    check_manifest_version(path)
    rows, config_hash = _read_csv(path, CONVERGENCE_HEADER)
    if len(rows) < 2:
        raise SchemaError(f"{path.name} needs at least two (dt, error) rows")
    try:
        data = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise SchemaError(f"non-numeric entry in {path.name}") from exc
    if np.any(data <= 0):
        raise SchemaError(f"{path.name} must contain positive dt and error values for a log-log fit")
    return ConvergenceData(dts=data[:, 0], errors=data[:, 1], config_hash=config_hash)


def load_compare(path) -> CompareData:
    path = Path(path)
    check_manifest_version(path)
    rows, config_hash = _read_csv(path, COMPARE_HEADER)
    if not rows:
        raise SchemaError(f"{path.name} has no data rows")
    methods = [r[0] for r in rows]
    try:
        columns = {
            name: np.array([float(r[k + 1]) for r in rows])
            for k, name in enumerate(COMPARE_HEADER[1:])
        }
    except ValueError as exc:
        raise SchemaError(f"non-numeric entry in {path.name}") from exc
    return CompareData(methods=methods, columns=columns, config_hash=config_hash)
