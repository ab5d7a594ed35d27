"""Trace CSV and JSON report files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import MalformedTrajectoryError
from .integrators import Trajectory


def _fmt(v: float) -> str:
    return "%.17g" % v


def trace_header(N: int, ny: int) -> list[str]:
    return (["t"] + [f"x_{i}" for i in range(N)] + [f"y_{j}" for j in range(ny)]
            + ["H", "supply_rate", "dissipation_rate", "pbe_residual"])


def write_trace(path, traj: Trajectory) -> None:
    """One row per time point. Per-step columns refer to the step starting at
    that row and are empty on the final row."""
    N = traj.states.shape[1]
    ny = traj.outputs.shape[1] if traj.outputs.ndim == 2 else 0
    n = traj.n_steps
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(N, ny))
        for k in range(n + 1):
            row = [_fmt(traj.times[k])] + [_fmt(v) for v in traj.states[k]]
            if k < n:
                row += [_fmt(v) for v in traj.outputs[k]]
                row += [_fmt(traj.energies[k]), _fmt(traj.supply_rates[k]),
                        _fmt(traj.dissipation_rates[k]), _fmt(traj.pbe_residuals[k])]
            else:
                row += [""] * ny + [_fmt(traj.energies[k]), "", "", ""]
            w.writerow(row)


def read_trace(path, scheme: str = "discrete_gradient") -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedTrajectoryError(f"{path}: empty trace")
    header, body = rows[0], rows[1:]
    if not body or header[0] != "t" or header[-4:] != ["H", "supply_rate", "dissipation_rate", "pbe_residual"]:
        raise MalformedTrajectoryError(f"{path}: unexpected trace layout")
    N = sum(1 for h in header if h.startswith("x_"))
    ny = sum(1 for h in header if h.startswith("y_"))

    def col(rows_, j):
        return np.array([float(r[j]) for r in rows_])

    steps = body[:-1]
    h_col = 1 + N + ny
    return Trajectory(
        times=col(body, 0),
        states=np.array([[float(v) for v in r[1:1 + N]] for r in body]).reshape(len(body), N),
        outputs=np.array([[float(v) for v in r[1 + N:h_col]] for r in steps]).reshape(len(steps), ny),
        energies=col(body, h_col),
        supply_rates=col(steps, h_col + 1),
        dissipation_rates=col(steps, h_col + 2),
        pbe_residuals=col(steps, h_col + 3),
        scheme=scheme,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
