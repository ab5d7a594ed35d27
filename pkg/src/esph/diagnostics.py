"""Power balance, dissipation inequality and energy balance checks on trajectories.

Everything here is a pure function of the recorded times, energies and
per-step supply/dissipation rates, so a trace read back from disk gives the
same numbers as the in-memory run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import MalformedTrajectoryError

EXACT_SCHEMES = ("discrete_gradient",)


@dataclass
class BalanceReport:
    per_step_pbe_residuals: list | None = None
    max_abs_pbe_residual: float | None = None
    max_scaled_pbe_residual: float | None = None
    di_margins: list | None = None
    min_di_margin: float | None = None
    min_scaled_di_margin: float | None = None
    cumulative_ebe_defect: float | None = None
    passed_pbe: bool | None = None
    passed_di: bool | None = None
    approximate: bool = False
    scheme: str | None = None

    def to_dict(self, per_step: bool = False) -> dict:
        out = asdict(self)
        if not per_step:
            out.pop("per_step_pbe_residuals")
            out.pop("di_margins")
        return out


def _check(traj):
    n = len(traj.times) - 1
    if n < 0:
        raise MalformedTrajectoryError("trajectory has no time points")
    if len(traj.energies) != n + 1:
        raise MalformedTrajectoryError(f"{len(traj.energies)} energies for {n + 1} time points")
    for name in ("supply_rates", "dissipation_rates"):
        if len(getattr(traj, name)) != n:
            raise MalformedTrajectoryError(f"{name} has {len(getattr(traj, name))} entries for {n} steps")
    times = np.asarray(traj.times, dtype=float)
    energies = np.asarray(traj.energies, dtype=float)
    return (np.diff(times), energies, np.asarray(traj.supply_rates, dtype=float),
            np.asarray(traj.dissipation_rates, dtype=float))


def _scale(energies):
    return np.maximum(1.0, np.abs(energies[:-1]))


def pbe_residuals(traj) -> np.ndarray:
    """``H(x_{k+1}) - H(x_k) - dt_k (supply_k - dissipation_k)`` per step."""
    dt, H, s, d = _check(traj)
    return H[1:] - H[:-1] - dt * (s - d)


def power_balance(traj, tol_pbe: float = 1e-9) -> BalanceReport:
    """Per-step power balance; tolerance is scaled by ``max(1, |H(x_k)|)``.

    Runs from schemes other than the discrete gradient get ``approximate=True``
    and no verdict.
    """
    res = pbe_residuals(traj)
    _, H, _, _ = _check(traj)
    scheme = getattr(traj, "scheme", None)
    approx = scheme not in EXACT_SCHEMES
    max_abs = float(np.max(np.abs(res))) if res.size else 0.0
    max_scaled = float(np.max(np.abs(res) / _scale(H))) if res.size else 0.0
    return BalanceReport(
        per_step_pbe_residuals=res.tolist(),
        max_abs_pbe_residual=max_abs,
        max_scaled_pbe_residual=max_scaled,
        cumulative_ebe_defect=energy_balance(traj),
        passed_pbe=None if approx else bool(max_scaled <= tol_pbe),
        approximate=approx,
        scheme=scheme,
    )


def dissipation_inequality(traj, tol_di: float = 1e-9) -> BalanceReport:
    """Margins ``dt_k supply_k - (H(x_{k+1}) - H(x_k))``; must not go below ``-tol_di``."""
    dt, H, s, _ = _check(traj)
    margins = dt * s - (H[1:] - H[:-1])
    scheme = getattr(traj, "scheme", None)
    approx = scheme not in EXACT_SCHEMES
    min_margin = float(np.min(margins)) if margins.size else 0.0
    min_scaled = float(np.min(margins / _scale(H))) if margins.size else 0.0
    return BalanceReport(
        di_margins=margins.tolist(),
        min_di_margin=min_margin,
        min_scaled_di_margin=min_scaled,
        passed_di=None if approx else bool(min_scaled >= -tol_di),
        approximate=approx,
        scheme=scheme,
    )


def energy_balance(traj) -> float:
    """Integrated balance defect ``|H(x_end) - H(x_0) - sum_k dt_k (supply_k - dissipation_k)|``."""
    dt, H, s, d = _check(traj)
    return float(abs(H[-1] - H[0] - np.sum(dt * (s - d))))


def analyze(traj, tol_pbe: float = 1e-9, tol_di: float = 1e-9) -> BalanceReport:
    pbe = power_balance(traj, tol_pbe)
    di = dissipation_inequality(traj, tol_di)
    pbe.di_margins = di.di_margins
    pbe.min_di_margin = di.min_di_margin
    pbe.min_scaled_di_margin = di.min_scaled_di_margin
    pbe.passed_di = di.passed_di
    return pbe
