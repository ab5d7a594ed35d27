"""POD bases and Galerkin reduction of es-pH systems.

Projecting with an orthonormal ``V`` gives

    omega_r(xr) = V^T omega(V xr) V      rho_r(xr) = V^T rho(V xr) V
    gamma_r(xr) = V^T gamma(V xr)        pi_r(xr)  = V^T pi(V xr)
    mu_r(xr) = mu(V xr)                  sigma_r(xr) = sigma(V xr)
    H_r(xr) = H(V xr)                    grad H_r(xr) = V^T grad H(V xr)

The combined operators are congruence transforms of the full ones with
``blockdiag(V, I)``, so the reduced system is again es-pH.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .structure import EnergyFunctional, EsPhSystem, OperatorField

BASIS_MAGIC = b"ESPHBAS1"
_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class ReductionBasis:
    V: np.ndarray
    singular_values: np.ndarray
    energy_captured: float

    @property
    def full_dim(self) -> int:
        return self.V.shape[0]

    @property
    def reduced_dim(self) -> int:
        return self.V.shape[1]

    def lift(self, xr) -> np.ndarray:
        return np.asarray(xr) @ self.V.T if np.ndim(xr) == 2 else self.V @ xr

    def project(self, x) -> np.ndarray:
        return np.asarray(x) @ self.V if np.ndim(x) == 2 else self.V.T @ x


def pod_basis(snapshots: Sequence, n: int | None = None, energy: float | None = None) -> ReductionBasis:
    """Leading left singular vectors of the (uncentered) snapshot matrix.

    Exactly one of ``n`` (basis size) or ``energy`` (fraction of the squared
    singular value sum to capture) must be given. With an energy target,
    modes whose singular value ties the last selected one are kept too,
    since the subspace is not unique inside a degenerate cluster.
    """
    if (n is None) == (energy is None):
        raise ConfigurationError("give exactly one of n or energy")
    X = np.asarray(snapshots, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigurationError("need at least one snapshot")
    X = X.T  # columns are snapshots
    N, K = X.shape
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    total = float(np.sum(s ** 2))
    cum = np.cumsum(s ** 2) / total if total > 0 else np.ones_like(s)
    if n is not None:
        if int(n) != n or not 1 <= n <= min(N, K):
            raise ConfigurationError(f"n must be in [1, {min(N, K)}], got {n}")
        r = int(n)
    else:
        if not 0 < energy <= 1:
            raise ConfigurationError(f"energy target must lie in (0, 1], got {energy}")
        r = int(np.searchsorted(cum, energy, side="left")) + 1
        r = min(r, s.size)
        while r < s.size and s[r - 1] > 0 and s[r] >= s[r - 1] * (1 - _TIE_RTOL):
            r += 1
    return ReductionBasis(U[:, :r].copy(), s, float(cum[r - 1]))


def tail_energy(basis: ReductionBasis) -> float:
    """Squared Frobenius norm of the discarded singular values."""
    return float(np.sum(basis.singular_values[basis.reduced_dim:] ** 2))


def reduce(sys: EsPhSystem, basis: ReductionBasis) -> EsPhSystem:
    """Galerkin-project ``sys`` onto the span of ``basis.V``.

    The reduced fields evaluate the full-order fields at the lifted state on
    every call.
    """
    V = np.asarray(basis.V, dtype=float)
    if V.ndim != 2 or V.shape[0] != sys.state_dim or V.shape[1] < 1:
        raise ConfigurationError(f"basis shape {V.shape} does not fit state dim {sys.state_dim}")
    n, ny = V.shape[1], sys.io_dim
    H = sys.hamiltonian

    def wrap(fld: OperatorField, left: bool, right: bool, rows: int, cols: int):
        if fld.constant:
            m = fld(None)
            m = V.T @ m if left else m
            m = m @ V if right else m
            return OperatorField.const(m, fld.symmetry)

        def fn(xr):
            m = fld(V @ xr)
            m = V.T @ m if left else m
            return m @ V if right else m

        return OperatorField(rows, cols, fn, symmetry=fld.symmetry)

    if H.hessian is not None:
        hess = lambda xr: V.T @ np.asarray(H.hessian(V @ xr)) @ V
    else:
        hess = None
    Hr = EnergyFunctional(
        dim=n,
        value=lambda xr: H(V @ xr),
        gradient=lambda xr: V.T @ H.grad(V @ xr),
        hessian=hess,
    )
    return EsPhSystem(
        state_dim=n, io_dim=ny,
        omega=wrap(sys.omega, True, True, n, n),
        rho=wrap(sys.rho, True, True, n, n),
        gamma=wrap(sys.gamma, True, False, n, ny),
        pi=wrap(sys.pi, True, False, n, ny),
        mu=wrap(sys.mu, False, False, ny, ny),
        sigma=wrap(sys.sigma, False, False, ny, ny),
        hamiltonian=Hr,
        label=f"reduced[{n}]({sys.label})",
    )


def reduction_error(full, reduced, basis: ReductionBasis) -> dict:
    """Time-weighted L2 errors of lifted states and outputs, and the worst energy gap.

    Sums run over the left endpoints of the steps with weights ``dt_k``.
    """
    if len(full.times) != len(reduced.times) or not np.allclose(full.times, reduced.times, rtol=0, atol=1e-12):
        raise ConfigurationError("full and reduced trajectories use different time grids")
    dt = np.diff(np.asarray(full.times, dtype=float))
    dx = np.asarray(full.states)[:-1] - basis.lift(np.asarray(reduced.states))[:-1]
    dy = np.asarray(full.outputs) - np.asarray(reduced.outputs)
    dH = np.asarray(full.energies) - np.asarray(reduced.energies)
    return {
        "state_l2": float(np.sqrt(np.sum(dt * np.sum(dx ** 2, axis=1)))),
        "output_l2": float(np.sqrt(np.sum(dt * np.sum(dy ** 2, axis=1)))),
        "energy_max_dev": float(np.max(np.abs(dH))) if dH.size else 0.0,
    }


def save_basis(path, V) -> None:
    """Write ``ESPHBAS1``, ``N`` and ``n`` as little-endian int32, then ``V`` column-major float64."""
    V = np.asarray(getattr(V, "V", V), dtype=float)
    N, n = V.shape
    with open(path, "wb") as fh:
        fh.write(BASIS_MAGIC + struct.pack("<ii", N, n))
        fh.write(np.asfortranarray(V).astype("<f8").tobytes(order="F"))


def load_basis(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != BASIS_MAGIC:
        raise ConfigurationError(f"{path}: not an ESPHBAS1 basis file")
    N, n = struct.unpack("<ii", raw[8:16])
    if N < 0 or n < 0 or len(raw) != 16 + 8 * N * n:
        raise ConfigurationError(f"{path}: truncated or corrupt basis file")
    return np.frombuffer(raw[16:], dtype="<f8").reshape((N, n), order="F").astype(float)
