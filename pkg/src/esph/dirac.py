"""Dirac-structure forms of es-pH and iso-pH systems.

Flows are ordered ``(state, io, resistive_1, resistive_2)``. Along a
solution the state flow is ``-xdot``. For the es form the Dirac structure
is the graph ``e = L(x) f`` with ``f = (-xdot, u, f_R1, f_R2)`` and
``e = (grad H, y, e_R1, e_R2)``; resistive ports close with
``f_R = -phibar(x) e_R``. The iso form is the graph ``f = K(x) e`` with
``e = (grad H, u, e_R1, e_R2)`` and ``e_R = -Wbar(x) f_R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .integrators import (InputSignal, SimConfig, Trajectory, _check_input, _check_x0, _dg_from,
                          _empty_traj, _predict, newton, time_grid)
from .structure import (EnergyFunctional, EsPhSystem, IsoPhSystem, OperatorField, _check_field,
                        skew_defect, struct_tol)


@dataclass(frozen=True)
class EsDiracSystem:
    state_dim: int
    io_dim: int
    r1: int
    r2: int
    omega: OperatorField
    gamma: OperatorField
    tau1: OperatorField
    tau2: OperatorField
    mu: OperatorField
    phibar: OperatorField
    hamiltonian: EnergyFunctional
    label: str = "es-dirac"

    def __post_init__(self):
        N, ny, r1, r2 = self.state_dim, self.io_dim, self.r1, self.r2
        if min(N, ny + 1, r1 + 1, r2 + 1) < 1:
            raise ConfigurationError(f"invalid dimensions N={N}, n_y={ny}, r1={r1}, r2={r2}")
        for name, rows, cols in (("omega", N, N), ("gamma", N, ny), ("tau1", N, r1),
                                 ("tau2", ny, r2), ("mu", ny, ny), ("phibar", r1 + r2, r1 + r2)):
            _check_field(name, getattr(self, name), rows, cols)

    @property
    def size(self) -> int:
        return self.state_dim + self.io_dim + self.r1 + self.r2


@dataclass(frozen=True)
class IsoDiracSystem:
    state_dim: int
    io_dim: int
    r1: int
    r2: int
    J: OperatorField
    G: OperatorField
    T1: OperatorField
    T2: OperatorField
    Nf: OperatorField
    wbar: OperatorField
    hamiltonian: EnergyFunctional
    label: str = "iso-dirac"

    def __post_init__(self):
        N, ny, r1, r2 = self.state_dim, self.io_dim, self.r1, self.r2
        if min(N, ny + 1, r1 + 1, r2 + 1) < 1:
            raise ConfigurationError(f"invalid dimensions N={N}, n_y={ny}, r1={r1}, r2={r2}")
        for name, rows, cols in (("J", N, N), ("G", N, ny), ("T1", N, r1),
                                 ("T2", ny, r2), ("Nf", ny, ny), ("wbar", r1 + r2, r1 + r2)):
            _check_field(name, getattr(self, name), rows, cols)

    @property
    def size(self) -> int:
        return self.state_dim + self.io_dim + self.r1 + self.r2


@dataclass
class FlowEffortSample:
    f: np.ndarray
    e: np.ndarray

    @property
    def power(self) -> float:
        return float(self.e @ self.f)


def assemble_L(sys: EsDiracSystem, x) -> np.ndarray:
    N, ny, r1, r2 = sys.state_dim, sys.io_dim, sys.r1, sys.r2
    om, gam, t1, t2, mu = sys.omega(x), sys.gamma(x), sys.tau1(x), sys.tau2(x), sys.mu(x)
    z = np.zeros
    return np.block([
        [-om, gam, t1, z((N, r2))],
        [-gam.T, -mu, z((ny, r1)), -t2],
        [-t1.T, z((r1, ny)), z((r1, r1)), z((r1, r2))],
        [z((r2, N)), t2.T, z((r2, r1)), z((r2, r2))],
    ])


def assemble_K(sys: IsoDiracSystem, x) -> np.ndarray:
    N, ny, r1, r2 = sys.state_dim, sys.io_dim, sys.r1, sys.r2
    J, G, T1, T2, Nf = sys.J(x), sys.G(x), sys.T1(x), sys.T2(x), sys.Nf(x)
    z = np.zeros
    return np.block([
        [-J, -G, -T1, z((N, r2))],
        [G.T, -Nf, z((ny, r1)), -T2],
        [T1.T, z((r1, ny)), z((r1, r1)), z((r1, r2))],
        [z((r2, N)), T2.T, z((r2, r1)), z((r2, r2))],
    ])


def verify_dirac(M, n_samples: int = 1000, seed: int = 42) -> dict:
    """Check that the graph of ``M`` is a Dirac structure.

    Power conservation is sampled: for random ``f`` the pairing of ``f`` with
    ``M f`` must vanish relative to ``|f| |M f|``. Maximal dimension holds
    by construction, since a graph over the whole flow space has the
    dimension of that space.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"Dirac operator must be square, got shape {M.shape}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for f in rng.standard_normal((n_samples, M.shape[0])):
        e = M @ f
        worst = max(worst, abs(float(f @ e)) / (np.linalg.norm(f) * np.linalg.norm(e) + 1e-300))
    sk = skew_defect(M)
    return {
        "max_power_defect": worst,
        "skew_defect": sk,
        "dimension": int(M.shape[0]),
        "passed": bool(worst <= 1e-12 and sk <= struct_tol(M)),
    }


def _resistive_blocks(mat: np.ndarray, r1: int):
    return mat[:r1, :r1], mat[:r1, r1:], mat[r1:, r1:]


def _field(rows, cols, fn, symmetry, *parents):
    return OperatorField(rows, cols, fn, symmetry=symmetry, constant=all(p.constant for p in parents))


def eliminate_resistive_es(sys: EsDiracSystem) -> EsPhSystem:
    """Close the resistive ports, giving ``rho = tau1 phi11 tau1^T``,
    ``pi = tau1 phi12 tau2^T`` and ``sigma = tau2 phi22 tau2^T``."""
    N, ny, r1 = sys.state_dim, sys.io_dim, sys.r1
    t1, t2, pb = sys.tau1, sys.tau2, sys.phibar

    def rho(x):
        p11, _, _ = _resistive_blocks(pb(x), r1)
        return t1(x) @ p11 @ t1(x).T

    def pi_(x):
        _, p12, _ = _resistive_blocks(pb(x), r1)
        return t1(x) @ p12 @ t2(x).T

    def sigma(x):
        _, _, p22 = _resistive_blocks(pb(x), r1)
        return t2(x) @ p22 @ t2(x).T

    return EsPhSystem(
        state_dim=N, io_dim=ny,
        omega=sys.omega, gamma=sys.gamma, mu=sys.mu,
        rho=_field(N, N, rho, "symmetric_psd", t1, pb),
        pi=_field(N, ny, pi_, "general", t1, t2, pb),
        sigma=_field(ny, ny, sigma, "symmetric_psd", t2, pb),
        hamiltonian=sys.hamiltonian,
        label=f"eliminated({sys.label})",
    )


def eliminate_resistive_iso(sys: IsoDiracSystem) -> IsoPhSystem:
    """Close the resistive ports, giving ``R = T1 W11 T1^T``, ``P = T1 W12 T2^T``
    and ``S = T2 W22 T2^T``."""
    N, ny, r1 = sys.state_dim, sys.io_dim, sys.r1
    T1, T2, wb = sys.T1, sys.T2, sys.wbar

    def R(x):
        w11, _, _ = _resistive_blocks(wb(x), r1)
        return T1(x) @ w11 @ T1(x).T

    def P(x):
        _, w12, _ = _resistive_blocks(wb(x), r1)
        return T1(x) @ w12 @ T2(x).T

    def S(x):
        _, _, w22 = _resistive_blocks(wb(x), r1)
        return T2(x) @ w22 @ T2(x).T

    return IsoPhSystem(
        state_dim=N, io_dim=ny,
        J=sys.J, G=sys.G, Nf=sys.Nf,
        R=_field(N, N, R, "symmetric_psd", T1, wb),
        P=_field(N, ny, P, "general", T1, T2, wb),
        S=_field(ny, ny, S, "symmetric_psd", T2, wb),
        hamiltonian=sys.hamiltonian,
        label=f"eliminated({sys.label})",
    )


def _dae_step_quantities(sys: EsDiracSystem, x_k, x_next, u_k, dt):
    """Flows and efforts of one step, with ``L`` frozen at the midpoint."""
    N, ny = sys.state_dim, sys.io_dim
    xm = 0.5 * (x_k + x_next)
    L = assemble_L(sys, xm)
    f_port = np.concatenate([-(x_next - x_k) / dt, u_k])
    e_R = L[N + ny:, :N + ny] @ f_port
    f_R = -sys.phibar(xm) @ e_R
    e = L @ np.concatenate([f_port, f_R])
    return e, e_R, f_R


def simulate_dae_es(sys: EsDiracSystem, u: InputSignal, cfg: SimConfig, x0) -> Trajectory:
    """Discrete-gradient integration of the un-eliminated Dirac form.

    Each step solves the state row ``gbar = (L(x_m) f)_state`` for
    ``x_{k+1}``, with the resistive efforts read off the resistive rows of
    ``L`` and the resistive flows from ``f_R = -phibar e_R``. Resistive
    efforts and flows are stored in ``extras``.
    """
    x0 = _check_x0(sys, x0)
    _check_input(sys, u)
    times = time_grid(cfg)
    H = sys.hamiltonian
    N, ny = sys.state_dim, sys.io_dim
    traj = _empty_traj(times, x0, N, ny, H, "discrete_gradient", sys.label)
    n = traj.n_steps
    e_R_all = np.empty((n, sys.r1 + sys.r2))
    f_R_all = np.empty((n, sys.r1 + sys.r2))
    traj.states[0] = x0
    traj.energies[0] = H(x0)

    for k in range(n):
        h = times[k + 1] - times[k]
        x = traj.states[k]
        u_k = u.step_value(times[k], h)

        dg = _dg_from(H, x)

        def F(z, x=x, u_k=u_k, h=h):
            e, _, _ = _dae_step_quantities(sys, x, z, u_k, h)
            return dg(z) - e[:N]

        x_next = newton(F, _predict(traj.states, k, times), cfg, step=k)
        e, e_R, f_R = _dae_step_quantities(sys, x, x_next, u_k, h)
        y = e[N:N + ny]
        supply = float(y @ u_k)
        diss = -float(e_R @ f_R)
        traj.states[k + 1] = x_next
        traj.energies[k + 1] = H(x_next)
        traj.inputs[k] = u_k
        traj.outputs[k] = y
        traj.supply_rates[k] = supply
        traj.dissipation_rates[k] = diss
        traj.pbe_residuals[k] = traj.energies[k + 1] - traj.energies[k] - h * (supply - diss)
        e_R_all[k] = e_R
        f_R_all[k] = f_R
    traj.extras["resistive_efforts"] = e_R_all
    traj.extras["resistive_flows"] = f_R_all
    return traj


# -- Dirac forms of the registry models -------------------------------------------

def _es_dirac_from(base: EsPhSystem, tau1: np.ndarray, phibar: np.ndarray, label: str) -> EsDiracSystem:
    tau1 = np.asarray(tau1, dtype=float)
    r1 = tau1.shape[1]
    return EsDiracSystem(
        state_dim=base.state_dim, io_dim=base.io_dim, r1=r1, r2=0,
        omega=base.omega, gamma=base.gamma, mu=base.mu,
        tau1=OperatorField.const(tau1),
        tau2=OperatorField.zeros(base.io_dim, 0),
        phibar=OperatorField.const(phibar, "symmetric_psd"),
        hamiltonian=base.hamiltonian,
        label=label,
    )


def oscillator_dirac_es(m: float = 1.0, k: float = 1.0, d: float = 0.5) -> EsDiracSystem:
    from .models import damped_oscillator_es
    base = damped_oscillator_es(m, k, 0.0)
    return _es_dirac_from(base, [[1.0], [0.0]], [[d]], f"oscillator_dirac_es(m={m}, k={k}, d={d})")


def duffing_dirac_es(k: float = 1.0, alpha: float = 1.0, d: float = 0.0) -> EsDiracSystem:
    from .models import duffing_es
    base = duffing_es(k, alpha, 0.0)
    return _es_dirac_from(base, [[1.0], [0.0]], [[d]], f"duffing_dirac_es(k={k}, alpha={alpha}, d={d})")


def wave_chain_dirac_es(n_cells: int = 10, c: float = 1.0, d_boundary: float = 0.5) -> EsDiracSystem:
    from .models import wave_chain_es
    base = wave_chain_es(n_cells, c, 0.0)
    tau1 = np.zeros((base.state_dim, 1))
    tau1[0, 0] = 1.0
    return _es_dirac_from(base, tau1, [[d_boundary]],
                          f"wave_chain_dirac_es(n_cells={n_cells}, c={c}, d_boundary={d_boundary})")


def oscillator_dirac_iso(m: float = 1.0, k: float = 1.0, d: float = 0.5) -> IsoDiracSystem:
    from .models import damped_oscillator_iso
    base = damped_oscillator_iso(m, k, 0.0)
    return IsoDiracSystem(
        state_dim=2, io_dim=1, r1=1, r2=0,
        J=base.J, G=base.G, Nf=base.Nf,
        T1=OperatorField.const([[0.0], [1.0]]),
        T2=OperatorField.zeros(1, 0),
        wbar=OperatorField.const([[d]], "symmetric_psd"),
        hamiltonian=base.hamiltonian,
        label=f"oscillator_dirac_iso(m={m}, k={k}, d={d})",
    )
