"""Example systems with analytically controlled behaviour.

State ordering is ``x = (q, p)`` (positions first) throughout, and every
es-pH model uses the canonical ``omega = [[0, -I], [I, 0]]`` so that the
second block row reads ``qdot = dH/dp``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np
import scipy.linalg

from .errors import ConfigurationError
from .structure import EnergyFunctional, EsPhSystem, IsoPhSystem, OperatorField

CANONICAL_2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _positive(name, value):
    if not value > 0:
        raise ConfigurationError(f"{name} must be > 0, got {value}")


def _nonneg(name, value):
    if not value >= 0:
        raise ConfigurationError(f"{name} must be >= 0, got {value}")


def _quadratic_energy(Q: np.ndarray) -> EnergyFunctional:
    """``H(x) = x^T Q x / 2`` for symmetric ``Q``."""
    Q = np.asarray(Q, dtype=float)
    return EnergyFunctional(
        dim=Q.shape[0],
        value=lambda x: 0.5 * float(x @ Q @ x),
        gradient=lambda x: Q @ x,
        hessian=lambda x: Q,
    )


def _es(label, omega, rho, gamma, H, ny=1):
    N = H.dim
    return EsPhSystem(
        state_dim=N,
        io_dim=ny,
        omega=omega if isinstance(omega, OperatorField) else OperatorField.const(omega, "skew"),
        rho=OperatorField.const(rho, "symmetric_psd"),
        gamma=OperatorField.const(gamma),
        pi=OperatorField.zeros(N, ny),
        mu=OperatorField.zeros(ny, ny),
        sigma=OperatorField.zeros(ny, ny, "symmetric_psd"),
        hamiltonian=H,
        label=label,
    )


def damped_oscillator_es(m: float = 1.0, k: float = 1.0, d: float = 0.5) -> EsPhSystem:
    """Mass-spring-damper driven by a force, velocity output."""
    _positive("m", m)
    _positive("k", k)
    _nonneg("d", d)
    H = _quadratic_energy(np.diag([k, 1.0 / m]))
    return _es(f"damped_oscillator_es(m={m}, k={k}, d={d})", CANONICAL_2,
               np.diag([d, 0.0]), np.array([[1.0], [0.0]]), H)


def duffing_es(k: float = 1.0, alpha: float = 1.0, d: float = 0.0) -> EsPhSystem:
    _positive("k", k)
    _nonneg("alpha", alpha)
    _nonneg("d", d)
    H = EnergyFunctional(
        dim=2,
        value=lambda x: 0.5 * k * x[0] ** 2 + 0.25 * alpha * x[0] ** 4 + 0.5 * x[1] ** 2,
        gradient=lambda x: np.array([k * x[0] + alpha * x[0] ** 3, x[1]]),
        hessian=lambda x: np.diag([k + 3.0 * alpha * x[0] ** 2, 1.0]),
    )
    return _es(f"duffing_es(k={k}, alpha={alpha}, d={d})", CANONICAL_2,
               np.diag([d, 0.0]), np.array([[1.0], [0.0]]), H)


def chain_stiffness(n_cells: int, c: float) -> np.ndarray:
    """Springs between neighbouring cells plus one to a wall at the right end."""
    K = np.zeros((n_cells, n_cells))
    for i in range(n_cells - 1):
        K[i:i + 2, i:i + 2] += np.array([[1.0, -1.0], [-1.0, 1.0]])
    K[-1, -1] += 1.0
    return c * c * K


def wave_chain_es(n_cells: int = 10, c: float = 1.0, d_boundary: float = 0.5) -> EsPhSystem:
    """Finite-difference string with a force port and damper at the left end.

    Unit cell masses, spring stiffness ``c**2``, fixed right end.
    """
    if int(n_cells) != n_cells or n_cells < 2:
        raise ConfigurationError(f"n_cells must be an integer >= 2, got {n_cells}")
    n_cells = int(n_cells)
    _positive("c", c)
    _nonneg("d_boundary", d_boundary)
    n = n_cells
    I = np.eye(n)
    Z = np.zeros((n, n))
    omega = np.block([[Z, -I], [I, Z]])
    rho = np.zeros((2 * n, 2 * n))
    rho[0, 0] = d_boundary
    gamma = np.zeros((2 * n, 1))
    gamma[0, 0] = 1.0
    Q = scipy.linalg.block_diag(chain_stiffness(n, c), I)
    return _es(f"wave_chain_es(n_cells={n}, c={c}, d_boundary={d_boundary})",
               omega, rho, gamma, _quadratic_energy(Q))


def modulated_oscillator_es(eps: float = 0.5) -> EsPhSystem:
    """Undamped oscillator with state-dependent ``omega = (1 + eps q^2) J2``."""
    _nonneg("eps", eps)
    omega = OperatorField(2, 2, lambda x: (1.0 + eps * x[0] ** 2) * CANONICAL_2, symmetry="skew")
    return _es(f"modulated_oscillator_es(eps={eps})", omega, np.zeros((2, 2)),
               np.array([[1.0], [0.0]]), _quadratic_energy(np.eye(2)))


def damped_oscillator_iso(m: float = 1.0, k: float = 1.0, d: float = 0.5) -> IsoPhSystem:
    _positive("m", m)
    _positive("k", k)
    _nonneg("d", d)
    return IsoPhSystem(
        state_dim=2,
        io_dim=1,
        J=OperatorField.const(-CANONICAL_2, "skew"),
        R=OperatorField.const(np.diag([0.0, d]), "symmetric_psd"),
        G=OperatorField.const(np.array([[0.0], [1.0]])),
        P=OperatorField.zeros(2, 1),
        S=OperatorField.zeros(1, 1, "symmetric_psd"),
        Nf=OperatorField.zeros(1, 1),
        hamiltonian=_quadratic_energy(np.diag([k, 1.0 / m])),
        label=f"damped_oscillator_iso(m={m}, k={k}, d={d})",
    )


def oscillator_solution(m: float, k: float, d: float, x0, t) -> np.ndarray:
    """Free response (``u = 0``) of the damped oscillator via the matrix exponential."""
    A = np.array([[0.0, 1.0 / m], [-k, -d / m]])
    return scipy.linalg.expm(A * t) @ np.asarray(x0, dtype=float)


@dataclass(frozen=True)
class ModelSpec:
    """Registry entry.

    ``reference_solution(params, x0, t)`` gives the exact unforced state where
    a closed form exists. ``twin`` names the matched model in the other
    formulation; ``dirac`` builds the Dirac-structure form from parameters.
    """

    name: str
    parameters: Mapping[str, float]
    builder: Callable
    reference_solution: Callable | None = None
    twin: str | None = None
    dirac: Callable | None = None

    def resolve(self, overrides: Mapping | None = None) -> dict:
        params = dict(self.parameters)
        for key, val in (overrides or {}).items():
            if key not in params:
                raise ConfigurationError(
                    f"unknown parameter {key!r} for {self.name}; known: {sorted(params)}")
            params[key] = val
        return params

    def build(self, overrides: Mapping | None = None):
        return self.builder(**self.resolve(overrides))

    @property
    def formulation(self) -> str:
        return "iso" if self.name.endswith("_iso") else "es"


def _osc_ref(p, x0, t):
    return oscillator_solution(p["m"], p["k"], p["d"], x0, t)


def _dirac_oscillator(p):
    from .dirac import oscillator_dirac_es
    return oscillator_dirac_es(**p)


def _dirac_oscillator_iso(p):
    from .dirac import oscillator_dirac_iso
    return oscillator_dirac_iso(**p)


def _dirac_wave(p):
    from .dirac import wave_chain_dirac_es
    return wave_chain_dirac_es(**p)


def _dirac_duffing(p):
    from .dirac import duffing_dirac_es
    return duffing_dirac_es(**p)


REGISTRY: Mapping[str, ModelSpec] = MappingProxyType({
    spec.name: spec for spec in (
        ModelSpec("damped_oscillator_es", {"m": 1.0, "k": 1.0, "d": 0.5}, damped_oscillator_es,
                  reference_solution=_osc_ref, twin="damped_oscillator_iso", dirac=_dirac_oscillator),
        ModelSpec("duffing_es", {"k": 1.0, "alpha": 1.0, "d": 0.0}, duffing_es, dirac=_dirac_duffing),
        ModelSpec("wave_chain_es", {"n_cells": 10, "c": 1.0, "d_boundary": 0.5}, wave_chain_es,
                  dirac=_dirac_wave),
        ModelSpec("damped_oscillator_iso", {"m": 1.0, "k": 1.0, "d": 0.5}, damped_oscillator_iso,
                  reference_solution=_osc_ref, twin="damped_oscillator_es", dirac=_dirac_oscillator_iso),
        ModelSpec("modulated_oscillator_es", {"eps": 0.5}, modulated_oscillator_es),
    )
})


def get_model(name: str, registry: Mapping[str, ModelSpec] | None = None) -> ModelSpec:
    registry = REGISTRY if registry is None else registry
    try:
        return registry[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; available: {', '.join(sorted(registry))}") from None
