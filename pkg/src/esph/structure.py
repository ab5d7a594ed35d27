"""System records for energy-stable (es-pH) and input-state-output (iso-pH)
port-Hamiltonian systems, block assembly and structural validation.

An es-pH system reads

    (-omega(x) + rho(x)) xdot = -grad H(x) + (gamma(x) - pi(x)) u
    y = (gamma(x) + pi(x))^T xdot + (-mu(x) + sigma(x)) u

and is well posed when the combined operators

    lambda = [[omega, gamma], [-gamma^T, mu]]
    phi    = [[rho,   pi   ], [ pi^T,   sigma]]

are pointwise skew-symmetric and symmetric positive semi-definite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

SYMMETRY_CLASSES = ("general", "skew", "symmetric_psd")

STRUCT_RTOL = 1e-12
PSD_RTOL = 1e-10


def struct_tol(mat: np.ndarray) -> float:
    """Skew/symmetry tolerance scaled by the largest entry of ``mat``."""
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    return STRUCT_RTOL * max(1.0, scale)


def psd_tol(eigvals: np.ndarray) -> float:
    scale = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    return PSD_RTOL * max(1.0, scale)


def skew_defect(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat + mat.T))) if mat.size else 0.0


def sym_defect(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0


def min_sym_eigenvalue(mat: np.ndarray) -> float:
    if not mat.size:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])


class OperatorField:
    """State-dependent dense matrix of fixed shape.

    Parameters
    ----------
    rows, cols : int
        Declared shape of every evaluation.
    fn : callable
        ``fn(x) -> (rows, cols) array``. Must be free of side effects.
    symmetry : {"general", "skew", "symmetric_psd"}
        Structural class the field is expected to belong to.
    constant : bool
        True if ``fn`` ignores the state. Constant fields are evaluated once.
    """

    __slots__ = ("rows", "cols", "symmetry", "constant", "_fn", "_cached")

    def __init__(self, rows: int, cols: int, fn: Callable[[np.ndarray], np.ndarray],
                 symmetry: str = "general", constant: bool = False):
        if rows < 0 or cols < 0:
            raise ConfigurationError(f"negative field shape ({rows}, {cols})")
        if symmetry not in SYMMETRY_CLASSES:
            raise ConfigurationError(f"unknown symmetry class {symmetry!r}")
        if symmetry != "general" and rows != cols:
            raise ConfigurationError(f"{symmetry} field must be square, got ({rows}, {cols})")
        self.rows = int(rows)
        self.cols = int(cols)
        self.symmetry = symmetry
        self.constant = bool(constant)
        self._fn = fn
        self._cached = None

    @classmethod
    def const(cls, matrix, symmetry: str = "general") -> "OperatorField":
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2:
            raise ConfigurationError(f"constant field needs a 2-D matrix, got ndim={mat.ndim}")
        mat.setflags(write=False)
        return cls(mat.shape[0], mat.shape[1], lambda x: mat, symmetry=symmetry, constant=True)

    @classmethod
    def zeros(cls, rows: int, cols: int, symmetry: str = "general") -> "OperatorField":
        return cls.const(np.zeros((rows, cols)), symmetry=symmetry)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._cached is not None:
            return self._cached
        mat = np.asarray(self._fn(x), dtype=float)
        if mat.shape != (self.rows, self.cols):
            raise ConfigurationError(
                f"operator field returned shape {mat.shape}, declared ({self.rows}, {self.cols})")
        if self.constant:
            self._cached = mat
        return mat

    def __repr__(self) -> str:
        kind = "constant" if self.constant else "state-dependent"
        return f"OperatorField({self.rows}x{self.cols}, {self.symmetry}, {kind})"


@dataclass(frozen=True)
class EnergyFunctional:
    """Hamiltonian ``H`` with its gradient.

    When ``gradient`` is omitted a central finite-difference gradient is used.
    ``discrete_gradient`` overrides the default midpoint discrete gradient of
    :func:`esph.integrators.discrete_gradient`. ``hessian`` is optional and
    only consulted by the ``jacobian="user"`` Newton mode.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    discrete_gradient: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x: np.ndarray) -> float:
        return float(self.value(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return fd_gradient(self.value, x)


def fd_gradient(fun: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite differences with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


def check_gradient(H: EnergyFunctional, x: np.ndarray, rtol: float = 1e-5) -> float:
    """Relative mismatch between ``H.grad`` and central differences of ``H``."""
    g = H.grad(x)
    g_fd = fd_gradient(H.value, x)
    return float(np.max(np.abs(g - g_fd)) / max(1.0, float(np.max(np.abs(g_fd)))))


def _check_field(name: str, fld: OperatorField, rows: int, cols: int) -> None:
    if not isinstance(fld, OperatorField):
        raise ConfigurationError(f"{name} must be an OperatorField, got {type(fld).__name__}")
    if (fld.rows, fld.cols) != (rows, cols):
        raise ConfigurationError(f"{name} declared ({fld.rows}, {fld.cols}), expected ({rows}, {cols})")


@dataclass(frozen=True)
class EsPhSystem:
    state_dim: int
    io_dim: int
    omega: OperatorField
    rho: OperatorField
    gamma: OperatorField
    pi: OperatorField
    mu: OperatorField
    sigma: OperatorField
    hamiltonian: EnergyFunctional
    label: str = "es-pH"

    def __post_init__(self):
        N, ny = self.state_dim, self.io_dim
        if N < 1 or ny < 0:
            raise ConfigurationError(f"invalid dimensions N={N}, n_y={ny}")
        for name, rows, cols in (("omega", N, N), ("rho", N, N), ("gamma", N, ny),
                                 ("pi", N, ny), ("mu", ny, ny), ("sigma", ny, ny)):
            _check_field(name, getattr(self, name), rows, cols)
        if self.hamiltonian.dim != N:
            raise ConfigurationError(f"hamiltonian dim {self.hamiltonian.dim} != state_dim {N}")

    def blocks(self, x: np.ndarray):
        """Evaluate ``(omega, rho, gamma, pi, mu, sigma)`` at ``x``."""
        return (self.omega(x), self.rho(x), self.gamma(x), self.pi(x), self.mu(x), self.sigma(x))

    @property
    def constant_operators(self) -> bool:
        return all(getattr(self, n).constant for n in ("omega", "rho", "gamma", "pi", "mu", "sigma"))


@dataclass(frozen=True)
class IsoPhSystem:
    state_dim: int
    io_dim: int
    J: OperatorField
    R: OperatorField
    G: OperatorField
    P: OperatorField
    S: OperatorField
    Nf: OperatorField
    hamiltonian: EnergyFunctional
    label: str = "iso-pH"

    def __post_init__(self):
        N, ny = self.state_dim, self.io_dim
        if N < 1 or ny < 0:
            raise ConfigurationError(f"invalid dimensions N={N}, n_y={ny}")
        for name, rows, cols in (("J", N, N), ("R", N, N), ("G", N, ny),
                                 ("P", N, ny), ("S", ny, ny), ("Nf", ny, ny)):
            _check_field(name, getattr(self, name), rows, cols)
        if self.hamiltonian.dim != N:
            raise ConfigurationError(f"hamiltonian dim {self.hamiltonian.dim} != state_dim {N}")

    def blocks(self, x: np.ndarray):
        return (self.J(x), self.R(x), self.G(x), self.P(x), self.S(x), self.Nf(x))


@dataclass
class StructureReport:
    sampled_states: list
    max_skew_defect: float
    max_sym_defect: float
    min_eigenvalue_phi: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "n_samples": len(self.sampled_states),
            "max_skew_defect": self.max_skew_defect,
            "max_sym_defect": self.max_sym_defect,
            "min_eigenvalue_phi": self.min_eigenvalue_phi,
            "passed": self.passed,
        }


def _as_state(sys, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.state_dim,):
        raise ConfigurationError(f"state has shape {x.shape}, expected ({sys.state_dim},)")
    return x


def _as_input(sys, u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (sys.io_dim,):
        raise ConfigurationError(f"input has shape {u.shape}, expected ({sys.io_dim},)")
    return u


def assemble_lambda(sys: EsPhSystem, x) -> np.ndarray:
    """``[[omega, gamma], [-gamma^T, mu]]`` evaluated at ``x``."""
    x = _as_state(sys, x)
    om, gam, mu = sys.omega(x), sys.gamma(x), sys.mu(x)
    return np.block([[om, gam], [-gam.T, mu]])


def assemble_phi(sys: EsPhSystem, x) -> np.ndarray:
    """``[[rho, pi], [pi^T, sigma]]`` evaluated at ``x``."""
    x = _as_state(sys, x)
    rho, pi_, sig = sys.rho(x), sys.pi(x), sys.sigma(x)
    return np.block([[rho, pi_], [pi_.T, sig]])


def assemble_Z(sys: IsoPhSystem, x) -> np.ndarray:
    x = _as_state(sys, x)
    J, G, Nf = sys.J(x), sys.G(x), sys.Nf(x)
    return np.block([[J, G], [-G.T, Nf]])


def assemble_W(sys: IsoPhSystem, x) -> np.ndarray:
    x = _as_state(sys, x)
    R, P, S = sys.R(x), sys.P(x), sys.S(x)
    return np.block([[R, P], [P.T, S]])


def esph_residual(sys: EsPhSystem, x, xdot, u) -> np.ndarray:
    """State-equation residual; zero iff ``(x, xdot, u)`` solves the system."""
    x = _as_state(sys, x)
    xdot = _as_state(sys, xdot)
    u = _as_input(sys, u)
    om, rho, gam, pi_, _, _ = sys.blocks(x)
    return (rho - om) @ xdot + sys.hamiltonian.grad(x) - (gam - pi_) @ u


def esph_output(sys: EsPhSystem, x, xdot, u) -> np.ndarray:
    x = _as_state(sys, x)
    xdot = _as_state(sys, xdot)
    u = _as_input(sys, u)
    _, _, gam, pi_, mu, sig = sys.blocks(x)
    return (gam + pi_).T @ xdot + (sig - mu) @ u


def isoph_rhs(sys: IsoPhSystem, x, u) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(xdot, y)`` of the explicit iso-pH equations."""
    x = _as_state(sys, x)
    u = _as_input(sys, u)
    J, R, G, P, S, Nf = sys.blocks(x)
    g = sys.hamiltonian.grad(x)
    xdot = (J - R) @ g + (G - P) @ u
    y = (G + P).T @ g + (S - Nf) @ u
    return xdot, y


def random_states(dim: int, n: int = 100, seed: int = 42, bound: float = 2.0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return list(rng.uniform(-bound, bound, size=(n, dim)))


def validate_structure(sys: EsPhSystem | IsoPhSystem, samples: Sequence | None = None,
                       seed: int = 42) -> StructureReport:
    """Check skewness of lambda (Z) and symmetric PSD of phi (W) at sampled states.

    This is probabilistic: only the given states are inspected. With no
    samples, 100 states uniform in [-2, 2]^N are drawn from ``seed``.
    """
    if samples is None:
        samples = random_states(sys.state_dim, 100, seed)
    samples = [np.asarray(s, dtype=float) for s in samples]
    if not samples:
        raise ConfigurationError("validate_structure needs at least one sample state")
    if isinstance(sys, IsoPhSystem):
        skew_op, psd_op = assemble_Z, assemble_W
    else:
        skew_op, psd_op = assemble_lambda, assemble_phi

    max_skew = max_sym = 0.0
    min_eig = np.inf
    passed = True
    for x in samples:
        lam = skew_op(sys, x)
        phi = psd_op(sys, x)
        sk, sy = skew_defect(lam), sym_defect(phi)
        eigs = np.linalg.eigvalsh(0.5 * (phi + phi.T)) if phi.size else np.zeros(0)
        me = float(eigs[0]) if eigs.size else 0.0
        if sk > struct_tol(lam) or sy > struct_tol(phi) or me < -psd_tol(eigs):
            passed = False
        max_skew, max_sym, min_eig = max(max_skew, sk), max(max_sym, sy), min(min_eig, me)
    return StructureReport(samples, max_skew, max_sym, float(min_eig), passed)
