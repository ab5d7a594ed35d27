"""Structure-preserving simulation and model reduction of energy-stable
port-Hamiltonian systems."""

from .diagnostics import BalanceReport, analyze, dissipation_inequality, energy_balance, power_balance
from .dirac import (EsDiracSystem, IsoDiracSystem, assemble_K, assemble_L, eliminate_resistive_es,
                    eliminate_resistive_iso, simulate_dae_es, verify_dirac)
from .errors import (ConfigurationError, EsphError, MalformedTrajectoryError, NewtonDivergence,
                     SingularJacobian, SingularMassOperator, SolverError)
from .integrators import (InputSignal, SimConfig, Trajectory, discrete_gradient, simulate,
                          simulate_iso, step_discrete_gradient, step_implicit_midpoint)
from .models import REGISTRY, ModelSpec, get_model
from .mor import ReductionBasis, load_basis, pod_basis, reduce, reduction_error, save_basis
from .structure import (EnergyFunctional, EsPhSystem, IsoPhSystem, OperatorField, StructureReport,
                        assemble_lambda, assemble_phi, assemble_W, assemble_Z, esph_output,
                        esph_residual, isoph_rhs, validate_structure)

__version__ = "0.1.0"
