"""Entropic dynamics on a grid: maximum-entropy kernels, walker ensembles,
Hamiltonian (rho, Phi) fields and a Schrodinger reference solver."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConfigError, EntropicError, InvariantViolation, NodeError, NumericalError, SingularityError
from .fields import (EnsembleHamiltonianReport, FieldIntegrator, FieldModel, FieldState, action_value,
                     continuity_rhs, drift_potential, energy_balance, ensemble_hamiltonian, fisher_information,
                     functional_derivatives, hamilton_jacobi_rhs, initial_state, momentum_expectation,
                     poisson_bracket, step, velocity_fields)
from .gauge import (ConstantGauge, GaugeFunction, GridGauge, LinearGauge, SinusoidalGauge, invariance_report,
                    transform)
from .kernel import (DriftPotential, GaugeField, TransitionKernel, build_kernel, log_pdf, reverse_log_pdf,
                     sample_step)
from .ensemble import (DensityEstimate, WalkerEnsemble, arrow_diagnostic, estimate_density, initialize_walkers,
                       propagate)
from .space import GridSpec, MassTensor, Scenario, build_mass_tensors, info_metric, kappa_from_alpha
from .wave import (RegraduationConstants, SchrodingerSolver, WaveState, from_wave, nonlinear_residual,
                   step_schrodinger, to_wave)
