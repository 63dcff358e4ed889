"""Constrained batch Bayesian optimisation by kernel recombination."""

from .errors import (ConfigError, CsoberError, DegenerateBatch, DegenerateInput, DegenerateMeasure, DomainError,
                     EmptyAcceptance, NumericalFailure, OracleError, SolverStall)
from .kernels import KernelFamily, KernelSpec, Point, gram, kernel_eval
from .measure import (EmpiricalMeasure, PiDensity, build_measure, deweighted_resample, estimate_eta, lfi_term,
                      pi_density, rejection_rate, shrinkage_stats, weighted_resample)
from .optimizer import (LoopConfig, LoopState, RunRecord, Tolerance, acquisition, budgeted_batch, constrained_ts,
                        csober_step, hallucinate, run_loop, select_tolerance)
from .quadrature import (BatchProposal, NystromBasis, build_lp, extract_batch, nystrom_basis, nystrom_error,
                         recombine, simulate_rejection, solve_lp, verify_prop1, worst_case_error)
from .surrogate import (BinaryConstraint, CheapOracle, ConstraintModel, ContinuousConstraint, Dataset, GpPosterior,
                        fit_binary_constraint, fit_gp, rho, rho_continuous, sample_posterior)

__version__ = "0.1.0"
