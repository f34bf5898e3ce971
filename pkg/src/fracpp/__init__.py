"""Solvers for the time-fractional pseudo-parabolic equation

    D_t^rho [u + mu A u] + sigma(t) A u = r(t) g,   A = -d^2/dx^2 on (0, 1),

with a spectral and a finite-difference forward solver and a fixed-point
recovery of ``r(t)`` from a scalar observation ``F[u(t)]``.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    AccuracyError, AdmissibilityError, ConfigError, ConvergenceError, ExprEvalError,
    ExprSyntaxError, FracppError, IllPosedSystemError, NumericalError,
    ParameterDomainError, ShapeError,
)
from .specfun import (
    MLParams, TimeMesh, caputo_l1, l1_matrix, l1_weights, log_mittag_leffler, ml,
    ml_derivative_kernel, mittag_leffler,
)
from .problem import ProblemSpec, SolutionField, SpaceGrid
from .spectral import (
    ModalSet, assemble, eigensystem, fourier_coeff, modal_estimate_bound, solve_mode,
    solve_spectral,
)
from .fd import StepSystem, assemble_step, error_report, march, thomas_solve
from .inverse import (
    Functional, InverseResult, Observation, apply_B, c1_bound, caputo_phi, make_functional,
    recover,
)
from .expr import parse_expr

__all__ = [name for name in dir() if not name.startswith("_")]
