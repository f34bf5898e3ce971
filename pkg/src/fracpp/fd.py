"""Finite-difference forward solver: L1 in time on a graded mesh, central
differences in space, one tridiagonal solve per step.

With ``L v = v - mu delta_h^2 v`` the step-``k`` equation is

    (1/Gamma(2-rho)) sum_j d_{k,j} (L u^j - L u^{j-1}) - sigma_k delta_h^2 u^k = r_k g

Moving every level below ``k`` to the right-hand side gives

    b^k = r_k g + (1/Gamma(2-rho)) [ d_{k,1} L u^0
          + sum_{m=1}^{k-1} (d_{k,m+1} - d_{k,m}) L u^m ].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllPosedSystemError, ShapeError
from .problem import ProblemSpec, SolutionField, SpaceGrid
from .specfun import TimeMesh, l1_weights


@dataclass
class StepSystem:
    """Tridiagonal system ``sub[i] u[i-1] + diag[i] u[i] + sup[i] u[i+1] = rhs[i]``
    for the interior unknowns."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray
    a: float = float("nan")
    c: float = float("nan")

    def __post_init__(self):
        n = len(self.diag)
        if len(self.rhs) != n or len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ShapeError("inconsistent tridiagonal band lengths")

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def dominance_margin(self) -> float:
        off = np.zeros_like(self.diag)
        off[1:] += np.abs(self.sub)
        off[:-1] += np.abs(self.sup)
        return float(np.min(np.abs(self.diag) - off))


def second_difference(v: np.ndarray, h: float) -> np.ndarray:
    """``(v[i+1] - 2 v[i] + v[i-1]) / h^2`` on interior nodes, zero at the ends."""
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    return out


def _pseudo(v, h, mu):
    out = v - mu * second_difference(v, h)
    out[0] = out[-1] = 0.0
    return out


def assemble_step(spec: ProblemSpec, history: np.ndarray, mesh: TimeMesh, k: int,
                  l_history: np.ndarray | None = None) -> StepSystem:
    """Build the step-``k`` system from levels ``0..k-1``.

    Parameters
    ----------
    history : ndarray, shape (N+1, >=k)
        Column ``j`` holds ``u^j`` for ``j < k``.
    l_history : ndarray, optional
        Precomputed ``L u^j`` columns, same layout; saves recomputation when
        marching.
    """
    if not 1 <= k <= mesh.M:
        raise IndexError(f"step index {k} outside 1..{mesh.M}")
    history = np.asarray(history, dtype=float)
    if history.ndim != 2 or history.shape[1] < k:
        raise ShapeError(f"history must hold levels 0..{k - 1}")
    N = history.shape[0] - 1
    grid = SpaceGrid(N)
    h = grid.h
    if l_history is None:
        l_history = np.column_stack([_pseudo(history[:, j], h, spec.mu) for j in range(k)])

    gam = math.gamma(2 - spec.rho)
    d = l1_weights(mesh, spec.rho, k)
    sig = float(spec.sigma(mesh.nodes[k]))
    a = (spec.mu * d[-1] / gam + sig) / h**2
    c = d[-1] / gam + 2 * a
    if not (a > 0 and c - 2 * a > 0):
        raise IllPosedSystemError(f"step {k}: a={a:.6g}, c-2a={c - 2 * a:.6g}")

    coeffs = np.empty(k)
    coeffs[0] = d[0]
    coeffs[1:] = d[1:k] - d[: k - 1]
    hist = l_history[:, :k] @ coeffs / gam

    r_k = float(spec.source_r(mesh.nodes[k]))
    x = grid.nodes[1:-1]
    rhs = hist[1:-1] + r_k * spec.g(x)

    n = N - 1
    return StepSystem(np.full(n - 1, -a), np.full(n, c), np.full(n - 1, -a), rhs, a, c)


def thomas_solve(sys: StepSystem) -> np.ndarray:
    """Forward elimination and back substitution, no pivoting."""
    if sys.dominance_margin() <= 0:
        raise IllPosedSystemError("system is not strictly diagonally dominant")
    n = len(sys.diag)
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = sys.sup[0] / sys.diag[0] if n > 1 else 0.0
    dp[0] = sys.rhs[0] / sys.diag[0]
    for i in range(1, n):
        m = sys.diag[i] - sys.sub[i - 1] * cp[i - 1]
        cp[i] = sys.sup[i] / m if i < n - 1 else 0.0
        dp[i] = (sys.rhs[i] - sys.sub[i - 1] * dp[i - 1]) / m
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def boundary_derivatives(u: np.ndarray, h: float) -> tuple[float, float]:
    """One-sided second-order ``u_x`` at ``x = 0`` and ``x = 1``."""
    left = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    right = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return float(left), float(right)


def march(spec: ProblemSpec, grid: SpaceGrid, mesh: TimeMesh,
          check_dense: bool = False) -> SolutionField:
    """Advance from ``u^0 = phi`` through all time levels.

    ``check_dense`` compares every Thomas solve against ``numpy.linalg.solve``
    (only sensible for small ``N``).
    """
    if spec.source_r is None:
        raise ValueError("forward solve needs a source r(t)")
    N, M, h = grid.N, mesh.M, grid.h
    U = np.zeros((N + 1, M + 1))
    U[1:-1, 0] = spec.phi(grid.nodes[1:-1])
    LU = np.zeros_like(U)
    LU[:, 0] = _pseudo(U[:, 0], h, spec.mu)

    margins = np.empty(M)
    ux0 = np.empty(M + 1)
    ux1 = np.empty(M + 1)
    ux0[0], ux1[0] = boundary_derivatives(U[:, 0], h)
    dense_gap = 0.0
    for k in range(1, M + 1):
        sys = assemble_step(spec, U, mesh, k, l_history=LU)
        margins[k - 1] = sys.c - 2 * sys.a
        U[1:-1, k] = thomas_solve(sys)
        if check_dense:
            ref = np.linalg.solve(sys.dense(), sys.rhs)
            dense_gap = max(dense_gap, float(np.max(np.abs(ref - U[1:-1, k]))))
        LU[:, k] = _pseudo(U[:, k], h, spec.mu)
        ux0[k], ux1[k] = boundary_derivatives(U[:, k], h)

    diagnostics = {
        "min_dominance_margin": float(margins.min()),
        "ux_left": ux0,
        "ux_right": ux1,
    }
    if check_dense:
        diagnostics["max_dense_gap"] = dense_gap
    return SolutionField(grid, mesh, U, diagnostics)


@dataclass
class ErrorReport:
    max_err: float
    l2_err: float
    table: np.ndarray = field(repr=False)  # columns t, max_err, l2_err


def error_report(field_: SolutionField, exact) -> ErrorReport:
    """Nodal errors against ``exact(x, t)`` (vectorised over broadcast arrays)."""
    x = field_.space.nodes[:, None]
    t = field_.time.nodes[None, :]
    err = np.abs(field_.values - np.broadcast_to(exact(x, t), field_.values.shape))
    per_max = err.max(axis=0)
    per_l2 = np.sqrt(field_.space.h * (err**2).sum(axis=0))
    table = np.column_stack([field_.time.nodes, per_max, per_l2])
    return ErrorReport(float(per_max.max()), float(per_l2[-1]), table)
