"""Eigenfunction-expansion solver for the forward problem.

Each Fourier mode obeys a scalar Caputo Cauchy problem with coefficient
``lam sigma(t) / (1 + mu lam)``. Freezing ``sigma`` at its maximum turns it
into a Volterra equation whose kernel is ``y^(rho-1) E_{rho,rho}(-c y^rho)``
(``c = lam M_sigma / (1 + mu lam)``); the remaining
``(M_sigma - sigma) u`` term is handled by Picard sweeps.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import AccuracyError, ConvergenceError, ParameterDomainError
from .problem import ProblemSpec, SolutionField, SpaceGrid
from .specfun import TimeMesh, mittag_leffler

SQRT2 = math.sqrt(2.0)

DEFAULT_MODES = 64
QUAD_TOL = 1e-10
PICARD_TOL = 1e-10
PICARD_MAX_SWEEPS = 200


def eigenvalue(k: int) -> float:
    if k < 1:
        raise IndexError(f"mode index must be >= 1, got {k}")
    return (math.pi * k) ** 2


def eigenfunction(k: int, x):
    if k < 1:
        raise IndexError(f"mode index must be >= 1, got {k}")
    return SQRT2 * np.sin(k * math.pi * np.asarray(x, dtype=float))


def eigensystem(k: int):
    """``((pi k)^2, x -> sqrt(2) sin(k pi x))``."""
    lam = eigenvalue(k)
    return lam, lambda x: eigenfunction(k, x)


def fourier_coeff(f, k: int, tol: float = QUAD_TOL) -> float:
    """``\\int_0^1 f(x) sqrt(2) sin(k pi x) dx`` by QUADPACK's sine-weighted rule."""
    if k < 1:
        raise IndexError(f"mode index must be >= 1, got {k}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(
            lambda x: float(f(x)), 0.0, 1.0,
            weight="sin", wvar=k * math.pi,
            epsabs=tol * 1e-3, epsrel=1e-13, limit=400,
        )
    if not err <= tol:
        raise AccuracyError(f"Fourier coefficient {k} did not converge", err)
    return SQRT2 * val


def fourier_coeffs(f, K: int, tol: float = QUAD_TOL) -> np.ndarray:
    return np.array([fourier_coeff(f, k, tol) for k in range(1, K + 1)])


# Gauss-Legendre nodes by point count, reused across kernels
_GL = {n: np.polynomial.legendre.leggauss(n) for n in range(3, 13)}


@dataclass(frozen=True)
class VolterraKernel:
    """Product-integration weights on ``mesh`` for the kernel
    ``y^(rho-1) E_{rho,rho}(-c y^rho)``.

    ``weights[n] @ f`` approximates ``\\int_0^{t_n} K(t_n - s) f(s) ds`` with
    ``f`` interpolated linearly between nodes; ``decay[n]`` is
    ``E_{rho,1}(-c t_n^rho)``.
    """

    mesh: TimeMesh
    rho: float
    c: float
    weights: np.ndarray = field(repr=False, compare=False)
    decay: np.ndarray = field(repr=False, compare=False)


def volterra_kernel(mesh: TimeMesh, rho: float, c: float) -> VolterraKernel:
    t, tau = mesh.nodes, mesh.steps
    M = mesh.M
    W = np.zeros((M + 1, M + 1))

    # interval touching the singularity: exact antiderivatives
    # G1(y) = y^rho E_{rho,rho+1}(-c y^rho), G2(y) = y^(rho+1) E_{rho,rho+2}(-c y^rho)
    arg = -c * tau**rho
    G1 = tau**rho * mittag_leffler(arg, rho, rho + 1.0)
    G2 = tau ** (rho + 1.0) * mittag_leffler(arg, rho, rho + 2.0)
    n_idx = np.arange(1, M + 1)
    W[n_idx, n_idx] += G2 / tau
    W[n_idx, n_idx - 1] += G1 - G2 / tau

    # remaining intervals lie at least one step away from the singularity
    nn, jj = np.nonzero(np.tril(np.ones((M + 1, M + 1), dtype=bool), k=-2))
    if nn.size:
        tj = tau[jj]
        yb = t[nn] - t[jj + 1]
        q = yb / tj
        bern = 2 * q + 1 + np.sqrt((2 * q + 1) ** 2 - 1)
        npts = np.clip(np.ceil(18.5 / np.log(bern)).astype(int) + 1, 3, 12)
        for n_gl in np.unique(npts):
            sel = npts == n_gl
            xi, om = _GL[int(n_gl)]
            y = yb[sel, None] + tj[sel, None] * (1 + xi[None, :]) / 2
            K = y ** (rho - 1) * mittag_leffler(-c * y**rho, rho, rho)
            half = tj[sel] / 2
            to_left = half * (K * om * (1 + xi) / 2).sum(axis=1)
            to_right = half * (K * om * (1 - xi) / 2).sum(axis=1)
            np.add.at(W, (nn[sel], jj[sel]), to_left)
            np.add.at(W, (nn[sel], jj[sel] + 1), to_right)

    decay = mittag_leffler(-c * t**rho, rho, 1.0)
    W.flags.writeable = False
    decay.flags.writeable = False
    return VolterraKernel(mesh, rho, c, W, decay)


class ModalProblem:
    """Precomputed data for one mode; :meth:`solve` takes the source samples."""

    def __init__(
        self,
        spec: ProblemSpec,
        k: int,
        mesh: TimeMesh,
        phi_k: Optional[float] = None,
        g_k: Optional[float] = None,
        sigma_bounds: Optional[tuple[float, float]] = None,
    ):
        self.spec, self.k, self.mesh = spec, k, mesh
        self.lam = eigenvalue(k)
        self.denom = 1.0 + spec.mu * self.lam
        self.phi_k = fourier_coeff(spec.phi, k) if phi_k is None else float(phi_k)
        self.g_k = fourier_coeff(spec.g, k) if g_k is None else float(g_k)
        m_sig, M_sig = sigma_bounds or spec.sigma_bounds(mesh)
        self.m_sigma, self.M_sigma = m_sig, M_sig
        self.sigma_nodes = spec.sigma(mesh.nodes)
        self.coupling = self.lam / self.denom * (M_sig - self.sigma_nodes)
        self.kernel = volterra_kernel(mesh, spec.rho, self.lam * M_sig / self.denom)

    def source_samples(self, r_samples=None) -> np.ndarray:
        if r_samples is not None:
            return np.asarray(r_samples, dtype=float)
        if self.spec.source_r is None:
            raise ParameterDomainError("forward solve needs a source r(t)")
        return self.spec.source_r(self.mesh.nodes)

    def solve(self, r_samples=None, tol: float = PICARD_TOL,
              max_sweeps: int = PICARD_MAX_SWEEPS) -> np.ndarray:
        r = self.source_samples(r_samples)
        W = self.kernel.weights
        base = self.phi_k * self.kernel.decay + self.g_k / self.denom * (W @ r)
        u = base
        history = []
        for _ in range(max_sweeps):
            new = base + W @ (self.coupling * u)
            diff = float(np.max(np.abs(new - u)))
            history.append(diff)
            u = new
            if diff < tol:
                return u
        raise ConvergenceError(
            f"Picard sweeps for mode {self.k} did not reach {tol:g} "
            f"in {max_sweeps} sweeps", history)

    def estimate_bound(self, r_samples=None) -> np.ndarray:
        """Pointwise majorant of ``|u_k|`` with ``sigma`` frozen at its minimum."""
        r = self.source_samples(r_samples)
        lower = volterra_kernel(self.mesh, self.spec.rho, self.lam * self.m_sigma / self.denom)
        return (abs(self.phi_k) * lower.decay
                + abs(self.g_k) / self.denom * (lower.weights @ np.abs(r)))


def solve_mode(spec: ProblemSpec, k: int, mesh: TimeMesh, **kwargs) -> np.ndarray:
    """Samples of the ``k``-th Fourier coefficient ``u_k(t_0..t_M)``."""
    solve_kw = {key: kwargs.pop(key) for key in ("r_samples", "tol", "max_sweeps") if key in kwargs}
    return ModalProblem(spec, k, mesh, **kwargs).solve(**solve_kw)


def modal_estimate_bound(spec: ProblemSpec, k: int, mesh: TimeMesh, **kwargs) -> np.ndarray:
    r_samples = kwargs.pop("r_samples", None)
    return ModalProblem(spec, k, mesh, **kwargs).estimate_bound(r_samples)


@dataclass
class ModalSet:
    mesh: TimeMesh
    lambdas: np.ndarray
    phi_coeffs: np.ndarray
    g_coeffs: np.ndarray
    mode_solutions: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.lambdas)


def _negligible(coeffs: np.ndarray) -> np.ndarray:
    return np.abs(coeffs) <= 1e-14 * (1.0 + np.max(np.abs(coeffs), initial=0.0))


def solve_spectral(
    spec: ProblemSpec,
    mesh: TimeMesh,
    K: int = DEFAULT_MODES,
    tol: float = PICARD_TOL,
    max_sweeps: int = PICARD_MAX_SWEEPS,
    threads: int = 1,
    quad_tol: float = QUAD_TOL,
) -> ModalSet:
    """Solve the first ``K`` modal problems on ``mesh``.

    Modes whose data are at round-off level are set to zero without a solve;
    zero data give the zero solution.
    """
    if K < 1:
        raise ParameterDomainError(f"K must be >= 1, got {K}")
    phis = fourier_coeffs(spec.phi, K, quad_tol)
    gs = fourier_coeffs(spec.g, K, quad_tol)
    bounds = spec.sigma_bounds(mesh)
    r = spec.source_r(mesh.nodes) if spec.source_r is not None else None
    if r is None:
        raise ParameterDomainError("forward solve needs a source r(t)")
    skip = _negligible(phis) & _negligible(gs)

    def run(k):
        if skip[k - 1]:
            return np.zeros(mesh.M + 1)
        prob = ModalProblem(spec, k, mesh, phis[k - 1], gs[k - 1], bounds)
        return prob.solve(r, tol, max_sweeps)

    ks = range(1, K + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sols = list(pool.map(run, ks))
    else:
        sols = [run(k) for k in ks]

    lambdas = np.array([eigenvalue(k) for k in ks])
    m_sig = bounds[0]
    tail = np.abs(phis) + np.abs(gs) * np.max(np.abs(r)) / (lambdas * m_sig)
    diagnostics = {
        "sigma_min": bounds[0],
        "sigma_max": bounds[1],
        "skipped_modes": int(skip.sum()),
        "tail_bound": float(tail[K // 2:].max()),
    }
    return ModalSet(mesh, lambdas, phis, gs, np.array(sols), diagnostics)


def assemble(modes: ModalSet, space: SpaceGrid) -> SolutionField:
    """``u(x_i, t_j) = sum_k u_k(t_j) sqrt(2) sin(k pi x_i)``."""
    ks = np.arange(1, modes.K + 1)
    basis = SQRT2 * np.sin(np.pi * np.outer(space.nodes, ks))
    values = basis @ modes.mode_solutions
    values[0, :] = 0.0
    values[-1, :] = 0.0
    return SolutionField(space, modes.mesh, values, dict(modes.diagnostics))
