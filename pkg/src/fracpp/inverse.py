"""Recovery of the time factor ``r(t)`` of the source from ``F[u(t)] = Phi(t)``.

Applying ``F`` to the equation and eliminating ``D^rho A u`` via the modal
expansion gives the fixed-point equation ``r = B[r]`` with

    B[r](t) = D^rho Phi(t) / F[(I + mu A)^-1 g]
              + sigma(t) / F[(I + mu A)^-1 g] * sum_k lam_k / (1 + mu lam_k) u_k(t; r) F[v_k]

where ``u_k(t; r)`` are the modal solutions driven by ``r``.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AdmissibilityError, ConvergenceError, ParameterDomainError, ShapeError
from .problem import ProblemSpec
from .specfun import TimeMesh, caputo_l1, log_mittag_leffler, mittag_leffler
from .spectral import ModalProblem, eigenvalue, fourier_coeffs

log = logging.getLogger(__name__)

ADMISSIBILITY_EPS = 1e-12
COMPATIBILITY_TOL = 1e-8
DEFAULT_GAMMA = {"point": 0.5, "flux_right": 1.0, "mean": 0.0}
_KIND_ALIASES = {"flux": "flux_right", "point": "point", "mean": "mean",
                 "flux_right": "flux_right", "custom": "custom"}


def functional_values(kind: str, K: int, x0: Optional[float] = None) -> np.ndarray:
    """``F[v_k]`` for ``k = 1..K`` in closed form."""
    k = np.arange(1, K + 1)
    if kind == "point":
        if x0 is None or not 0.0 <= x0 <= 1.0:
            raise ParameterDomainError(f"point functional needs x0 in [0, 1], got {x0}")
        return math.sqrt(2) * np.sin(k * math.pi * x0)
    if kind == "flux_right":
        return math.sqrt(2) * k * math.pi * np.where(k % 2 == 0, 1.0, -1.0)
    if kind == "mean":
        return math.sqrt(2) * (1 + (-1.0) ** (k + 1)) / (k * math.pi)
    raise ParameterDomainError(f"unknown functional kind {kind!r}")


def _power_tail(terms: np.ndarray) -> float:
    """Tail ``sum_{k>K} terms_k`` from a power-law fit over the upper half.

    Returns 0 when the upper half is identically zero and ``inf`` when the fit
    decays too slowly for the tail to converge.
    """
    K = len(terms)
    k = np.arange(1, K + 1)
    upper = (k > K // 2) & (terms > 0)
    if not np.any(terms[K // 2:] > 0):
        return 0.0
    if upper.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(k[upper]), np.log(terms[upper]), 1)[0]
    p = -slope
    if p <= 1.0:
        return float("inf")
    scale = np.max(terms[upper] * k[upper] ** p)
    return float(scale * K ** (1 - p) / (p - 1))


def decay_exponent(coeffs: np.ndarray) -> float:
    """Fitted ``p`` in ``|c_k| ~ k^-p``; ``inf`` for band-limited data."""
    c = np.abs(np.asarray(coeffs, dtype=float))
    nz = c > 1e-14 * max(c.max(initial=0.0), 1e-300)
    if nz.sum() < 3:
        return float("inf")
    k = np.arange(1, len(c) + 1)
    return float(-np.polyfit(np.log(k[nz]), np.log(c[nz]), 1)[0])


@dataclass(frozen=True)
class Functional:
    kind: str
    gamma: float
    fv: np.ndarray = field(repr=False)
    c_f: float
    c_f_tail: float
    f_g: float
    f_resolvent_g: float
    x0: Optional[float] = None

    @property
    def K(self) -> int:
        return len(self.fv)

    def apply(self, coeffs) -> float:
        """``F`` of the function with the given eigen-coefficients."""
        c = np.asarray(coeffs, dtype=float)
        return float(c @ self.fv[: len(c)])


def make_functional(kind: str, spec: ProblemSpec, K: int, x0: Optional[float] = None,
                    gamma: Optional[float] = None, fv: Optional[Sequence[float]] = None,
                    g_coeffs: Optional[np.ndarray] = None,
                    quad_tol: float = 1e-10) -> Functional:
    """Build a functional descriptor and validate ``F[g]`` and ``F[(I+mu A)^-1 g]``.

    ``kind`` is ``point``, ``flux_right`` (alias ``flux``), ``mean`` or
    ``custom``; the latter takes the ``F[v_k]`` sequence from ``fv`` and needs
    an explicit ``gamma``.
    """
    if K < 1:
        raise ParameterDomainError(f"K must be >= 1, got {K}")
    if kind not in _KIND_ALIASES:
        raise ParameterDomainError(f"unknown functional kind {kind!r}")
    kind = _KIND_ALIASES[kind]
    if kind == "custom":
        if fv is None or gamma is None:
            raise ParameterDomainError("custom functional needs fv and gamma")
        values = np.asarray(fv, dtype=float)
        if values.shape != (K,):
            raise ShapeError(f"fv must have {K} entries, got shape {values.shape}")
    else:
        values = functional_values(kind, K, x0)
    gamma = DEFAULT_GAMMA[kind] if gamma is None else float(gamma)
    if gamma < 0:
        raise ParameterDomainError(f"gamma must be >= 0, got {gamma}")

    lam = np.array([eigenvalue(k) for k in range(1, K + 1)])
    terms = (values / lam**gamma) ** 2
    partial = float(terms.sum())
    tail = _power_tail(terms)
    if not tail <= 0.01 * partial:
        warnings.warn(
            f"C_F tail estimate {tail:.3g} exceeds 1% of the truncated sum {partial:.3g}; "
            f"increase K or gamma", RuntimeWarning, stacklevel=2)

    g = fourier_coeffs(spec.g, K, quad_tol) if g_coeffs is None else np.asarray(g_coeffs, dtype=float)
    f_g = float(g @ values)
    f_res = float((g / (1 + spec.mu * lam)) @ values)
    if abs(f_g) <= ADMISSIBILITY_EPS:
        raise AdmissibilityError(f"F[g] = {f_g:.3e} vanishes", "F[g] != 0")
    if abs(f_res) <= ADMISSIBILITY_EPS:
        raise AdmissibilityError(
            f"F[(I + mu A)^-1 g] = {f_res:.3e} vanishes", "F[(I + mu A)^-1 g] != 0")
    return Functional(kind, gamma, values, math.sqrt(partial), tail, f_g, f_res, x0)


@dataclass
class Observation:
    """Samples of ``Phi`` on ``mesh`` and, optionally, an analytic ``D^rho Phi``."""

    mesh: TimeMesh
    phi_samples: np.ndarray
    dphi: Optional[Callable] = None

    def __post_init__(self):
        self.phi_samples = np.asarray(self.phi_samples, dtype=float)
        if self.phi_samples.shape != (self.mesh.M + 1,):
            raise ShapeError(
                f"expected {self.mesh.M + 1} observation samples, got {self.phi_samples.shape}")

    @property
    def dphi_mode(self) -> str:
        return "analytic" if self.dphi is not None else "numeric-L1"

    @classmethod
    def from_function(cls, mesh: TimeMesh, phi: Callable, dphi: Optional[Callable] = None):
        return cls(mesh, np.asarray(phi(mesh.nodes), dtype=float), dphi)


def caputo_phi(obs: Observation, mesh: TimeMesh, rho: float) -> np.ndarray:
    """``D^rho Phi`` at ``t_1..t_M``."""
    if obs.dphi is not None:
        return np.asarray(obs.dphi(mesh.nodes[1:]), dtype=float) * np.ones(mesh.M)
    if mesh != obs.mesh:
        raise ShapeError("numeric D^rho Phi needs observations on the solver mesh")
    return caputo_l1(obs.phi_samples, mesh, rho)


def _caputo_phi_all(obs, mesh, rho):
    # t_0 value: the analytic callback, or 0 (Phi in C^1 has D^rho Phi(0) = 0)
    out = np.empty(mesh.M + 1)
    out[1:] = caputo_phi(obs, mesh, rho)
    out[0] = float(np.asarray(obs.dphi(0.0))) if obs.dphi is not None else 0.0
    return out


class ModalCache:
    """Modal problems that can contribute to ``B``: ``F[v_k] != 0`` and
    non-negligible data."""

    def __init__(self, spec: ProblemSpec, functional: Functional, mesh: TimeMesh,
                 phi_coeffs=None, g_coeffs=None, threads: int = 1):
        K = functional.K
        self.spec, self.mesh, self.threads = spec, mesh, threads
        self.phi_coeffs = fourier_coeffs(spec.phi, K) if phi_coeffs is None else np.asarray(phi_coeffs)
        self.g_coeffs = fourier_coeffs(spec.g, K) if g_coeffs is None else np.asarray(g_coeffs)
        scale_phi = 1e-14 * (1 + np.abs(self.phi_coeffs).max())
        scale_g = 1e-14 * (1 + np.abs(self.g_coeffs).max())
        bounds = spec.sigma_bounds(mesh)
        self.sigma_bounds = bounds
        self.problems: dict[int, ModalProblem] = {}
        for k in range(1, K + 1):
            i = k - 1
            if abs(functional.fv[i]) <= 1e-14 * (1 + np.abs(functional.fv).max()):
                continue
            if abs(self.phi_coeffs[i]) <= scale_phi and abs(self.g_coeffs[i]) <= scale_g:
                continue
            self.problems[k] = ModalProblem(spec, k, mesh, self.phi_coeffs[i],
                                            self.g_coeffs[i], bounds)

    def solve_all(self, r_samples, tol: float, max_sweeps: int) -> dict[int, np.ndarray]:
        def run(item):
            k, prob = item
            return k, prob.solve(r_samples, tol, max_sweeps)

        items = list(self.problems.items())
        if self.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return dict(pool.map(run, items))
        return dict(map(run, items))


def apply_B(r_samples, spec: ProblemSpec, functional: Functional, obs: Observation,
            modal_cache: ModalCache, mesh: TimeMesh, dphi_all: Optional[np.ndarray] = None,
            picard_tol: float = 1e-10, max_sweeps: int = 200) -> np.ndarray:
    """One application of the fixed-point operator at the mesh nodes."""
    r = np.asarray(r_samples, dtype=float)
    if r.shape != (mesh.M + 1,):
        raise ShapeError(f"expected {mesh.M + 1} source samples, got {r.shape}")
    if dphi_all is None:
        dphi_all = _caputo_phi_all(obs, mesh, spec.rho)
    total = np.zeros(mesh.M + 1)
    for k, u in modal_cache.solve_all(r, picard_tol, max_sweeps).items():
        lam = eigenvalue(k)
        total += lam / (1 + spec.mu * lam) * functional.fv[k - 1] * u
    sigma = spec.sigma(mesh.nodes)
    return (dphi_all + sigma * total) / functional.f_resolvent_g


@dataclass
class C1Bound:
    value: float
    log10: float
    norm_phi: float
    norm_g: float


def c1_bound(spec: ProblemSpec, functional: Functional, obs: Observation,
             mesh: Optional[TimeMesh] = None, phi_coeffs=None, g_coeffs=None,
             quad_tol: float = 1e-10) -> C1Bound:
    """A-priori bound on ``max |r|`` with ``D(A^gamma)`` norms truncated at ``K``.

    The Mittag-Leffler factor can overflow a double; ``log10`` is always finite
    unless the prefactor vanishes.
    """
    mesh = mesh or obs.mesh
    K = functional.K
    lam = np.array([eigenvalue(k) for k in range(1, K + 1)])
    phi = fourier_coeffs(spec.phi, K, quad_tol) if phi_coeffs is None else np.asarray(phi_coeffs)
    g = fourier_coeffs(spec.g, K, quad_tol) if g_coeffs is None else np.asarray(g_coeffs)
    w = lam ** (2 * functional.gamma)
    norm_phi = float(np.sqrt(w @ phi**2))
    norm_g = float(np.sqrt(w @ g**2))
    M_sig = spec.sigma_bounds(mesh)[1]
    f_res = abs(functional.f_resolvent_g)
    dphi = _caputo_phi_all(obs, mesh, spec.rho)
    pre = (np.max(np.abs(dphi)) / f_res
           + functional.c_f * M_sig * norm_phi / (spec.mu * f_res))
    arg = functional.c_f * M_sig * spec.T**spec.rho * norm_g / (spec.mu * f_res)
    if pre == 0:
        return C1Bound(0.0, -math.inf, norm_phi, norm_g)
    if arg > 0:
        log_e = log_mittag_leffler(arg, spec.rho, 1.0)
    else:
        log_e = 0.0
    log10 = math.log10(pre) + log_e / math.log(10)
    value = pre * math.exp(log_e) if log_e < 700 else math.inf
    return C1Bound(value, log10, norm_phi, norm_g)


@dataclass
class InverseResult:
    mesh: TimeMesh
    r_samples: np.ndarray
    iterations: int
    residual_history: list
    c1: C1Bound
    bound_violated: bool
    dphi_mode: str
    relaxation: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def c1_bound(self) -> float:
        return self.c1.value


def check_compatibility(functional: Functional, obs: Observation, phi_coeffs) -> float:
    """``|Phi(0) - F[phi]|``; raises when it exceeds the compatibility tolerance."""
    gap = abs(obs.phi_samples[0] - functional.apply(phi_coeffs))
    if gap > COMPATIBILITY_TOL:
        raise AdmissibilityError(
            f"Phi(0) differs from F[phi] by {gap:.3e}", "Phi(0) = F[phi]")
    return gap


def recover(spec: ProblemSpec, functional: Functional, obs: Observation,
            mesh: Optional[TimeMesh] = None, tol: float = 1e-8, max_iter: int = 500,
            r0=None, picard_tol: float = 1e-10, max_sweeps: int = 200,
            threads: int = 1, quad_tol: float = 1e-10) -> InverseResult:
    """Fixed-point iteration ``r <- B[r]``.

    Parameters
    ----------
    r0 : array_like or ``"zero"``, optional
        Initial iterate; the default is ``D^rho Phi / F[(I + mu A)^-1 g]``.

    Notes
    -----
    If consecutive updates point in opposite directions for five sweeps in a
    row the update is damped by 0.5 from then on.
    """
    mesh = mesh or obs.mesh
    if not tol > 0:
        raise ParameterDomainError(f"tol must be positive, got {tol}")
    spec = spec.with_source(None)
    K = functional.K
    phi_coeffs = fourier_coeffs(spec.phi, K, quad_tol)
    g_coeffs = fourier_coeffs(spec.g, K, quad_tol)
    gap = check_compatibility(functional, obs, phi_coeffs)
    cache = ModalCache(spec, functional, mesh, phi_coeffs, g_coeffs, threads)
    dphi_all = _caputo_phi_all(obs, mesh, spec.rho)
    c1 = c1_bound(spec, functional, obs, mesh, phi_coeffs, g_coeffs)

    if r0 is None:
        r = dphi_all / functional.f_resolvent_g
    elif isinstance(r0, str) and r0 == "zero":
        r = np.zeros(mesh.M + 1)
    else:
        r = np.asarray(r0, dtype=float).copy()
        if r.shape != (mesh.M + 1,):
            raise ShapeError(f"r0 must have {mesh.M + 1} samples")

    theta = 1.0
    history: list[float] = []
    prev_step = None
    flips = 0
    violated = False
    for it in range(1, max_iter + 1):
        step = apply_B(r, spec, functional, obs, cache, mesh, dphi_all,
                       picard_tol, max_sweeps) - r
        res = float(np.max(np.abs(step)))
        history.append(res)
        if res <= tol:
            violated = violated or float(np.max(np.abs(r))) > c1.value + 1e-6
            return InverseResult(
                mesh, r, it, history, c1, violated, obs.dphi_mode, theta,
                {"compatibility_gap": gap, "modes_used": sorted(cache.problems),
                 "phi_decay": decay_exponent(phi_coeffs),
                 "g_decay": decay_exponent(g_coeffs)})
        if prev_step is not None and float(step @ prev_step) < 0:
            flips += 1
            if flips >= 5 and theta == 1.0:
                theta = 0.5
                log.info("residuals oscillating; relaxing updates by 0.5")
        else:
            flips = 0
        prev_step = step
        r = r + theta * step
        violated = violated or float(np.max(np.abs(r))) > c1.value + 1e-6
    raise ConvergenceError(
        f"fixed-point iteration did not reach {tol:g} in {max_iter} sweeps", history)
