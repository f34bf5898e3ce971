"""Mittag-Leffler function and the L1 Caputo discretisation.

The two-parameter Mittag-Leffler function is evaluated on the real axis by
three branches:

* ``|z| <= 1``: the defining power series (bounded terms, no cancellation);
* ``-50 < z < -1``: trapezoidal quadrature of the inverse Laplace transform
  ``E(z) = (2 pi i)^-1 \\int e^s s^(rho - beta) / (s^rho - z) ds`` on the
  parabola ``s(u) = mu (1 + i u)^2``, which wraps the branch cut of
  ``s^rho`` and has no pole to its right for ``z < 0``;
* ``z <= -50``: the algebraic asymptotic expansion with optimal truncation.

Positive arguments use the series (all terms positive) or the exponential
asymptote when ``z^(1/rho)`` is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import ParameterDomainError, ShapeError

SERIES_RADIUS = 1.0
ASYMPTOTIC_RADIUS = 50.0

# parabolic contour: crossing point, step and half-length in the u variable
_CONTOUR_MU = 6.0
_CONTOUR_STEP = 0.06
_CONTOUR_NODES = 55
_CHUNK = 8192


@dataclass(frozen=True)
class MLParams:
    rho: float
    beta: float = 1.0

    def __post_init__(self):
        rho, beta = float(self.rho), float(self.beta)
        if not (math.isfinite(rho) and 0.0 < rho <= 1.0):
            raise ParameterDomainError(f"rho must lie in (0, 1], got {self.rho}")
        if not (math.isfinite(beta) and beta > 0.0):
            raise ParameterDomainError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "beta", beta)


def _series(z, rho, beta):
    # |z| <= 1: 1/Gamma(x) < 1e-17 once x >= 20
    nterms = int(math.ceil(max(0.0, 20.0 - beta) / rho)) + 2
    out = np.zeros_like(z)
    power = np.ones_like(z)
    for k in range(nterms):
        out += power * rgamma(k * rho + beta)
        power = power * z
    return out


def _contour(z, rho, beta):
    u = _CONTOUR_STEP * np.arange(_CONTOUR_NODES)
    s = _CONTOUR_MU * (1.0 + 1j * u) ** 2
    ds = 2j * _CONTOUR_MU * (1.0 + 1j * u)
    w = _CONTOUR_STEP * np.exp(s) * s ** (rho - beta) * ds / (2j * np.pi)
    # conjugate symmetry: the u < 0 half mirrors u > 0
    w[1:] *= 2.0
    a = s**rho
    out = np.empty_like(z)
    for lo in range(0, z.size, _CHUNK):
        zc = z[lo : lo + _CHUNK]
        out[lo : lo + _CHUNK] = np.real(w / (a - zc[:, None])).sum(axis=1)
    return out


def _asymptotic(z, rho, beta, nmax=400):
    """-sum_{n>=1} z^-n / Gamma(beta - rho n) with optimal truncation.

    Truncation follows the smooth envelope |z|^-n Gamma(1 - beta + rho n) / pi
    of the terms; the raw terms dip near poles of Gamma and would stop the
    sum too early. Returns the sum and the envelope at the cut.
    """
    out = np.zeros_like(z)
    logx = np.log(np.abs(z))
    envelope = np.full_like(z, np.inf)
    done = np.zeros(z.shape, dtype=bool)
    inv = 1.0 / z
    power = np.ones_like(z)
    for n in range(1, nmax):
        power = power * inv
        a = 1.0 - beta + rho * n
        if a > 0:
            env = np.exp(gammaln(a) - n * logx) / np.pi
            done |= env > envelope
            envelope = np.where(done, envelope, env)
        live = ~done
        out = np.where(live, out - power * rgamma(beta - rho * n), out)
        if np.all(done | (envelope <= 1e-18 * np.maximum(np.abs(out), 1e-300))):
            break
    return out, envelope


def _positive(z, rho, beta):
    w = z ** (1.0 / rho)
    out = np.empty_like(z)
    small = w <= 40.0
    if np.any(small):
        zs = z[small]
        logz = np.log(zs)
        total = np.zeros_like(zs)
        k = 0
        while True:
            term = np.exp(k * logz - gammaln(k * rho + beta))
            total += term
            # terms decrease once k rho + beta passes the peak near w
            if k * rho + beta > w[small].max() + 1 and np.all(term <= 1e-17 * total):
                break
            k += 1
        out[small] = total
    big = ~small
    if np.any(big):
        zb = z[big]
        alg, _ = _asymptotic(zb, rho, beta)
        with np.errstate(over="ignore"):
            out[big] = zb ** ((1.0 - beta) / rho) * np.exp(w[big]) / rho + alg
    return out


def mittag_leffler(z, rho, beta=1.0):
    """Evaluate ``E_{rho,beta}(z)`` for real ``z``.

    Parameters
    ----------
    z : float or array_like
        Real argument(s).
    rho : float
        Order in ``(0, 1]``.
    beta : float
        Second parameter, ``beta > 0``.

    Returns
    -------
    float or ndarray
        Same shape as ``z``. Absolute error is at most ``1e-12`` on
        ``[-1e8, 0]``.
    """
    p = MLParams(rho, beta)
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if not np.all(np.isfinite(zz)):
        raise ParameterDomainError("Mittag-Leffler argument must be finite")
    out = np.empty_like(zz)

    if p.rho == 1.0 and p.beta == 1.0:
        with np.errstate(over="ignore"):
            out = np.exp(zz)
    else:
        pos = zz > SERIES_RADIUS
        ser = np.abs(zz) <= SERIES_RADIUS
        asy = zz <= -ASYMPTOTIC_RADIUS
        mid = ~(pos | ser | asy)
        if np.any(ser):
            if (20.0 - p.beta) / p.rho > 5000:
                mid |= ser
                ser[:] = False
            else:
                out[ser] = _series(zz[ser], p.rho, p.beta)
        if np.any(asy):
            val, remainder = _asymptotic(zz[asy], p.rho, p.beta)
            out[asy] = val
            # extreme parameters where the expansion is not yet sharp
            loose = remainder > 1e-16
            if np.any(loose):
                idx = np.flatnonzero(asy)[loose]
                mid[idx] = True
        if np.any(mid):
            out[mid] = _contour(zz[mid], p.rho, p.beta)
        if np.any(pos):
            out[pos] = _positive(zz[pos], p.rho, p.beta)

    out = out.reshape(np.shape(z))
    return float(out) if scalar else out


def ml(params: MLParams, z):
    """``E_{rho,beta}(z)`` with parameters bundled in :class:`MLParams`."""
    return mittag_leffler(z, params.rho, params.beta)


def log_mittag_leffler(z, rho, beta=1.0) -> float:
    """Natural log of ``E_{rho,beta}(z)`` for ``z > 0`` without overflow."""
    p = MLParams(rho, beta)
    z = float(z)
    if z <= 0.0:
        raise ParameterDomainError("log_mittag_leffler needs z > 0")
    w = z ** (1.0 / p.rho)
    if w <= 600.0:
        return math.log(mittag_leffler(z, p.rho, p.beta))
    # algebraic corrections are below e^-600 relative
    return w + (1.0 - p.beta) / p.rho * math.log(z) - math.log(p.rho)


def ml_derivative_kernel(rho, lam, t):
    """``lam t^(rho-1) E_{rho,rho}(-lam t^rho)``.

    Integrates to ``1 - E_{rho,1}(-lam t^rho)`` over ``[0, t]``. Singular at
    ``t = 0`` when ``rho < 1``.
    """
    MLParams(rho, rho)
    if not lam > 0:
        raise ParameterDomainError(f"lambda must be positive, got {lam}")
    tt = np.asarray(t, dtype=float)
    if np.any(tt <= 0):
        raise ParameterDomainError("kernel is defined for t > 0 only")
    val = lam * tt ** (rho - 1.0) * mittag_leffler(-lam * tt**rho, rho, rho)
    return float(val) if np.ndim(t) == 0 else val


@dataclass(frozen=True)
class TimeMesh:
    """Graded temporal mesh ``t_k = T (k/M)^grading``, ``k = 0..M``."""

    T: float
    M: int
    grading: float = 1.0
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    steps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ParameterDomainError(f"T must be positive, got {self.T}")
        if int(self.M) != self.M or self.M < 1:
            raise ParameterDomainError(f"M must be an integer >= 1, got {self.M}")
        if not (math.isfinite(self.grading) and self.grading >= 1.0):
            raise ParameterDomainError(f"grading must be >= 1, got {self.grading}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "grading", float(self.grading))
        frac = np.arange(self.M + 1) / self.M
        nodes = self.T * frac**self.grading
        nodes[-1] = self.T
        steps = np.diff(nodes)
        nodes.flags.writeable = False
        steps.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "steps", steps)

    def refined(self, factor: int) -> np.ndarray:
        """Nodes with each step split uniformly into ``factor`` pieces."""
        frac = np.arange(factor) / factor
        inner = self.nodes[:-1, None] + self.steps[:, None] * frac[None, :]
        return np.append(inner.ravel(), self.T)


def _check_l1_order(rho):
    if not (0.0 < rho < 1.0):
        raise ParameterDomainError(f"L1 scheme needs 0 < rho < 1, got {rho}")


def l1_weights(mesh: TimeMesh, rho: float, k: int) -> np.ndarray:
    """Weights ``d_{k,1}, ..., d_{k,k}`` of the non-uniform L1 scheme."""
    _check_l1_order(rho)
    if not 1 <= k <= mesh.M:
        raise IndexError(f"step index {k} outside 1..{mesh.M}")
    t = mesh.nodes
    tau = mesh.steps[:k]
    # gap_j = t_k - t_j for j = 1..k; the numerator is
    # (gap + tau)^(1-rho) - gap^(1-rho), formed without cancellation
    gap = t[k] - t[1 : k + 1]
    d = np.empty(k)
    inner = gap[:-1]
    d[:-1] = inner ** (1 - rho) * np.expm1((1 - rho) * np.log1p(tau[:-1] / inner)) / tau[:-1]
    d[-1] = tau[-1] ** (-rho)
    return d


def l1_matrix(mesh: TimeMesh, rho: float) -> np.ndarray:
    """``(M, M)`` lower-triangular array with row ``k-1`` holding ``d_{k,1..k}``."""
    out = np.zeros((mesh.M, mesh.M))
    for k in range(1, mesh.M + 1):
        out[k - 1, :k] = l1_weights(mesh, rho, k)
    return out


def caputo_l1(samples, mesh: TimeMesh, rho: float) -> np.ndarray:
    """L1 approximation of the Caputo derivative at ``t_1..t_M``."""
    u = np.asarray(samples, dtype=float)
    if u.shape != (mesh.M + 1,):
        raise ShapeError(f"expected {mesh.M + 1} samples, got shape {u.shape}")
    return l1_matrix(mesh, rho) @ np.diff(u) / math.gamma(2 - rho)
