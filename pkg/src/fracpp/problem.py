"""Problem data and grid/field containers shared by both forward solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterDomainError, ShapeError
from .specfun import TimeMesh

ScalarFn = Callable[[np.ndarray], np.ndarray]


def vectorize_fn(fn: ScalarFn) -> ScalarFn:
    """Wrap ``fn`` so it always returns a float array shaped like its input.

    Constant callables such as ``lambda t: 1.0`` are broadcast.
    """

    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        val = np.asarray(fn(arr), dtype=float)
        out = np.broadcast_to(val, arr.shape).astype(float)
        return float(out) if np.ndim(x) == 0 else out

    wrapped.__wrapped__ = fn
    return wrapped


@dataclass(frozen=True)
class ProblemSpec:
    """Data of ``D^rho [u + mu A u] + sigma(t) A u = r(t) g``, ``u(0) = phi``.

    ``A = -d^2/dx^2`` on ``(0, 1)`` with homogeneous Dirichlet conditions.
    ``source_r`` is ``None`` for the inverse problem.
    """

    rho: float
    mu: float
    T: float
    sigma: ScalarFn
    phi: ScalarFn
    g: ScalarFn
    source_r: Optional[ScalarFn] = None

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise ParameterDomainError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.mu > 0:
            raise ParameterDomainError(f"mu must be positive, got {self.mu}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ParameterDomainError(f"T must be positive, got {self.T}")
        for name in ("sigma", "phi", "g", "source_r"):
            fn = getattr(self, name)
            if fn is not None and not hasattr(fn, "__wrapped__"):
                object.__setattr__(self, name, vectorize_fn(fn))
        probe = self.sigma(np.linspace(0.0, self.T, 4001))
        if not np.all(np.isfinite(probe)) or probe.min() <= 0:
            raise ParameterDomainError(
                f"sigma must be continuous with a positive minimum on [0, T]; "
                f"sampled min {probe.min():.6g}"
            )

    def sigma_bounds(self, mesh: TimeMesh) -> tuple[float, float]:
        """``(m_sigma, M_sigma)`` sampled on a 4x refinement of ``mesh``."""
        vals = self.sigma(mesh.refined(4))
        return float(vals.min()), float(vals.max())

    def with_source(self, source_r: Optional[ScalarFn]) -> "ProblemSpec":
        return ProblemSpec(self.rho, self.mu, self.T, self.sigma, self.phi, self.g, source_r)


@dataclass(frozen=True)
class SpaceGrid:
    N: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterDomainError(f"N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "h", 1.0 / self.N)
        nodes = np.arange(self.N + 1) / self.N
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)


@dataclass
class SolutionField:
    """Samples ``values[i, k] ~ u(x_i, t_k)`` with their grids."""

    space: SpaceGrid
    time: TimeMesh
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.space.N + 1, self.time.M + 1)
        if self.values.shape != shape:
            raise ShapeError(f"field shape {self.values.shape} != {shape}")

    def slice_at(self, k: int) -> np.ndarray:
        return self.values[:, k]
