"""Run configuration: YAML text <-> validated :class:`RunConfig`.

Function-valued fields are expression strings (see :mod:`fracpp.expr`):
``sigma``, ``r``, ``observation`` and ``observation_caputo`` are in ``t``;
``phi`` and ``g`` in ``x``; ``exact`` in ``x`` and ``t``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import yaml

from .errors import ConfigError, FracppError
from .expr import compile_function, parse_expr
from .problem import ProblemSpec, SpaceGrid
from .specfun import TimeMesh

MODES = ("forward-fd", "forward-spectral", "inverse", "convergence", "reproduce-paper")
FUNCTIONALS = ("point", "flux", "flux_right", "mean")

_T_FIELDS = ("sigma", "r", "observation", "observation_caputo")
_X_FIELDS = ("phi", "g")


def default_grading(rho: float) -> float:
    return max(1.0, (2.0 - rho) / rho)


@dataclass
class ProblemConfig:
    rho: float = 0.5
    mu: float = 1.0
    T: float = 1.0
    sigma: str = "1"
    phi: str = "0"
    g: str = "sin(pi*x)"
    r: Optional[str] = None
    exact: Optional[str] = None
    observation: Optional[str] = None
    observation_caputo: Optional[str] = None


@dataclass
class Discretization:
    N: int = 200
    M: int = 100
    grading: Optional[float] = None
    K: int = 64


@dataclass
class Tolerances:
    quadrature_tol: float = 1e-10
    picard_tol: float = 1e-10
    picard_max_sweeps: int = 200
    inverse_tol: float = 1e-8
    max_iter: int = 500


@dataclass
class InverseSettings:
    functional: str = "mean"
    x0: Optional[float] = None
    gamma: Optional[float] = None


@dataclass
class ConvergenceSettings:
    refinements: int = 3
    base_M: int = 20
    base_N: int = 16


@dataclass
class OutputSettings:
    out: Optional[str] = None


@dataclass
class RunConfig:
    mode: str = "forward-fd"
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    discretization: Discretization = field(default_factory=Discretization)
    tolerances: Tolerances = field(default_factory=Tolerances)
    inverse: InverseSettings = field(default_factory=InverseSettings)
    convergence: ConvergenceSettings = field(default_factory=ConvergenceSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping at the top level")
        sections = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        for name, section_cls in _SECTION_TYPES.items():
            if name in data:
                kwargs[name] = _build_section(section_cls, data[name], name)
        if "mode" in data:
            kwargs["mode"] = str(data["mode"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_yaml(fh.read())

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        p, d, tol = self.problem, self.discretization, self.tolerances
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        _check(0 < p.rho < 1, f"rho must lie in (0, 1), got {p.rho}")
        _check(p.mu > 0, f"mu must be positive, got {p.mu}")
        _check(math.isfinite(p.T) and p.T > 0, f"T must be positive, got {p.T}")
        _check(d.N >= 2, f"N must be >= 2, got {d.N}")
        _check(d.M >= 1, f"M must be >= 1, got {d.M}")
        _check(d.K >= 1, f"K must be >= 1, got {d.K}")
        _check(d.grading is None or d.grading >= 1, f"grading must be >= 1, got {d.grading}")
        for name in ("quadrature_tol", "picard_tol", "inverse_tol"):
            _check(getattr(tol, name) > 0, f"{name} must be positive")
        _check(tol.max_iter >= 1 and tol.picard_max_sweeps >= 1, "iteration caps must be >= 1")
        _check(self.inverse.functional in FUNCTIONALS,
               f"functional must be one of {', '.join(FUNCTIONALS)}")
        if self.inverse.functional == "point":
            x0 = self.inverse.x0
            _check(x0 is not None and 0 <= x0 <= 1, "point functional needs x0 in [0, 1]")
        _check(self.convergence.refinements >= 1, "refinements must be >= 1")

        for name in _T_FIELDS + _X_FIELDS + ("exact",):
            src = getattr(p, name)
            if src is not None:
                variables = ("x", "t") if name == "exact" else (("t",) if name in _T_FIELDS else ("x",))
                try:
                    parse_expr(src, variables)
                except FracppError as exc:
                    raise ConfigError(f"problem.{name}: {exc}") from exc

        needs = {
            "forward-fd": ("r",),
            "forward-spectral": ("r",),
            "convergence": ("r", "exact"),
            "inverse": (),
            "reproduce-paper": (),
        }[self.mode]
        for name in needs:
            _check(getattr(p, name) is not None, f"mode {self.mode} needs problem.{name}")

    # -- derived objects --------------------------------------------------

    @property
    def grading(self) -> float:
        g = self.discretization.grading
        return default_grading(self.problem.rho) if g is None else g

    def mesh(self, M: Optional[int] = None) -> TimeMesh:
        return TimeMesh(self.problem.T, M or self.discretization.M, self.grading)

    def grid(self, N: Optional[int] = None) -> SpaceGrid:
        return SpaceGrid(N or self.discretization.N)

    def function(self, name: str):
        src = getattr(self.problem, name)
        if src is None:
            return None
        if name == "exact":
            ast = parse_expr(src, ("x", "t"))
            return lambda x, t: ast.evaluate(x=x, t=t)
        return compile_function(src, "t" if name in _T_FIELDS else "x")

    def build_spec(self, with_source: bool = True) -> ProblemSpec:
        p = self.problem
        return ProblemSpec(
            p.rho, p.mu, p.T,
            self.function("sigma"), self.function("phi"), self.function("g"),
            self.function("r") if with_source else None,
        )


_SECTION_TYPES = {
    "problem": ProblemConfig,
    "discretization": Discretization,
    "tolerances": Tolerances,
    "inverse": InverseSettings,
    "convergence": ConvergenceSettings,
    "output": OutputSettings,
}

_INT_FIELDS = {"N", "M", "K", "max_iter", "picard_max_sweeps", "refinements", "base_M", "base_N"}
_FLOAT_FIELDS = {"rho", "mu", "T", "grading", "quadrature_tol", "picard_tol", "inverse_tol",
                 "x0", "gamma"}


def _check(ok, message):
    if not ok:
        raise ConfigError(message)


def _coerce(name, value, section):
    if value is None:
        return None
    try:
        if name in _INT_FIELDS:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if name in _FLOAT_FIELDS:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{name}: expected a number, got {value!r}") from None
    return str(value)


def _build_section(section_cls, data, section):
    if data is None:
        return section_cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    allowed = {f.name for f in fields(section_cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")
    return section_cls(**{k: _coerce(k, v, section) for k, v in data.items()})
