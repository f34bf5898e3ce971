from __future__ import annotations

import math
import pathlib

import numpy as np
import pytest

from fracpp.config import RunConfig
from fracpp.errors import ConfigError
from fracpp.experiments import bench_exact, bench_r, benchmark_spec

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_load_and_round_trip(name):
    cfg = RunConfig.load(str(CONFIGS / name))
    again = RunConfig.from_yaml(cfg.to_yaml())
    assert again == cfg
    assert again.sha256() == cfg.sha256()


def test_benchmark_config_matches_builtin_problem():
    cfg = RunConfig.load(str(CONFIGS / "benchmark_forward.yaml"))
    spec, ref = cfg.build_spec(), benchmark_spec()
    t = np.linspace(0, 5, 11)
    x = np.linspace(0, 1, 11)
    assert np.allclose(spec.source_r(t), bench_r(t), rtol=1e-14)
    assert np.allclose(spec.sigma(t), ref.sigma(t), rtol=1e-15)
    assert np.allclose(spec.phi(x), ref.phi(x), atol=1e-15)
    assert np.allclose(spec.g(x), ref.g(x), atol=1e-14)
    assert np.allclose(cfg.function("exact")(0.5, t), bench_exact(0.5, t), rtol=1e-15)


def test_convergence_config_gamma_literal():
    cfg = RunConfig.load(str(CONFIGS / "manufactured_convergence.yaml"))
    r = cfg.function("r")
    # r(0) = (1 + pi^2) Gamma(3/2) + pi^2
    assert r(0.0) == pytest.approx((1 + math.pi**2) * math.gamma(1.5) + math.pi**2, rel=1e-15)


def test_defaults_and_grading():
    cfg = RunConfig.from_dict({"problem": {"rho": 0.25, "r": "1"}})
    assert cfg.grading == pytest.approx(7.0)
    assert cfg.mesh().grading == pytest.approx(7.0)
    cfg = RunConfig.from_dict({"problem": {"r": "1"}, "discretization": {"grading": 1}})
    assert cfg.grading == 1.0


def test_integer_coercion():
    cfg = RunConfig.from_dict({"problem": {"r": "1"}, "discretization": {"N": 64.0, "M": "10"}})
    assert cfg.discretization.N == 64 and cfg.discretization.M == 10


@pytest.mark.parametrize("data,match", [
    ({"problem": {"rho": 1.0, "r": "1"}}, "rho"),
    ({"problem": {"rho": 0.0, "r": "1"}}, "rho"),
    ({"problem": {"mu": 0, "r": "1"}}, "mu"),
    ({"problem": {"T": -1, "r": "1"}}, "T"),
    ({"problem": {"r": "1"}, "discretization": {"N": 1}}, "N"),
    ({"problem": {"r": "1"}, "discretization": {"M": 0}}, "M"),
    ({"problem": {"r": "1"}, "discretization": {"grading": 0.5}}, "grading"),
    ({"problem": {"r": "1"}, "discretization": {"N": 2.5}}, "expected a number"),
    ({"problem": {"rho": "half", "r": "1"}}, "expected a number"),
    ({"problem": {"r": "1"}, "bogus": 1}, "unknown top-level"),
    ({"problem": {"r": "1", "psi": "x"}}, "unknown key"),
    ({"mode": "sideways", "problem": {"r": "1"}}, "mode"),
    ({"problem": {}}, "needs problem.r"),
    ({"mode": "convergence", "problem": {"r": "1"}}, "needs problem.exact"),
    ({"problem": {"r": "1", "sigma": "1 + x"}}, "problem.sigma"),
    ({"problem": {"r": "1", "phi": "sin(pi*x"}}, "offset 9"),
    ({"mode": "inverse", "inverse": {"functional": "point"}}, "x0"),
    ({"mode": "inverse", "inverse": {"functional": "median"}}, "functional"),
    ({"problem": {"r": "1"}, "tolerances": {"picard_tol": 0}}, "picard_tol"),
    ({"problem": "not a mapping"}, "mapping"),
])
def test_validation_errors(data, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_dict(data)


def test_malformed_yaml():
    with pytest.raises(ConfigError, match="malformed YAML"):
        RunConfig.from_yaml("problem: [unclosed")


def test_config_error_exit_code():
    assert ConfigError.exit_code == 2
