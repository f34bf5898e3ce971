from __future__ import annotations

import math

import numpy as np
import pytest

from fracpp.experiments import (
    bench_exact, bench_mean_observation, bench_mean_observation_caputo, bench_mode1, bench_r,
    benchmark_spec, convergence_study, manufactured_spatial, manufactured_temporal,
    reproduce_paper,
)
from fracpp.problem import ProblemSpec
from fracpp.reporting import read_csv
from fracpp.specfun import TimeMesh, caputo_l1

PI = math.pi


@pytest.fixture(scope="module")
def reproduction(tmp_path_factory):
    out = tmp_path_factory.mktemp("repro")
    return out, reproduce_paper(str(out))


def test_reproduction_midpoint_values(reproduction):
    _, rep = reproduction
    assert rep["u_fd_mid_0"] == pytest.approx(2.0, abs=1e-12)
    assert rep["u_spectral_mid_0"] == pytest.approx(2.0, abs=1e-12)
    assert rep["u_fd_mid_T"] == pytest.approx(52.0, abs=0.02)
    assert rep["u_spectral_mid_T"] == pytest.approx(52.0, abs=0.02)


def test_reproduction_boundaries_and_files(reproduction):
    out, rep = reproduction
    for field in rep["fields"]:
        assert np.all(field.values[0] == 0) and np.all(field.values[-1] == 0)
    surf = read_csv(str(out / "surface_fd.csv"))
    assert list(surf) == ["x", "t", "u"] and len(surf["u"]) == 1001 * 101
    sl = read_csv(str(out / "slice_T.csv"))
    assert list(sl) == ["x", "u_fd", "u_spectral", "u_exact"]
    assert np.max(np.abs(sl["u_fd"] - sl["u_exact"])) <= rep["fd_max_err"]
    errs = read_csv(str(out / "errors.csv"))
    assert np.max(errs["fd_max_err"]) == pytest.approx(rep["fd_max_err"], rel=1e-15)
    assert rep["fd_min_dominance_margin"] > 0


def test_benchmark_functions_are_consistent():
    t = np.linspace(0, 5, 9)
    # sine coefficient of the exact solution and the mean of u
    assert np.allclose(bench_mode1(t), math.sqrt(2) * (1 + t**2))
    from scipy.integrate import quad
    for tt in (0.0, 1.3, 5.0):
        mean = quad(lambda x: bench_exact(x, tt), 0, 1)[0]
        assert bench_mean_observation(tt) == pytest.approx(mean, rel=1e-12)
    # Caputo derivative of the mean against a fine L1 evaluation
    mesh = TimeMesh(5.0, 4000, 3.0)
    num = caputo_l1(bench_mean_observation(mesh.nodes), mesh, 0.5)
    assert np.max(np.abs(num - bench_mean_observation_caputo(mesh.nodes[1:]))) < 1e-3


def test_benchmark_source_from_mode_equation():
    # mode 1: (1 + mu lam) D^rho a + sigma lam a = r g_1, a = sqrt(2)(1 + t^2), g_1 = 1 + pi^2
    t = np.linspace(0, 5, 11)
    lam = PI**2
    d_a = math.sqrt(2) * 2 * t**1.5 / math.gamma(2.5)
    want = ((1 + lam) * d_a + (2 + np.sqrt(t)) * lam * math.sqrt(2) * (1 + t**2)) / (1 + lam)
    assert np.allclose(bench_r(t), want, rtol=1e-14)


def test_zero_solution_study_reports_no_orders():
    spec = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: 0 * x, lambda x: 0 * x,
                       lambda t: 0 * t)
    table = convergence_study(spec, lambda x, t: 0 * x * t, refinements=2, N=8, M=8,
                              base_M=4, base_N=4)
    for part in ("temporal", "spatial"):
        assert table[part]["max_err"] == [0.0, 0.0, 0.0]
        assert table[part]["orders"] == [None, None]
        assert table[part]["richardson_orders"] == [None]


def test_temporal_order_on_singular_manufactured_problem():
    m = manufactured_temporal()
    table = convergence_study(m.spec, m.exact, refinements=3, N=32, M=40, base_M=40, base_N=8)
    rich = table["temporal"]["richardson_orders"]
    assert rich[-1] >= 1.4 and rich[0] < rich[-1]
    # errors against u itself sit on the O(h^2) floor of N = 32, hence the
    # level-difference estimate above
    h2 = (1 / 32) ** 2
    assert all(e < 2 * h2 for e in table["temporal"]["max_err"][1:])


def test_spatial_orders_on_smooth_manufactured_problem():
    m = manufactured_spatial()
    table = convergence_study(m.spec, m.exact, refinements=3, N=8, M=50, base_M=10, base_N=8)
    assert all(1.8 <= o <= 2.2 for o in table["spatial"]["orders"])
    assert all(3.2 <= q <= 4.8 for q in table["spatial"]["ratios"])


def test_threaded_study_matches_serial():
    m = manufactured_spatial()
    kw = dict(refinements=1, N=8, M=10, base_M=5, base_N=4)
    a = convergence_study(m.spec, m.exact, threads=1, **kw)
    b = convergence_study(m.spec, m.exact, threads=3, **kw)
    assert a == b
