from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from fracpp.errors import AdmissibilityError, ConvergenceError, ParameterDomainError, ShapeError
from fracpp.experiments import (
    bench_mean_observation, bench_mean_observation_caputo, bench_r, benchmark_grading,
    benchmark_spec,
)
from fracpp.inverse import (
    ModalCache, Observation, apply_B, c1_bound, caputo_phi, decay_exponent, functional_values,
    make_functional, recover,
)
from fracpp.problem import ProblemSpec
from fracpp.spectral import fourier_coeffs, solve_spectral
from fracpp.specfun import TimeMesh

PI = math.pi
SQRT2 = math.sqrt(2)


def quiet_functional(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return make_functional(*args, **kw)


# -- functionals -------------------------------------------------------------

def test_mean_functional_closed_form():
    fv = functional_values("mean", 6)
    assert fv[0] == pytest.approx(2 * SQRT2 / PI, rel=1e-15)
    assert fv[1] == 0 and fv[3] == 0
    assert fv[4] == pytest.approx(2 * SQRT2 / (5 * PI), rel=1e-15)


def test_point_and_flux_closed_forms():
    fv = functional_values("point", 4, 0.25)
    assert np.allclose(fv, SQRT2 * np.sin(np.arange(1, 5) * PI / 4))
    fl = functional_values("flux_right", 3)
    assert np.allclose(fl, SQRT2 * PI * np.array([-1, 2, -3]))


def test_functional_values_match_quadrature():
    # F[v_k] computed directly from v_k = sqrt(2) sin(k pi x)
    from scipy.integrate import quad
    for k in range(1, 6):
        mean = quad(lambda x: SQRT2 * np.sin(k * PI * x), 0, 1)[0]
        assert functional_values("mean", k)[-1] == pytest.approx(mean, abs=1e-13)


def test_point_requires_x0():
    with pytest.raises(ParameterDomainError):
        functional_values("point", 3)
    with pytest.raises(ParameterDomainError):
        functional_values("point", 3, 1.5)


def test_default_gamma_per_kind():
    spec = benchmark_spec(False)
    assert quiet_functional("point", spec, 8, x0=0.3).gamma == 0.5
    assert quiet_functional("flux", spec, 8).gamma == 1.0
    assert quiet_functional("mean", spec, 8).gamma == 0.0


def test_resolvent_example_with_unit_mu():
    # g = h - mu h'' with h = sin(pi x), so (I + mu A)^-1 g = h and F[h] = 2 / pi
    spec = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: np.sin(PI * x),
                       lambda x: (1 + PI**2) * np.sin(PI * x))
    F = quiet_functional("mean", spec, 16)
    assert F.f_g == pytest.approx((1 + PI**2) * 2 / PI, abs=1e-9)
    assert F.f_resolvent_g == pytest.approx(2 / PI, abs=1e-9)


def test_admissibility_rejects_vanishing_point_value():
    spec = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: np.sin(PI * x),
                       lambda x: np.sin(2 * PI * x))
    with pytest.raises(AdmissibilityError) as info:
        quiet_functional("point", spec, 8, x0=0.5)
    assert info.value.condition == "F[g] != 0"


def test_tail_warning_for_slowly_decaying_functional():
    spec = benchmark_spec(False)
    with pytest.warns(RuntimeWarning, match="C_F tail"):
        make_functional("mean", spec, 16)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        F = make_functional("point", spec, 16, x0=0.5, gamma=1.0)
    assert F.c_f_tail <= 0.01 * F.c_f**2


def test_custom_functional_validation():
    spec = benchmark_spec(False)
    with pytest.raises(ParameterDomainError):
        make_functional("custom", spec, 4, fv=[1, 0, 0, 0])
    with pytest.raises(ShapeError):
        make_functional("custom", spec, 4, fv=[1, 0], gamma=1.0)
    F = quiet_functional("custom", spec, 4, fv=[1, 0, 0, 0], gamma=1.0)
    # g = sqrt(2)(1 + pi^2) sin(pi x) has g_1 = 1 + pi^2
    assert F.f_g == pytest.approx(1 + PI**2, rel=1e-9)


def test_decay_exponent():
    k = np.arange(1, 33)
    assert decay_exponent(k**-3.0) == pytest.approx(3.0)
    assert decay_exponent(np.r_[1.0, np.zeros(10)]) == math.inf


# -- observations and D^rho Phi ----------------------------------------------

def test_caputo_of_constant_observation_is_zero():
    mesh = TimeMesh(1.0, 20, 2.0)
    obs = Observation(mesh, np.full(21, 3.0))
    assert np.all(caputo_phi(obs, mesh, 0.5) == 0)


def test_numeric_and_analytic_caputo_agree_under_refinement():
    gaps = []
    for M in (50, 100, 200):
        mesh = TimeMesh(5.0, M, benchmark_grading())
        num = caputo_phi(Observation.from_function(mesh, bench_mean_observation), mesh, 0.5)
        ana = bench_mean_observation_caputo(mesh.nodes[1:])
        gaps.append(np.max(np.abs(num - ana)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert math.log2(gaps[1] / gaps[2]) > 1.3


def test_observation_shape_checked():
    with pytest.raises(ShapeError):
        Observation(TimeMesh(1.0, 4), np.zeros(3))


# -- B and recovery ----------------------------------------------------------

@pytest.fixture(scope="module")
def bench_setup():
    spec = benchmark_spec(False)
    mesh = TimeMesh(5.0, 200, benchmark_grading())
    F = quiet_functional("mean", spec, 16)
    obs = Observation.from_function(mesh, bench_mean_observation, bench_mean_observation_caputo)
    return spec, mesh, F, obs


def test_zero_data_is_fixed_point():
    spec = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: 0 * x, lambda x: np.sin(PI * x))
    mesh = TimeMesh(1.0, 20, 2.0)
    F = quiet_functional("mean", spec, 8)
    obs = Observation(mesh, np.zeros(21))
    B = apply_B(np.zeros(21), spec, F, obs, ModalCache(spec, F, mesh), mesh)
    assert np.all(B == 0)
    assert c1_bound(spec, F, obs, mesh).value == 0


def test_true_source_is_near_fixed_point(bench_setup):
    spec, mesh, F, obs = bench_setup
    r_true = bench_r(mesh.nodes)
    B = apply_B(r_true, spec, F, obs, ModalCache(spec, F, mesh), mesh)
    assert np.max(np.abs(B - r_true)) / np.max(r_true) < 1e-4


def test_inverse_crime_with_spectral_observation(bench_setup):
    spec, mesh, F, _ = bench_setup
    modes = solve_spectral(benchmark_spec(), mesh, 16)
    obs = Observation(mesh, F.fv @ modes.mode_solutions)
    r_true = bench_r(mesh.nodes)
    B = apply_B(r_true, spec, F, obs, ModalCache(spec, F, mesh), mesh)
    assert np.max(np.abs(B - r_true)) / np.max(r_true) < 2e-4
    res = recover(spec, F, obs, mesh, tol=1e-8)
    assert res.dphi_mode == "numeric-L1"
    assert np.max(np.abs(res.r_samples - r_true)) / np.max(r_true) < 1e-3


def test_benchmark_recovery(bench_setup):
    spec, mesh, F, obs = bench_setup
    res = recover(spec, F, obs, mesh, tol=1e-8)
    r_true = bench_r(mesh.nodes)
    assert np.max(np.abs(res.r_samples - r_true)) / np.max(r_true) <= 1e-3
    assert res.residual_history[-1] <= 1e-8
    assert res.dphi_mode == "analytic"
    # the accepted iterate is a fixed point to tolerance
    B = apply_B(res.r_samples, spec, F, obs, ModalCache(spec, F, mesh), mesh)
    assert np.max(np.abs(B - res.r_samples)) <= 1e-8
    assert not res.bound_violated
    assert np.max(np.abs(res.r_samples)) <= res.c1_bound + 1e-6
    assert res.c1.log10 > 0


def test_initial_guesses_reach_same_limit(bench_setup):
    spec, mesh, F, obs = bench_setup
    a = recover(spec, F, obs, mesh, tol=1e-8)
    b = recover(spec, F, obs, mesh, tol=1e-8, r0="zero")
    assert np.max(np.abs(a.r_samples - b.r_samples)) <= 10 * 1e-8


def test_max_iter_exceeded_carries_history(bench_setup):
    spec, mesh, F, obs = bench_setup
    with pytest.raises(ConvergenceError) as info:
        recover(spec, F, obs, mesh, tol=1e-12, max_iter=3)
    assert len(info.value.residual_history) == 3


def test_incompatible_observation_rejected(bench_setup):
    spec, mesh, F, obs = bench_setup
    bad = Observation(mesh, obs.phi_samples + 0.1)
    with pytest.raises(AdmissibilityError) as info:
        recover(spec, F, bad, mesh)
    assert info.value.condition == "Phi(0) = F[phi]"


def u1_problem(rho=0.5, mu=1.0):
    # u = t v_1, phi = 0, g = v_1, sigma = 1: r = (1 + mu lam) t^{1-rho} / Gamma(2-rho) + lam t
    lam = PI**2
    spec = ProblemSpec(rho, mu, 1.0, lambda t: np.ones_like(t), lambda x: 0 * x,
                       lambda x: SQRT2 * np.sin(PI * x))

    def r(t):
        return (1 + mu * lam) * t ** (1 - rho) / math.gamma(2 - rho) + lam * t
    return spec, r


@pytest.mark.parametrize("kind,x0", [("mean", None), ("point", 0.5)])
def test_manufactured_single_mode_recovery(kind, x0):
    spec, r = u1_problem()
    mesh = TimeMesh(1.0, 100, 3.0)
    F = quiet_functional(kind, spec, 8, x0=x0)
    f1 = F.fv[0]
    obs = Observation.from_function(mesh, lambda t: f1 * t,
                                    lambda t: f1 * t**0.5 / math.gamma(1.5))
    res = recover(spec, F, obs, mesh, tol=1e-10)
    assert np.max(np.abs(res.r_samples - r(mesh.nodes))) / np.max(r(mesh.nodes)) < 1e-3


def test_point_and_mean_functionals_agree_on_single_mode():
    spec, _ = u1_problem()
    mesh = TimeMesh(1.0, 80, 3.0)
    out = []
    for kind, x0 in (("mean", None), ("point", 0.5)):
        F = quiet_functional(kind, spec, 8, x0=x0)
        f1 = F.fv[0]
        obs = Observation.from_function(mesh, lambda t: f1 * t)
        out.append(recover(spec, F, obs, mesh, tol=1e-10).r_samples)
    assert np.max(np.abs(out[0] - out[1])) < 1e-8


def test_k_doubling_changes_b_less_each_time():
    spec = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: x * (1 - x), lambda x: 1 + 0 * x)
    mesh = TimeMesh(1.0, 50, 3.0)
    outs = []
    for K in (16, 32, 64):
        F = quiet_functional("mean", spec, K)
        f_phi = F.apply(fourier_coeffs(spec.phi, K))
        obs = Observation.from_function(mesh, lambda t: f_phi + t,
                                        lambda t: t**0.5 / math.gamma(1.5))
        outs.append(apply_B(np.ones(51), spec, F, obs, ModalCache(spec, F, mesh), mesh))
    d1 = np.max(np.abs(outs[1] - outs[0]))
    d2 = np.max(np.abs(outs[2] - outs[1]))
    assert d2 < d1 / 4
    assert d1 < 1e-3


def test_noise_response_is_linear_in_amplitude(bench_setup):
    spec, mesh, F, obs = bench_setup
    clean = Observation(mesh, obs.phi_samples)
    base = recover(spec, F, clean, mesh, tol=1e-10).r_samples
    pattern = np.random.default_rng(7).uniform(-1, 1, mesh.M + 1)
    pattern[0] = 0
    devs = []
    for delta in (1e-4, 1e-3, 1e-2):
        noisy = Observation(mesh, obs.phi_samples * (1 + delta * pattern))
        devs.append(np.max(np.abs(recover(spec, F, noisy, mesh, tol=1e-10).r_samples - base)))
    assert devs[1] / devs[0] == pytest.approx(10, rel=0.02)
    assert devs[2] / devs[1] == pytest.approx(10, rel=0.02)


# -- C1 ----------------------------------------------------------------------

def test_c1_scaling_in_g():
    spec = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: np.sin(PI * x),
                       lambda x: np.sin(PI * x))
    spec2 = ProblemSpec(0.5, 1.0, 1.0, lambda t: 1 + t, lambda x: np.sin(PI * x),
                        lambda x: 2 * np.sin(PI * x))
    mesh = TimeMesh(1.0, 20, 2.0)
    obs = Observation.from_function(mesh, lambda t: 2 / PI * (1 + t),
                                    lambda t: 2 / PI * t**0.5 / math.gamma(1.5))
    a = c1_bound(spec, quiet_functional("mean", spec, 8), obs, mesh)
    b = c1_bound(spec2, quiet_functional("mean", spec2, 8), obs, mesh)
    assert b.norm_g == pytest.approx(2 * a.norm_g)
    assert b.value == pytest.approx(a.value / 2, rel=1e-12)
    assert a.log10 - b.log10 == pytest.approx(math.log10(2), rel=1e-12)


def test_c1_log_scale_survives_overflow(bench_setup):
    spec, mesh, F, obs = bench_setup
    c1 = c1_bound(spec, F, obs, mesh)
    assert c1.value == math.inf
    assert math.isfinite(c1.log10) and c1.log10 > 300
