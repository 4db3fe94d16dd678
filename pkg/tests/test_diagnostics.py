import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import CH, DAI2, LONG_CPS, SHORT_CPS, cached_run, gaussian
from rodwave.diagnostics import (BoundaryContamination, F_field, bound_constant_M,
                                 decay_envelope, energy, epsilon_pm, h_field, lambda_pm,
                                 numerical_support, profile_decompose, sigma_field,
                                 weighted_persistence)
from rodwave.evolve import EvolveOptions, evolve
from rodwave.grid import GridFunction, make_grid
from rodwave.helmholtz import HelmholtzOperator
from rodwave.model import build_preset, rhs
from rodwave.weights import catalog

CH_SPEC = build_preset("dai", {"gamma": 1.0})


@pytest.fixture(scope="module")
def zero_traj():
    g = make_grid(30, 512)
    return evolve(CH_SPEC, g.zeros(), EvolveOptions(1e-2, 0.5, [0.1, 0.5], scheme="sweep"))


@pytest.fixture(scope="module")
def ch_long():
    return cached_run(*CH, T=2.0, checkpoints=LONG_CPS)


def test_h_field_examples():
    gp = make_grid(math.pi, 64)
    assert not h_field(CH_SPEC, gp.zeros()).values.any()
    u = gp.sample(np.cos)
    h = h_field(build_preset("bbm"), u).values
    assert np.max(np.abs(h - (1 + np.cos(2 * gp.x)) / 4)) <= 1e-15
    g = make_grid(60, 4096)
    h = h_field(CH_SPEC, gaussian(g)).values
    assert np.max(np.abs(h - np.exp(-2 * g.x**2) * (1 + 2 * g.x**2))) <= 1e-10
    # pointwise check at five nodes by direct evaluation of g(u) + u_x^2/2
    for j in (100, 2000, 2048, 2100, 3000):
        x = g.x[j]
        u, ux = math.exp(-x * x), -2 * x * math.exp(-x * x)
        assert abs(h[j] - (u * u + 0.5 * ux * ux)) <= 1e-12


def test_F_field_examples():
    gp = make_grid(math.pi, 64)
    op = HelmholtzOperator(gp)
    assert not F_field(CH_SPEC, op, gp.zeros()).values.any()
    F = F_field(build_preset("bbm"), op, gp.sample(np.cos)).values
    assert np.max(np.abs(F + np.sin(2 * gp.x) / 10)) <= 1e-10


@pytest.mark.parametrize("name, params", [
    ("bbm", ()), ("dai", (("gamma", 0.0),)), CH, DAI2,
    ("dgh_reduced", (("Gamma_hat", 0.0),)), ("rch", (("beta", 1.0), ("gamma", 1.0), ("Gamma", 0.0))),
])
def test_F_field_identity_on_snapshots(name, params):
    traj = cached_run(name, params, T=0.5, checkpoints=(0.25, 0.5))
    op, spec = traj.op, traj.spec
    for u, ux in traj.snapshots:
        F = F_field(spec, op, u).values
        R = rhs(spec, op, u).values
        trans = spec.f_prime(u.values) * op.derivative(u.values)
        scale = max(np.max(np.abs(F)), np.max(np.abs(R)))
        assert np.max(np.abs(F + R + trans)) <= 1e-11 * scale


def test_energy_examples():
    g = make_grid(60, 4096)
    assert energy(g.zeros()) == 0.0
    assert abs(energy(gaussian(g)) - math.sqrt(2 * math.pi)) <= 1e-8
    gp = make_grid(math.pi, 64)
    assert abs(energy(gp.sample(np.cos)) - 2 * math.pi) <= 1e-12


def test_sigma_at_zero_and_small_times():
    cps = (0.01, 0.02, 0.04, 0.08)
    traj = cached_run(*CH, T=0.08, checkpoints=cps)
    h0 = h_field(traj.spec, traj.u0, traj.op).values
    assert np.array_equal(sigma_field(traj, 0.0).values, h0)
    devs = np.array([np.max(np.abs(sigma_field(traj, t).values - h0)) for t in cps])
    slope = np.polyfit(np.log(cps), np.log(devs), 1)[0]
    assert 0.9 <= slope <= 1.1
    for t in cps:
        assert sigma_field(traj, t).values.min() >= 0


def test_zero_trajectory_diagnostics(zero_traj):
    for t in zero_traj.times:
        assert not sigma_field(zero_traj, t).values.any()
        assert lambda_pm(zero_traj, t) == (0.0, 0.0)
        ep, em = epsilon_pm(zero_traj, t)
        assert not ep.values.any() and not em.values.any()
    rep = profile_decompose(zero_traj, 0.5)
    assert rep.residual_max == 0.0 and rep.lambda_plus == 0.0
    assert not rep.r_field.values.any()
    assert numerical_support(zero_traj.u0) == 0.0


def test_lambda_even_datum_at_start(ch_long):
    lp, lm = lambda_pm(ch_long, 0.0)
    assert abs(lp - lm) <= 1e-10 * lp


def test_lambda_at_start_matches_quadrature(ch_long):
    integrand = lambda y: math.exp(y - 2 * y * y) * (1 + 2 * y * y)
    ref = 0.5 * quad(integrand, -np.inf, np.inf, epsabs=0, epsrel=1e-13)[0]
    # completing the square gives (13/16) sqrt(pi/2) e^{1/8}
    assert ref == pytest.approx(13 / 16 * math.sqrt(math.pi / 2) * math.exp(0.125), rel=1e-12)
    lp, _ = lambda_pm(ch_long, 0.0)
    assert abs(lp - ref) <= 1e-6 * ref


def test_epsilon_properties(ch_long):
    L = ch_long.grid.half_length
    x = ch_long.grid.x
    j = int(np.argmin(np.abs(x - (L - 5))))
    for t in LONG_CPS:
        lp, lm = lambda_pm(ch_long, t)
        ep, em = epsilon_pm(ch_long, t)
        assert ep.values.min() >= 0 and em.values.min() >= 0
        assert ep.values[j] <= 1e-8 * lp
        assert em.values[len(x) - 1 - j] <= 1e-8 * lm
        assert ep.values[j] <= 1e-6 * (lp + 1e-300)


def test_profile_identity_and_lambda_bounds(ch_long):
    rep = profile_decompose(ch_long, 1.0)
    assert rep.residual_max <= 1e-6
    lams = [lambda_pm(ch_long, t)[0] for t in LONG_CPS]
    assert min(lams) > 0 and max(lams) < math.inf
    assert rep.tail_fit["relative_error"] <= 0.02
    summary = rep.summary()
    assert summary["t"] == 1.0


def test_profile_needs_positive_time(ch_long):
    with pytest.raises(ValueError):
        profile_decompose(ch_long, 0.0)


def test_spectral_noise_is_refused_by_guard():
    traj = cached_run(*CH, T=1.0, checkpoints=(1.0,), scheme="spectral")
    with pytest.raises(BoundaryContamination):
        lambda_pm(traj, 1.0)


def test_decay_envelope_examples():
    g = make_grid(60, 4096)
    zero = decay_envelope(g.zeros(), g.zeros(), 1.0)
    assert zero.sup_value == 0.0 and not zero.boundary_dominated
    u = gaussian(g)
    env = decay_envelope(u, u.with_values(-2 * g.x * u.values), 1.0)
    assert math.isfinite(env.sup_value) and not env.boundary_dominated
    slow = g.sample(lambda x: np.exp(-np.sqrt(x**2 + 1) / 4))
    env = decay_envelope(slow, slow.with_values(np.gradient(slow.values, g.dx)), 1.0)
    assert env.boundary_dominated and abs(env.argmax_x) >= 0.9 * g.half_length
    with pytest.raises(ValueError):
        decay_envelope(u, u, 0.5)


def test_weighted_persistence_examples(zero_traj, ch_long):
    s = weighted_persistence(zero_traj, catalog("exp_half"), 2.0)
    assert all(n == 0 for n in s.norms) and all(r == 1.0 for r in s.ratios)
    s = weighted_persistence(ch_long, catalog("exp_half"), math.inf)
    assert math.isfinite(s.kappa_hat[-1]) and s.kappa_hat[-1] <= 50
    assert s.kappa_hat == sorted(s.kappa_hat)
    with pytest.raises(ValueError):
        weighted_persistence(ch_long, catalog("exp_half"), 1.0)


def test_sup_bounded_by_energy(ch_long):
    # phi = 1 reduces to unweighted norms; |u| <= sqrt(H(u0)) at every checkpoint
    bound = math.sqrt(energy(ch_long.u0))
    for u, _ in ch_long.snapshots:
        assert u.max_abs() <= bound
    M = bound_constant_M(ch_long)
    assert M.sup_u <= bound


def test_bound_constant(zero_traj, ch_long):
    # f''(0) = 1 for Camassa-Holm, so the zero solution still has M = 1
    assert bound_constant_M(zero_traj).M == 1.0
    g = make_grid(30, 512)
    t = evolve(build_preset("bbm"), g.zeros(), EvolveOptions(1e-2, 0.1, [0.1]))
    assert bound_constant_M(t).M == 0.0
    dgh = build_preset("dgh_reduced", {"Gamma_hat": 1.5})
    t = evolve(dgh, g.zeros(), EvolveOptions(1e-2, 0.1, [0.1]))
    assert bound_constant_M(t).M == pytest.approx(1.5 + 2.0)
    Ms = [bound_constant_M(ch_long, upto=t).M for t in LONG_CPS]
    assert Ms == sorted(Ms)


def test_dai_two_bump_tail_fit():
    traj = cached_run(*DAI2, datum="bump", T=1.0, checkpoints=SHORT_CPS)
    for t in SHORT_CPS:
        rep = profile_decompose(traj, t)
        assert rep.tail_fit["relative_error"] <= 0.02
        assert rep.tail_fit_minus["relative_error"] <= 0.02
