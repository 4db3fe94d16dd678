import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_smooth
from rodwave.grid import GridFunction, fourier_interpolate, integrate, lp_norm, make_grid
from rodwave.helmholtz import (HelmholtzOperator, convolve_oracle, grad_helmholtz_inverse,
                               helmholtz_inverse, periodic_kernel)

SCHEMES = ["spectral", "sweep"]


def closed_form(x):
    # (1 - d^2)w = e^{-2|x|}: particular part -e^{-2|x|}/3 plus the homogeneous
    # e^{-|x|} multiple that makes w' continuous at 0
    return 2 / 3 * np.exp(-np.abs(x)) - np.exp(-2 * np.abs(x)) / 3


def test_symbol_properties():
    op = HelmholtzOperator(make_grid(10, 128))
    assert op.symbol[0] == 1.0
    assert np.all((op.symbol > 0) & (op.symbol <= 1))
    ds = op.derivative_symbol
    assert np.all(ds.real == 0)
    k = op.grid.wavenumbers
    pairs = (np.abs(k) > 0) & (np.abs(k) < np.max(np.abs(k)))
    assert np.allclose(ds[pairs] / k[pairs], 1j / (1 + k[pairs] ** 2))


def test_unknown_scheme():
    with pytest.raises(ValueError):
        HelmholtzOperator(make_grid(1, 16), "magic")


@pytest.mark.parametrize("scheme", SCHEMES)
def test_constant(scheme):
    g = make_grid(20, 256)
    op = HelmholtzOperator(g, scheme)
    c = GridFunction(g, np.full(256, 2.5))
    assert np.max(np.abs(helmholtz_inverse(op, c).values - 2.5)) <= 1e-12
    assert np.max(np.abs(grad_helmholtz_inverse(op, c).values)) <= 1e-12


@pytest.mark.parametrize("k", [1, 2, 5])
def test_cosines_spectral(k):
    g = make_grid(math.pi, 64)
    op = HelmholtzOperator(g)
    h = g.sample(lambda x: np.cos(k * x))
    assert np.max(np.abs(helmholtz_inverse(op, h).values - np.cos(k * g.x) / (1 + k * k))) <= 1e-12
    grad = grad_helmholtz_inverse(op, h).values
    assert np.max(np.abs(grad + k * np.sin(k * g.x) / (1 + k * k))) <= 1e-12


def test_cosine_sweep_converges_at_eighth_order():
    errs = []
    for N in (64, 128):
        g = make_grid(math.pi, N)
        op = HelmholtzOperator(g, "sweep")
        h = g.sample(np.cos)
        errs.append(np.max(np.abs(helmholtz_inverse(op, h).values - np.cos(g.x) / 2)))
    assert errs[1] <= 1e-12
    assert errs[0] / errs[1] >= 2**7


def test_kink_closed_form_needs_fine_grid():
    # the datum has a kink so grid error is O(dx^2); 2^20 nodes bring it below 1e-8
    g = make_grid(60, 2**20)
    op = HelmholtzOperator(g)
    h = g.sample(lambda x: np.exp(-2 * np.abs(x)))
    w = helmholtz_inverse(op, h)
    assert np.max(np.abs(w.values - closed_form(g.x))) <= 1e-8
    dw = grad_helmholtz_inverse(op, h)
    at = fourier_interpolate(dw, [math.log(2)])[0]
    assert abs(at - (2 / 3) * (0.25 - 0.5)) <= 1e-7


def test_kink_error_is_second_order():
    errs = []
    for N in (2048, 4096):
        g = make_grid(60, N)
        h = g.sample(lambda x: np.exp(-2 * np.abs(x)))
        errs.append(np.max(np.abs(helmholtz_inverse(HelmholtzOperator(g), h).values - closed_form(g.x))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_oracle_simple_cases():
    g = make_grid(math.pi, 64)
    assert np.max(np.abs(convolve_oracle(g, GridFunction(g, np.ones(64))).values - 1)) <= 1e-10
    out = convolve_oracle(g, g.sample(np.cos))
    assert np.max(np.abs(out.values - np.cos(g.x) / 2)) <= 1e-9
    dout = convolve_oracle(g, g.sample(np.cos), derivative=True)
    assert np.max(np.abs(dout.values + np.sin(g.x) / 2)) <= 1e-9


def test_periodic_kernel_matches_free_kernel_far_from_edges():
    z = np.linspace(-5, 5, 101)
    assert np.allclose(periodic_kernel(z, 60.0), 0.5 * np.exp(-np.abs(z)), rtol=1e-14, atol=0)
    # periodized kernel integrates to one over a period; the rectangle rule
    # overshoots by dx^2/12 because of the kink at 0
    g = make_grid(3.0, 2**14)
    err = integrate(GridFunction(g, periodic_kernel(g.x, 3.0))) - 1
    assert abs(err - g.dx**2 / 12) <= 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_oracle_agreement_random(scheme, rng):
    g = make_grid(60, 4096)
    op = HelmholtzOperator(g, scheme)
    for _ in range(5):
        h = random_smooth(g, rng)
        ref = convolve_oracle(g, h).values
        assert np.max(np.abs(helmholtz_inverse(op, h).values - ref)) <= 1e-9 * np.max(np.abs(ref))
        dref = convolve_oracle(g, h, derivative=True).values
        assert np.max(np.abs(grad_helmholtz_inverse(op, h).values - dref)) <= 1e-9 * np.max(np.abs(dref))


def test_round_trip(rng):
    g = make_grid(30, 1024)
    op = HelmholtzOperator(g)
    for _ in range(10):
        h = random_smooth(g, rng)
        w = np.fft.fft(helmholtz_inverse(op, h).values)
        back = np.fft.ifft((1 + g.wavenumbers**2) * w).real
        assert np.max(np.abs(back - h.values)) <= 1e-11 * np.max(np.abs(h.values))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_self_adjoint(scheme, rng):
    g = make_grid(30, 1024)
    op = HelmholtzOperator(g, scheme)
    for _ in range(10):
        h, w = random_smooth(g, rng), random_smooth(g, rng)
        a = integrate(w.with_values(w.values * helmholtz_inverse(op, h).values))
        b = integrate(h.with_values(h.values * helmholtz_inverse(op, w).values))
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b), 1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(SCHEMES))
def test_positivity_and_smoothing_bound(seed, scheme):
    rng = np.random.default_rng(seed)
    g = make_grid(20, 512)
    h = random_smooth(g, rng)
    h = h.with_values(np.abs(h.values))
    op = HelmholtzOperator(g, scheme)
    w = helmholtz_inverse(op, h).values
    hmax = max(h.max_abs(), 1e-300)
    assert w.min() >= -1e-12 * hmax
    dw = grad_helmholtz_inverse(op, h)
    assert dw.max_abs() <= 0.5 * lp_norm(h, 1) * (1 + 1e-9) + 1e-12 * hmax


def test_sweep_keeps_tails_accurate():
    # far out the inverse of a Gaussian decays like e^{-|x|}; spectral round-off
    # floors near 1e-17 while the sweeps keep relative accuracy
    g = make_grid(60, 4096)
    h = g.sample(lambda x: np.exp(-x**2))
    w = helmholtz_inverse(HelmholtzOperator(g, "sweep"), h).values
    x = g.x
    far = (np.abs(x) > 30) & (np.abs(x) < 50)
    # exact tail: (1/2) e^{-|x|} int e^{y} e^{-y^2} dy = (sqrt(pi)/2) e^{1/4} e^{-|x|}
    tail = 0.5 * math.sqrt(math.pi) * math.exp(0.25) * np.exp(-np.abs(x[far]))
    assert np.max(np.abs(w[far] / tail - 1)) <= 1e-6
