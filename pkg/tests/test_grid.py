import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rodwave.grid import (Grid, GridFunction, boundary_tail, fourier_interpolate, integrate,
                          lp_norm, make_grid, read_grid_function, spectral_derivative,
                          write_grid_function)


def test_spacing_and_nodes():
    g = make_grid(60, 4096)
    assert g.dx == 0.029296875
    assert make_grid(math.pi, 16).x[0] == -math.pi
    assert np.allclose(np.diff(g.x), g.dx)
    assert len(g.x) == 4096


@pytest.mark.parametrize("L, N", [(60, 15), (60, 8), (0, 64), (-1, 64), (math.inf, 64)])
def test_bad_grids_rejected(L, N):
    with pytest.raises(ValueError):
        make_grid(L, N)


def test_grid_function_rejects_nonfinite_and_wrong_length():
    g = make_grid(1, 16)
    with pytest.raises(FloatingPointError):
        GridFunction(g, np.full(16, np.nan))
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(15))


def test_grid_function_values_are_read_only():
    g = make_grid(1, 16)
    u = GridFunction(g, np.ones(16))
    with pytest.raises(ValueError):
        u.values[0] = 2.0


def test_derivative_of_constant_and_sine():
    g = make_grid(math.pi, 64)
    assert np.max(np.abs(spectral_derivative(GridFunction(g, np.ones(64))).values)) <= 1e-13
    d = spectral_derivative(g.sample(np.sin))
    assert np.max(np.abs(d.values - np.cos(g.x))) <= 1e-12


def test_derivative_of_gaussian_against_finite_differences():
    g = make_grid(60, 4096)
    u = g.sample(lambda x: np.exp(-x**2))
    fd = (np.roll(u.values, -1) - np.roll(u.values, 1)) / (2 * g.dx)
    err = np.max(np.abs(spectral_derivative(u).values - fd))
    # central differences carry an O(dx^2) error with constant max|u'''|/6
    assert err <= 2 * g.dx**2
    exact = -2 * g.x * np.exp(-g.x**2)
    assert np.max(np.abs(spectral_derivative(u).values - exact)) <= 1e-12


def test_integrals():
    g = make_grid(60, 4096)
    assert integrate(g.zeros()) == 0.0
    gp = make_grid(math.pi, 64)
    assert abs(integrate(gp.sample(np.cos))) <= 1e-12


def test_kernel_normalisation_integral():
    # the kink at 0 limits the rectangle rule to O(dx^2); the node sum is a
    # geometric series equal to (dx/2) coth(dx/2) up to e^{-L}
    kernel = lambda x: 0.5 * np.exp(-np.abs(x))
    g = make_grid(60, 4096)
    total = integrate(g.sample(kernel))
    assert abs(total - 0.5 * g.dx / math.tanh(0.5 * g.dx)) <= 1e-14
    assert abs(total - 1.0 - g.dx**2 / 12) <= g.dx**4 / 500
    fine = make_grid(60, 2**22)
    assert abs(integrate(fine.sample(kernel)) - 1.0) <= 1e-10


def test_lp_norms_of_exponential():
    g = make_grid(60, 2**16)
    f = g.sample(lambda x: np.exp(-np.abs(x)))
    assert lp_norm(g.zeros(), 3) == 0.0
    assert lp_norm(f, math.inf) == 1.0
    assert abs(lp_norm(f, 4) - 0.5**0.25) <= 1e-6
    assert abs(lp_norm(f, 64) - 1.0) <= 0.15
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=6))
def test_divergence_theorem(coeffs):
    g = make_grid(math.pi, 64)
    u = g.sample(lambda x: sum(c * np.cos((k + 1) * x + c) for k, c in enumerate(coeffs)))
    assert abs(integrate(spectral_derivative(u))) <= 1e-11


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 3.5, math.inf]))
def test_lp_norm_monotone_under_domination(seed, p):
    rng = np.random.default_rng(seed)
    g = make_grid(5, 64)
    w = rng.normal(size=64)
    u = w * rng.uniform(0, 1, size=64)
    assert lp_norm(GridFunction(g, u), p) <= lp_norm(GridFunction(g, w), p) * (1 + 1e-12)


def test_fourier_interpolation_is_exact_for_band_limited_data():
    g = make_grid(math.pi, 32)
    u = g.sample(lambda x: np.sin(3 * x) + 0.5 * np.cos(x))
    pts = np.array([0.1, 1.234, -2.9])
    assert np.allclose(fourier_interpolate(u, pts), np.sin(3 * pts) + 0.5 * np.cos(pts), atol=1e-13)


def test_boundary_tail():
    g = make_grid(60, 4096)
    assert boundary_tail(g.sample(lambda x: np.exp(-x**2))) == 0.0
    assert boundary_tail(g.sample(lambda x: np.exp(-np.abs(x) / 4))) > 1e-7


def test_csv_round_trip(tmp_path):
    g = make_grid(3, 32)
    u = g.sample(lambda x: np.exp(-x**2) / 3)
    path = write_grid_function(u, tmp_path / "u.csv")
    assert path.read_text().splitlines()[0] == "x,value"
    back = read_grid_function(path)
    assert back.grid == g
    assert np.array_equal(back.values, u.values)
    with pytest.raises(ValueError):
        read_grid_function(path, make_grid(3, 64))


def test_grid_is_value_type():
    assert Grid(2.0, 16) == make_grid(2.0, 16)
