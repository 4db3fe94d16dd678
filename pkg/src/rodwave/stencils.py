"""Local polynomial stencils: differentiation and product integration on a uniform grid."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@lru_cache(maxsize=None)
def central_difference(order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and unit-spacing weights of the centered first-derivative stencil."""
    if order % 2 or order < 2:
        raise ValueError("order must be a positive even integer")
    m = order // 2
    offs = np.arange(-m, m + 1)
    A = np.vander(offs, increasing=True).T.astype(float)
    b = np.zeros(2 * m + 1)
    b[1] = 1.0
    w = np.linalg.solve(A, b)
    w[m] = 0.0
    return offs, w


def interval_weights(points: int, dx: float, rate: float = 0.0,
                     gauss_nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Weights w_m with  int_0^dx e^{-rate*(dx-s)} h(s) ds ~ sum_m w_m h(m*dx).

    h is replaced by its Lagrange interpolant through the ``points`` nodes
    m = -points/2+1 .. points/2 surrounding the interval.
    """
    if points % 2 or points < 2:
        raise ValueError("points must be a positive even integer")
    q = points // 2
    offs = np.arange(-q + 1, q + 1)
    xg, wg = leggauss(gauss_nodes)
    s = 0.5 * (xg + 1.0) * dx
    wg = 0.5 * dx * wg * np.exp(-rate * (dx - s))
    W = np.empty(len(offs))
    for i, m in enumerate(offs):
        basis = np.ones_like(s)
        for n in offs:
            if n != m:
                basis *= (s - n * dx) / ((m - n) * dx)
        W[i] = np.sum(wg * basis)
    return offs, W


def apply_periodic(values: np.ndarray, offs, weights) -> np.ndarray:
    """out_j = sum_m w_m values_{j+m} with periodic wrap."""
    out = np.zeros_like(values)
    for o, w in zip(offs, weights):
        out += w * np.roll(values, -int(o))
    return out


def apply_zero_padded(values: np.ndarray, offs, weights) -> np.ndarray:
    """Like apply_periodic but treating values outside the array as zero."""
    pad = int(np.max(np.abs(offs)))
    ext = np.concatenate([np.zeros(pad), values, np.zeros(pad)])
    n = len(values)
    out = np.zeros(n)
    for o, w in zip(offs, weights):
        out += w * ext[pad + int(o): pad + int(o) + n]
    return out


def cumulative_from_right(values: np.ndarray, dx: float, points: int = 8) -> np.ndarray:
    """int_{x_j}^{end} of the sampled integrand, high order, zero beyond the array."""
    offs, w = interval_weights(points, dx)
    cells = apply_zero_padded(values, offs, w)
    return np.cumsum(cells[::-1])[::-1]


def cumulative_from_left(values: np.ndarray, dx: float, points: int = 8) -> np.ndarray:
    """int_{start}^{x_j} of the sampled integrand."""
    offs, w = interval_weights(points, dx)
    cells = apply_zero_padded(values, offs, w)
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(cells[:-1], out=out[1:])
    return out
