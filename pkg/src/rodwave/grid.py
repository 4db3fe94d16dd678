"""Uniform periodic grids on [-L, L), sampled fields, and spectral calculus."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

# relative size of |u| at the domain edge that triggers the periodization warning
BOUNDARY_TAIL_WARN = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_j = -L + j*dx, j = 0..N-1, with periodic wrap."""

    half_length: float
    point_count: int
    dx: float = field(init=False)

    def __post_init__(self):
        L, N = self.half_length, self.point_count
        if isinstance(N, bool) or int(N) != N:
            raise ValueError(f"point count must be an integer, got {N!r}")
        N = int(N)
        if N % 2:
            raise ValueError(f"odd point count {N}: N must be even")
        if N < 16:
            raise ValueError(f"point count {N} below minimum of 16")
        if not (math.isfinite(L) and L > 0):
            raise ValueError(f"half length must be positive and finite, got {L}")
        object.__setattr__(self, "half_length", float(L))
        object.__setattr__(self, "point_count", N)
        object.__setattr__(self, "dx", 2.0 * float(L) / N)

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.point_count)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.point_count, d=self.dx)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.point_count))

    def sample(self, fn) -> "GridFunction":
        """Evaluate a vectorized callable at the nodes."""
        return GridFunction(self, np.asarray(fn(self.x), dtype=float))


def make_grid(L: float, N: int) -> Grid:
    return Grid(L, N)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples of a field on a grid. Values are read-only and finite."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.grid.point_count,):
            raise ValueError(
                f"values have shape {v.shape}, expected ({self.grid.point_count},)"
            )
        bad = ~np.isfinite(v)
        if bad.any():
            j = int(np.argmax(bad))
            raise FloatingPointError(
                f"non-finite value {v[j]} at node {j} (x={self.grid.x[j]:.6g})"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __len__(self):
        return self.grid.point_count


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def spectral_derivative(u: GridFunction) -> GridFunction:
    """d/dx through the Fourier multiplier ik (Nyquist mode zeroed)."""
    g = u.grid
    k = g.wavenumbers
    k[g.point_count // 2] = 0.0
    return GridFunction(g, np.fft.ifft(1j * k * np.fft.fft(u.values)).real)


def integrate(u: GridFunction) -> float:
    """Periodic rectangle rule dx * sum(values)."""
    return float(u.grid.dx * math.fsum(u.values))


def lp_norm(u: GridFunction, p: float) -> float:
    if p == math.inf:
        return u.max_abs()
    if not p >= 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(u.values)
    top = a.max()
    if top == 0.0:
        return 0.0
    # scale by the max so large p neither overflows nor underflows to zero
    return float(top * (u.grid.dx * np.sum((a / top) ** p)) ** (1.0 / p))


def boundary_tail(u: GridFunction) -> float:
    """Edge amplitude max(|u_0|, |u_{N-1}|) relative to max|u| (0 for u = 0)."""
    top = u.max_abs()
    if top == 0.0:
        return 0.0
    return float(max(abs(u.values[0]), abs(u.values[-1])) / top)


def check_boundary_tail(u: GridFunction, threshold: float = BOUNDARY_TAIL_WARN,
                        label: str = "u") -> float:
    ratio = boundary_tail(u)
    if ratio > threshold:
        log.warning("%s at the domain edge is %.3g of its max (threshold %.1g); "
                    "periodization may contaminate the solution", label, ratio, threshold)
    return ratio


def fourier_interpolate(u: GridFunction, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of u at arbitrary points."""
    g = u.grid
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    coef = np.fft.fft(u.values) / g.point_count
    k = g.wavenumbers
    nyq = g.point_count // 2
    out = np.empty(pts.shape)
    for i, s in enumerate(pts):
        phase = np.exp(1j * k * (s + g.half_length))
        terms = coef * phase
        # split the Nyquist mode evenly so the interpolant stays real
        terms[nyq] = coef[nyq] * math.cos(k[nyq] * (s + g.half_length))
        out[i] = terms.sum().real
    return out


def write_csv(path, *columns: tuple[str, GridFunction]) -> Path:
    """Write x plus named GridFunction columns; a single field gets the header x,value."""
    path = Path(path)
    if not columns:
        raise ValueError("nothing to write")
    grid = columns[0][1].grid
    for _, col in columns:
        _check_same_grid(grid, col.grid)
    names = ["x"] + [name for name, _ in columns]
    data = [grid.x] + [col.values for _, col in columns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow(["%.17g" % v for v in row])
    return path


def write_grid_function(u: GridFunction, path) -> Path:
    return write_csv(path, ("value", u))


def read_grid_function(path, grid: Grid | None = None) -> GridFunction:
    """Read an x,value CSV. The grid is inferred from the x column unless given."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["x", "value"]:
        raise ValueError(f"{path}: expected header 'x,value'")
    arr = np.array([[float(c) for c in r[:2]] for r in rows[1:] if r], dtype=float)
    if arr.ndim != 2 or len(arr) < 16:
        raise ValueError(f"{path}: too few data rows")
    x, v = arr[:, 0], arr[:, 1]
    if grid is None:
        N = len(x)
        L = -x[0]
        grid = Grid(L, N)
    if len(x) != grid.point_count or not np.allclose(x, grid.x, rtol=0, atol=1e-9 * grid.half_length):
        raise ValueError(f"{path}: x column does not match {grid}")
    return GridFunction(grid, v)
