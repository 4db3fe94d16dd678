"""Classical RK4 time stepping with checkpoints and running time integrals."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import (BOUNDARY_TAIL_WARN, Grid, GridFunction, boundary_tail,
                   check_boundary_tail, spectral_derivative, write_csv)
from .helmholtz import HelmholtzOperator
from .model import ModelSpec, NumericalBreakdown, rhs_values

log = logging.getLogger(__name__)

# top-third spectral content above this marks a solution the grid no longer resolves
UNDER_RESOLVED = 1e-6


@dataclass
class EvolveOptions:
    dt: float
    T_final: float
    checkpoint_times: list = field(default_factory=list)
    cfl_safety: float = 0.5
    tail_guard_threshold: float = BOUNDARY_TAIL_WARN
    scheme: str = "spectral"
    blowup_threshold: float = 1e6
    # halt once max|u_x| exceeds this fraction of max|u| / dx
    resolved_slope_factor: float = 0.5

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T_final > 0:
            raise ValueError(f"T_final must be positive, got {self.T_final}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.resolved_slope_factor > 0:
            raise ValueError("resolved_slope_factor must be positive")
        cps = [float(t) for t in self.checkpoint_times]
        if cps != sorted(cps):
            raise ValueError("checkpoint_times must be sorted")
        if cps and (cps[0] < 0 or cps[-1] > self.T_final * (1 + 1e-12)):
            raise ValueError("checkpoint_times must lie in [0, T_final]")
        self.checkpoint_times = cps

    def step_count(self, t: float) -> int:
        n = round(t / self.dt)
        if abs(n * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a multiple of dt={self.dt}")
        return int(n)


@dataclass
class Trajectory:
    """Checkpointed history of one run.

    ``h_integrals[i]`` and ``r_integrals[i]`` hold int_0^t h dtau and
    int_0^t f'(u) u_x dtau at ``times[i]``: trapezoid sums with endpoint
    corrections applied at readout. ``h_accumulator`` and ``r_accumulator``
    are the raw trapezoid sums at the last step taken.
    """

    spec: ModelSpec
    grid: Grid
    scheme: str
    dt: float
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    h_integrals: list = field(default_factory=list)
    r_integrals: list = field(default_factory=list)
    energy_series: list = field(default_factory=list)
    records: list = field(default_factory=list)
    h_accumulator: GridFunction | None = None
    r_accumulator: GridFunction | None = None
    truncated: bool = False
    breakdown_time: float | None = None
    breakdown_reason: str | None = None

    @property
    def op(self) -> HelmholtzOperator:
        cached = self.__dict__.get("_op")
        if cached is None:
            cached = HelmholtzOperator(self.grid, self.scheme)
            self.__dict__["_op"] = cached
        return cached

    @property
    def achieved_time(self) -> float:
        return self.times[-1] if self.times else 0.0

    def index(self, t: float) -> int:
        for i, s in enumerate(self.times):
            if abs(s - t) <= 1e-9 * max(1.0, abs(t)):
                return i
        raise KeyError(f"t={t} is not a checkpoint (have {self.times})")

    def u(self, t: float) -> GridFunction:
        return self.snapshots[self.index(t)][0]

    def u_x(self, t: float) -> GridFunction:
        return self.snapshots[self.index(t)][1]

    @property
    def u0(self) -> GridFunction:
        return self.snapshots[0][0]


def _pointwise_fields(spec, op, u):
    ux = op.derivative(u)
    h = spec.g(u) + 0.5 * spec.f_second(u) * ux**2
    tr = spec.f_prime(u) * ux
    return ux, h, tr


def _cfl_limit(spec, grid, u, safety):
    speed = float(np.max(np.abs(spec.f_prime(u)))) if len(u) else 0.0
    return safety * grid.dx / max(1.0, speed)


def step_rk4(spec: ModelSpec, op: HelmholtzOperator, u: GridFunction, dt: float) -> GridFunction:
    return GridFunction(u.grid, _rk4(spec, op, u.values, dt))


def _rk4(spec, op, u, dt):
    k1 = rhs_values(spec, op, u)
    k2 = rhs_values(spec, op, u + 0.5 * dt * k1)
    k3 = rhs_values(spec, op, u + 0.5 * dt * k2)
    k4 = rhs_values(spec, op, u + dt * k3)
    out = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        j = int(np.argmax(~np.isfinite(out)))
        raise NumericalBreakdown(f"non-finite u at node {j} after RK4 step", where=("u", j))
    return out


def _endpoint_corrected(total, head, tail, dt):
    # trapezoid sum plus Gregory end corrections through second differences
    n = len(head)
    if n < 2:
        return total
    out = total - dt / 12.0 * ((tail[-1] - tail[-2]) - (head[1] - head[0]))
    if n >= 3:
        out = out - dt / 24.0 * ((tail[-1] - 2 * tail[-2] + tail[-3])
                                 + (head[2] - 2 * head[1] + head[0]))
    return out


def high_mode_fraction(u: np.ndarray) -> float:
    """Largest Fourier amplitude in the top third of the band, relative to the largest overall."""
    a = np.abs(np.fft.rfft(u))
    top = a.max()
    if top == 0.0:
        return 0.0
    return float(a[2 * len(a) // 3:].max() / top)


def energy_of(u: np.ndarray, grid: Grid) -> float:
    ux = spectral_derivative(GridFunction(grid, u)).values
    return float(grid.dx * math.fsum(u**2 + ux**2))


def evolve(spec: ModelSpec, u0: GridFunction, opts: EvolveOptions) -> Trajectory:
    grid = u0.grid
    op = HelmholtzOperator(grid, opts.scheme)
    dt = opts.dt
    n_final = opts.step_count(opts.T_final)
    marks = {0} | {opts.step_count(t) for t in opts.checkpoint_times}

    u = np.array(u0.values, dtype=float)
    limit = _cfl_limit(spec, grid, u, opts.cfl_safety)
    if dt > limit:
        raise ValueError(f"dt={dt} violates the CFL limit {limit:.4g}")

    traj = Trajectory(spec=spec, grid=grid, scheme=opts.scheme, dt=dt)
    ux, h, tr = _pointwise_fields(spec, op, u)
    h_acc = np.zeros_like(u)
    r_acc = np.zeros_like(u)
    head = []   # first three (h, tr) samples
    tail = []   # last three
    warned = []

    def remember(h, tr):
        if len(head) < 3:
            head.append((h, tr))
        tail.append((h, tr))
        if len(tail) > 3:
            tail.pop(0)

    def checkpoint(n, u, ux):
        t = n * dt
        hh = [a for a, _ in head]
        rr = [b for _, b in head]
        H = _endpoint_corrected(h_acc, hh, [a for a, _ in tail], dt)
        R = _endpoint_corrected(r_acc, rr, [b for _, b in tail], dt)
        uf = GridFunction(grid, u)
        traj.times.append(t)
        traj.snapshots.append((uf, GridFunction(grid, ux)))
        traj.h_integrals.append(GridFunction(grid, H))
        traj.r_integrals.append(GridFunction(grid, R))
        E = energy_of(u, grid)
        traj.energy_series.append((t, E))
        check_boundary_tail(uf, opts.tail_guard_threshold, label=f"u(t={t:g})")
        hmf = high_mode_fraction(u)
        if hmf > UNDER_RESOLVED and not warned:
            warned.append(t)
            log.warning("u(t=%g) is under-resolved: top-third Fourier content %.2g of the peak",
                        t, hmf)
        traj.records.append({
            "t": t,
            "energy": E,
            "max_u": float(np.max(np.abs(u))),
            "max_ux": float(np.max(np.abs(ux))),
            "boundary_tail": boundary_tail(uf),
            "high_mode_fraction": hmf,
        })

    remember(h, tr)
    checkpoint(0, u, ux)
    for n in range(1, n_final + 1):
        try:
            u = _rk4(spec, op, u, dt)
            ux, h, tr = _pointwise_fields(spec, op, u)
        except NumericalBreakdown as exc:
            traj.truncated, traj.breakdown_time = True, n * dt
            traj.breakdown_reason = f"non-finite field: {exc}"
            log.warning("run stopped at t=%g: %s", n * dt, exc)
            break
        h_acc += 0.5 * dt * (h + tail[-1][0])
        r_acc += 0.5 * dt * (tr + tail[-1][1])
        remember(h, tr)
        slope = float(np.max(np.abs(ux)))
        amp = float(np.max(np.abs(u)))
        reason = None
        if slope > opts.blowup_threshold:
            reason = f"slope blow-up: max|u_x|={slope:.3g}"
        elif slope > opts.resolved_slope_factor * amp / grid.dx:
            reason = (f"front narrower than the grid resolves: max|u_x|={slope:.3g}, "
                      f"max|u|/dx={amp / grid.dx:.3g}")
        if reason:
            traj.truncated, traj.breakdown_time = True, n * dt
            traj.breakdown_reason = reason
            log.warning("run stopped at t=%g: %s", n * dt, reason)
            break
        if dt > _cfl_limit(spec, grid, u, opts.cfl_safety):
            traj.truncated, traj.breakdown_time = True, n * dt
            traj.breakdown_reason = "CFL limit exceeded by the current solution"
            log.warning("run stopped at t=%g: %s", n * dt, traj.breakdown_reason)
            break
        if n in marks:
            checkpoint(n, u, ux)

    traj.h_accumulator = GridFunction(grid, h_acc)
    traj.r_accumulator = GridFunction(grid, r_acc)
    return traj


def _tag(t: float) -> str:
    s = f"{t:.6f}".rstrip("0").rstrip(".")
    return s or "0"


def write_series(records, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=False) + "\n")
    return path


def read_series(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def export_trajectory(traj: Trajectory, directory, records=None) -> list[Path]:
    """series.ndjson plus one snapshot_t<tag>.csv (x, value, u_x) per checkpoint."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = [write_series(traj.records if records is None else records,
                          directory / "series.ndjson")]
    for t, (u, ux) in zip(traj.times, traj.snapshots):
        files.append(write_csv(directory / f"snapshot_t{_tag(t)}.csv", ("value", u), ("u_x", ux)))
    return files
