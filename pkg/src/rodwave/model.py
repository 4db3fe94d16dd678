"""Nonlinearity pairs (f, g), hypothesis checks, presets and the evolution right-hand side.

The equation solved is

    u_t + f'(u) u_x + d/dx (1 - d^2/dx^2)^{-1} [ g(u) + f''(u) u_x^2 / 2 ] = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridFunction, _check_same_grid
from .helmholtz import HelmholtzOperator

Scalar = Callable[[np.ndarray], np.ndarray]

PRESETS = ("bbm", "dai", "dgh_reduced", "rch")
REQUIRED_PARAMS = {
    "bbm": (),
    "dai": ("gamma",),
    "dgh_reduced": ("Gamma_hat",),
    "rch": ("beta", "gamma", "Gamma"),
}
SAMPLE_POINTS = 2049


class NumericalBreakdown(FloatingPointError):
    """A field went non-finite; ``where`` names the field and node."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    f: Scalar
    f_prime: Scalar
    f_second: Scalar
    g: Scalar
    g_quadratic_constant: float | None = None
    f_prime_vanishes_at_zero: bool = True
    parameters: dict = field(default_factory=dict)
    # f' odd, f'' and g even: u(t,x) -> -u(t,-x) maps solutions to solutions
    odd_reflection_symmetric: bool = False

    def __call__(self, u):
        return self.f(u), self.g(u)


def _const(c):
    return lambda u: np.full(np.shape(u), float(c))


def _require(name, params):
    missing = [k for k in REQUIRED_PARAMS[name] if k not in params]
    if missing:
        raise KeyError(f"preset {name!r} requires parameter(s) {', '.join(missing)}")
    extra = set(params) - set(REQUIRED_PARAMS[name])
    if extra:
        raise KeyError(f"preset {name!r} got unknown parameter(s) {', '.join(sorted(extra))}")
    return {k: float(params[k]) for k in REQUIRED_PARAMS[name]}


def build_preset(name: str, params: dict | None = None) -> ModelSpec:
    """Closed-form presets.

    bbm          f = 0,              g = u^2/2
    dai          f = gamma u^2/2,    g = (3-gamma) u^2/2      (gamma = 1: Camassa-Holm)
    dgh_reduced  f = u^2 + Gh u,     g = u^2                  (Gh = Gamma_hat)
    rch          f = u^2/2 + Gamma u,
                 g = (1 + beta u/3 + gamma u^2/4) u^2
    """
    params = dict(params or {})
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    p = _require(name, params)
    if name == "bbm":
        return ModelSpec(
            "bbm", f=_const(0.0), f_prime=_const(0.0), f_second=_const(0.0),
            g=lambda u: 0.5 * u**2, g_quadratic_constant=0.5,
            f_prime_vanishes_at_zero=True, parameters=p, odd_reflection_symmetric=True,
        )
    if name == "dai":
        gm = p["gamma"]
        return ModelSpec(
            "dai", f=lambda u: 0.5 * gm * u**2, f_prime=lambda u: gm * u,
            f_second=_const(gm), g=lambda u: 0.5 * (3.0 - gm) * u**2,
            g_quadratic_constant=0.5 * (3.0 - gm) if gm <= 3.0 else None,
            f_prime_vanishes_at_zero=True, parameters=p, odd_reflection_symmetric=True,
        )
    if name == "dgh_reduced":
        gh = p["Gamma_hat"]
        return ModelSpec(
            "dgh_reduced", f=lambda u: u**2 + gh * u, f_prime=lambda u: 2.0 * u + gh,
            f_second=_const(2.0), g=lambda u: u**2, g_quadratic_constant=1.0,
            f_prime_vanishes_at_zero=(gh == 0.0), parameters=p,
            odd_reflection_symmetric=(gh == 0.0),
        )
    b, gm, G = p["beta"], p["gamma"], p["Gamma"]
    return ModelSpec(
        "rch", f=lambda u: 0.5 * u**2 + G * u, f_prime=lambda u: u + G,
        f_second=_const(1.0),
        g=lambda u: (1.0 + b * u / 3.0 + 0.25 * gm * u**2) * u**2,
        g_quadratic_constant=None,
        f_prime_vanishes_at_zero=(G == 0.0), parameters=p,
        odd_reflection_symmetric=(G == 0.0 and b == 0.0),
    )


def galilean_reduce_dgh(alpha: float, Gamma: float) -> tuple[ModelSpec, float]:
    """Remove the linear advection of the DGH model by moving with speed alpha.

    Returns the reduced model (Gamma_hat = Gamma - alpha) and the shift speed;
    a reduced solution v gives u(t, x) = v(t, x - alpha t).
    """
    return build_preset("dgh_reduced", {"Gamma_hat": Gamma - alpha}), float(alpha)


@dataclass(frozen=True)
class HypothesisReport:
    h1_smooth: bool
    h2_ok: bool
    h3_ok: bool
    quadratic_bound_ok: bool
    quadratic_constant: float
    quadratic_positive_ok: bool
    f_prime_zero_ok: bool
    amplitude_range: tuple[float, float]
    h2_witness: float | None = None
    h3_witness: float | None = None
    quadratic_witness: float | None = None
    f_zero_ok: bool = True

    @property
    def passed(self) -> bool:
        return self.f_zero_ok and self.h2_ok and self.h3_ok and self.quadratic_bound_ok

    def failures(self) -> list[str]:
        out = []
        if not self.f_zero_ok:
            out.append("f(0) != 0")
        if not self.h2_ok:
            out.append(f"f'' < 0 at x={self.h2_witness:.6g}")
        if not self.h3_ok:
            out.append(f"g <= 0 away from 0 at x={self.h3_witness:.6g}")
        if not self.quadratic_bound_ok:
            out.append("no finite c with g <= c u^2")
        return out

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["amplitude_range"] = list(self.amplitude_range)
        d["passed"] = self.passed
        return d


def validate_hypotheses(spec: ModelSpec, M0: float) -> HypothesisReport:
    """Sample f'' and g on [-M0, M0] and report sign violations with witnesses."""
    if not M0 > 0:
        raise ValueError("amplitude M0 must be positive")
    s = np.linspace(-M0, M0, SAMPLE_POINTS)
    away = np.abs(s) >= 1e-12

    f0 = float(np.asarray(spec.f(np.zeros(1)))[0])
    fpp = np.asarray(spec.f_second(s), dtype=float)
    gv = np.asarray(spec.g(s), dtype=float)
    g0 = float(np.asarray(spec.g(np.zeros(1)))[0])

    h2_bad = fpp < 0
    h2_w = float(s[np.argmin(fpp)]) if h2_bad.any() else None

    h3_bad = (gv < 0) | (away & (gv <= 0))
    h3_ok = not h3_bad.any() and g0 == 0.0
    h3_w = None
    if not h3_ok:
        h3_w = float(s[np.argmin(np.where(away, gv, np.inf))]) if h3_bad.any() else 0.0

    ratio = gv[away] / s[away] ** 2
    c = float(np.max(ratio))
    # any c > 0 above the sampled ratio works, so only finiteness matters
    q_ok = bool(np.isfinite(c))
    c = max(c, 0.0)
    q_pos = bool(np.min(ratio) > 0)
    q_w = None if q_pos else float(s[away][np.argmin(ratio)])

    fp0 = float(np.asarray(spec.f_prime(np.zeros(1)))[0])
    return HypothesisReport(
        h1_smooth=True,
        h2_ok=not h2_bad.any(), h2_witness=h2_w,
        h3_ok=h3_ok, h3_witness=h3_w,
        quadratic_bound_ok=q_ok, quadratic_constant=c,
        quadratic_positive_ok=q_pos, quadratic_witness=q_w,
        f_prime_zero_ok=abs(fp0) <= 1e-14,
        amplitude_range=(-float(M0), float(M0)),
        f_zero_ok=abs(f0) <= 1e-14,
    )


def _finite(name, arr, grid_x=None):
    bad = ~np.isfinite(arr)
    if bad.any():
        j = int(np.argmax(bad))
        loc = f" (x={grid_x[j]:.6g})" if grid_x is not None and len(grid_x) == len(arr) else ""
        raise NumericalBreakdown(f"non-finite {name} at node {j}{loc}", where=(name, j))
    return arr


def nonlinear_fields(spec: ModelSpec, op: HelmholtzOperator, u: np.ndarray):
    """u_x, the source g(u) + f''(u) u_x^2/2 and the transport f'(u) u_x.

    Products are formed on the operator's product grid (zero-padded for the
    spectral scheme, pointwise for the sweep scheme).
    """
    ux = _finite("u_x", op.derivative(u))
    uf, uxf = op.lift(u), op.lift(ux)
    source = op.project(spec.g(uf) + 0.5 * spec.f_second(uf) * uxf**2)
    transport = op.project(spec.f_prime(uf) * uxf)
    return ux, _finite("h", source), _finite("f'(u)u_x", transport)


def rhs_values(spec: ModelSpec, op: HelmholtzOperator, u: np.ndarray) -> np.ndarray:
    _, source, transport = nonlinear_fields(spec, op, u)
    out = -transport - op.grad_inverse(source)
    return _finite("du/dt", out, op.grid.x)


def rhs(spec: ModelSpec, op: HelmholtzOperator, u: GridFunction) -> GridFunction:
    """du/dt = -f'(u) u_x - d/dx Lambda^{-2} (g(u) + f''(u) u_x^2 / 2)."""
    _check_same_grid(op.grid, u.grid)
    return GridFunction(u.grid, rhs_values(spec, op, u.values))


def mirrored(spec: ModelSpec) -> ModelSpec:
    """The sign-flipped pair (f, g) -> (-f, -g).

    Under u -> -u the equation keeps its form with f(u) -> -f(-u) and
    g(u) -> -g(-u); this returns that transformed pair.
    """
    return ModelSpec(
        name=f"mirror_{spec.name}",
        f=lambda u: -spec.f(-u), f_prime=lambda u: spec.f_prime(-u),
        f_second=lambda u: -spec.f_second(-u), g=lambda u: -spec.g(-u),
        g_quadratic_constant=None,
        f_prime_vanishes_at_zero=spec.f_prime_vanishes_at_zero,
        parameters=dict(spec.parameters),
    )
