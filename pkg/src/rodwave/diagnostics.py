"""Fields and functionals evaluated on solutions, and the exponential tail decomposition.

For t > 0 the solution splits exactly as

    u(t,x) = u0(x) + Rr(t,x) + t e^{-x} (lam_plus(t) - eps_plus(t,x))     x >= 0
    u(t,x) = u0(x) + Rr(t,x) - t e^{x}  (lam_minus(t) - eps_minus(t,x))   x < 0

with sigma = (1/t) int_0^t h dtau, lam_pm = 1/2 int e^{+-y} sigma dy,
Rr = -int_0^t f'(u) u_x dtau and the nonnegative corrections

    eps_plus(t,x)  = 1/2 int_x^inf  (e^{y}  + e^{2x-y})    sigma dy
    eps_minus(t,x) = 1/2 int_-inf^x (e^{-y} + e^{-(2x-y)}) sigma dy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import stencils
from .grid import GridFunction, lp_norm, spectral_derivative, write_csv
from .helmholtz import HelmholtzOperator
from .model import ModelSpec, nonlinear_fields

# integrand size at the domain edge, relative to its max, above which the
# exponential moments are refused
EDGE_GUARD = 1e-12
EDGE_CELLS = 8
ENVELOPE_MASK = 1e-250


class BoundaryContamination(ValueError):
    pass


def h_field(spec: ModelSpec, u: GridFunction, op: HelmholtzOperator | None = None) -> GridFunction:
    """Pointwise g(u) + f''(u) u_x^2 / 2 (spectral u_x unless an operator is given)."""
    ux = spectral_derivative(u).values if op is None else op.derivative(u.values)
    v = u.values
    return GridFunction(u.grid, spec.g(v) + 0.5 * spec.f_second(v) * ux**2)


def F_field(spec: ModelSpec, op: HelmholtzOperator, u: GridFunction) -> GridFunction:
    """d/dx Lambda^{-2} of the source field, assembled as in the right-hand side."""
    _, source, _ = nonlinear_fields(spec, op, u.values)
    return GridFunction(u.grid, op.grad_inverse(source))


def energy(u: GridFunction) -> float:
    """int (u^2 + u_x^2) dx with spectral u_x."""
    ux = spectral_derivative(u).values
    return float(u.grid.dx * math.fsum(u.values**2 + ux**2))


def sigma_field(traj, t: float) -> GridFunction:
    i = traj.index(t)
    if traj.times[i] == 0.0:
        return h_field(traj.spec, traj.u0, traj.op)
    return GridFunction(traj.grid, traj.h_integrals[i].values / traj.times[i])


def _guard(integrand: np.ndarray, side: str, t: float):
    top = np.max(np.abs(integrand))
    if top == 0.0:
        return
    edge = integrand[-EDGE_CELLS:] if side == "+" else integrand[:EDGE_CELLS]
    ratio = float(np.max(np.abs(edge)) / top)
    if not ratio <= EDGE_GUARD:
        raise BoundaryContamination(
            f"e^({side}y) sigma at t={t:g} is {ratio:.3g} of its max at the domain "
            f"edge (limit {EDGE_GUARD:g}); enlarge L or use the sweep scheme")


def _moments(traj, t):
    sig = sigma_field(traj, t)
    x = traj.grid.x
    ip = np.exp(x) * sig.values
    im = np.exp(-x) * sig.values
    _guard(ip, "+", t)
    _guard(im, "-", t)
    return sig, ip, im


def lambda_pm(traj, t: float) -> tuple[float, float]:
    """(lam_plus, lam_minus) = 1/2 int e^{+-y} sigma(t,y) dy."""
    _, ip, im = _moments(traj, t)
    dx = traj.grid.dx
    return 0.5 * dx * math.fsum(ip), 0.5 * dx * math.fsum(im)


def epsilon_pm(traj, t: float) -> tuple[GridFunction, GridFunction]:
    """The tail corrections eps_plus, eps_minus on the whole grid (both >= 0 when sigma >= 0)."""
    _, ip, im = _moments(traj, t)
    g = traj.grid
    x, dx = g.x, g.dx
    ep = 0.5 * (stencils.cumulative_from_right(ip, dx)
                + np.exp(2 * x) * stencils.cumulative_from_right(im, dx))
    em = 0.5 * (stencils.cumulative_from_left(im, dx)
                + np.exp(-2 * x) * stencils.cumulative_from_left(ip, dx))
    return GridFunction(g, ep), GridFunction(g, em)


def numerical_support(u: GridFunction) -> float:
    """Largest |x| where |u| exceeds machine epsilon times its max (0 for u = 0)."""
    a = np.abs(u.values)
    top = a.max()
    if top == 0.0:
        return 0.0
    return float(np.max(np.abs(u.x[a > np.finfo(float).eps * top])))


@dataclass
class ProfileReport:
    t: float
    lambda_plus: float
    lambda_minus: float
    epsilon_plus: GridFunction
    epsilon_minus: GridFunction
    r_field: GridFunction
    identity_residual: GridFunction
    residual_max: float
    tail_fit: dict = field(default_factory=dict)
    tail_fit_minus: dict = field(default_factory=dict)
    r_decay_exponent: float | None = None

    def summary(self) -> dict:
        return {
            "t": self.t,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": self.lambda_minus,
            "residual_max": self.residual_max,
            "tail_relative_error": self.tail_fit.get("relative_error"),
        }

    def write(self, directory, stem: str = "profile") -> list[Path]:
        directory = Path(directory)
        csv_path = write_csv(directory / f"{stem}.csv",
                             ("eps_plus", self.epsilon_plus), ("eps_minus", self.epsilon_minus),
                             ("r_field", self.r_field), ("identity_residual", self.identity_residual))
        json_path = directory / f"{stem}.json"
        json_path.write_text(json.dumps(self.summary()) + "\n")
        return [csv_path, json_path]


def _tail_fit(x, observed, target, lo, hi):
    w = (x >= lo) & (x <= hi)
    if hi <= lo or not w.any():
        return {"x_window": [lo, hi], "relative_error": None}
    tgt = target[w]
    if np.all(tgt == 0.0):
        err = 0.0 if np.all(observed[w] == 0.0) else math.inf
    else:
        err = float(np.max(np.abs(observed[w] - tgt) / np.abs(tgt)))
    return {"x_window": [float(lo), float(hi)], "relative_error": err}


def _decay_exponent(x, r_env, lo, hi):
    # slope of log|R| against log(1+|x|) on the window; None when R vanishes there
    w = (np.abs(x) >= lo) & (np.abs(x) <= hi) & (np.abs(r_env) > 0)
    if w.sum() < 4:
        return None
    slope = np.polyfit(np.log1p(np.abs(x[w])), np.log(np.abs(r_env[w])), 1)[0]
    return float(slope)


def profile_decompose(traj, t: float) -> ProfileReport:
    """Assemble both sides of the tail decomposition at checkpoint t > 0."""
    i = traj.index(t)
    t = traj.times[i]
    if t <= 0:
        raise ValueError("the decomposition needs t > 0")
    g = traj.grid
    x = g.x
    lp, lm = lambda_pm(traj, t)
    ep, em = epsilon_pm(traj, t)
    u = traj.snapshots[i][0].values
    u0 = traj.u0.values
    rr = -traj.r_integrals[i].values
    tail = np.where(x >= 0,
                    t * np.exp(-np.abs(x)) * (lp - ep.values),
                    -t * np.exp(-np.abs(x)) * (lm - em.values))
    res = u - (u0 + rr + tail)
    top = np.max(np.abs(u))
    res_max = float(np.max(np.abs(res)) / top) if top > 0 else float(np.max(np.abs(res)))

    x0 = numerical_support(traj.u0)
    lo, hi = x0 + 5.0, g.half_length - 10.0
    fit_p = _tail_fit(x, u * np.exp(x) / t, lp - ep.values, lo, hi)
    fit_m = _tail_fit(-x, -u * np.exp(-x) / t, lm - em.values, lo, hi)
    r_env = rr / (t * np.exp(-np.abs(x)))
    return ProfileReport(
        t=t, lambda_plus=lp, lambda_minus=lm, epsilon_plus=ep, epsilon_minus=em,
        r_field=GridFunction(g, rr), identity_residual=GridFunction(g, res),
        residual_max=res_max, tail_fit=fit_p, tail_fit_minus=fit_m,
        r_decay_exponent=_decay_exponent(x, r_env, lo, hi),
    )


def envelope_weight(x, d: float) -> np.ndarray:
    a = np.abs(x)
    return np.exp(a / 2) * np.sqrt(1 + a) * np.log1p(a) ** d


@dataclass
class DecayEnvelope:
    d: float
    envelope_values: GridFunction
    sup_value: float
    argmax_x: float
    boundary_dominated: bool

    def write(self, path) -> Path:
        return write_csv(path, ("envelope", self.envelope_values))


def decay_envelope(u: GridFunction, u_x: GridFunction, d: float) -> DecayEnvelope:
    """e^{|x|/2} (1+|x|)^{1/2} ln(1+|x|)^d (|u| + |u_x|) and its grid maximum."""
    if not d > 0.5:
        raise ValueError(f"d must exceed 1/2, got {d}")
    amp = np.abs(u.values) + np.abs(u_x.values)
    env = np.where(amp < ENVELOPE_MASK, 0.0, envelope_weight(u.x, d) * amp)
    j = int(np.argmax(env))
    sup = float(env[j])
    L = u.grid.half_length
    edge = sup > 0 and abs(u.x[j]) >= 0.9 * L
    return DecayEnvelope(d, GridFunction(u.grid, env), sup, float(u.x[j]), bool(edge))


@dataclass
class WeightedSeries:
    weight: str
    p: float
    times: list
    norms: list
    ratios: list
    kappa_hat: list
    half_norms: list | None = None

    def rows(self):
        for k, t in enumerate(self.times):
            row = {"t": t, "norm": self.norms[k], "ratio": self.ratios[k], "kappa_hat": self.kappa_hat[k]}
            if self.half_norms is not None:
                row["half_norm"] = self.half_norms[k]
            yield row


def weighted_norm(u: GridFunction, ux: GridFunction, phi_values: np.ndarray, p: float) -> float:
    return (lp_norm(u.with_values(phi_values * u.values), p)
            + lp_norm(ux.with_values(phi_values * ux.values), p))


def weighted_persistence(traj, weight, p: float, two_tier: bool = False) -> WeightedSeries:
    """||phi u||_p + ||phi u_x||_p at every checkpoint, its ratio to t=0 and the running max.

    With ``two_tier`` also tracks ||phi^{1/2} u||_2 + ||phi^{1/2} u_x||_2.
    """
    if not (p >= 2 or p == math.inf):
        raise ValueError("p must lie in [2, inf]")
    x = traj.grid.x
    with np.errstate(over="ignore"):
        phi = np.asarray(weight.phi(x), dtype=float)
    u0, ux0 = traj.snapshots[0]
    base = weighted_norm(u0, ux0, phi, p) if np.all(np.isfinite(phi)) else math.inf
    if not math.isfinite(base):
        raise ValueError(f"weighted norm of the datum under {weight.name} is not finite")
    norms, ratios, kappa, halves = [], [], [], []
    run = 0.0
    for u, ux in traj.snapshots:
        n = weighted_norm(u, ux, phi, p)
        r = 1.0 if base == 0.0 else n / base
        run = max(run, r)
        norms.append(n)
        ratios.append(r)
        kappa.append(run)
        if two_tier:
            halves.append(weighted_norm(u, ux, np.sqrt(phi), 2))
    return WeightedSeries(weight.name, p, list(traj.times), norms, ratios, kappa,
                          halves if two_tier else None)


@dataclass
class BoundConstantM:
    sup_u: float
    sup_ux: float
    sup_f_u: float
    sup_fp_u: float
    sup_fpp_u: float

    @property
    def M(self) -> float:
        return self.sup_u + self.sup_ux + self.sup_f_u + self.sup_fp_u + self.sup_fpp_u


def bound_constant_M(traj, upto: float | None = None) -> BoundConstantM:
    """Suprema over checkpoints (up to ``upto``) of |u|, |u_x|, |f(u)|, |f'(u)|, |f''(u)|."""
    if not traj.snapshots:
        raise ValueError("empty trajectory")
    spec = traj.spec
    vals = np.zeros(5)
    for t, (u, ux) in zip(traj.times, traj.snapshots):
        if upto is not None and t > upto * (1 + 1e-12):
            break
        v = u.values
        vals = np.maximum(vals, [
            np.max(np.abs(v)), np.max(np.abs(ux.values)), np.max(np.abs(spec.f(v))),
            np.max(np.abs(spec.f_prime(v))), np.max(np.abs(spec.f_second(v))),
        ])
    return BoundConstantM(*map(float, vals))
