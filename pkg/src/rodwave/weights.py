"""Weight functions for weighted-norm estimates: admissibility, moderateness, truncation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import gamma as gamma_fn, gammaincc

from .grid import GridFunction, lp_norm

Scalar = Callable[[np.ndarray], np.ndarray]

CATALOG = ("exp_half", "exp_a", "poly_b", "paper_envelope_d")
LATTICE_EXTENT = 40.0
LATTICE_POINTS = 201
DERIV_SPACING = 1e-3


@dataclass(frozen=True, eq=False)
class Weight:
    name: str
    phi: Scalar
    v: Scalar | None
    A: float
    c0: float = 1.0
    inf_v: float = 1.0
    kernel_v_l1: float | None = None
    phi_prime: Scalar | None = None
    kinks: tuple = (0.0,)
    params: dict = field(default_factory=dict)


def lattice(extent: float = LATTICE_EXTENT, points: int = LATTICE_POINTS) -> np.ndarray:
    """Deterministic 1-D axis; pair checks use its Cartesian square."""
    return np.linspace(-extent, extent, points)


def _abs_sign(x):
    return np.abs(x), np.sign(x)


def catalog(name: str, params: dict | None = None) -> Weight:
    params = dict(params or {})
    if name == "exp_half":
        phi = lambda x: np.exp(0.5 * np.abs(x))
        return Weight("exp_half", phi, phi, A=0.5, kernel_v_l1=4.0,
                      phi_prime=lambda x: 0.5 * np.sign(x) * np.exp(0.5 * np.abs(x)))
    if name == "exp_a":
        a = float(params["a"])
        if not 0 < a < 1:
            raise ValueError(f"exp_a needs a in (0, 1), got {a}: e^(-|x|) v is not integrable")
        phi = lambda x: np.exp(a * np.abs(x))
        return Weight(f"exp_a({a:g})", phi, phi, A=a, kernel_v_l1=2.0 / (1.0 - a),
                      phi_prime=lambda x: a * np.sign(x) * np.exp(a * np.abs(x)), params={"a": a})
    if name == "poly_b":
        b = float(params["b"])
        if b < 0:
            raise ValueError(f"poly_b needs b >= 0, got {b}")
        phi = lambda x: (1.0 + np.abs(x)) ** b
        # int e^{-|x|} (1+|x|)^b dx = 2 e Gamma(b+1, 1)
        l1 = 2.0 * math.e * gammaincc(b + 1.0, 1.0) * gamma_fn(b + 1.0)
        return Weight(f"poly_b({b:g})", phi, phi, A=b, kernel_v_l1=float(l1),
                      phi_prime=lambda x: b * np.sign(x) * (1.0 + np.abs(x)) ** (b - 1.0),
                      params={"b": b})
    if name == "paper_envelope_d":
        d = float(params["d"])
        if not d > 0.5:
            raise ValueError(f"paper_envelope_d needs d > 1/2, got {d}")

        def phi(x):
            a = np.abs(x)
            return np.exp(0.5 * a) * np.sqrt(1.0 + a) * np.log(math.e + a) ** d

        def phi_prime(x):
            a, s = _abs_sign(x)
            logd = 0.5 + 0.5 / (1.0 + a) + d / ((math.e + a) * np.log(math.e + a))
            return s * logd * phi(x)

        l1, _ = sp_integrate.quad(
            lambda y: math.exp(-0.5 * y) * math.sqrt(1.0 + y) * math.log(math.e + y) ** d,
            0, np.inf, limit=200)
        return Weight(f"paper_envelope_d({d:g})", phi, phi, A=1.0 + d / math.e,
                      kernel_v_l1=2.0 * l1, phi_prime=phi_prime, params={"d": d})
    raise ValueError(f"unknown catalog weight {name!r}; choose from {CATALOG}")


def truncate(w: Weight, N: float) -> Weight:
    """phi_N = min(phi, N), same A and v, moderateness constant max(c0, 1/inf_v)."""
    if not N > 0:
        raise ValueError("truncation level must be positive")
    base_phi, base_prime = w.phi, w.phi_prime

    def phi(x):
        return np.minimum(base_phi(x), N)

    prime = None
    if base_prime is not None:
        def prime(x):
            return np.where(base_phi(x) < N, base_prime(x), 0.0)

    return replace(w, name=f"{w.name}|N={N:g}", phi=phi, phi_prime=prime,
                   c0=max(w.c0, 1.0 / w.inf_v), params={**w.params, "N": N})


@dataclass
class PairCheck:
    ok: bool
    worst_ratio: float
    witness: tuple

    def as_dict(self):
        return {"ok": self.ok, "worst_ratio": self.worst_ratio, "witness": list(self.witness)}


def _pair_max(num, den, xs):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = num / den
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    k = int(np.argmax(ratio))
    i, j = np.unravel_index(k, ratio.shape)
    return float(ratio[i, j]), (float(xs[i]), float(xs[j]))


def check_submultiplicative(v: Scalar, sampler=None) -> PairCheck:
    """Worst v(x+y) / (v(x) v(y)) over all lattice pairs; ok iff <= 1 + 1e-9."""
    xs = lattice() if sampler is None else np.asarray(sampler, dtype=float)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    with np.errstate(over="ignore"):
        vx = v(xs)
        num = v(X + Y)
        den = vx[:, None] * vx[None, :]
    worst, wit = _pair_max(num, den, xs)
    return PairCheck(worst <= 1.0 + 1e-9, worst, wit)


@dataclass
class ModerateEstimate:
    c0: float
    c0_extended: float
    moderate: bool
    witness: tuple


def estimate_moderate_constant(phi: Scalar, v: Scalar, sampler=None) -> ModerateEstimate:
    """max phi(x+y) / (v(x) phi(y)) on the lattice and on one of twice the extent.

    A finite constant should not move when the lattice grows; growth marks phi
    as not v-moderate.
    """
    xs = lattice() if sampler is None else np.asarray(sampler, dtype=float)

    def worst(axis):
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        with np.errstate(over="ignore"):
            return _pair_max(phi(X + Y), v(axis)[:, None] * phi(axis)[None, :], axis)

    c, wit = worst(xs)
    c2, _ = worst(2.0 * xs)
    moderate = math.isfinite(c) and math.isfinite(c2) and c2 <= c * (1 + 1e-6)
    return ModerateEstimate(c, c2, moderate, wit)


def _log_derivative_check(w: Weight, extent: float):
    xs = np.arange(-extent, extent + 0.5 * DERIV_SPACING, DERIV_SPACING)
    kinks = np.asarray(w.kinks, dtype=float)
    xs = xs[np.min(np.abs(xs[:, None] - kinks[None, :]), axis=1) > 0.5 * DERIV_SPACING]
    with np.errstate(over="ignore", invalid="ignore"):
        phi = w.phi(xs)
        if w.phi_prime is not None:
            dphi = w.phi_prime(xs)
        else:
            h = DERIV_SPACING / 4
            near = np.min(np.abs(xs[:, None] - kinks[None, :]), axis=1) < DERIV_SPACING
            side = np.sign(xs - kinks[np.argmin(np.abs(xs[:, None] - kinks[None, :]), axis=1)])
            central = (w.phi(xs + h) - w.phi(xs - h)) / (2 * h)
            onesided = side * (w.phi(xs + side * h) - phi) / h
            dphi = np.where(near, onesided, central)
        excess = np.abs(dphi) - w.A * np.abs(phi) * (1 + 1e-9)
    excess = np.where(np.isnan(excess), np.inf, excess)
    k = int(np.argmax(excess))
    return bool(excess[k] <= 0), float(xs[k])


def _tail_corrected_integral(fn: Callable, extent: float, power: float = 1.0):
    """int_{-extent}^{extent} fn^power plus an exponential-fit estimate of the remaining tails."""
    total = 0.0
    for sgn in (1.0, -1.0):
        g = lambda y: np.float64(fn(sgn * y)) ** power
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            body, _ = sp_integrate.quad(g, 0.0, extent, limit=400)
        a, b = g(0.5 * extent), g(extent)
        if not (math.isfinite(body) and math.isfinite(a) and math.isfinite(b)):
            return math.inf
        if b == 0.0:
            tail = 0.0
        elif not (a > 0 and b < a):
            return math.inf
        else:
            rate = math.log(a / b) / (0.5 * extent)
            tail = b / rate
        total += body + tail
    return float(total)


@dataclass
class AdmissibilityReport:
    name: str
    admissible: bool
    A: float
    c0: float
    inf_v: float
    kernel_v_l1: float
    kernel_v_norms: dict
    failures: list

    def as_dict(self) -> dict:
        return {
            "name": self.name, "admissible": self.admissible, "A": self.A, "c0": self.c0,
            "inf_v": self.inf_v, "kernel_v_l1": self.kernel_v_l1,
            "kernel_v_norms": self.kernel_v_norms, "failures": self.failures,
        }


def check_admissible(w: Weight, extent: float = LATTICE_EXTENT) -> AdmissibilityReport:
    failures = []
    xs = lattice(extent)

    ok, wx = _log_derivative_check(w, extent)
    if not ok:
        failures.append({"check": "log_derivative_bound", "witness_x": wx, "witness_y": None})

    v = w.v if w.v is not None else w.phi
    sub = check_submultiplicative(v, xs)
    if not sub.ok:
        failures.append({"check": "submultiplicative", "witness_x": sub.witness[0],
                         "witness_y": sub.witness[1]})

    mod = estimate_moderate_constant(w.phi, v, xs)
    if not mod.moderate or mod.c0 > w.c0 * (1 + 1e-9):
        failures.append({"check": "moderate", "witness_x": mod.witness[0],
                         "witness_y": mod.witness[1]})

    dense = np.linspace(-extent, extent, 20001)
    with np.errstate(over="ignore"):
        vmin = float(np.min(v(dense)))
    if not vmin > 0:
        failures.append({"check": "inf_v_positive",
                         "witness_x": float(dense[np.argmin(v(dense))]), "witness_y": None})

    kern = lambda y: np.exp(-abs(y)) * v(np.array([y], dtype=float))[0]
    with np.errstate(over="ignore", invalid="ignore"):
        l1_a = _tail_corrected_integral(kern, extent)
        l1_b = _tail_corrected_integral(kern, 2 * extent)
        l2 = math.sqrt(_tail_corrected_integral(kern, 2 * extent, power=2.0))
        linf = float(np.max(np.exp(-np.abs(2 * dense)) * v(2 * dense)))
    stable = math.isfinite(l1_a) and math.isfinite(l1_b) and abs(l1_b - l1_a) <= 1e-3 * l1_b
    if not stable:
        failures.append({"check": "kernel_v_integrable", "witness_x": 2 * extent, "witness_y": None})

    return AdmissibilityReport(
        name=w.name, admissible=not failures, A=w.A, c0=mod.c0, inf_v=vmin,
        kernel_v_l1=l1_b, kernel_v_norms={"1": l1_b, "2": l2, "inf": linf},
        failures=failures,
    )


@dataclass
class YoungReport:
    lhs: float
    rhs: float
    ok: bool

    @property
    def ratio(self) -> float:
        return 0.0 if self.rhs == 0 else self.lhs / self.rhs


def periodic_convolution(fn: GridFunction, gn: GridFunction) -> GridFunction:
    """(f * g)(x_i) = dx sum_j f(x_i - x_j) g(x_j) with indices wrapped on the grid."""
    g = fn.grid
    N = g.point_count
    # node x_i - x_j = -L + (i - j + N/2) dx, so shift the index by N/2
    f_shift = np.roll(fn.values, -N // 2)
    conv = np.fft.ifft(np.fft.fft(f_shift) * np.fft.fft(gn.values)).real * g.dx
    return GridFunction(g, conv)


def young_check(fn: GridFunction, gn: GridFunction, w: Weight, p: float) -> YoungReport:
    """lhs = ||(f*g) phi||_p against rhs = c0 ||f v||_1 ||g phi||_p."""
    x = fn.grid.x
    phi = w.phi(x)
    v = (w.v if w.v is not None else w.phi)(x)
    conv = periodic_convolution(fn, gn)
    lhs = lp_norm(conv.with_values(conv.values * phi), p)
    rhs = w.c0 * lp_norm(fn.with_values(fn.values * v), 1) * lp_norm(gn.with_values(gn.values * phi), p)
    return YoungReport(lhs, rhs, lhs <= rhs * (1 + 1e-6))
