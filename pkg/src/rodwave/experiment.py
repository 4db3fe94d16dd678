"""Config-driven runs: initial data, scenarios, emitted files and verdicts."""

from __future__ import annotations

import json
import logging
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .diagnostics import (BoundaryContamination, decay_envelope, energy, lambda_pm,
                          profile_decompose, weighted_persistence)
from .evolve import EvolveOptions, _tag, evolve, export_trajectory, read_series, write_series
from .grid import Grid, GridFunction, lp_norm, make_grid, read_grid_function
from .model import NumericalBreakdown, build_preset, validate_hypotheses
from .weights import (catalog, check_admissible, estimate_moderate_constant, truncate,
                      young_check)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_ABORT = 0, 1, 2, 3
INTERIOR_MARGIN = 10.0


# -- initial data --------------------------------------------------------------

def _smoothstep(s):
    # C-infinity transition: 0 for s <= 0, 1 for s >= 1
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def smooth_abs(x):
    """Even C-infinity function equal to |x| for |x| >= 1 and to 1/2 at 0."""
    a = np.abs(x)
    blend = _smoothstep(a)
    return blend * a + (1.0 - blend) * 0.5 * (1.0 + a**2)


def make_datum(kind: str, params: dict, grid: Grid) -> GridFunction:
    x = grid.x
    p = dict(params)
    if kind == "gaussian":
        a, w, x0 = p.get("a", 1.0), p.get("w", 1.0), p.get("x0", 0.0)
        if not w > 0:
            raise ValueError("gaussian width must be positive")
        return GridFunction(grid, a * np.exp(-(((x - x0) / w) ** 2)))
    if kind == "bump":
        a, rho = p.get("a", 1.0), p.get("rho", 1.0)
        if not rho > 0:
            raise ValueError("bump radius must be positive")
        if rho >= grid.half_length / 2:
            raise ValueError(f"bump radius {rho} >= L/2 leaves no room for tail windows")
        s = x / rho
        inside = np.abs(s) < 1
        v = np.zeros_like(x)
        v[inside] = a * np.exp(-1.0 / (1.0 - s[inside] ** 2))
        return GridFunction(grid, v)
    if kind == "envelope_class":
        a, dp = p.get("a", 1.0), p.get("d_prime", 1.0)
        if not dp > 0.5:
            raise ValueError("envelope_class needs d_prime > 1/2")
        r = smooth_abs(x)
        return GridFunction(grid, a * np.exp(-0.5 * r) / np.sqrt(1.0 + r) / np.log(math.e + r) ** dp)
    if kind == "custom_csv":
        return read_grid_function(p["path"], grid)
    raise ValueError(f"unknown datum kind {kind!r}")


# -- JSON helpers ----------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


_SPECIAL = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _decode(v):
    """Inverse of _jsonable for the non-finite float markers."""
    if isinstance(v, dict):
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    if isinstance(v, str) and v in _SPECIAL:
        return _SPECIAL[v]
    return v


def _dump(path: Path, obj) -> Path:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")
    return path


# -- scenario records and verdicts -------------------------------------------------

def _weight_label(name, p):
    return f"{name}|p={'inf' if math.isinf(p) else format(p, 'g')}"


def _records(cfg: ExperimentConfig, traj) -> list[dict]:
    """Per-checkpoint diagnostics; raises BoundaryContamination where tails are needed."""
    grid = traj.grid
    x = grid.x
    needs_tails = cfg.scenario in ("profile", "compact_support")
    interior = np.abs(x) <= grid.half_length - INTERIOR_MARGIN
    probe = int(np.argmin(np.abs(x - cfg.checks["probe_x"])))

    weighted = {}
    if cfg.scenario == "weighted_persistence":
        for name, params in cfg.weight_refs():
            w = catalog(name, params)
            for p in cfg.norms:
                weighted[_weight_label(w.name, p)] = weighted_persistence(traj, w, p, cfg.two_tier)

    out = []
    for i, t in enumerate(traj.times):
        rec = dict(traj.records[i])
        u, ux = traj.snapshots[i]
        try:
            lp, lm = lambda_pm(traj, t)
        except BoundaryContamination:
            if needs_tails:
                raise
            lp = lm = None
        rec["lambda_plus"], rec["lambda_minus"] = lp, lm
        env = decay_envelope(u, ux, cfg.checks["envelope_d"])
        rec["envelope_sup"] = env.sup_value
        rec["envelope_boundary_dominated"] = env.boundary_dominated
        rec["weighted_norm"] = ({k: s.norms[i] for k, s in weighted.items()} if weighted else None)
        if weighted and cfg.two_tier:
            rec["weighted_half_norm"] = {k: s.half_norms[i] for k, s in weighted.items()}
        rec["h_integral_min"] = float(np.min(traj.h_integrals[i].values[interior])) if t > 0 else None
        if needs_tails and t > 0:
            rep = profile_decompose(traj, t)
            rec["residual_max"] = rep.residual_max
            rec["tail_relative_error"] = rep.tail_fit["relative_error"]
            rec["tail_relative_error_minus"] = rep.tail_fit_minus["relative_error"]
            rec["r_decay_exponent"] = rep.r_decay_exponent
        rec["probe_value"] = abs(float(u.values[probe]))
        rec["noise_floor"] = float(np.finfo(float).eps * rec["max_u"])
        out.append(rec)
    return out


def evaluate(scenario: str, checks: dict, records: list[dict], status: dict | None = None):
    """Pass/fail and metrics from emitted per-checkpoint records only."""
    status = status or {}
    if status.get("aborted"):
        return False, {"reason": status["aborted"]}
    if scenario == "weights_suite":
        failed = [r["label"] for r in records if not r["ok"]]
        return not failed, {"checks": len(records), "failed": failed}

    checks = _decode(checks)
    recs = _decode(records)
    zero = recs[0]["max_u"] == 0.0
    later = [r for r in recs if r["t"] > 0]
    m = {"achieved_time": recs[-1]["t"], "zero_datum": zero}

    lam = [v for r in recs for v in (r.get("lambda_plus"), r.get("lambda_minus")) if v is not None]
    m["lambda_min"] = min(lam) if lam else None
    lam_ok = all(v >= 0 for v in lam)
    vanish_ok = all(
        r["max_u"] <= 1e-12 for r in recs
        if r.get("lambda_plus") == 0.0 or r.get("lambda_minus") == 0.0)
    hmins = [r["h_integral_min"] for r in later if r.get("h_integral_min") is not None]
    m["h_integral_min"] = min(hmins) if hmins else None

    if scenario == "conservation":
        e0 = recs[0]["energy"]
        drift = 0.0 if e0 == 0 else max(abs(r["energy"] - e0) / e0 for r in recs)
        m["drift"] = drift
        return drift <= checks["drift_tolerance"], m

    if scenario == "profile":
        res = max((r["residual_max"] for r in later), default=0.0)
        m["residual_max"] = res
        return res <= checks["residual_tolerance"] and lam_ok and vanish_ok, m

    if scenario == "compact_support":
        errs = [r["tail_relative_error"] for r in later]
        worst = 0.0 if zero else max((math.inf if e is None else e for e in errs), default=0.0)
        m["tail_relative_error"] = worst
        tail_seen = zero or all(
            r["probe_value"] > checks["probe_factor"] * r["noise_floor"] for r in later)
        m["tail_detected"] = tail_seen
        m["probe_min"] = min((r["probe_value"] for r in later), default=0.0)
        return worst <= checks["tail_tolerance"] and tail_seen and lam_ok and vanish_ok, m

    if scenario == "decay_persistence":
        e0 = recs[0]["envelope_sup"]
        sups = [r["envelope_sup"] for r in recs]
        ratio = 1.0 if e0 == 0 else max(s / e0 for s in sups)
        m["envelope_ratio_max"] = ratio
        ok = all(math.isfinite(s) for s in sups) and ratio <= checks["envelope_factor"]
        return ok, m

    if scenario == "weighted_persistence":
        labels = list(recs[0]["weighted_norm"] or {})
        kappa = {}
        for lab in labels:
            base = float(recs[0]["weighted_norm"][lab])
            norms = [float(r["weighted_norm"][lab]) for r in recs]
            kappa[lab] = 1.0 if base == 0 else max(n / base for n in norms)
        m["kappa_hat"] = kappa
        ok = all(math.isfinite(k) and k <= checks["kappa_limit"] for k in kappa.values())
        return ok, m

    raise ValueError(f"unknown scenario {scenario!r}")


# -- weights suite ------------------------------------------------------------------

DEFAULT_SUITE = ("exp_half", "exp_a:a=0.5", "exp_a:a=0.99", "poly_b:b=2", "paper_envelope_d:d=1")
YOUNG_NORMS = (2.0, 4.0, math.inf)


def random_smooth(rng, grid: Grid, bumps: int = 3) -> GridFunction:
    """Sum of a few signed Gaussians with random centres and widths."""
    x = grid.x
    v = np.zeros_like(x)
    for _ in range(int(rng.integers(1, bumps + 1))):
        v += rng.normal() * np.exp(-(((x - rng.uniform(-5, 5)) / rng.uniform(0.3, 2.0)) ** 2))
    return GridFunction(grid, v)


def truncation_checks(w, levels=(1.0, 10.0, 100.0), samples: int = 1001) -> dict:
    xs = np.linspace(-40.0, 40.0, samples)
    phi = w.phi(xs)
    bound = max(w.c0, 1.0 / w.inf_v)
    out = {"monotone": True, "sup_bound": True, "log_derivative": True, "uniform_moderate": True}
    v = w.v if w.v is not None else w.phi
    for N in levels:
        pN, pN1 = truncate(w, N).phi(xs), truncate(w, N + 1).phi(xs)
        out["monotone"] &= bool(np.all(pN <= pN1) and np.all(pN1 <= phi))
        out["sup_bound"] &= bool(pN.max() <= N)
        wN = truncate(w, N)
        if wN.phi_prime is not None:
            free = phi < N
            dp = np.abs(wN.phi_prime(xs[free]))
            out["log_derivative"] &= bool(np.all(dp <= w.A * pN[free] * (1 + 1e-9)))
        c = estimate_moderate_constant(wN.phi, v).c0
        out["uniform_moderate"] &= bool(c <= bound * (1 + 1e-9))
    # phi_N -> phi monotonically; at N = max phi the truncation is the identity
    ladder = sorted({*levels, *(10.0 ** k for k in range(0, 20)), float(phi.max())})
    gaps = [float(np.max(phi - truncate(w, N).phi(xs))) for N in ladder if N <= phi.max()]
    out["convergence"] = all(a >= b for a, b in zip(gaps, gaps[1:])) and gaps[-1] == 0.0
    return out


def lp_limit_checks(ps=(2.0, 4.0, 16.0, 64.0), L: float = 30.0, N: int = 2**18) -> dict:
    grid = make_grid(L, N)
    f = grid.sample(lambda x: np.exp(-np.abs(x)))
    return {p: abs(lp_norm(f, p) - (2.0 / p) ** (1.0 / p)) for p in ps}


def weights_suite(cfg: ExperimentConfig) -> list[dict]:
    rng = np.random.default_rng(cfg.seed)
    recs = []
    from .config import parse_weight_ref
    refs = cfg.weight_refs() or [parse_weight_ref(r) for r in DEFAULT_SUITE]
    weights = [catalog(n, p) for n, p in refs]
    for w in weights:
        rep = check_admissible(w)
        recs.append({"label": f"admissible:{w.name}", "ok": rep.admissible, "report": rep.as_dict()})
    for w in weights:
        tc = truncation_checks(w)
        recs.append({"label": f"truncation:{w.name}", "ok": all(tc.values()), "detail": tc})

    for w in weights:
        v = w.v if w.v is not None else w.phi
        xs = np.linspace(-40.0, 40.0, 1001)
        tail_sup = float(np.max(np.exp(-np.abs(xs)) * v(xs)))
        recs.append({"label": f"necessity:{w.name}", "ok": bool(v(np.zeros(1))[0] >= 1.0)
                     and math.isfinite(tail_sup), "v0": float(v(np.zeros(1))[0]),
                     "kernel_v_sup": tail_sup})

    grid = make_grid(20.0, 1024)
    ywts = weights
    worst = {}
    fails = 0
    for _ in range(100):
        f, g = random_smooth(rng, grid), random_smooth(rng, grid)
        for w in ywts:
            for p in YOUNG_NORMS:
                r = young_check(f, g, w, p)
                fails += not r.ok
                key = _weight_label(w.name, p)
                worst[key] = max(worst.get(key, 0.0), r.ratio)
    recs.append({"label": "young", "ok": fails == 0, "cases": 100 * len(ywts) * len(YOUNG_NORMS), "failures": fails,
                 "worst_ratio": worst})

    errs = lp_limit_checks()
    recs.append({"label": "lp_to_sup", "ok": all(e <= 1e-6 for e in errs.values()),
                 "errors": {format(p, "g"): e for p, e in errs.items()}})
    return recs


# -- files ---------------------------------------------------------------------------

def _series_csv(records, path: Path) -> Path:
    keys = ["t", "energy", "max_u", "max_ux", "lambda_plus", "lambda_minus",
            "envelope_sup", "boundary_tail"]
    lines = [",".join(keys)]
    for r in records:
        lines.append(",".join("nan" if r.get(k) is None else "%.17g" % float(r[k]) for k in keys))
    path.write_text("\n".join(lines) + "\n")
    return path


def plot_script(scenario: str, times: list[float]) -> str:
    snaps = ", \\\n     ".join(
        f"'snapshot_t{_tag(t)}.csv' using 1:{'(abs($2))' if scenario in ('profile', 'compact_support') else '2'}"
        f" with lines title 't={t:g}'" for t in times)
    lines = [
        f"# {scenario}: solution snapshots and checkpoint series",
        "set datafile separator ','",
        "set key outside right",
        "set terminal pngcairo size 1000,700",
        "set output 'snapshots.png'",
        "set xlabel 'x'",
    ]
    if scenario in ("profile", "compact_support"):
        lines += ["set logscale y", "set format y '%.0e'", "set ylabel '|u(t,x)|'"]
    else:
        lines += ["set ylabel 'u(t,x)'"]
    lines += [f"plot {snaps}" if snaps else "# no snapshots", "unset logscale y", "",
              "set output 'series.png'", "set xlabel 't'"]
    if scenario == "conservation":
        lines += ["set ylabel 'relative energy change'",
                  "stats 'series.csv' using 2 every ::0::0 nooutput name 'E0'",
                  "plot 'series.csv' using 1:(($2-E0_min)/E0_min) with linespoints title 'H(t)/H(0)-1'"]
    elif scenario == "decay_persistence":
        lines += ["set ylabel 'envelope sup'",
                  "plot 'series.csv' using 1:7 with linespoints title 'envelope sup'"]
    else:
        lines += ["set ylabel 'lambda'",
                  "plot 'series.csv' using 1:5 with linespoints title 'lambda+', \\",
                  "     'series.csv' using 1:6 with linespoints title 'lambda-'"]
    return "\n".join(lines) + "\n"


# -- running -------------------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    output_dir: Path
    verdict: dict
    files: list = field(default_factory=list)


def _versions():
    return {"rodwave": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def default_output_dir(cfg: ExperimentConfig) -> Path:
    if cfg.output_dir:
        return Path(cfg.output_dir)
    stem = Path(cfg.source).stem if cfg.source else cfg.scenario
    return Path("runs") / stem


def run_experiment(cfg: ExperimentConfig, force: bool = False, output_dir=None) -> RunResult:
    out = Path(output_dir) if output_dir else default_output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg.to_dict(), "versions": _versions(), "force": bool(force)}
    files = []

    def finish(code, passed, metrics, records, status):
        manifest["status"] = status
        files.append(_dump(out / "run_manifest.json", manifest))
        if records is not None:
            files.append(write_series([_jsonable(r) for r in records], out / "series.ndjson"))
        verdict = {"scenario": cfg.scenario, "pass": bool(passed), "metrics": metrics,
                   "exit_code": code}
        if status.get("aborted"):
            verdict["reason"] = status["aborted"]
        files.append(_dump(out / "verdict.json", verdict))
        return RunResult(code, out, _jsonable(verdict), files)

    if cfg.scenario == "weights_suite":
        records = weights_suite(cfg)
        passed, metrics = evaluate(cfg.scenario, cfg.checks, records)
        (out / "plot.gp").write_text("# weights_suite has no plottable series\n")
        files.append(out / "plot.gp")
        return finish(EXIT_OK if passed else EXIT_FAIL, passed, metrics, records, {})

    grid = make_grid(cfg.L, cfg.N)
    params = cfg.datum_parameters()
    if cfg.datum_kind == "custom_csv":
        params["path"] = cfg.datum_path
    u0 = make_datum(cfg.datum_kind, params, grid)
    spec = build_preset(cfg.model_name, cfg.model_params)
    amp = math.sqrt(energy(u0))
    report = validate_hypotheses(spec, 1.1 * amp if amp > 0 else 1.0)
    manifest["hypotheses"] = report.as_dict()
    manifest["datum_energy"] = amp**2
    if not report.passed and not force:
        reason = "hypothesis rejection: " + "; ".join(report.failures())
        return finish(EXIT_HYPOTHESIS, False, {"failures": report.failures()}, None,
                      {"aborted": reason})

    opts = EvolveOptions(dt=cfg.dt, T_final=cfg.T_final, checkpoint_times=cfg.checkpoint_times,
                         cfl_safety=cfg.cfl_safety, scheme=cfg.scheme,
                         blowup_threshold=cfg.blowup_threshold,
                         resolved_slope_factor=cfg.resolved_slope_factor)
    try:
        traj = evolve(spec, u0, opts)
    except (ValueError, NumericalBreakdown) as exc:
        return finish(EXIT_ABORT, False, {}, None, {"aborted": f"numerical abort: {exc}"})

    status = {}
    if traj.truncated:
        status["aborted"] = (f"numerical abort at t={traj.breakdown_time:g}: "
                             f"{traj.breakdown_reason}")
    try:
        records = _records(cfg, traj)
    except BoundaryContamination as exc:
        records = [dict(r) for r in traj.records]
        status["aborted"] = f"numerical abort: {exc}"

    files.extend(export_trajectory(traj, out, [_jsonable(r) for r in records]))
    files.append(_series_csv(records, out / "series.csv"))
    if not status and cfg.scenario in ("profile", "compact_support"):
        for t in traj.times[1:]:
            files.extend(profile_decompose(traj, t).write(out, f"profile_t{_tag(t)}"))
    if cfg.scenario == "decay_persistence":
        for t, (u, ux) in zip(traj.times, traj.snapshots):
            files.append(decay_envelope(u, ux, cfg.checks["envelope_d"]).write(
                out / f"envelope_t{_tag(t)}.csv"))
    (out / "plot.gp").write_text(plot_script(cfg.scenario, traj.times))
    files.append(out / "plot.gp")

    passed, metrics = evaluate(cfg.scenario, cfg.checks, records, status)
    code = EXIT_ABORT if status.get("aborted") else (EXIT_OK if passed else EXIT_FAIL)
    return finish(code, passed, metrics, records, status)


def recompute_verdict(run_dir) -> dict:
    """Re-derive pass/fail from a run directory's manifest and series."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "run_manifest.json").read_text())
    cfg = manifest["config"]
    series = run_dir / "series.ndjson"
    records = read_series(series) if series.exists() else []
    status = manifest.get("status", {})
    if not records and not status.get("aborted"):
        status = {"aborted": "no series recorded"}
    passed, metrics = evaluate(cfg["scenario"], cfg["checks"], records, status)
    return _jsonable({"scenario": cfg["scenario"], "pass": bool(passed), "metrics": metrics})
