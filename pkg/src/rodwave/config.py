"""Experiment configuration: INI-style sections with dotted names, strict key checking."""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCENARIOS = ("conservation", "profile", "compact_support", "decay_persistence",
             "weighted_persistence", "weights_suite")
DATUM_KINDS = ("gaussian", "bump", "envelope_class", "custom_csv")
DATUM_PARAMS = {
    "gaussian": {"a": 1.0, "w": 1.0, "x0": 0.0},
    "bump": {"a": 1.0, "rho": 1.0},
    "envelope_class": {"a": 1.0, "d_prime": 1.0},
    "custom_csv": {},
}
# pass/fail thresholds, overridable in [checks]
CHECK_DEFAULTS = {
    "drift_tolerance": 1e-7,
    "residual_tolerance": 1e-6,
    "tail_tolerance": 0.02,
    "probe_x": 15.0,
    "probe_factor": 1e3,
    "envelope_d": 0.75,
    "envelope_factor": 3.0,
    "kappa_limit": math.inf,
}

SCHEMA = {
    "run": {"scenario", "seed", "output_dir"},
    "model": {"name"},
    "model.params": None,          # validated by the preset
    "grid": {"L", "N"},
    "datum": {"kind", "path"},
    "datum.params": None,          # validated per datum kind
    "evolve": {"dt", "T_final", "checkpoints", "scheme", "cfl_safety", "blowup_threshold",
               "resolved_slope_factor"},
    "weights": {"names", "p", "two_tier"},
    "checks": set(CHECK_DEFAULTS),
}


class ConfigError(ValueError):
    pass


def _scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _list(text):
    if isinstance(text, list):
        return text
    return [_scalar(s) for s in str(text).split(",") if s.strip()]


def parse_weight_ref(ref: str) -> tuple[str, dict]:
    """'poly_b:b=2' -> ('poly_b', {'b': 2.0})."""
    name, _, rest = str(ref).partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(";"))):
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"bad weight parameter {item!r} in {ref!r}")
        params[k.strip()] = float(v)
    return name.strip(), params


@dataclass
class ExperimentConfig:
    scenario: str
    model_name: str | None = None
    model_params: dict = field(default_factory=dict)
    L: float = 60.0
    N: int = 4096
    datum_kind: str = "gaussian"
    datum_params: dict = field(default_factory=dict)
    datum_path: str | None = None
    dt: float = 1e-3
    T_final: float | None = None
    checkpoints: list = field(default_factory=list)
    scheme: str | None = None
    cfl_safety: float = 0.5
    blowup_threshold: float = 1e6
    resolved_slope_factor: float = 0.5
    weights: list = field(default_factory=list)
    norms: list = field(default_factory=lambda: [2.0, math.inf])
    two_tier: bool = False
    checks: dict = field(default_factory=lambda: dict(CHECK_DEFAULTS))
    output_dir: str | None = None
    seed: int = 0
    source: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.datum_kind not in DATUM_KINDS:
            raise ConfigError(f"unknown datum kind {self.datum_kind!r}")
        extra = set(self.datum_params) - set(DATUM_PARAMS[self.datum_kind])
        if extra:
            raise ConfigError(f"unknown datum parameter(s) for {self.datum_kind}: {sorted(extra)}")
        if self.datum_kind == "custom_csv" and not self.datum_path:
            raise ConfigError("custom_csv datum needs datum.path")
        if self.scenario != "weights_suite":
            if not self.model_name:
                raise ConfigError(f"scenario {self.scenario} needs model.name")
            if self.T_final is None:
                raise ConfigError(f"scenario {self.scenario} needs evolve.T_final")
        if self.scenario == "weighted_persistence" and not self.weights:
            raise ConfigError("weighted_persistence needs weights.names")
        if self.scheme is None:
            self.scheme = "spectral" if self.scenario == "conservation" else "sweep"
        self.checks = {**CHECK_DEFAULTS, **self.checks}
        self.N = int(self.N)
        self.seed = int(self.seed)
        if self.T_final is not None and not self.checkpoints:
            self.checkpoints = [self.T_final]

    @property
    def checkpoint_times(self) -> list:
        return sorted({0.0, *map(float, self.checkpoints)})

    def datum_parameters(self) -> dict:
        return {**DATUM_PARAMS[self.datum_kind], **self.datum_params}

    def weight_refs(self) -> list[tuple[str, dict]]:
        return [parse_weight_ref(w) for w in self.weights]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["norms"] = [_json_float(p) for p in self.norms]
        d["checks"] = {k: _json_float(v) for k, v in self.checks.items()}
        return d

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        cp.optionxform = str   # keys are case sensitive (L, N, T_final, Gamma)
        try:
            cp.read_string(text, source=source or "<config>")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        for sect in cp.sections():
            if sect not in SCHEMA:
                raise ConfigError(f"unknown section [{sect}]")
            allowed = SCHEMA[sect]
            if allowed is not None:
                bad = set(cp[sect]) - allowed
                if bad:
                    raise ConfigError(f"unknown key(s) in [{sect}]: {', '.join(sorted(bad))}")

        def get(sect, key, default=None):
            if cp.has_option(sect, key):
                return _scalar(cp[sect][key])
            return default

        def table(sect):
            return {k: _scalar(v) for k, v in cp[sect].items()} if cp.has_section(sect) else {}

        if not cp.has_option("run", "scenario"):
            raise ConfigError("missing [run] scenario")
        kw = dict(
            scenario=get("run", "scenario"),
            seed=get("run", "seed", 0),
            output_dir=get("run", "output_dir"),
            model_name=get("model", "name"),
            model_params=table("model.params"),
            L=float(get("grid", "L", 60.0)),
            N=get("grid", "N", 4096),
            datum_kind=get("datum", "kind", "gaussian"),
            datum_path=get("datum", "path"),
            datum_params={k: float(v) for k, v in table("datum.params").items()},
            dt=float(get("evolve", "dt", 1e-3)),
            T_final=get("evolve", "T_final"),
            checkpoints=[float(t) for t in _list(get("evolve", "checkpoints", []))],
            scheme=get("evolve", "scheme"),
            cfl_safety=float(get("evolve", "cfl_safety", 0.5)),
            blowup_threshold=float(get("evolve", "blowup_threshold", 1e6)),
            resolved_slope_factor=float(get("evolve", "resolved_slope_factor", 0.5)),
            norms=[float(p) for p in _list(get("weights", "p", "2, inf"))],
            two_tier=bool(get("weights", "two_tier", False)),
            checks={k: float(v) for k, v in table("checks").items()},
            source=source,
        )
        if kw["T_final"] is not None:
            kw["T_final"] = float(kw["T_final"])
        # weight references contain ':' and ';', so read them raw
        raw = cp.get("weights", "names", fallback="")
        kw["weights"] = [s.strip() for s in raw.split(",") if s.strip()]
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_text(path.read_text(), source=str(path))


def _json_float(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v
