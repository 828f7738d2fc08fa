"""INI-style experiment configuration with line-numbered validation errors.

Format: ``[section]`` headers, ``key = value`` lines and ``#`` comments.
Lists are comma separated; waypoint lists separate points with ``;``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import ControllerSpec
from .dynamics import RigidBodyParams
from .lift import MAX_DEPTH
from .reduction import CombinationCoeffs, binomial_coeffs
from .sim import RunSettings, SensorModel
from .trajectory import KINDS, TrajectoryPlan


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = "" if line is None else f"line {line}" + ("" if col is None else f", col {col}") + ": "
        super().__init__(where + msg)
        self.line = line
        self.col = col


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _all(pred):
    return lambda xs: all(pred(x) for x in xs)


# key -> (parser name, default, check, description of the range)
SCHEMA = {
    "plant": {
        "m": ("float", 1.0, _pos, "> 0"),
        "Ix": ("float", 0.01, _pos, "> 0"),
        "Iy": ("float", 0.01, _pos, "> 0"),
        "Iz": ("float", 0.02, _pos, "> 0"),
        "g": ("float", 9.81, _nonneg, ">= 0"),
        "t_max_factor": ("float", 4.0, _pos, "> 0"),
        "tau_max": ("float", 1.0, _pos, "> 0"),
        "clamp": ("bool", True, None, ""),
    },
    "chains": {
        "lam": ("float", 2.0, _pos, "> 0"),
        "yaw_coeffs": ("floats", (1.0, 0.1), lambda c: 1 <= len(c) <= MAX_DEPTH and any(c), "1-4 values, not all zero"),
        "position_coeffs": ("floats", (), lambda c: len(c) in (0, 4) and (not c or (c[1] != 0 and c[3] != 0)),
                            "empty or 4 values with slots 1 and 3 nonzero"),
        "full_depth": ("int", 4, lambda d: 1 <= d <= MAX_DEPTH, f"in [1, {MAX_DEPTH}]"),
    },
    "controller": {
        "kind": ("str", "klq", lambda s: s in ("klq", "baseline"), "klq or baseline"),
        "q": ("floats", (4.0, 64.0, 64.0, 1.0), lambda c: len(c) == 4 and all(x > 0 for x in c), "4 values > 0"),
        "r": ("floats", (1.0, 1.0, 1.0, 1.0), lambda c: len(c) == 4 and all(x > 0 for x in c), "4 values > 0"),
        "baseline_q": ("floats", (1.0, 1.0, 1.0, 1.0), lambda c: len(c) == 4 and all(x > 0 for x in c), "4 values > 0"),
        "baseline_r": ("float", 1.0, _pos, "> 0"),
        "control_rate": ("int", 250, _pos, "> 0"),
        "physics_rate": ("int", 1000, _pos, "> 0"),
        "hold_steps": ("int", 50, _nonneg, ">= 0"),
    },
    "trajectory": {
        "kind": ("str", "square", lambda s: s in KINDS, " | ".join(KINDS)),
        "side": ("float", 2.0, _pos, "> 0"),
        "altitude": ("float", 1.0, None, ""),
        "segment_period": ("float", 5.0, _pos, "> 0"),
        "waypoints": ("points", (), None, ""),
        "yaw_rate": ("float", 0.0, None, ""),
    },
    "sensors": {
        "enabled": ("bool", True, None, ""),
        "sigma_p": ("float", 0.01, _nonneg, ">= 0"),
        "sigma_v": ("float", 0.02, _nonneg, ">= 0"),
        "sigma_nu": ("float", 0.005, _nonneg, ">= 0"),
        "sigma_att_deg": ("float", 0.2, _nonneg, ">= 0"),
        "delay": ("int", 2, _nonneg, ">= 0"),
        "seed": ("int", 0, None, ""),
    },
    "run": {
        "duration": ("float", 40.0, _pos, "> 0"),
        "out": ("str", "out", None, ""),
        "initial_offset": ("floats", (0.0, 0.0, 0.0), lambda c: len(c) == 3, "3 values"),
    },
}


def _parse_value(kind, raw):
    raw = raw.strip()
    if kind == "float":
        v = float(raw)
        if not np.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "int":
        return int(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "floats":
        vals = tuple(float(s) for s in raw.split(",") if s.strip())
        if not all(np.isfinite(vals)):
            raise ValueError("must be finite")
        return vals
    if kind == "points":
        pts = tuple(tuple(float(s) for s in p.split(",")) for p in raw.split(";") if p.strip())
        if any(len(p) != 3 for p in pts):
            raise ValueError("each waypoint needs 3 coordinates")
        return pts
    return raw


def _format_value(kind, v):
    if kind == "bool":
        return "true" if v else "false"
    if kind == "floats":
        return ", ".join(repr(x) for x in v)
    if kind == "points":
        return "; ".join(", ".join(repr(c) for c in p) for p in v)
    return repr(v) if kind == "float" else str(v)


@dataclass
class Config:
    values: dict = field(default_factory=lambda: {s: {k: spec[1] for k, spec in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def __getitem__(self, section):
        return self.values[section]

    def params(self) -> RigidBodyParams:
        p = self["plant"]
        return RigidBodyParams(m=p["m"], Ix=p["Ix"], Iy=p["Iy"], Iz=p["Iz"], g=p["g"])

    def coeffs(self) -> CombinationCoeffs:
        c = self["chains"]
        pos = np.array(c["position_coeffs"]) if c["position_coeffs"] else binomial_coeffs(c["lam"])
        return CombinationCoeffs(np.array(c["yaw_coeffs"]), pos, pos, pos)

    def controller_spec(self) -> ControllerSpec:
        c, p = self["controller"], self["plant"]
        return ControllerSpec(kind=c["kind"], q=c["q"], r=c["r"], coeffs=self.coeffs(),
                              baseline_q=c["baseline_q"], baseline_r=c["baseline_r"],
                              full_depth=self["chains"]["full_depth"], hold_steps=c["hold_steps"],
                              clamp=p["clamp"], t_max_factor=p["t_max_factor"], tau_max=p["tau_max"])

    def plan(self) -> TrajectoryPlan:
        t = self["trajectory"]
        return TrajectoryPlan(kind=t["kind"], side=t["side"], altitude=t["altitude"],
                              segment_period=t["segment_period"], waypoints=t["waypoints"], yaw_rate=t["yaw_rate"])

    def sensors(self) -> SensorModel:
        s = self["sensors"]
        if not s["enabled"]:
            return SensorModel(0.0, 0.0, 0.0, 0.0, 0, s["seed"])
        return SensorModel(s["sigma_p"], s["sigma_v"], s["sigma_nu"], np.deg2rad(s["sigma_att_deg"]),
                           s["delay"], s["seed"])

    def run_settings(self) -> RunSettings:
        c, r = self["controller"], self["run"]
        return RunSettings(duration=r["duration"], physics_rate=c["physics_rate"],
                           control_rate=c["control_rate"], initial_offset=r["initial_offset"])

    def to_text(self) -> str:
        """Fully resolved config; parsing it back reproduces this object."""
        out = []
        for section, keys in SCHEMA.items():
            out.append(f"[{section}]")
            out += [f"{k} = {_format_value(spec[0], self.values[section][k])}" for k, spec in keys.items()]
            out.append("")
        return "\n".join(out)


def parse_config(text: str) -> Config:
    cfg = Config()
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        stripped = body.strip()
        if not stripped:
            continue
        col = len(body) - len(body.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, col)
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, col)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno, col)
        if section is None:
            raise ConfigError("key outside of any section", lineno, col)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, col)
        kind, _, check, desc = SCHEMA[section][key]
        vcol = body.index("=") + 2
        try:
            value = _parse_value(kind, raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {exc}", lineno, vcol) from None
        if check is not None and not check(value):
            raise ConfigError(f"{section}.{key} = {raw!r} out of range ({desc})", lineno, vcol)
        cfg.values[section][key] = value
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: Config) -> None:
    c = cfg["controller"]
    if c["physics_rate"] % c["control_rate"]:
        raise ConfigError("controller.physics_rate must be a multiple of controller.control_rate")
    t = cfg["trajectory"]
    if t["kind"] == "step" and len(t["waypoints"]) < 2:
        raise ConfigError("trajectory.kind = step needs two waypoints")
    if t["kind"] == "waypoints" and not t["waypoints"]:
        raise ConfigError("trajectory.kind = waypoints needs waypoints")
    if len(cfg["chains"]["yaw_coeffs"]) > cfg["chains"]["full_depth"]:
        raise ConfigError("chains.yaw_coeffs longer than chains.full_depth")


def load_config(path) -> Config:
    with open(path) as fh:
        return parse_config(fh.read())
