"""Closed-loop runs with emulated sensor noise and delay, metrics and logs."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .control import ControllerSpec, make_controller
from .dynamics import BodyState, NumericalBlowUp, RigidBodyParams, euler_zyx, propagate_array, rotation_exp, so3_project
from .lift import quad_configs
from .trajectory import TrajectoryPlan, distance_to_polyline

BLOWUP_NORM = 1e6

CSV_COLUMNS = (["t", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw", "nux", "nuy", "nuz",
                "T", "taux", "tauy", "tauz"]
               + [f"ups{i}" for i in range(1, 5)] + [f"upsd{i}" for i in range(1, 5)]
               + ["condG"] + [f"truncratio{i}" for i in range(1, 5)] + ["singflag", "lsres"])


@dataclass(frozen=True)
class SensorModel:
    sigma_p: float = 0.01
    sigma_v: float = 0.02
    sigma_nu: float = 0.005
    sigma_att: float = np.deg2rad(0.2)
    delay: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.sigma_p, self.sigma_v, self.sigma_nu, self.sigma_att) < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if self.delay < 0 or int(self.delay) != self.delay:
            raise ValueError("delay must be a non-negative integer number of ticks")

    @classmethod
    def ideal(cls) -> "SensorModel":
        return cls(0.0, 0.0, 0.0, 0.0, 0)

    @property
    def noiseless(self) -> bool:
        return self.sigma_p == self.sigma_v == self.sigma_nu == self.sigma_att == 0


class SensorPipeline:
    """Delay line (pre-filled with the initial state) followed by additive noise."""

    def __init__(self, model: SensorModel, x0, seed: int | None = None):
        self.model = model
        self.rng = np.random.default_rng(model.seed if seed is None else seed)
        self.buffer = deque([np.array(x0, float)] * model.delay, maxlen=model.delay + 1)

    def measure(self, x_true) -> np.ndarray:
        self.buffer.append(np.array(x_true, float))
        x = self.buffer[0].copy()
        m = self.model
        if m.noiseless:
            return x
        rng = self.rng
        R = x[0:9].reshape(3, 3)
        if m.sigma_att > 0:
            R = so3_project(R @ rotation_exp(rng.normal(0.0, m.sigma_att, 3)))
        x[0:9] = R.reshape(9)
        x[9:12] += rng.normal(0.0, m.sigma_nu, 3)
        x[12:15] += rng.normal(0.0, m.sigma_p, 3)
        x[15:18] += rng.normal(0.0, m.sigma_v, 3)
        return x


def sensor_pipeline(x_true, pipeline: SensorPipeline) -> np.ndarray:
    return pipeline.measure(x_true)


@dataclass
class SimLog:
    t: np.ndarray
    x_true: np.ndarray
    x_meas: np.ndarray
    u: np.ndarray
    ref: np.ndarray
    ups: np.ndarray
    ups_d: np.ndarray
    cond: np.ndarray
    trunc: np.ndarray
    singular: np.ndarray
    saturated: np.ndarray
    lsres: np.ndarray
    exact_res: np.ndarray
    lsres_proj: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def position(self) -> np.ndarray:
        return self.x_true[:, 12:15]

    def table(self) -> np.ndarray:
        x = self.x_true
        Rs = x[:, 0:9].reshape(-1, 3, 3)
        eul = np.array([euler_zyx(r) for r in Rs]).reshape(-1, 3)
        v_world = np.einsum("nij,nj->ni", Rs, x[:, 15:18])
        return np.column_stack([self.t, x[:, 12:15], v_world, eul, x[:, 9:12], self.u, self.ups,
                                self.ups_d, self.cond, self.trunc, self.singular.astype(float), self.lsres])

    def to_csv(self, path) -> None:
        np.savetxt(path, self.table(), delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt="%.17g")


@dataclass
class Metrics:
    rmse: float
    max_error: float
    settling_time: float | None  # last entry into the 0.05 m band, None if never
    segment_settling: list
    saturation_fraction: float
    cond_mean: float
    cond_max: float
    singular_ticks: int
    exact_res_max: float | None
    lsres_max: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in sorted(self.to_dict().items()))


def settling_time(t, err, tol) -> float | None:
    outside = np.nonzero(err >= tol)[0]
    if len(outside) == 0:
        return float(t[0])
    if outside[-1] == len(t) - 1:
        return None
    return float(t[outside[-1] + 1])


def _finite_max(a):
    a = np.asarray(a, float)
    a = a[np.isfinite(a)]
    return float(a.max()) if len(a) else None


def compute_metrics(log: SimLog, plan: TrajectoryPlan, tol: float = 0.05) -> Metrics:
    err = np.linalg.norm(log.position - log.ref, axis=1)
    seg_settle = []
    if plan.kind != "hover":
        seg = (log.t // plan.segment_period).astype(int)
        for s in np.unique(seg):
            idx = seg == s
            st = settling_time(log.t[idx], err[idx], tol)
            seg_settle.append(None if st is None else st - s * plan.segment_period)
    cond = log.cond[np.isfinite(log.cond)]
    return Metrics(
        rmse=float(np.sqrt(np.mean(err**2))),
        max_error=float(err.max()),
        settling_time=settling_time(log.t, err, tol),
        segment_settling=seg_settle,
        saturation_fraction=float(np.mean(log.saturated)),
        cond_mean=float(cond.mean()) if len(cond) else float("inf"),
        cond_max=float(cond.max()) if len(cond) else float("inf"),
        singular_ticks=int(log.singular.sum()),
        exact_res_max=_finite_max(log.exact_res),
        lsres_max=_finite_max(log.lsres),
    )


@dataclass
class SimResult:
    log: SimLog
    metrics: Metrics


@dataclass(frozen=True)
class RunSettings:
    duration: float = 20.0
    physics_rate: int = 1000
    control_rate: int = 250
    initial_offset: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.physics_rate % self.control_rate:
            raise ValueError("physics rate must be an integer multiple of the control rate")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


def initial_state(plan: TrajectoryPlan, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
    return BodyState.hover(plan.sample(0.0).pos + np.asarray(offset, float)).to_array()


def run_closed_loop(params: RigidBodyParams, plan: TrajectoryPlan, spec: ControllerSpec,
                    sensors: SensorModel, run: RunSettings = RunSettings(), seed: int | None = None,
                    x0=None, projection: bool = False) -> SimResult:
    """Simulate one controller against the plant.

    Physics advances ``physics_rate / control_rate`` RK4 substeps per control
    tick with the input held; one log row is written per tick.
    """
    ratio = run.physics_rate // run.control_rate
    dt = 1.0 / run.physics_rate
    tick = 1.0 / run.control_rate
    n = int(round(run.duration * run.control_rate))
    x = initial_state(plan, run.initial_offset) if x0 is None else np.array(x0, float)
    kw = {"projection_configs": quad_configs(spec.full_depth, spec.full_depth)} if projection and spec.kind == "klq" else {}
    ctrl = make_controller(params, spec, **kw)
    sensor = SensorPipeline(sensors, x, seed)

    t = np.arange(n) * tick
    cols = {k: np.empty((n, w)) for k, w in
            (("x_true", 18), ("x_meas", 18), ("u", 4), ("ref", 3), ("ups", 4), ("ups_d", 4), ("trunc", 4))}
    scal = {k: np.full(n, np.nan) for k in ("cond", "lsres", "exact_res", "lsres_proj")}
    sing = np.zeros(n, bool)
    sat = np.zeros(n, bool)
    for i in range(n):
        xm = sensor.measure(x)
        sp = plan.sample(t[i])
        u, d = ctrl.step(xm, sp)
        cols["x_true"][i] = x
        cols["x_meas"][i] = xm
        cols["u"][i] = u
        cols["ref"][i] = sp.pos
        cols["ups"][i] = d["ups"]
        cols["ups_d"][i] = d["ups_d"]
        cols["trunc"][i] = d["trunc"]
        for k in scal:
            scal[k][i] = d[k]
        sing[i] = d["singular"]
        sat[i] = d["saturated"]
        try:
            x = propagate_array(x, u, params, dt, ratio)
        except FloatingPointError as exc:
            raise NumericalBlowUp(f"propagation failed at t={t[i]:.4f}s with u={u}: {exc}") from exc
        if np.linalg.norm(x) > BLOWUP_NORM:
            raise NumericalBlowUp(f"state norm {np.linalg.norm(x):.3g} exceeds {BLOWUP_NORM:g} at t={t[i]:.4f}s")
    log = SimLog(t=t, singular=sing, saturated=sat, **cols, **scal)
    return SimResult(log, compute_metrics(log, plan))


def _t_end(log: SimLog) -> float:
    # log rows mark tick starts; the run covers one more tick past the last row
    return float(log.t[-1] + (log.t[1] - log.t[0] if len(log.t) > 1 else 0.0))


def path_deviation(log: SimLog, plan: TrajectoryPlan, t_start: float = 0.0) -> float:
    """Max distance from the flown path to the reference polyline after ``t_start``."""
    corners = plan.corners()
    idx = log.t >= t_start
    return max((distance_to_polyline(p, corners) for p in log.position[idx]), default=0.0)


def corner_visits(log: SimLog, plan: TrajectoryPlan) -> np.ndarray:
    """Closest approach to each corner per reference cycle, shape (cycles, corners)."""
    corners = plan.corners()
    cycle = plan.segment_period * len(corners)
    n_cycles = int(np.floor(_t_end(log) / cycle + 1e-9))
    out = np.full((n_cycles, len(corners)), np.inf)
    for c in range(n_cycles):
        idx = (log.t >= c * cycle) & (log.t < (c + 1) * cycle)
        pos = log.position[idx]
        for j, corner in enumerate(corners):
            out[c, j] = np.min(np.linalg.norm(pos - corner, axis=1))
    return out


def steady_errors(log: SimLog, plan: TrajectoryPlan, window: float = 1.0) -> np.ndarray:
    """Max position error in the last ``window`` seconds of every hold segment."""
    err = np.linalg.norm(log.position - log.ref, axis=1)
    seg = (log.t // plan.segment_period).astype(int)
    out = []
    for s in np.unique(seg):
        end = (s + 1) * plan.segment_period
        idx = (seg == s) & (log.t >= end - window)
        if end <= _t_end(log) + 1e-9 and idx.any():
            out.append(err[idx].max())
    return np.array(out)


@dataclass
class Comparison:
    klq: SimResult
    baseline: SimResult
    residuals: np.ndarray = field(repr=False)  # t, exact, ls on same command, baseline ls

    def summary_rows(self) -> list[tuple]:
        k, b = self.klq.metrics, self.baseline.metrics
        r = self.residuals
        return [
            ("rmse_m", k.rmse, b.rmse),
            ("max_error_m", k.max_error, b.max_error),
            ("saturation_fraction", k.saturation_fraction, b.saturation_fraction),
            ("input_residual_max", np.nanmax(r[:, 1]), np.nanmax(r[:, 3])),
            ("input_residual_mean", np.nanmean(r[:, 1]), np.nanmean(r[:, 3])),
            ("same_command_ls_residual_max", np.nanmax(r[:, 1]), np.nanmax(r[:, 2])),
            ("cond_max", k.cond_max, b.cond_max),
        ]

    def summary_text(self) -> str:
        lines = [f"{'metric':<30}{'klq':>16}{'baseline':>16}"]
        lines += [f"{name:<30}{a:>16.6g}{c:>16.6g}" for name, a, c in self.summary_rows()]
        return "\n".join(lines)

    def residuals_to_csv(self, path) -> None:
        np.savetxt(path, self.residuals, delimiter=",", header="t,exact_res,ls_res_same_command,ls_res_baseline",
                   comments="", fmt="%.17g")


def compare_controllers(params: RigidBodyParams, plan: TrajectoryPlan, spec: ControllerSpec,
                        sensors: SensorModel, run: RunSettings = RunSettings(), seed: int | None = None) -> Comparison:
    """Run KLQ and the least-squares baseline on the same scenario and seed."""
    klq = run_closed_loop(params, plan, _with_kind(spec, "klq"), sensors, run, seed, projection=True)
    base = run_closed_loop(params, plan, _with_kind(spec, "baseline"), sensors, run, seed)
    res = np.column_stack([klq.log.t, klq.log.exact_res, klq.log.lsres_proj, base.log.lsres])
    return Comparison(klq, base, res)


def _with_kind(spec: ControllerSpec, kind: str) -> ControllerSpec:
    return replace(spec, kind=kind)
