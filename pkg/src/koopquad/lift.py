"""Generalized-eigenfunction chains of the quadrotor and their oracle.

Each chain is a sequence of observables ``kappa_0, kappa_1, ...`` in which the
drift derivative of one element is the next.  Thrust enters the drift through
a frozen value ``t_bar``; the exact identity along the true flow is

    d/dt kappa_k = kappa_{k+1} + B_k . (u - u_trim),   u_trim = [t_bar, 0, 0, 0]

so with the applied thrust equal to ``t_bar`` the chain is a pure Jordan chain
plus torque coupling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import BodyState, RigidBodyParams, propagate_array

MAX_DEPTH = 4
ANGULAR = "angular"
POSITION = "position"


@dataclass(frozen=True)
class ChainId:
    kind: str
    axis: int  # 0, 1, 2 for x, y, z

    def __post_init__(self):
        if self.kind not in (ANGULAR, POSITION):
            raise ValueError(f"unknown chain kind {self.kind!r}")
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")

    @property
    def label(self) -> str:
        return f"{self.kind}-{'xyz'[self.axis]}"


YAW_RATE = ChainId(ANGULAR, 2)
POS_X = ChainId(POSITION, 0)
POS_Y = ChainId(POSITION, 1)
POS_Z = ChainId(POSITION, 2)
QUAD_CHAINS = (YAW_RATE, POS_X, POS_Y, POS_Z)


@dataclass(frozen=True)
class ChainConfig:
    id: ChainId
    depth: int

    def __post_init__(self):
        if not 1 <= self.depth <= MAX_DEPTH:
            raise ValueError(f"chain depth must be in [1, {MAX_DEPTH}], got {self.depth}")


def quad_configs(angular_depth: int = 4, position_depth: int = 4) -> tuple[ChainConfig, ...]:
    """Chain layout (yaw rate, x, y, z); defaults give the 16-dim lift."""
    return (ChainConfig(YAW_RATE, angular_depth),) + tuple(
        ChainConfig(c, position_depth) for c in (POS_X, POS_Y, POS_Z))


@dataclass(frozen=True)
class Chain:
    id: ChainId
    values: np.ndarray  # kappa_0 .. kappa_{depth-1}
    rows: np.ndarray  # B_0 .. B_{depth-1}, shape (depth, 4)
    tail: float  # kappa_depth, drift image of the last kept value
    t_bar: float

    @property
    def depth(self) -> int:
        return len(self.values)

    @property
    def next_values(self) -> np.ndarray:
        """``kappa_1 .. kappa_depth`` (the drift image of ``values``)."""
        return np.append(self.values[1:], self.tail)


def _split(vals, rows, chain_id, t_bar):
    return Chain(chain_id, vals[:-1].copy(), rows, float(vals[-1]), float(t_bar))


def lift_angular_chain(state: BodyState, params: RigidBodyParams, depth: int, axis: int = 2,
                       t_bar: float | None = None) -> Chain:
    ChainConfig(ChainId(ANGULAR, axis), depth)
    vals, rows = kernels.angular_chain(state.nu, params.jd, axis, depth)
    t_bar = params.hover_thrust if t_bar is None else t_bar
    return _split(vals, rows, ChainId(ANGULAR, axis), t_bar)


def lift_position_chain(state: BodyState, params: RigidBodyParams, t_bar: float, depth: int,
                        axis: int) -> Chain:
    ChainConfig(ChainId(POSITION, axis), depth)
    if t_bar < 0:
        raise ValueError("frozen thrust must be non-negative")
    vals, rows = kernels.position_chain(state.to_array(), params.jd, params.m, params.g,
                                        float(t_bar), axis, depth)
    return _split(vals, rows, ChainId(POSITION, axis), t_bar)


def lift_chain_array(x, params: RigidBodyParams, t_bar: float, config: ChainConfig) -> Chain:
    """Chain evaluation straight from a flat state array (no validation)."""
    cid = config.id
    if cid.kind == ANGULAR:
        vals, rows = kernels.angular_chain(np.ascontiguousarray(x[9:12]), params.jd, cid.axis, config.depth)
    else:
        vals, rows = kernels.position_chain(x, params.jd, params.m, params.g, float(t_bar),
                                            cid.axis, config.depth)
    return _split(vals, rows, cid, t_bar)


def jordan_block(n: int) -> np.ndarray:
    return np.eye(n, k=1)


def block_diag(*blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


@dataclass(frozen=True)
class FullLift:
    kappa: np.ndarray  # (N,)
    B: np.ndarray  # (N, 4)
    A: np.ndarray  # (N, N) block-Jordan
    chains: tuple[Chain, ...]
    t_bar: float

    @property
    def N(self) -> int:
        return len(self.kappa)

    @property
    def trim(self) -> np.ndarray:
        return np.array([self.t_bar, 0.0, 0.0, 0.0])

    @property
    def tails(self) -> np.ndarray:
        """Drift image ``A kappa`` completed with each chain's tail value."""
        return np.concatenate([c.next_values for c in self.chains])


def full_lift(state: BodyState, params: RigidBodyParams, t_bar: float,
              configs: tuple[ChainConfig, ...] | None = None) -> FullLift:
    configs = quad_configs() if configs is None else configs
    x = state.to_array()
    return full_lift_array(x, params, t_bar, configs)


def full_lift_array(x, params, t_bar, configs) -> FullLift:
    chains = tuple(lift_chain_array(x, params, t_bar, c) for c in configs)
    kappa = np.concatenate([c.values for c in chains])
    B = np.vstack([c.rows for c in chains])
    A = block_diag(*(jordan_block(c.depth) for c in chains))
    return FullLift(kappa, B, A, chains, float(t_bar))


@dataclass(frozen=True)
class OracleSample:
    state: BodyState
    u: np.ndarray  # [T, tau]
    t_bar: float | None = None  # defaults to the applied thrust


@dataclass
class OracleReport:
    residuals: dict  # (chain label, k) -> max residual
    n_samples: int
    clamped: list  # sample indices whose input lies outside the actuator box

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def chain_residuals(x, u, params: RigidBodyParams, t_bar: float, configs, h: float = 1e-4) -> dict:
    """Five-point central-difference residual of the chain identity at one state."""
    u = np.asarray(u, dtype=float)
    trim = np.array([t_bar, 0.0, 0.0, 0.0])
    xs = [propagate_array(x, u, params, s * h) for s in (-2, -1, 1, 2)]
    out = {}
    for cfg in configs:
        c0 = lift_chain_array(x, params, t_bar, cfg)
        v = [lift_chain_array(xi, params, t_bar, cfg).values for xi in xs]
        deriv = (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h)
        pred = c0.next_values + c0.rows @ (u - trim)
        for k in range(cfg.depth):
            out[(cfg.id.label, k)] = abs(deriv[k] - pred[k])
    return out


def chain_oracle_residual(samples, configs, params: RigidBodyParams, h: float = 1e-4,
                          limits: tuple[float, float] | None = None) -> OracleReport:
    """Max over samples of the chain-identity residual for each (chain, k).

    ``limits = (T_max, tau_max)`` marks samples an actuator clamp would have
    altered; they are still evaluated with the given input.
    """
    worst: dict = {}
    clamped = []
    for i, s in enumerate(samples):
        u = np.asarray(s.u, dtype=float)
        t_bar = u[0] if s.t_bar is None else s.t_bar
        if limits is not None:
            t_max, tau_max = limits
            if u[0] < 0 or u[0] > t_max or np.any(np.abs(u[1:]) > tau_max):
                clamped.append(i)
        res = chain_residuals(s.state.to_array(), u, params, t_bar, configs, h)
        for key, r in res.items():
            worst[key] = max(worst.get(key, 0.0), r)
    return OracleReport(worst, len(samples), clamped)


def frozen_thrust_error(state: BodyState, params: RigidBodyParams, T: float, t_bar: float,
                        axis: int, h: float = 1e-5) -> float:
    """Error of the pure-drift step ``d/dt kappa_1 = kappa_2`` when ``T != t_bar``.

    This is what the Jordan part alone mispredicts when the frozen thrust
    lags the applied one; it equals ``|T - t_bar| |(R e3)_j| / m``.
    """
    cfg = ChainConfig(ChainId(POSITION, axis), 3)
    x = state.to_array()
    u = np.array([T, 0.0, 0.0, 0.0])
    cp = lift_chain_array(propagate_array(x, u, params, h), params, t_bar, cfg)
    cm = lift_chain_array(propagate_array(x, u, params, -h), params, t_bar, cfg)
    c0 = lift_chain_array(x, params, t_bar, cfg)
    return abs((cp.values[1] - cm.values[1]) / (2 * h) - c0.values[2])


def random_rotation(rng) -> np.ndarray:
    """Haar-uniform rotation from the QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _ball(rng, radius):
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    return d * radius * rng.uniform() ** (1 / 3)


def random_samples(params: RigidBodyParams, n: int, seed: int, nu_max: float = 5.0, v_max: float = 5.0,
                   p_max: float = 5.0, thrust_spread: float = 0.5, tau_scale: float = 0.1) -> list[OracleSample]:
    """Random states (uniform attitude, rates/velocities in balls) and near-hover inputs.

    Thrust is ``m g (1 +- thrust_spread)``; torques are uniform in
    ``+-thrust_spread * tau_scale``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        st = BodyState(R=random_rotation(rng), nu=_ball(rng, nu_max), p=rng.uniform(-p_max, p_max, 3),
                       v=_ball(rng, v_max))
        T = params.hover_thrust * (1 + rng.uniform(-thrust_spread, thrust_spread))
        tau = rng.uniform(-1, 1, 3) * thrust_spread * tau_scale
        out.append(OracleSample(st, np.array([T, *tau])))
    return out
