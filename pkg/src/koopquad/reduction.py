"""Composite observables and the square input-gain matrix.

A composite ``y_0 = sum_k c_k kappa_k`` of one chain obeys
``d/dt y_0 = y_1 + g_0 . (u - u_trim)`` with ``y_1 = sum_k c_k kappa_{k+1}``
and ``g_0 = sum_k c_k B_k``.  Keeping one composite per controlled chain gives
four outputs for four inputs; stacking the ``g_0`` rows gives ``G``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .dynamics import BodyState, RigidBodyParams
from .lift import ANGULAR, ChainConfig, QUAD_CHAINS, lift_chain_array
from .trajectory import Setpoint

COND_MAX = 1e8


class SingularG(np.linalg.LinAlgError):
    """Gain matrix too ill-conditioned to invert."""

    def __init__(self, cond: float, G: np.ndarray | None = None):
        super().__init__(f"G is singular to working precision (cond = {cond:.3g})")
        self.cond = cond
        self.G = G


def binomial_coeffs(lam: float, degree: int = 3) -> np.ndarray:
    """Coefficients of ``(s + lam)^degree`` from the constant term upward."""
    return np.array([comb(degree, k) * lam ** (degree - k) for k in range(degree + 1)], dtype=float)


@dataclass(frozen=True)
class CombinationCoeffs:
    """One coefficient vector per kept chain, ordered (yaw rate, x, y, z)."""

    yaw: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("yaw", "x", "y", "z"):
            c = np.asarray(getattr(self, name), dtype=float).copy()
            c.flags.writeable = False
            if c.ndim != 1 or len(c) == 0 or not np.any(c != 0):
                raise ValueError(f"{name} coefficients need at least one nonzero entry")
            if not np.all(np.isfinite(c)):
                raise ValueError(f"{name} coefficients must be finite")
            if name != "yaw" and (len(c) < 4 or c[1] == 0 or c[3] == 0):
                raise ValueError(f"{name} coefficients need nonzero entries at slots 1 and 3")
            object.__setattr__(self, name, c)

    @classmethod
    def default(cls, lam: float = 2.0, yaw=(1.0, 0.1)) -> "CombinationCoeffs":
        pos = binomial_coeffs(lam)
        return cls(np.asarray(yaw, float), pos, pos, pos)

    def per_chain(self) -> tuple[np.ndarray, ...]:
        return (self.yaw, self.x, self.y, self.z)

    def configs(self) -> tuple[ChainConfig, ...]:
        return tuple(ChainConfig(cid, len(c)) for cid, c in zip(QUAD_CHAINS, self.per_chain()))

    def scaled(self, c: float) -> "CombinationCoeffs":
        return CombinationCoeffs(*(c * k for k in self.per_chain()))


def combine_chain(values, rows, coeffs) -> tuple[float, np.ndarray]:
    values = np.asarray(values, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != len(values):
        raise ValueError("coefficient count must equal chain depth")
    return float(coeffs @ values), coeffs @ np.asarray(rows, dtype=float)


@dataclass(frozen=True)
class ReducedModel:
    ups: np.ndarray  # composite outputs (yaw, x, y, z)
    y_next: np.ndarray  # drift images y_{i,1}, dropped by the zero-order truncation
    G: np.ndarray  # rows = composites, columns = [T, tx, ty, tz]
    cond: float
    t_bar: float

    @property
    def trim(self) -> np.ndarray:
        return np.array([self.t_bar, 0.0, 0.0, 0.0])

    @property
    def singular(self) -> bool:
        return not self.cond <= COND_MAX


def _cond(G):
    s = np.linalg.svd(G, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def reduce_array(x, params: RigidBodyParams, t_bar: float, coeffs: CombinationCoeffs) -> ReducedModel:
    ups = np.empty(4)
    y_next = np.empty(4)
    G = np.empty((4, 4))
    for i, (cfg, c) in enumerate(zip(coeffs.configs(), coeffs.per_chain())):
        ch = lift_chain_array(x, params, t_bar, cfg)
        ups[i], G[i] = combine_chain(ch.values, ch.rows, c)
        y_next[i] = c @ ch.next_values
    return ReducedModel(ups, y_next, G, _cond(G), float(t_bar))


def reduce(state: BodyState, params: RigidBodyParams, t_bar: float, coeffs: CombinationCoeffs) -> ReducedModel:
    return reduce_array(state.to_array(), params, t_bar, coeffs)


def reduced_output(state: BodyState, params: RigidBodyParams, t_bar: float,
                   coeffs: CombinationCoeffs) -> np.ndarray:
    return reduce(state, params, t_bar, coeffs).ups


def assemble_G(state: BodyState, params: RigidBodyParams, t_bar: float, coeffs: CombinationCoeffs,
               check: bool = True) -> ReducedModel:
    """Reduced model with its gain matrix; raises :class:`SingularG` past ``COND_MAX`` when ``check``."""
    model = reduce(state, params, t_bar, coeffs)
    if check and model.singular:
        raise SingularG(model.cond, model.G)
    return model


def reference_chain(setpoint: Setpoint, cfg: ChainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Trajectory derivatives substituted for chain values, and their time derivatives."""
    if cfg.id.kind == ANGULAR:
        derivs = [setpoint.yaw_rate, setpoint.yaw_rate_dot, setpoint.yaw_rate_ddot]
    else:
        derivs = [d[cfg.id.axis] for d in setpoint.derivatives()]
    derivs = list(derivs) + [0.0] * (cfg.depth + 1 - len(derivs))
    return np.array(derivs[:cfg.depth], float), np.array(derivs[1:cfg.depth + 1], float)


def reference_lift(setpoint: Setpoint, configs) -> tuple[np.ndarray, np.ndarray]:
    vals, rates = zip(*(reference_chain(setpoint, c) for c in configs))
    return np.concatenate(vals), np.concatenate(rates)


def desired_output(setpoint: Setpoint, coeffs: CombinationCoeffs) -> tuple[np.ndarray, np.ndarray]:
    """Desired composites and their time derivative (the feed-forward virtual command)."""
    ups_d = np.empty(4)
    ff = np.empty(4)
    for i, (cfg, c) in enumerate(zip(coeffs.configs(), coeffs.per_chain())):
        vals, rates = reference_chain(setpoint, cfg)
        ups_d[i] = c @ vals
        ff[i] = c @ rates
    return ups_d, ff


def combination_matrix(coeffs: CombinationCoeffs, configs) -> np.ndarray:
    """Map from a stacked lift (``configs`` layout) to the four composites.

    Chains in ``configs`` must appear in (yaw, x, y, z) order and be at least
    as deep as the coefficient vectors.
    """
    N = sum(c.depth for c in configs)
    C = np.zeros((4, N))
    off = 0
    for i, (cfg, c) in enumerate(zip(configs, coeffs.per_chain())):
        if cfg.depth < len(c):
            raise ValueError("lift chain shallower than its composite")
        C[i, off:off + len(c)] = c
        off += cfg.depth
    return C


def truncation_ratio(model: ReducedModel, du) -> np.ndarray:
    """``|y_{i,1}| / |g_{i,0} . du|`` per composite; inf where the input term vanishes."""
    drive = np.abs(model.G @ np.asarray(du, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(model.y_next) / drive
    r[(drive == 0) & (model.y_next == 0)] = 0.0
    return r
