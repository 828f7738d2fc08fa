"""KLQ exact-linearization controller and the least-squares lifted baseline.

Both controllers command an input increment on top of the trim
``[t_bar, 0, 0, 0]`` and then refreeze ``t_bar`` at the applied thrust.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import BodyState, QuadInput, RigidBodyParams, propagate_array
from .lift import block_diag, full_lift_array, jordan_block, quad_configs
from .reduction import (CombinationCoeffs, SingularG, combination_matrix, desired_output, reduce_array,
                        reference_lift, truncation_ratio)
from .trajectory import Setpoint

SYM_TOL = 1e-12


def _check_spd(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(M - M.T)) > SYM_TOL * max(1.0, np.max(np.abs(M))):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(M)) <= 0:
        raise ValueError(f"{name} must be positive definite")
    return M


def _spd_sqrt(M):
    w, V = np.linalg.eigh(M)
    return (V * np.sqrt(w)) @ V.T


def _is_diag(M):
    return np.count_nonzero(M - np.diag(np.diag(M))) == 0


@dataclass(frozen=True)
class LQWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", _check_spd(self.Q, "Q"))
        object.__setattr__(self, "R", _check_spd(self.R, "R"))

    @classmethod
    def diag(cls, q, r) -> "LQWeights":
        return cls(np.diag(np.asarray(q, float)), np.diag(np.asarray(r, float)))


def riccati_gain(Q, R) -> np.ndarray:
    """Positive root of ``0 = -Q + K R^-1 K``.

    ``K = R^1/2 sqrtm(R^-1/2 Q R^-1/2) R^1/2``, which reduces to
    ``sqrt(Q_ii R_ii)`` on the diagonal when both weights are diagonal.
    """
    Q = _check_spd(Q, "Q")
    R = _check_spd(R, "R")
    if _is_diag(Q) and _is_diag(R):
        return np.diag(np.sqrt(np.diag(Q) * np.diag(R)))
    Rh = _spd_sqrt(R)
    Rih = np.linalg.inv(Rh)
    K = Rh @ _spd_sqrt(Rih @ Q @ Rih) @ Rh
    return 0.5 * (K + K.T)


def riccati_residual(K, Q, R) -> float:
    return float(np.linalg.norm(-Q + K @ np.linalg.solve(R, K), "fro"))


def klq_control(e_ups, ff, G, K, R) -> QuadInput:
    """Input increment solving ``G du = R^-1 K e + ff``.

    ``G`` may be a matrix or a ``ReducedModel``; a model flagged singular
    raises :class:`SingularG`.
    """
    if hasattr(G, "G"):
        if G.singular:
            raise SingularG(G.cond, G.G)
        G = G.G
    rhs = np.linalg.solve(R, K @ np.asarray(e_ups, float)) + np.asarray(ff, float)
    return QuadInput.from_array(np.linalg.solve(G, rhs))


def exact_linearization_check(state: BodyState, params: RigidBodyParams, t_bar: float,
                              coeffs: CombinationCoeffs, u_star, h: float = 1e-4) -> float:
    """``|d/dt ups - u* - y_1|`` under ``u = trim + G^-1 u*``, by central difference.

    ``t_bar`` stays frozen across the probe.
    """
    x = state.to_array()
    model = reduce_array(x, params, t_bar, coeffs)
    if model.singular:
        raise SingularG(model.cond, model.G)
    u = model.trim + np.linalg.solve(model.G, np.asarray(u_star, float))
    up = reduce_array(propagate_array(x, u, params, h), params, t_bar, coeffs).ups
    um = reduce_array(propagate_array(x, u, params, -h), params, t_bar, coeffs).ups
    rate = (up - um) / (2 * h)
    return float(np.linalg.norm(rate - np.asarray(u_star, float) - model.y_next))


def baseline_care_gain(A, Q, R, imag_tol: float = 1e-10) -> np.ndarray:
    """Stabilizing solution of ``A'P + PA - P R^-1 P + Q = 0`` (input matrix = I).

    Built from the stable invariant subspace of the Hamiltonian matrix.
    """
    A = np.atleast_2d(np.asarray(A, float))
    Q = np.atleast_2d(np.asarray(Q, float))
    R = np.atleast_2d(np.asarray(R, float))
    n = A.shape[0]
    H = np.block([[A, -np.linalg.inv(R)], [-Q, -A.T]])
    w, V = np.linalg.eig(H)
    if np.any(np.abs(w.real) < imag_tol):
        raise np.linalg.LinAlgError("Hamiltonian has eigenvalues on the imaginary axis")
    stable = V[:, w.real < 0]
    if stable.shape[1] != n:
        raise np.linalg.LinAlgError("stable subspace has the wrong dimension")
    X1, X2 = stable[:n], stable[n:]
    P = np.real(np.linalg.solve(X1.T, X2.T).T)
    return 0.5 * (P + P.T)


def care_residual(A, P, Q, R) -> float:
    return float(np.linalg.norm(A.T @ P + P @ A - P @ np.linalg.solve(R, P) + Q, "fro"))


def least_squares_control(B_full, U_star, rcond: float = 1e-10) -> tuple[QuadInput, float]:
    """Minimum-norm least-squares input and the remaining residual ``|B u - U*|``."""
    B_full = np.asarray(B_full, float)
    U_star = np.asarray(U_star, float)
    u = np.linalg.pinv(B_full, rcond=rcond) @ U_star
    return QuadInput.from_array(u), float(np.linalg.norm(B_full @ u - U_star))


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "klq"  # or "baseline"
    q: tuple = (4.0, 64.0, 64.0, 1.0)
    r: tuple = (1.0, 1.0, 1.0, 1.0)
    coeffs: CombinationCoeffs = field(default_factory=CombinationCoeffs.default)
    baseline_q: tuple = (1.0, 1.0, 1.0, 1.0)
    baseline_r: float = 1.0
    full_depth: int = 4
    hold_steps: int = 50
    clamp: bool = True
    t_max_factor: float = 4.0
    tau_max: float = 1.0

    def weights(self) -> LQWeights:
        return LQWeights.diag(self.q, self.r)


@dataclass
class ControllerMemory:
    t_bar: float
    last_u: np.ndarray
    hold_count: int = 0


class _Controller:
    def __init__(self, params: RigidBodyParams, spec: ControllerSpec):
        self.params = params
        self.spec = spec
        self.t_max = spec.t_max_factor * params.hover_thrust
        self.memory = self.initial_memory()

    def initial_memory(self) -> ControllerMemory:
        hover = np.array([self.params.hover_thrust, 0.0, 0.0, 0.0])
        return ControllerMemory(t_bar=self.params.hover_thrust, last_u=hover)

    def clamp(self, u) -> tuple[np.ndarray, bool]:
        if not self.spec.clamp:
            return u, False
        c = u.copy()
        c[0] = min(max(c[0], 0.0), self.t_max)
        c[1:] = np.clip(c[1:], -self.spec.tau_max, self.spec.tau_max)
        return c, bool(np.any(c != u))

    def _fallback(self) -> np.ndarray:
        mem = self.memory
        mem.hold_count += 1
        if mem.hold_count <= self.spec.hold_steps:
            return mem.last_u.copy()
        return np.array([self.params.hover_thrust, 0.0, 0.0, 0.0])

    def _commit(self, u, diag):
        u, saturated = self.clamp(u)
        self.memory.last_u = u.copy()
        self.memory.t_bar = float(u[0])
        diag["saturated"] = saturated
        return u, diag


class KLQController(_Controller):
    """Composite-output LQ with an exact square inverse.

    With ``projection_configs`` set, each tick also solves the same virtual
    command on the corresponding lift by least squares (``lsres_proj``).
    """

    def __init__(self, params: RigidBodyParams, spec: ControllerSpec, projection_configs=None):
        super().__init__(params, spec)
        w = spec.weights()
        self.K = riccati_gain(w.Q, w.R)
        self.gain = np.linalg.solve(w.R, self.K)
        self.projection_configs = projection_configs
        if projection_configs is not None:
            self._C_pinv = np.linalg.pinv(combination_matrix(spec.coeffs, projection_configs))

    def step(self, x_meas, setpoint: Setpoint):
        mem = self.memory
        coeffs = self.spec.coeffs
        model = reduce_array(x_meas, self.params, mem.t_bar, coeffs)
        ups_d, ff = desired_output(setpoint, coeffs)
        e = ups_d - model.ups
        u_star = self.gain @ e + ff
        diag = {"ups": model.ups, "ups_d": ups_d, "cond": model.cond, "u_star": u_star,
                "singular": model.singular, "exact_res": np.nan, "lsres": np.nan,
                "lsres_proj": np.nan, "trunc": np.full(4, np.nan)}
        if model.singular:
            return self._commit(self._fallback(), diag)
        mem.hold_count = 0
        du = np.linalg.solve(model.G, u_star)
        diag["exact_res"] = float(np.linalg.norm(model.G @ du - u_star))
        diag["trunc"] = truncation_ratio(model, du)
        if self.projection_configs is not None:
            lift = full_lift_array(x_meas, self.params, mem.t_bar, self.projection_configs)
            _, diag["lsres_proj"] = least_squares_control(lift.B, self._C_pinv @ u_star)
        return self._commit(model.trim + du, diag)


class BaselineController(_Controller):
    """Per-block LQ on the full lift with pseudoinverse input recovery."""

    def __init__(self, params: RigidBodyParams, spec: ControllerSpec, configs=None):
        super().__init__(params, spec)
        self.configs = quad_configs(spec.full_depth, spec.full_depth) if configs is None else configs
        blocks = []
        self.P_blocks = []
        for cfg, q in zip(self.configs, spec.baseline_q):
            A = jordan_block(cfg.depth)
            Q = q * np.eye(cfg.depth)
            R = spec.baseline_r * np.eye(cfg.depth)
            P = baseline_care_gain(A, Q, R)
            self.P_blocks.append(P)
            blocks.append(np.linalg.solve(R, P))
        self.gain = block_diag(*blocks)
        self.A = block_diag(*(jordan_block(c.depth) for c in self.configs))

    def step(self, x_meas, setpoint: Setpoint):
        mem = self.memory
        coeffs = self.spec.coeffs
        lift = full_lift_array(x_meas, self.params, mem.t_bar, self.configs)
        kd, kd_rate = reference_lift(setpoint, self.configs)
        U = -self.gain @ (lift.kappa - kd) + (kd_rate - self.A @ kd)
        model = reduce_array(x_meas, self.params, mem.t_bar, coeffs)
        ups_d, _ = desired_output(setpoint, coeffs)
        diag = {"ups": model.ups, "ups_d": ups_d, "cond": model.cond, "u_star": U,
                "singular": False, "exact_res": np.nan, "lsres_proj": np.nan}
        du, diag["lsres"] = least_squares_control(lift.B, U)
        du = du.as_array()
        diag["trunc"] = truncation_ratio(model, du)
        return self._commit(lift.trim + du, diag)


def make_controller(params: RigidBodyParams, spec: ControllerSpec, **kw):
    if spec.kind == "klq":
        return KLQController(params, spec, **kw)
    if spec.kind == "baseline":
        return BaselineController(params, spec)
    raise ValueError(f"unknown controller kind {spec.kind!r}")


def controller_step(x_meas, setpoint: Setpoint, controller) -> tuple[QuadInput, dict]:
    """One control tick; ``controller`` carries the memory (frozen thrust, held input)."""
    u, diag = controller.step(np.asarray(x_meas, float), setpoint)
    return QuadInput.from_array(u), diag
