"""Rigid-body and quadrotor dynamics, RK4 integration and SO(3) upkeep."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

E3 = np.array([0.0, 0.0, 1.0])
ORTHO_TOL = 1e-9


class NumericalBlowUp(FloatingPointError):
    """Raised when propagation produces non-finite or diverging values."""


class ReflectionError(ValueError):
    """Polar factor has determinant -1: the matrix is not near SO(3)."""


def _vec3(a, name):
    a = np.asarray(a, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite, got {a}")
    return a


@dataclass(frozen=True)
class RigidBodyParams:
    """Plant constants.  Inertia is diagonal, ``J = diag(Ix, Iy, Iz)``."""

    m: float = 1.0
    Ix: float = 0.01
    Iy: float = 0.01
    Iz: float = 0.02
    g: float = 9.81

    def __post_init__(self):
        if min(self.Ix, self.Iy, self.Iz) <= 0:
            raise ValueError("inertia entries must be positive")
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.g < 0:
            raise ValueError("gravity must be non-negative")

    @property
    def jd(self) -> np.ndarray:
        return np.array([self.Ix, self.Iy, self.Iz])

    @property
    def J(self) -> np.ndarray:
        return np.diag(self.jd)

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g


@dataclass(frozen=True)
class BodyState:
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    nu: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(R)):
            raise ValueError("rotation matrix must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("R is not a rotation matrix within 1e-9")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "nu", _vec3(self.nu, "nu"))
        object.__setattr__(self, "p", _vec3(self.p, "p"))
        object.__setattr__(self, "v", _vec3(self.v, "v"))

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.R.reshape(9), self.nu, self.p, self.v])

    @classmethod
    def from_array(cls, x) -> "BodyState":
        x = np.asarray(x, dtype=float)
        return cls(R=x[0:9].reshape(3, 3).copy(), nu=x[9:12].copy(), p=x[12:15].copy(), v=x[15:18].copy())

    @classmethod
    def hover(cls, p=(0.0, 0.0, 0.0)) -> "BodyState":
        return cls(p=np.asarray(p, dtype=float))


@dataclass(frozen=True)
class Wrench:
    F: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "F", _vec3(self.F, "F"))
        object.__setattr__(self, "M", _vec3(self.M, "M"))


@dataclass(frozen=True)
class QuadInput:
    """Collective thrust ``T`` (N) and body torque ``tau`` (N m)."""

    T: float
    tau: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        T = float(self.T)
        if not np.isfinite(T):
            raise ValueError("thrust must be finite")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "tau", _vec3(self.tau, "tau"))

    def as_array(self) -> np.ndarray:
        """``[T, tau_x, tau_y, tau_z]``, the column order used by coupling rows."""
        return np.array([self.T, *self.tau])

    @classmethod
    def from_array(cls, u) -> "QuadInput":
        u = np.asarray(u, dtype=float)
        return cls(T=u[0], tau=u[1:4])

    def to_wrench(self) -> Wrench:
        return Wrench(F=self.T * E3, M=self.tau)


@dataclass(frozen=True)
class StateDerivative:
    R_dot: np.ndarray
    nu_dot: np.ndarray
    p_dot: np.ndarray
    v_dot: np.ndarray

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.R_dot.reshape(9), self.nu_dot, self.p_dot, self.v_dot])


def rigid_body_derivative(state: BodyState, w: Wrench, params: RigidBodyParams) -> StateDerivative:
    dx = kernels.rigid_deriv(state.to_array(), w.F, w.M, params.jd, params.m, params.g)
    return StateDerivative(dx[0:9].reshape(3, 3), dx[9:12], dx[12:15], dx[15:18])


def quad_derivative(state: BodyState, u: QuadInput, params: RigidBodyParams) -> StateDerivative:
    return rigid_body_derivative(state, u.to_wrench(), params)


def propagate_array(x, u, params: RigidBodyParams, dt: float, n: int = 1) -> np.ndarray:
    """Advance a flat state ``n`` RK4 steps with ``u = [T, tau]`` held.

    Negative ``dt`` integrates backwards, which the finite-difference oracles use.
    """
    u = np.asarray(u, dtype=float)
    force = np.array([0.0, 0.0, u[0]])
    out, status = kernels.rk4_propagate(np.asarray(x, dtype=float), force, u[1:4].copy(),
                                        params.jd, params.m, params.g, float(dt), int(n))
    if status == 1:
        raise NumericalBlowUp("non-finite state during RK4 propagation")
    if status == 2:
        raise ReflectionError("rotation block collapsed to a reflection")
    return out


def integrate_step(state: BodyState, u: QuadInput, params: RigidBodyParams, dt: float) -> BodyState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return BodyState.from_array(propagate_array(state.to_array(), u.as_array(), params, dt))


def propagate(state: BodyState, u: QuadInput, params: RigidBodyParams, dt: float, n: int) -> BodyState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return BodyState.from_array(propagate_array(state.to_array(), u.as_array(), params, dt, n))


def so3_project(M) -> np.ndarray:
    """Nearest rotation (orthogonal polar factor) to a 3x3 matrix."""
    M = np.ascontiguousarray(M, dtype=float).reshape(3, 3)
    Q, det = kernels.polar_project(M.copy())
    if det < 0:
        raise ReflectionError("polar factor is a reflection; input is not near SO(3)")
    return Q


def rotation_exp(phi) -> np.ndarray:
    """Rodrigues formula for ``exp(S(phi))``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    K = kernels.skew(phi)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return np.eye(3) + np.sin(theta) / theta * K + (1 - np.cos(theta)) / theta**2 * K @ K


def euler_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    return Rz @ Ry @ Rx


GIMBAL_GUARD = np.pi / 2 - 1e-6


def euler_zyx(R) -> tuple[float, float, float]:
    """ZYX (yaw-pitch-roll) angles of ``R``.

    Near gimbal lock roll and yaw are not separable; they come back as NaN so
    the log carries a visible flag instead of an arbitrary split.
    """
    R = np.asarray(R, dtype=float)
    pitch = -np.arcsin(np.clip(R[2, 0], -1.0, 1.0))
    if abs(pitch) >= GIMBAL_GUARD:
        return float("nan"), float(pitch), float("nan")
    roll = np.arctan2(R[2, 1], R[2, 2])
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return float(roll), float(pitch), float(yaw)
