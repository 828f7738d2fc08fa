"""Hot numeric kernels over flat float64 arrays.

State layout (length 18): ``R`` row-major in ``[0:9]``, body rates ``nu`` in
``[9:12]``, position ``p`` in ``[12:15]``, body-frame velocity ``v`` in
``[15:18]``.  Inertia is passed as its diagonal ``jd``.
"""
import numpy as np

from ._accel import njit

STATE_SIZE = 18


@njit
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit
def skew(a):
    out = np.zeros((3, 3))
    out[0, 1] = -a[2]
    out[0, 2] = a[1]
    out[1, 0] = a[2]
    out[1, 2] = -a[0]
    out[2, 0] = -a[1]
    out[2, 1] = a[0]
    return out


@njit
def free_accel(nu, jd):
    """Torque-free angular acceleration ``-J^-1 (nu x J nu)``."""
    return -cross3(nu, jd * nu) / jd


@njit
def rigid_deriv(x, force, moment, jd, m, g):
    R = x[0:9].reshape((3, 3))
    nu = x[9:12]
    v = x[15:18]
    dx = np.empty(18)
    dR = R @ skew(nu)
    dx[0:9] = dR.reshape(9)
    dx[9:12] = (moment - cross3(nu, jd * nu)) / jd
    dx[12:15] = R @ v
    dx[15:18] = force / m - cross3(nu, v) - g * R[2, :]
    return dx


@njit
def polar_project(M):
    """Orthogonal polar factor of a 3x3 matrix and its determinant."""
    U, _, Vt = np.linalg.svd(M)
    Q = U @ Vt
    return Q, np.linalg.det(Q)


@njit
def rk4_step(x, force, moment, jd, m, g, dt):
    k1 = rigid_deriv(x, force, moment, jd, m, g)
    k2 = rigid_deriv(x + 0.5 * dt * k1, force, moment, jd, m, g)
    k3 = rigid_deriv(x + 0.5 * dt * k2, force, moment, jd, m, g)
    k4 = rigid_deriv(x + dt * k3, force, moment, jd, m, g)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    Q, det = polar_project(out[0:9].reshape((3, 3)).copy())
    out[0:9] = Q.reshape(9)
    return out, det


@njit
def rk4_propagate(x, force, moment, jd, m, g, dt, n):
    """``n`` RK4 steps under a held wrench.

    Returns the final state and a status code: 0 ok, 1 non-finite value,
    2 projection produced a reflection.
    """
    out = x.copy()
    for _ in range(n):
        out, det = rk4_step(out, force, moment, jd, m, g, dt)
        for i in range(18):
            if not np.isfinite(out[i]):
                return out, 1
        if det < 0.0:
            return out, 2
    return out, 0


@njit
def angular_taylor(nu, jd, order):
    """Taylor coefficients of the torque-free rate flow and their sensitivities.

    ``coef[n]`` is the n-th Taylor coefficient of ``nu(t)`` at ``t=0`` and
    ``sens[n] = d coef[n] / d nu(0)``.  The drift is quadratic so the Cauchy
    product recursion is exact.
    """
    coef = np.zeros((order + 1, 3))
    sens = np.zeros((order + 1, 3, 3))
    coef[0, :] = nu
    for i in range(3):
        sens[0, i, i] = 1.0
    for n in range(order):
        acc = np.zeros(3)
        dacc = np.zeros((3, 3))
        for i in range(n + 1):
            l = n - i
            jc = jd * coef[l]
            acc += cross3(coef[i], jc)
            for col in range(3):
                dacc[:, col] += cross3(sens[i, :, col], jc)
                dacc[:, col] += cross3(coef[i], jd * sens[l, :, col])
        for r in range(3):
            coef[n + 1, r] = -acc[r] / jd[r] / (n + 1)
            for col in range(3):
                sens[n + 1, r, col] = -dacc[r, col] / jd[r] / (n + 1)
    return coef, sens


@njit
def angular_chain(nu, jd, axis, depth):
    """Values ``kappa_0..kappa_depth`` and coupling rows ``B_0..B_{depth-1}``.

    One value past ``depth`` is returned so callers can form the next
    composite without another pass.  Rows are ordered ``[T, tx, ty, tz]``.
    """
    coef, sens = angular_taylor(nu, jd, depth)
    vals = np.empty(depth + 1)
    rows = np.zeros((depth, 4))
    fact = 1.0
    for k in range(depth + 1):
        if k > 0:
            fact *= k
        vals[k] = fact * coef[k, axis]
        if k < depth:
            for col in range(3):
                rows[k, 1 + col] = fact * sens[k, axis, col] / jd[col]
    return vals, rows


@njit
def position_chain(x, jd, m, g, t_bar, axis, depth):
    """Closed-form position chain along the frozen-thrust drift.

    Returns ``depth + 1`` values (the extra one is the drift image of the last)
    and ``depth`` coupling rows; requires ``depth <= 4``.
    """
    R = x[0:9].reshape((3, 3))
    nu = x[9:12]
    p = x[12:15]
    v = x[15:18]
    e3 = np.zeros(3)
    e3[2] = 1.0
    s = t_bar / m
    vals = np.zeros(depth + 1)
    rows = np.zeros((depth, 4))
    Re3 = R[:, 2]
    nu_x_e3 = cross3(nu, e3)
    for k in range(depth + 1):
        if k == 0:
            vals[k] = p[axis]
        elif k == 1:
            vals[k] = (R @ v)[axis]
            if k < depth:
                rows[k, 0] = Re3[axis] / m
        elif k == 2:
            vals[k] = s * Re3[axis] - g * e3[axis]
        elif k == 3:
            vals[k] = s * (R @ nu_x_e3)[axis]
            # -(T/m) row_j(R S(e3) J^-1)
            if k < depth:
                RSe3 = R @ skew(e3)
                for col in range(3):
                    rows[k, 1 + col] = -s * RSe3[axis, col] / jd[col]
        else:
            a = free_accel(nu, jd)
            w = cross3(nu, nu_x_e3) - cross3(e3, a)
            vals[k] = s * (R @ w)[axis]
    return vals, rows
