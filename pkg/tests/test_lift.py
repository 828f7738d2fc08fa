import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from koopquad.dynamics import BodyState, RigidBodyParams, euler_to_matrix, propagate_array
from koopquad.lift import (ChainConfig, ChainId, POSITION, OracleSample, chain_oracle_residual, chain_residuals,
                           frozen_thrust_error, full_lift, lift_angular_chain, lift_position_chain, quad_configs,
                           random_rotation, random_samples)

from lie_oracle import lie_chain


def test_angular_chain_at_rest():
    params = RigidBodyParams(Ix=0.3, Iy=0.5, Iz=0.7)
    for axis in range(3):
        ch = lift_angular_chain(BodyState(), params, 3, axis=axis)
        assert ch.values[1] == 0.0
        np.testing.assert_allclose(ch.rows[0, 1:], np.linalg.inv(params.J)[axis])
        assert ch.rows[0, 0] == 0.0


def test_angular_chain_hand_values():
    params = RigidBodyParams(Ix=1, Iy=2, Iz=3)
    ch = lift_angular_chain(BodyState(nu=[1, 1, 0]), params, 2)
    assert ch.values[1] == pytest.approx(-1 / 3, abs=1e-15)
    np.testing.assert_allclose(ch.rows[0], [0, 0, 0, 1 / 3], atol=1e-15)


def test_angular_coupling_matches_numeric_gradient(rng):
    params = RigidBodyParams(Ix=1, Iy=2, Iz=3)
    nu = rng.uniform(-2, 2, 3)
    h = 1e-6
    ch = lift_angular_chain(BodyState(nu=nu), params, 4)
    for k in range(4):
        grad = np.empty(3)
        for c in range(3):
            d = np.zeros(3)
            d[c] = h
            grad[c] = (lift_angular_chain(BodyState(nu=nu + d), params, 4).values[k]
                       - lift_angular_chain(BodyState(nu=nu - d), params, 4).values[k]) / (2 * h)
        np.testing.assert_allclose(ch.rows[k, 1:], grad / params.jd, rtol=1e-7, atol=1e-7)


@pytest.mark.parametrize("jd", [(1.0, 2.0, 3.0), (0.01, 0.01, 0.02), (0.02, 0.013, 0.031)])
@pytest.mark.parametrize("axis", [0, 2])
def test_angular_chain_matches_symbolic_lie_derivatives(jd, axis, rng):
    params = RigidBodyParams(Ix=jd[0], Iy=jd[1], Iz=jd[2])
    for _ in range(5):
        s = BodyState(R=random_rotation(rng), nu=rng.uniform(-3, 3, 3))
        ch = lift_angular_chain(s, params, 4, axis=axis)
        vals, rows = lie_chain("angular", axis, 4, s.to_array(), params, params.hover_thrust)
        scale = np.abs(vals).max() + 1
        np.testing.assert_allclose(np.append(ch.values, ch.tail), vals, atol=1e-12 * scale, rtol=1e-11)
        np.testing.assert_allclose(ch.rows, rows, atol=1e-10, rtol=1e-10)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_position_chain_matches_symbolic_lie_derivatives(axis, rng):
    params = RigidBodyParams(Ix=0.01, Iy=0.013, Iz=0.02, m=1.3)
    for _ in range(5):
        s = BodyState(R=random_rotation(rng), nu=rng.uniform(-3, 3, 3), p=rng.uniform(-2, 2, 3),
                      v=rng.uniform(-3, 3, 3))
        t_bar = rng.uniform(5, 20)
        ch = lift_position_chain(s, params, t_bar, 4, axis)
        vals, rows = lie_chain("position", axis, 4, s.to_array(), params, t_bar)
        np.testing.assert_allclose(np.append(ch.values, ch.tail), vals, atol=1e-9, rtol=1e-10)
        np.testing.assert_allclose(ch.rows, rows, atol=1e-9, rtol=1e-10)


def test_position_chain_at_hover(params):
    ch = lift_position_chain(BodyState.hover((0.3, 0.2, 1.5)), params, params.hover_thrust, 4, axis=2)
    np.testing.assert_allclose(ch.values, [1.5, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(ch.rows[1], [1 / params.m, 0, 0, 0])


def test_position_z_third_value_vanishes_level(params, rng):
    ch = lift_position_chain(BodyState(nu=rng.uniform(-3, 3, 3)), params, 12.0, 4, axis=2)
    assert ch.values[3] == 0.0


def test_position_y_second_value_under_roll(params):
    th = 0.37
    s = BodyState(R=euler_to_matrix(th, 0, 0))
    t_bar = 11.0
    ch = lift_position_chain(s, params, t_bar, 4, axis=1)
    assert s.R[1, 2] == pytest.approx(-np.sin(th))
    assert ch.values[2] == pytest.approx(-(t_bar / params.m) * np.sin(th), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), t_bar=st.floats(0, 40))
def test_position_rows_structure(seed, t_bar):
    rng = np.random.default_rng(seed)
    params = RigidBodyParams(Ix=0.01, Iy=0.02, Iz=0.03)
    s = BodyState(R=random_rotation(rng), nu=rng.uniform(-5, 5, 3), v=rng.uniform(-5, 5, 3))
    for axis in range(3):
        ch = lift_position_chain(s, params, t_bar, 4, axis)
        assert not np.any(ch.rows[0])  # relative degree >= 2
        assert not np.any(ch.rows[:, 3])  # no yaw-torque coupling


def test_full_lift_layout(params):
    L = full_lift(BodyState.hover((1, -2, 3)), params, params.hover_thrust)
    assert L.B.shape == (16, 4) and L.A.shape == (16, 16)
    assert np.count_nonzero(L.kappa) == 3
    np.testing.assert_array_equal(L.kappa[[4, 8, 12]], [1, -2, 3])
    assert not np.any(np.linalg.matrix_power(L.A, 4))
    assert np.count_nonzero(L.A) == 16 - 4 and np.all(L.A[L.A != 0] == 1)
    np.testing.assert_array_equal(np.diag(L.A, 1)[[3, 7, 11]], 0)


def test_full_lift_mixed_depths(params):
    L = full_lift(BodyState(), params, 5.0, quad_configs(2, 3))
    assert L.N == 11
    assert not np.any(np.linalg.matrix_power(L.A, 3))


def test_depth_limits():
    with pytest.raises(ValueError):
        ChainConfig(ChainId(POSITION, 0), 5)
    with pytest.raises(ValueError):
        ChainId("angular", 3)


def test_oracle_on_hover(params):
    s = [OracleSample(BodyState.hover((0, 0, 1)), np.array([params.hover_thrust, 0, 0, 0]))]
    rep = chain_oracle_residual(s, quad_configs(), params)
    assert rep.max_residual < 1e-8


def test_oracle_random_state_angular(params):
    for s in random_samples(params, 20, seed=4):
        res = chain_residuals(s.state.to_array(), s.u, RigidBodyParams(Ix=0.01, Iy=0.02, Iz=0.03), s.u[0],
                              [ChainConfig(ChainId("angular", 2), 4)])
        assert res[("angular-z", 0)] < 1e-6


def test_oracle_last_link_uses_tail(params, rng):
    # d/dt kappa_{depth-1} = tail + B_{depth-1} (u - trim), one link past the oracle's range
    for s in random_samples(params, 20, seed=9):
        x = s.state.to_array()
        cfg = ChainConfig(ChainId(POSITION, 0), 4)
        h = 1e-5
        t_bar = s.u[0] * 0.9
        from koopquad.lift import lift_chain_array
        c0 = lift_chain_array(x, params, t_bar, cfg)
        cp = lift_chain_array(propagate_array(x, s.u, params, h), params, t_bar, cfg)
        cm = lift_chain_array(propagate_array(x, s.u, params, -h), params, t_bar, cfg)
        d = (cp.values[3] - cm.values[3]) / (2 * h)
        trim = np.array([t_bar, 0, 0, 0])
        assert abs(d - c0.tail - c0.rows[3] @ (s.u - trim)) < 1e-6 * (1 + abs(d))


def test_oracle_reports_clamped_windows(params):
    s = random_samples(params, 5, seed=2)
    s[1] = OracleSample(s[1].state, np.array([100.0, 0, 0, 0]))
    rep = chain_oracle_residual(s, quad_configs(), params, limits=(4 * params.hover_thrust, 1.0))
    assert rep.clamped == [1]
    assert rep.max_residual < 1e-6


def test_frozen_thrust_error_is_linear(params):
    s = BodyState(R=euler_to_matrix(0.4, -0.3, 0.2), nu=[0.5, -0.2, 0.1], v=[1, 0, 0])
    t_bar = params.hover_thrust
    deltas = np.array([0.5, 1.0, 2.0, 4.0])
    errs = np.array([frozen_thrust_error(s, params, t_bar + d, t_bar, axis=0) for d in deltas])
    expected = deltas * abs(s.R[0, 2]) / params.m
    np.testing.assert_allclose(errs, expected, rtol=1e-6)
    assert frozen_thrust_error(s, params, t_bar, t_bar, axis=0) < 1e-8
