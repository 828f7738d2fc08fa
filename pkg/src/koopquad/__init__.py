"""Reduced Koopman generalized-eigenfunction control of a quadrotor.

Exact-inverse LQ on four composite observables, the least-squares lifted
baseline, and a closed-loop harness with sensor noise and delay.
"""
from ._accel import NUMBA_ENABLED
from .control import (BaselineController, ControllerSpec, KLQController, LQWeights, baseline_care_gain,
                      controller_step, exact_linearization_check, klq_control, least_squares_control, riccati_gain)
from .dynamics import (BodyState, NumericalBlowUp, QuadInput, RigidBodyParams, Wrench, euler_zyx, integrate_step,
                       quad_derivative, rigid_body_derivative, so3_project)
from .lift import (ChainConfig, ChainId, FullLift, chain_oracle_residual, full_lift, lift_angular_chain,
                   lift_position_chain)
from .reduction import (CombinationCoeffs, SingularG, assemble_G, combine_chain, desired_output, reduced_output)
from .sim import SensorModel, compare_controllers, run_closed_loop
from .trajectory import Setpoint, TrajectoryPlan, square_trajectory

__version__ = "0.1.0"
