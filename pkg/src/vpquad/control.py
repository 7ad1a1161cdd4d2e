"""Cascaded flight controller: position loop, quaternion attitude loop, allocation.

Outer loop (position PD plus gravity feedforward) produces the desired
aero-force vector; its norm is the collective-thrust demand and its
direction, together with the yaw reference, fixes the desired attitude.
Inner loop is a PD law on the error-quaternion vector part.  Allocation
maps (moments, collective) to per-rotor (thrust, torque, pitch) demands:
a closed-form 4x4 inverse while all rotors run, and after a failure a
3x3 reduced inverse plus a torque-matching step for the rotor opposite
the failed one, whose pitch comes from the ratio lookup table.

Everything model-based on the controller side (ratio lambda, lookup
table, collective bound) deliberately comes from the tip-loss-free
rotor model, the same one the allocation network is trained on; only
the simulated plant carries the tip-loss factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import params
from .dynamics import matrix_to_quat, quat_conjugate, quat_multiply
from .rotor import LambdaLut, pitch_for_mu

GRAVITY_VEC = np.array([0.0, 0.0, params.GRAVITY])

OPPOSITE_ROTOR = {1: 3, 2: 4, 3: 1, 4: 2}
# sign of each rotor's reaction torque about body z (1-based index 1..4)
SPIN_SIGN = {1: -1, 2: +1, 3: -1, 4: +1}

_MIN_THRUST_VEC = 0.1      # N, degenerate-direction guard
_MIN_TAU_OPP = 1.0e-4      # N m, torque-demand floor for the ratio step


@dataclass(frozen=True)
class ControlGains:
    """Frozen per-axis gain set, tuned on the bundled rotor-4 failure scenario.

    The vertical position gain is stiff because the allocation network
    understates required speeds by the tip-loss margin and the loop has
    no integrator; the roll attitude axis (the one that loses its rotor
    in the bundled scenario) is deliberately soft so the post-failure
    excursion and recovery match the reference transient, while the
    pitch axis stays crisp for reference steps.
    """

    pos_p: np.ndarray = field(default_factory=lambda: np.array([1.4, 1.4, 38.0]))
    pos_d: np.ndarray = field(default_factory=lambda: np.array([2.6, 2.6, 12.3]))
    att_p: np.ndarray = field(default_factory=lambda: np.array([0.09, 0.9, 0.35]))
    att_v: np.ndarray = field(default_factory=lambda: np.array([0.017, 0.058, 0.06]))

    def __post_init__(self):
        for name in ("pos_p", "pos_d", "att_p", "att_v"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,) or np.any(arr <= 0.0):
                raise ValueError("%s must be 3 positive gains" % name)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class ControlSetpoint:
    position_ref: np.ndarray
    velocity_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw_ref: float = 0.0     # radians


@dataclass
class AllocationDemand:
    """Per-rotor demands plus the collective/moment targets they realize."""

    thrust_d: np.ndarray        # N, 4
    torque_d: np.ndarray        # N m, 4
    pitch_d: np.ndarray         # deg, 4
    collective: float
    moments: np.ndarray
    sat_negative_thrust: bool = False
    sat_torque: bool = False
    lut_clamped: bool = False


def position_control(setpoint: ControlSetpoint, position, velocity,
                     gains: ControlGains, mass: float) -> np.ndarray:
    """Desired aero-force vector (inertial N): PD on position plus weight.

    NED frame, so the hover feedforward is -mass*g on z (thrust points
    up).  The norm of the returned vector is the collective demand.
    """
    e_r = setpoint.position_ref - position
    e_v = setpoint.velocity_ref - velocity
    return mass * (gains.pos_p * e_r + gains.pos_d * e_v - GRAVITY_VEC)


def desired_attitude(thrust_vec: np.ndarray, yaw_ref: float):
    """Attitude aligning body -z with the desired force, x toward yaw_ref.

    Returns None when the direction is degenerate (near-zero force or
    force parallel to the yaw heading); callers hold the previous
    command in that case.
    """
    norm = float(np.linalg.norm(thrust_vec))
    if norm < _MIN_THRUST_VEC:
        return None
    z_d = -thrust_vec / norm
    x_c = np.array([math.cos(yaw_ref), math.sin(yaw_ref), 0.0])
    y_d = np.cross(z_d, x_c)
    ny = float(np.linalg.norm(y_d))
    if ny < 1.0e-6:
        return None
    y_d /= ny
    x_d = np.cross(y_d, z_d)
    return matrix_to_quat(np.column_stack((x_d, y_d, z_d)))


def attitude_error(desired_thrust_vector: np.ndarray, yaw_ref: float, attitude,
                   fallback=None):
    """Error-quaternion vector part (body frame) and desired rates.

    Shortest-rotation sign convention (scalar part made non-negative),
    so antipodal state quaternions give identical errors.  Desired body
    rates are zero for step references.  Returns (q_e_vec, rates_d, q_d).
    """
    q_d = desired_attitude(desired_thrust_vector, yaw_ref)
    if q_d is None:
        q_d = fallback if fallback is not None else np.array([1.0, 0.0, 0.0, 0.0])
    q_e = quat_multiply(quat_conjugate(np.asarray(attitude)), q_d)
    if q_e[0] < 0.0:
        q_e = -q_e
    return q_e[1:4].copy(), np.zeros(3), q_d


def attitude_control(q_e_vec, rates_d, rates, gains: ControlGains) -> np.ndarray:
    """Body-moment demand: kp * q_e + kv * (rates_d - rates)."""
    return gains.att_p * np.asarray(q_e_vec) + gains.att_v * (np.asarray(rates_d) - np.asarray(rates))


def allocate_nominal(moments, collective: float, lam: float, arm: float,
                     nominal_pitch_deg: float = params.NOMINAL_PITCH_DEG) -> AllocationDemand:
    """Closed-form inverse of the 4x4 mixer with equal ratio lambda on all rotors.

    Negative per-rotor thrust demands are clamped to zero and flagged:
    with all pitches fixed positive, reverse thrust is not available in
    nominal mode.
    """
    if lam <= 0.0:
        raise ValueError("nominal allocation needs lambda > 0")
    tx, ty, tz = (float(m) for m in moments)
    quarter = collective / 4.0
    roll = tx / (2.0 * arm)
    pitch = ty / (2.0 * arm)
    yaw = tz / (4.0 * lam)
    thrust = np.array([
        quarter + pitch - yaw,
        quarter - roll + yaw,
        quarter - pitch - yaw,
        quarter + roll + yaw,
    ])
    saturated = bool(np.any(thrust < 0.0))
    thrust_c = np.maximum(thrust, 0.0)
    return AllocationDemand(
        thrust_d=thrust_c,
        torque_d=lam * thrust_c,
        pitch_d=np.full(4, float(nominal_pitch_deg)),
        collective=float(collective),
        moments=np.asarray(moments, dtype=float).copy(),
        sat_negative_thrust=saturated,
    )


def thrust_bound(lambda_13: float, tau2_max_zero_thrust: float,
                 margin_factor: float = params.THRUST_BOUND_MARGIN) -> float:
    """Collective-thrust cap keeping yaw authority in reserve after a failure.

    tau2_max_zero_thrust is the torque the opposite rotor can produce at
    the speed cap without making thrust; the pair's torque demand
    lambda_13 * collective must stay below it with margin.
    """
    if lambda_13 <= 0.0 or tau2_max_zero_thrust <= 0.0:
        raise ValueError("bound inputs must be positive")
    return margin_factor * tau2_max_zero_thrust / lambda_13


def rcam_matrix(failed_id: int, arm: float) -> np.ndarray:
    """Reduced 3x3 allocation matrix mapping surviving thrusts to (tx, ty, Tsum).

    Column order is the surviving rotors in ascending index.  The
    collective row spans the opposite pair only; the rotor opposite the
    failed one appears in its roll or pitch row alone.
    """
    l = arm
    if failed_id == 4:      # survivors 1, 2, 3
        return np.array([[0.0, -l, 0.0], [l, 0.0, -l], [1.0, 0.0, 1.0]])
    if failed_id == 2:      # survivors 1, 3, 4
        return np.array([[0.0, 0.0, l], [l, -l, 0.0], [1.0, 1.0, 0.0]])
    if failed_id == 1:      # survivors 2, 3, 4
        return np.array([[-l, 0.0, l], [0.0, -l, 0.0], [1.0, 0.0, 1.0]])
    if failed_id == 3:      # survivors 1, 2, 4
        return np.array([[0.0, -l, l], [l, 0.0, 0.0], [0.0, 1.0, 1.0]])
    raise ValueError("failed_id must be 1..4")


def allocate_fault(moments, collective: float, failed_id: int,
                   fixed_pitch_13: float, lut: LambdaLut, lambda_13: float,
                   tau_opp_max: float = math.inf,
                   lambda_net: float | None = None) -> AllocationDemand:
    """Reduced allocation with one rotor out.

    The opposite pair holds fixed_pitch_13 and carries roll-or-pitch plus
    the collective; the rotor opposite the failed one takes the remaining
    moment axis with thrust of either sign, and its torque demand is the
    pair reaction plus the yaw demand.  Its pitch comes from inverting
    the demanded thrust-to-torque ratio through the lookup table.

    lambda_13 expresses the pair torque the opposite rotor must cancel
    per newton demanded; lambda_net (defaults to lambda_13) fills the
    pair's torque_d entries and should stay consistent with whatever
    model the downstream speed inversion was built from.
    """
    if failed_id not in OPPOSITE_ROTOR:
        raise ValueError("failed_id must be 1..4")
    if lambda_net is None:
        lambda_net = lambda_13
    opp = OPPOSITE_ROTOR[failed_id]
    tx, ty, tz = (float(m) for m in moments)
    arm = params.ARM_LENGTH

    thrust = np.zeros(4)
    sat_neg = False
    if failed_id in (4, 2):
        # pair is rotors 1 and 3 (pitch axis), opposite rotor on the roll axis
        t_opp = -tx / arm if failed_id == 4 else tx / arm
        t_a = 0.5 * (collective + ty / arm)
        t_b = 0.5 * (collective - ty / arm)
        pair = (1, 3)
    else:
        # pair is rotors 2 and 4 (roll axis), opposite rotor on the pitch axis
        t_opp = -ty / arm if failed_id == 1 else ty / arm
        t_a = 0.5 * (collective - tx / arm)
        t_b = 0.5 * (collective + tx / arm)
        pair = (2, 4)
    if t_a < 0.0 or t_b < 0.0:
        sat_neg = True
        t_a, t_b = max(t_a, 0.0), max(t_b, 0.0)
    thrust[pair[0] - 1] = t_a
    thrust[pair[1] - 1] = t_b
    thrust[opp - 1] = t_opp

    tau_opp = lambda_13 * (t_a + t_b) + SPIN_SIGN[opp] * tz
    sat_torque = False
    if tau_opp < _MIN_TAU_OPP:
        tau_opp = _MIN_TAU_OPP
        sat_torque = True
    if tau_opp > tau_opp_max:
        tau_opp = tau_opp_max
        sat_torque = True

    pitch_opp, lut_clamped = pitch_for_mu(lut, t_opp / tau_opp)

    torque = np.zeros(4)
    torque[pair[0] - 1] = lambda_net * t_a
    torque[pair[1] - 1] = lambda_net * t_b
    torque[opp - 1] = tau_opp

    pitch = np.full(4, float(fixed_pitch_13))
    pitch[opp - 1] = pitch_opp
    pitch[failed_id - 1] = params.NOMINAL_PITCH_DEG

    return AllocationDemand(
        thrust_d=thrust,
        torque_d=torque,
        pitch_d=pitch,
        collective=float(collective),
        moments=np.asarray(moments, dtype=float).copy(),
        sat_negative_thrust=sat_neg,
        sat_torque=sat_torque,
        lut_clamped=lut_clamped,
    )
