"""Six degree-of-freedom rigid-body dynamics with quaternion attitude.

Frames: inertial NED (z positive down, so 10 m altitude is z = -10 and
gravity is +9.81 on z), body frame with x forward, y right, z down.
Rotor thrust acts along -z in the body frame.  Attitude is a unit
quaternion (scalar first) taking body vectors to inertial vectors.

State derivatives follow the Newton-Euler equations with a diagonal
inertia tensor; integration is fixed-step RK4 with the quaternion
renormalized after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import params

GRAVITY_VEC = np.array([0.0, 0.0, params.GRAVITY])


# ---------------------------------------------------------------------------
# quaternion helpers (scalar-first, body -> inertial)

def quat_normalize(q):
    return q / math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    """3x3 rotation matrix taking body-frame vectors to inertial frame."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def matrix_to_quat(m):
    """Shepperd's method; returns a unit quaternion with w >= 0."""
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s, 0.25 * s,
                      (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                      0.25 * s, (m[1, 2] + m[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s, 0.25 * s])
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def quat_rotate(q, v):
    """Rotate body-frame vector v into the inertial frame."""
    return quat_to_matrix(q) @ v


def yaw_of(q) -> float:
    """Heading angle (rad) of the body x axis projected on the horizontal."""
    m = quat_to_matrix(q)
    return math.atan2(m[1, 0], m[0, 0])


def euler_of(q):
    """(roll, pitch, yaw) in radians, aerospace z-y-x convention."""
    m = quat_to_matrix(q)
    pitch = math.asin(max(-1.0, min(1.0, -m[2, 0])))
    roll = math.atan2(m[2, 1], m[2, 2])
    yaw = math.atan2(m[1, 0], m[0, 0])
    return roll, pitch, yaw


# ---------------------------------------------------------------------------
# vehicle

@dataclass(frozen=True)
class RotorGeometryLayout:
    """Hub position in the body frame and spin sign of one rotor.

    spin_sign is the sign of the reaction torque the spinning rotor
    applies to the airframe about body z per unit aerodynamic torque.
    """

    position: np.ndarray
    spin_sign: int


def _default_layout(arm):
    # rotor 1 forward, 2 right, 3 aft, 4 left; 1/3 spin opposite to 2/4
    return (
        RotorGeometryLayout(np.array([arm, 0.0, 0.0]), -1),
        RotorGeometryLayout(np.array([0.0, arm, 0.0]), +1),
        RotorGeometryLayout(np.array([-arm, 0.0, 0.0]), -1),
        RotorGeometryLayout(np.array([0.0, -arm, 0.0]), +1),
    )


@dataclass(frozen=True)
class VehicleParams:
    mass: float = params.VEHICLE_MASS
    arm_length: float = params.ARM_LENGTH
    inertia_diag: tuple = params.INERTIA_DIAG
    rotor_layout: tuple = None

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if any(j <= 0.0 for j in self.inertia_diag):
            raise ValueError("inertia must be positive definite")
        if self.rotor_layout is None:
            object.__setattr__(self, "rotor_layout", _default_layout(self.arm_length))
        signs = [r.spin_sign for r in self.rotor_layout]
        if signs[0] == signs[1] or signs[0] != signs[2] or signs[1] != signs[3]:
            raise ValueError("spin signs must alternate between opposite pairs")

    @property
    def inertia(self) -> np.ndarray:
        return np.asarray(self.inertia_diag)

    @property
    def weight(self) -> float:
        return self.mass * params.GRAVITY


@dataclass
class VehicleState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "VehicleState":
        return VehicleState(self.position.copy(), self.velocity.copy(),
                            self.attitude.copy(), self.body_rates.copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.attitude, self.body_rates])

    @classmethod
    def unpack(cls, y) -> "VehicleState":
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:10].copy(), y[10:13].copy())


@dataclass(frozen=True)
class BodyWrench:
    force: np.ndarray    # body frame, N
    moment: np.ndarray   # body frame, N m


def aero_wrench(rotor_thrusts, rotor_torques, vp: VehicleParams) -> BodyWrench:
    """Total body-frame force and moment from the four rotors.

    Thrust pushes along -z body; roll/pitch moments come from the thrust
    offsets, yaw from the signed aerodynamic reaction torques.  A failed
    rotor contributes zeros through its (0, 0) entry.
    """
    force = np.array([0.0, 0.0, -float(np.sum(rotor_thrusts))])
    moment = np.zeros(3)
    for thrust, torque, rl in zip(rotor_thrusts, rotor_torques, vp.rotor_layout):
        # r x (0, 0, -T) = (-ry*T, rx*T, 0) with r = (rx, ry, 0)
        moment[0] -= rl.position[1] * thrust
        moment[1] += rl.position[0] * thrust
        moment[2] += rl.spin_sign * torque
    return BodyWrench(force, moment)


def rigid_body_derivatives(y: np.ndarray, force_body: np.ndarray,
                           moment_body: np.ndarray, vp: VehicleParams) -> np.ndarray:
    """Time derivative of the packed state [pos, vel, quat, rates]."""
    q = y[6:10]
    w = y[10:13]
    dy = np.empty(13)
    dy[0:3] = y[3:6]
    dy[3:6] = GRAVITY_VEC + quat_to_matrix(q) @ (force_body / vp.mass)
    # qdot = 0.5 * q * (0, w)
    qw, qx, qy, qz = q
    wx, wy, wz = w
    dy[6] = 0.5 * (-qx * wx - qy * wy - qz * wz)
    dy[7] = 0.5 * (qw * wx + qy * wz - qz * wy)
    dy[8] = 0.5 * (qw * wy - qx * wz + qz * wx)
    dy[9] = 0.5 * (qw * wz + qx * wy - qy * wx)
    j = vp.inertia
    jw = j * w
    dy[10] = (moment_body[0] - (wy * jw[2] - wz * jw[1])) / j[0]
    dy[11] = (moment_body[1] - (wz * jw[0] - wx * jw[2])) / j[1]
    dy[12] = (moment_body[2] - (wx * jw[1] - wy * jw[0])) / j[2]
    return dy


def integrate_step(state: VehicleState, wrench: BodyWrench, vp: VehicleParams,
                   dt: float) -> VehicleState:
    """One RK4 step under a wrench held constant over the step.

    The quaternion is renormalized afterwards.  Raises on non-finite
    state (divergence guard).
    """
    y = state.pack()
    k1 = rigid_body_derivatives(y, wrench.force, wrench.moment, vp)
    k2 = rigid_body_derivatives(y + 0.5 * dt * k1, wrench.force, wrench.moment, vp)
    k3 = rigid_body_derivatives(y + 0.5 * dt * k2, wrench.force, wrench.moment, vp)
    k4 = rigid_body_derivatives(y + dt * k3, wrench.force, wrench.moment, vp)
    y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise FloatingPointError("state diverged during integration")
    y_new[6:10] = quat_normalize(y_new[6:10])
    return VehicleState.unpack(y_new)


def rotational_energy(state: VehicleState, vp: VehicleParams) -> float:
    w = state.body_rates
    return 0.5 * float(np.dot(w, vp.inertia * w))


def angular_momentum_inertial(state: VehicleState, vp: VehicleParams) -> np.ndarray:
    return quat_rotate(state.attitude, vp.inertia * state.body_rates)
