"""Actuator models: brushless motor speed dynamics, pitch servo, fault injection.

The motor follows the standard first-order electromechanical model

    I_rot * domega/dt = ((V - omega/Kv) / R - I0) / Kv - tau_load

with Kv in rad/s per volt internally (the data sheet quotes 900 RPM/V).
A PI voltage loop tracks commanded speed; the pitch servo is a pure
rate limiter at 500 deg/s.  A failed motor stops instantly and ignores
all further commands.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import params


@dataclass(frozen=True)
class MotorParams:
    v_max: float = params.MOTOR_V_MAX
    kv: float = params.MOTOR_KV              # rad/s per volt
    resistance: float = params.MOTOR_RESISTANCE
    i0: float = params.MOTOR_I0
    rotor_inertia: float = params.MOTOR_ROTOR_INERTIA

    def __post_init__(self):
        for name in ("v_max", "kv", "resistance", "i0", "rotor_inertia"):
            if getattr(self, name) <= 0.0:
                raise ValueError("%s must be positive" % name)

    def steady_state_omega(self, voltage: float, load_torque: float = 0.0) -> float:
        """Analytic equilibrium speed for constant voltage and load."""
        return self.kv * (voltage - self.resistance * (self.i0 + self.kv * load_torque))


@dataclass(frozen=True)
class MotorState:
    omega: float = 0.0
    failed: bool = False

    def __post_init__(self):
        if self.omega < 0.0:
            raise ValueError("omega must be >= 0")


def motor_accel(omega: float, p: MotorParams, voltage: float, load_torque: float) -> float:
    """domega/dt of the motor model."""
    current = (voltage - omega / p.kv) / p.resistance - p.i0
    return (current / p.kv - load_torque) / p.rotor_inertia


def motor_step(state: MotorState, p: MotorParams, voltage: float,
               load_torque: float, dt: float) -> MotorState:
    """One explicit RK4 step of the motor speed; omega clamped at zero.

    Failed motors return unchanged (omega pinned at zero).
    """
    if state.failed:
        return state
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not 0.0 <= voltage <= p.v_max:
        raise ValueError("voltage %.2f outside [0, %.2f]" % (voltage, p.v_max))
    w = state.omega
    k1 = motor_accel(w, p, voltage, load_torque)
    k2 = motor_accel(w + 0.5 * dt * k1, p, voltage, load_torque)
    k3 = motor_accel(w + 0.5 * dt * k2, p, voltage, load_torque)
    k4 = motor_accel(w + dt * k3, p, voltage, load_torque)
    w_new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return replace(state, omega=max(w_new, 0.0))


def inject_failure(state: MotorState) -> MotorState:
    """Kill the motor: speed drops to zero instantly and stays there."""
    return MotorState(omega=0.0, failed=True)


@dataclass
class SpeedController:
    """PI voltage loop on motor speed with clamping anti-windup.

    Output saturates to [0, v_max]; the integrator freezes whenever the
    output is pinned and the error would push it further out.
    """

    kp: float = params.RPM_KP
    ki: float = params.RPM_KI
    v_max: float = params.MOTOR_V_MAX
    integrator: float = 0.0
    saturated: bool = False

    def step(self, omega_desired: float, omega: float, dt: float) -> float:
        if omega_desired < 0.0:
            raise ValueError("omega_desired must be >= 0")
        err = omega_desired - omega
        v = self.kp * err + self.ki * (self.integrator + err * dt)
        if v > self.v_max:
            self.saturated = True
            if err < 0.0:
                self.integrator += err * dt
            return self.v_max
        if v < 0.0:
            self.saturated = True
            if err > 0.0:
                self.integrator += err * dt
            return 0.0
        self.saturated = False
        self.integrator += err * dt
        return v

    def reset(self):
        self.integrator = 0.0
        self.saturated = False


@dataclass(frozen=True)
class ServoState:
    pitch_deg: float
    rate_limit: float = params.SERVO_RATE_LIMIT   # deg/s


def servo_step(state: ServoState, commanded_pitch_deg: float, dt: float) -> ServoState:
    """Move pitch toward the command at most rate_limit deg/s; exact arrival."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    max_move = state.rate_limit * dt
    delta = commanded_pitch_deg - state.pitch_deg
    if delta > max_move:
        delta = max_move
    elif delta < -max_move:
        delta = -max_move
    return replace(state, pitch_deg=state.pitch_deg + delta)
