"""Closed-loop simulation executive, scenario configuration, and telemetry.

One scenario couples the rigid body, four motor/servo actuators, the
cascaded controller, and the allocation network at their own rates:
physics RK4 at the base step, inner attitude/allocation loop at 500 Hz,
outer position loop at 100 Hz, speed PI and servo at the physics rate.

Rotor aerodynamics enter through per-pitch thrust/torque coefficient
tables solved once from the blade model (thrust and torque scale
exactly with omega^2 at fixed pitch, so a pitch sweep captures the
whole map).  The plant table carries the Prandtl tip-loss factor; the
controller-side table (ratio lambda, pitch lookup, collective bound)
deliberately does not, matching the data the allocation network was
trained on.

Runs are deterministic: identical configuration gives bit-identical
telemetry.
"""

from __future__ import annotations

import configparser
import math
import pathlib
from dataclasses import dataclass, field

import numpy as np

from . import params
from .actuators import MotorParams, SpeedController
from .airfoil import bundled_polar, load_polar, BUNDLED_POLARS
from .allocnet import AllocNet, bundled_net, load_net
from .control import (AllocationDemand, ControlGains, ControlSetpoint, allocate_fault,
                      allocate_nominal, desired_attitude, position_control, thrust_bound)
from .dynamics import (VehicleParams, euler_of, quat_conjugate, quat_multiply,
                       quat_normalize, rigid_body_derivatives, yaw_of)
from .rotor import BladeGeometry, LambdaLut, _solve_stations


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario configuration."""


class SimDiverged(RuntimeError):
    def __init__(self, t, message):
        self.t = t
        super().__init__("simulation diverged at t=%.3f s: %s" % (t, message))


# ---------------------------------------------------------------------------
# rotor coefficient tables

@dataclass(frozen=True)
class RotorTable:
    """Thrust/torque per omega^2 against pitch, from the blade model.

    thrust(pitch, omega) = tcoef(pitch) * omega^2 and likewise for
    torque; exact in omega, linear interpolation in pitch.
    """

    pitch_grid: np.ndarray
    tcoef: np.ndarray
    qcoef: np.ndarray
    tip_loss: bool

    def coefficients(self, pitches):
        return (np.interp(pitches, self.pitch_grid, self.tcoef),
                np.interp(pitches, self.pitch_grid, self.qcoef))

    def thrust_torque(self, pitches, omegas):
        t, q = self.coefficients(pitches)
        w2 = np.square(omegas)
        return t * w2, q * w2

    def zero_thrust_pitch(self) -> float:
        i = int(np.nonzero(self.tcoef[:-1] * self.tcoef[1:] <= 0.0)[0][0])
        p0, p1 = self.pitch_grid[i], self.pitch_grid[i + 1]
        t0, t1 = self.tcoef[i], self.tcoef[i + 1]
        return float(p0 - t0 * (p1 - p0) / (t1 - t0))

    def lut(self, guard: float = 0.1) -> LambdaLut:
        """Ratio lookup for the allocator.

        The thrust-to-torque ratio is regular through the zero-thrust
        pitch, so the executive keeps only a small guard band there: a
        wide gap linearizes the locally square-root pitch(ratio) inverse
        into a soft dead zone in roll authority, which limit-cycles the
        lateral loop after a failure.
        """
        pt0 = self.zero_thrust_pitch()
        keep = np.abs(self.pitch_grid - pt0) >= guard
        mu = self.tcoef[keep] / self.qcoef[keep]
        return LambdaLut(pitch=self.pitch_grid[keep], mu=mu, pitch_t0=pt0)


def build_rotor_table(geom: BladeGeometry, polar, use_tip_loss: bool,
                      pitch_min: float = -8.0, pitch_max: float = 15.0,
                      step: float = 0.25) -> RotorTable:
    """Solve the blade model over a pitch sweep, densified around zero thrust.

    The extra knots resolve the locally quadratic thrust zero so the
    allocator's ratio inversion stays accurate near trim.
    """
    grid = np.arange(pitch_min, pitch_max + 0.5 * step, step)
    omega_ref = 500.0
    r = geom.stations()
    nb = geom.num_blades

    def solve(grid_):
        tc = np.empty(grid_.size)
        qc = np.empty(grid_.size)
        for i, p in enumerate(grid_):
            out = _solve_stations(geom, polar, float(p), omega_ref, r, use_tip_loss)
            if not np.all(out["converged"]):
                raise ScenarioError("rotor table failed to converge at pitch %.2f deg" % p)
            tc[i] = nb * np.trapezoid(out["dT_dr"], r) / omega_ref**2
            qc[i] = nb * np.trapezoid(out["dtau_dr"], r) / omega_ref**2
        return tc, qc

    tc, qc = solve(grid)
    coarse = RotorTable(grid, tc, qc, use_tip_loss)
    pt0 = coarse.zero_thrust_pitch()
    fine = np.arange(pt0 - 1.2, pt0 + 1.2 + 0.025, 0.05)
    fine = fine[(fine > pitch_min) & (fine < pitch_max)]
    tf, qf = solve(fine)
    merged = np.concatenate([grid, fine])
    order = np.argsort(merged)
    return RotorTable(merged[order], np.concatenate([tc, tf])[order],
                      np.concatenate([qc, qf])[order], use_tip_loss)


# ---------------------------------------------------------------------------
# scenario configuration

@dataclass
class ScenarioConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    geometry: BladeGeometry = None
    polar_name: str = "cambered"
    polar_path: str | None = None
    motor: MotorParams = field(default_factory=MotorParams)
    servo_rate: float = params.SERVO_RATE_LIMIT
    gains: ControlGains = field(default_factory=ControlGains)
    rpm_kp: float = params.RPM_KP
    rpm_ki: float = params.RPM_KI
    outer_rate_hz: float = params.OUTER_RATE_HZ
    inner_rate_hz: float = params.INNER_RATE_HZ
    nominal_pitch: float = params.NOMINAL_PITCH_DEG
    fault_pitch_13: float = params.FAULT_PITCH_13_DEG
    thrust_margin: float = params.THRUST_BOUND_MARGIN
    pitch_cmd_min: float = -6.0
    pitch_cmd_max: float = 14.0
    omega_max: float = params.OMEGA_MAX
    net_path: str | None = None          # None -> bundled network
    tip_loss: bool = True
    initial_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -10.0]))
    initial_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    initial_yaw: float = 0.0
    initial_motor_omega: np.ndarray = field(default_factory=lambda: np.zeros(4))
    initial_pitch: np.ndarray = field(default_factory=lambda: np.full(4, 4.0))
    # reference schedule rows: (time, x, y, z, yaw_rad)
    schedule: tuple = ((0.0, 0.0, 0.0, -10.0, 0.0),)
    fault_time: float | None = None
    fault_rotor: int = 0
    detection_delay: float = 0.025
    duration: float = 20.0
    physics_dt: float = params.PHYSICS_DT
    seed: int = 0

    def __post_init__(self):
        if self.geometry is None:
            from .rotor import default_geometry
            self.geometry = default_geometry()
        times = [row[0] for row in self.schedule]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ScenarioError("reference schedule times must be non-decreasing")
        if self.detection_delay < 0.0:
            raise ScenarioError("detection_delay must be >= 0")
        for rate in (self.inner_rate_hz, self.outer_rate_hz):
            period = 1.0 / rate
            steps = period / self.physics_dt
            if abs(steps - round(steps)) > 1.0e-9:
                raise ScenarioError("physics_dt must divide the controller periods")
        if self.fault_time is not None and not 1 <= self.fault_rotor <= 4:
            raise ScenarioError("fault rotor must be 1..4")

    def polar(self):
        if self.polar_path is not None:
            return load_polar(self.polar_path)
        return bundled_polar(self.polar_name)

    def net(self) -> AllocNet:
        if self.net_path is None:
            return bundled_net()
        return load_net(self.net_path)

    def reference_at(self, t: float) -> ControlSetpoint:
        row = self.schedule[0]
        for cand in self.schedule:
            if cand[0] <= t:
                row = cand
            else:
                break
        return ControlSetpoint(
            position_ref=np.array(row[1:4]), yaw_ref=float(row[4])
        )


def _floats(text):
    return [float(tok) for tok in text.split()]


def load_scenario(path) -> ScenarioConfig:
    """Parse the key = value scenario file format (sections, '#' comments)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise ScenarioError("cannot read scenario file %s" % path)

    kw = {}
    if cp.has_section("vehicle"):
        s = cp["vehicle"]
        kw["vehicle"] = VehicleParams(
            mass=s.getfloat("mass", params.VEHICLE_MASS),
            arm_length=s.getfloat("arm_length", params.ARM_LENGTH),
            inertia_diag=(
                s.getfloat("jxx", params.INERTIA_DIAG[0]),
                s.getfloat("jyy", params.INERTIA_DIAG[1]),
                s.getfloat("jzz", params.INERTIA_DIAG[2]),
            ),
        )
    if cp.has_section("rotor"):
        s = cp["rotor"]
        chord = s.getfloat("chord", params.ROTOR_CHORD)
        kw["geometry"] = BladeGeometry.constant_chord(
            s.getfloat("radius", params.ROTOR_RADIUS),
            s.getfloat("root_cutout", params.ROTOR_ROOT_CUTOUT),
            chord,
            num_blades=s.getint("num_blades", params.NUM_BLADES),
            num_stations=s.getint("num_stations", params.NUM_STATIONS),
        )
        name = s.get("polar", "cambered").strip()
        if name in BUNDLED_POLARS:
            kw["polar_name"] = name
        else:
            kw["polar_path"] = name
        kw["tip_loss"] = s.getboolean("tip_loss", True)
    if cp.has_section("motor"):
        s = cp["motor"]
        kw["motor"] = MotorParams(
            v_max=s.getfloat("v_max", params.MOTOR_V_MAX),
            kv=s.getfloat("kv_rpm_per_volt", params.MOTOR_KV_RPM_PER_V) * params.RPM_TO_RADS,
            resistance=s.getfloat("resistance", params.MOTOR_RESISTANCE),
            i0=s.getfloat("i0", params.MOTOR_I0),
            rotor_inertia=s.getfloat("rotor_inertia", params.MOTOR_ROTOR_INERTIA),
        )
        kw["omega_max"] = s.getfloat("omega_max_rpm", params.OMEGA_MAX_RPM) * params.RPM_TO_RADS
    if cp.has_section("servo"):
        kw["servo_rate"] = cp["servo"].getfloat("rate_limit", params.SERVO_RATE_LIMIT)
    if cp.has_section("gains"):
        s = cp["gains"]
        kw["gains"] = ControlGains(
            pos_p=np.array(_floats(s.get("pos_p", "2.5 2.5 32.0"))),
            pos_d=np.array(_floats(s.get("pos_d", "3.5 3.5 11.5"))),
            att_p=np.array(_floats(s.get("att_p", "0.9 0.9 0.35"))),
            att_v=np.array(_floats(s.get("att_v", "0.06 0.06 0.06"))),
        )
        kw["rpm_kp"] = s.getfloat("rpm_kp", params.RPM_KP)
        kw["rpm_ki"] = s.getfloat("rpm_ki", params.RPM_KI)
    if cp.has_section("control"):
        s = cp["control"]
        kw["outer_rate_hz"] = s.getfloat("outer_rate_hz", params.OUTER_RATE_HZ)
        kw["inner_rate_hz"] = s.getfloat("inner_rate_hz", params.INNER_RATE_HZ)
        kw["nominal_pitch"] = s.getfloat("nominal_pitch", params.NOMINAL_PITCH_DEG)
        kw["fault_pitch_13"] = s.getfloat("fault_pitch_13", params.FAULT_PITCH_13_DEG)
        kw["thrust_margin"] = s.getfloat("thrust_margin", params.THRUST_BOUND_MARGIN)
        kw["pitch_cmd_min"] = s.getfloat("pitch_min", -6.0)
        kw["pitch_cmd_max"] = s.getfloat("pitch_max", 14.0)
        net = s.get("net", "bundled").strip()
        kw["net_path"] = None if net == "bundled" else net
    if cp.has_section("initial"):
        s = cp["initial"]
        kw["initial_position"] = np.array(_floats(s.get("position", "0 0 -10")))
        kw["initial_velocity"] = np.array(_floats(s.get("velocity", "0 0 0")))
        kw["initial_yaw"] = math.radians(s.getfloat("yaw", 0.0))
        kw["initial_motor_omega"] = (
            np.array(_floats(s.get("motor_rpm", "0 0 0 0"))) * params.RPM_TO_RADS
        )
        kw["initial_pitch"] = np.array(_floats(s.get("pitch", "4 4 4 4")))
    if cp.has_section("references"):
        rows = []
        for line in cp["references"].get("schedule", "").splitlines():
            line = line.strip()
            if not line:
                continue
            vals = _floats(line)
            if len(vals) != 5:
                raise ScenarioError("schedule rows need 'time x y z yaw_deg'")
            rows.append((vals[0], vals[1], vals[2], vals[3], math.radians(vals[4])))
        if rows:
            kw["schedule"] = tuple(rows)
    if cp.has_section("fault"):
        s = cp["fault"]
        rotor_id = s.getint("rotor", 0)
        if rotor_id:
            kw["fault_time"] = s.getfloat("time")
            kw["fault_rotor"] = rotor_id
            kw["detection_delay"] = s.getfloat("detection_delay", 0.025)
    if cp.has_section("sim"):
        s = cp["sim"]
        kw["duration"] = s.getfloat("duration", 20.0)
        kw["physics_dt"] = s.getfloat("physics_dt", params.PHYSICS_DT)
        kw["seed"] = s.getint("seed", 0)
    return ScenarioConfig(**kw)


def fault_detector(fault_time, fault_rotor: int, detection_delay: float, now: float) -> int:
    """Oracle detector: reports the true failed rotor after the fixed delay.

    Returns 0 (healthy) before fault_time + detection_delay, the rotor
    id afterwards.
    """
    if fault_time is None or now < fault_time + detection_delay:
        return 0
    return fault_rotor


# ---------------------------------------------------------------------------
# telemetry

TELEMETRY_COLUMNS = (
    ["t", "x", "y", "z", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "p", "q", "r"]
    + ["pitch%d" % i for i in (1, 2, 3, 4)]
    + ["rpm%d" % i for i in (1, 2, 3, 4)]
    + ["pitch_cmd%d" % i for i in (1, 2, 3, 4)]
    + ["rpm_cmd%d" % i for i in (1, 2, 3, 4)]
    + ["volt%d" % i for i in (1, 2, 3, 4)]
    + ["collective_d", "mx_d", "my_d", "mz_d", "ex", "ey", "ez",
       "sat_flags", "fault_mode", "detected_rotor"]
)

FLAG_NEG_THRUST = 1
FLAG_TORQUE = 2
FLAG_LUT = 4
FLAG_NET_INPUT = 8
FLAG_COLLECTIVE = 16
FLAG_RPM_CMD = 32
FLAG_VOLTAGE = 64


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    telemetry: np.ndarray                 # (n, len(TELEMETRY_COLUMNS))
    metrics: dict
    diverged: bool = False
    diagnostic: str = ""

    def save_telemetry(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(TELEMETRY_COLUMNS) + "\n")
            np.savetxt(fh, self.telemetry, fmt="%.17g", delimiter=",")


def load_telemetry(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1)


_COL = {name: i for i, name in enumerate(TELEMETRY_COLUMNS)}


def summary_metrics(telemetry: np.ndarray, config: ScenarioConfig) -> dict:
    """Scenario summary recomputed purely from the telemetry table.

    Metrics follow the recovery-experiment definitions: altitude loss
    after the fault, time back to hover (position error < 0.1 m and
    rates < 0.05 rad/s sustained one second), peak roll over the fault
    transient, terminal yaw rate, reference tracking error over the
    final second, and speed-limit compliance.
    """
    t = telemetry[:, _COL["t"]]
    pos = telemetry[:, _COL["x"]:_COL["z"] + 1]
    rates = telemetry[:, _COL["p"]:_COL["r"] + 1]
    rpm = telemetry[:, _COL["rpm1"]:_COL["rpm4"] + 1]
    rpm_cmd = telemetry[:, _COL["rpm_cmd1"]:_COL["rpm_cmd4"] + 1]
    quat = telemetry[:, _COL["qw"]:_COL["qz"] + 1]

    refs = np.empty_like(pos)
    for i, ti in enumerate(t):
        refs[i] = config.reference_at(ti).position_ref
    pos_err = np.linalg.norm(pos - refs, axis=1)
    rate_mag = np.max(np.abs(rates), axis=1)

    out = {}
    last = t >= t[-1] - 1.0
    out["final_pos_err_m"] = float(np.max(pos_err[last]))
    out["terminal_yaw_rate"] = float(np.max(np.abs(telemetry[last, _COL["r"]])))
    out["x_ss_err_m"] = float(np.max(np.abs(pos[last, 0] - refs[last, 0])))
    out["rpm_max"] = float(np.max(rpm))
    out["rpm_cmd_max"] = float(np.max(rpm_cmd))

    if config.fault_time is not None:
        after = t >= config.fault_time
        i_f = int(np.argmax(after))
        out["alt_loss_m"] = float(np.max(pos[after, 2]) - pos[i_f, 2])
        transient = after & (t <= config.fault_time + 2.0)
        roll = np.array([euler_of(q)[0] for q in quat[transient]])
        out["peak_roll_deg"] = float(np.max(np.abs(np.degrees(roll))))
        out["rpm_max_post_fault"] = float(np.max(rpm[after]))
        out["rpm_cmd_max_post_fault"] = float(np.max(rpm_cmd[after]))
        # time back to hover: error and rates inside bounds for a sustained second
        ok = (pos_err < 0.1) & (rate_mag < 0.05) & after
        hold = int(round(1.0 / (t[1] - t[0])))
        t_hover = math.inf
        run = 0
        for i in range(i_f, len(t)):
            run = run + 1 if ok[i] else 0
            if run >= hold:
                t_hover = t[i - hold + 1] - config.fault_time
                break
        out["time_to_hover_s"] = float(t_hover)
        pitch2 = telemetry[:, _COL["pitch2"]]
        late = t >= t[-1] - 2.0
        out["pitch2_mean_deg"] = float(np.mean(pitch2[late]))
    return out


def print_summary(metrics: dict):
    for key in sorted(metrics):
        print("%s=%r" % (key, metrics[key]))


# ---------------------------------------------------------------------------
# the executive

def run_scenario(config: ScenarioConfig, net: AllocNet | None = None) -> ScenarioResult:
    """Run one closed-loop scenario and return telemetry plus summary metrics.

    Deterministic: no randomness enters the loop (the seed only labels
    the run).  Divergence aborts with the telemetry up to the last
    valid record and a diagnostic.
    """
    polar = config.polar()
    geom = config.geometry
    vp = config.vehicle
    mp = config.motor
    if net is None:
        net = config.net()

    plant = build_rotor_table(geom, polar, config.tip_loss)
    model = plant if not config.tip_loss else build_rotor_table(geom, polar, False)
    lut = plant.lut()
    # two ratio roles: torque_d entries feed the speed-inversion network and
    # must stay consistent with the tip-loss-free model it was trained on
    # (lambda_net); the torque-matching step and the collective bound need
    # the torque a rotor really produces per newton demanded, which is the
    # plant torque over the model thrust at that pitch (lambda_13)
    pitches_key = np.array([config.nominal_pitch, config.fault_pitch_13, lut.pitch_t0])
    t_model, q_model = model.coefficients(pitches_key)
    _, q_plant = plant.coefficients(pitches_key)
    lambda_nom = float(q_model[0] / t_model[0])
    lambda_13 = float(q_plant[1] / t_model[1])
    lambda_net_13 = float(q_model[1] / t_model[1])
    tau2_max = float(q_plant[2]) * config.omega_max**2
    collective_cap = thrust_bound(lambda_13, tau2_max, config.thrust_margin)
    tau_opp_max = tau2_max

    dt = config.physics_dt
    n_steps = int(round(config.duration / dt))
    inner_every = int(round(1.0 / (config.inner_rate_hz * dt)))
    outer_every = int(round(1.0 / (config.outer_rate_hz * dt)))

    # packed state: pos 0:3, vel 3:6, quat 6:10, rates 10:13, motor omega 13:17
    y = np.zeros(17)
    y[0:3] = config.initial_position
    y[3:6] = config.initial_velocity
    half = 0.5 * config.initial_yaw
    y[6:10] = np.array([math.cos(half), 0.0, 0.0, math.sin(half)])
    y[13:17] = config.initial_motor_omega

    pitches = config.initial_pitch.astype(float).copy()
    pitch_cmd = pitches.copy()
    omega_cmd = np.zeros(4)
    volts = np.zeros(4)
    speed_pi = [SpeedController(kp=config.rpm_kp, ki=config.rpm_ki, v_max=mp.v_max)
                for _ in range(4)]
    failed = np.zeros(4, dtype=bool)
    alive = np.ones(4)

    setpoint = config.reference_at(0.0)
    force_d = position_control(setpoint, y[0:3], y[3:6], config.gains, vp.mass)
    q_d_cache = np.array([1.0, 0.0, 0.0, 0.0])
    demand = allocate_nominal(np.zeros(3), vp.weight, lambda_nom, vp.arm_length,
                              config.nominal_pitch)
    flags = 0
    arm = vp.arm_length
    servo_buf = np.zeros(4)
    spin = np.array([rl.spin_sign for rl in vp.rotor_layout], dtype=float)
    inv_inertia_motor = 1.0 / mp.rotor_inertia
    kv, res, i0 = mp.kv, mp.resistance, mp.i0

    telemetry = np.empty((n_steps + 1, len(TELEMETRY_COLUMNS)))
    diverged = False
    diagnostic = ""

    def deriv(ys, tcoef, qcoef):
        w = np.maximum(ys[13:17], 0.0) * alive
        w2 = w * w
        thrust = tcoef * w2
        torque = qcoef * w2
        force = np.array([0.0, 0.0, -thrust.sum()])
        moment = np.array([
            arm * (thrust[3] - thrust[1]),
            arm * (thrust[0] - thrust[2]),
            float(spin @ torque),
        ])
        dy = np.empty(17)
        dy[0:13] = rigid_body_derivatives(ys[0:13], force, moment, vp)
        dy[13:17] = (((volts - w / kv) / res - i0) / kv - torque) * inv_inertia_motor
        dy[13:17][failed] = 0.0
        return dy

    row = 0
    for step in range(n_steps + 1):
        t_now = step * dt

        # fault injection: instantaneous stop
        if config.fault_time is not None and not failed[config.fault_rotor - 1] \
                and t_now >= config.fault_time:
            failed[config.fault_rotor - 1] = True
            alive[config.fault_rotor - 1] = 0.0
            y[13 + config.fault_rotor - 1] = 0.0

        detected = fault_detector(config.fault_time, config.fault_rotor,
                                  config.detection_delay, t_now)

        if step % outer_every == 0:
            setpoint = config.reference_at(t_now)
            force_d = position_control(setpoint, y[0:3], y[3:6], config.gains, vp.mass)
            # after detection the yaw reference is released: desired attitude
            # is built on the current heading and only the yaw rate is damped
            yaw_used = yaw_of(y[6:10]) if detected else setpoint.yaw_ref
            q_d = desired_attitude(force_d, yaw_used)
            if q_d is not None:
                q_d_cache = q_d

        if step % inner_every == 0:
            q_err = quat_multiply(quat_conjugate(y[6:10]), q_d_cache)
            if q_err[0] < 0.0:
                q_err = -q_err
            moments = config.gains.att_p * q_err[1:4] - config.gains.att_v * y[10:13]
            collective = float(np.linalg.norm(force_d))
            flags = 0
            if detected:
                if collective > collective_cap:
                    collective = collective_cap
                    flags |= FLAG_COLLECTIVE
                demand = allocate_fault(moments, collective, detected,
                                        config.fault_pitch_13, lut, lambda_13,
                                        tau_opp_max, lambda_net=lambda_net_13)
            else:
                demand = allocate_nominal(moments, collective, lambda_nom,
                                          arm, config.nominal_pitch)
            if demand.sat_negative_thrust:
                flags |= FLAG_NEG_THRUST
            if demand.sat_torque:
                flags |= FLAG_TORQUE
            if getattr(demand, "lut_clamped", False):
                flags |= FLAG_LUT
            pitch_cmd = np.clip(demand.pitch_d, config.pitch_cmd_min, config.pitch_cmd_max)
            for i in range(4):
                if failed[i]:
                    omega_cmd[i] = 0.0
                    continue
                om, clamped = _net_forward(net, demand.thrust_d[i], demand.torque_d[i],
                                           pitch_cmd[i])
                if clamped:
                    flags |= FLAG_NET_INPUT
                if om > config.omega_max:
                    om = config.omega_max
                    flags |= FLAG_RPM_CMD
                omega_cmd[i] = max(om, 0.0)

        # actuators at the physics rate
        max_move = config.servo_rate * dt
        np.clip(pitch_cmd - pitches, -max_move, max_move, out=servo_buf)
        pitches += servo_buf
        for i in range(4):
            if failed[i]:
                volts[i] = 0.0
            else:
                volts[i] = speed_pi[i].step(omega_cmd[i], y[13 + i], dt)

        # log before integrating so row 0 is the initial condition
        rec = telemetry[row]
        rec[0] = t_now
        rec[1:14] = y[0:13]
        rec[14:18] = pitches
        rec[18:22] = y[13:17] * params.RADS_TO_RPM
        rec[22:26] = pitch_cmd
        rec[26:30] = omega_cmd * params.RADS_TO_RPM
        rec[30:34] = volts
        rec[34] = demand.collective
        rec[35:38] = demand.moments
        rec[38:41] = setpoint.position_ref - y[0:3]
        rec[41] = flags
        rec[42] = 1.0 if detected else 0.0
        rec[43] = float(detected)
        row += 1
        if step == n_steps:
            break

        tcoef, qcoef = plant.coefficients(pitches)
        k1 = deriv(y, tcoef, qcoef)
        k2 = deriv(y + 0.5 * dt * k1, tcoef, qcoef)
        k3 = deriv(y + 0.5 * dt * k2, tcoef, qcoef)
        k4 = deriv(y + dt * k3, tcoef, qcoef)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            diverged = True
            diagnostic = "non-finite state after step %d" % step
            break
        y[6:10] = quat_normalize(y[6:10])
        y[13:17] = np.maximum(y[13:17], 0.0)
        y[13:17][failed] = 0.0

    telemetry = telemetry[:row]
    metrics = summary_metrics(telemetry, config)
    return ScenarioResult(config, telemetry, metrics, diverged, diagnostic)


def _net_forward(net: AllocNet, thrust, torque, pitch):
    xn = (np.array([thrust, torque, pitch]) - net.x_offset) / net.x_scale
    clamped = bool(np.any(np.abs(xn) > 1.05))
    if clamped:
        xn = np.clip(xn, -1.05, 1.05)
    h = np.tanh(net.w1 @ xn + net.b)
    return float(net.w2 @ h) * net.y_scale + net.y_offset, clamped


def scenario_dir() -> pathlib.Path:
    import importlib.resources

    return pathlib.Path(str(importlib.resources.files("vpquad"))) / "data" / "scenarios"
