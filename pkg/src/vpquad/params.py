"""Frozen physical constants and default vehicle/actuator parameters.

The blade chord below is the one calibrated against the three-rotor
hover equilibrium anchors (see tools/calibrate_geometry.py); everything
downstream of the rotor model keys off it.
"""

import math

RHO_AIR = 1.22        # kg/m^3
GRAVITY = 9.81        # m/s^2

RPM_TO_RADS = 2.0 * math.pi / 60.0
RADS_TO_RPM = 60.0 / (2.0 * math.pi)

OMEGA_MAX_RPM = 8000.0
OMEGA_MAX = OMEGA_MAX_RPM * RPM_TO_RADS

# rotor geometry defaults (8 inch class variable-pitch rotor, two blades;
# chord calibrated against the three-rotor equilibrium anchors and frozen)
ROTOR_RADIUS = 0.1016
ROTOR_ROOT_CUTOUT = 0.015
ROTOR_CHORD = 0.1746308897393175
NUM_BLADES = 2
NUM_STATIONS = 50

# thrust/torque ratio singularity guard (N)
LAMBDA_THRUST_GUARD = 0.05

# motor electrical constants
MOTOR_V_MAX = 12.0
MOTOR_KV_RPM_PER_V = 900.0          # converted to rad/s per volt internally
MOTOR_KV = MOTOR_KV_RPM_PER_V * RPM_TO_RADS
MOTOR_RESISTANCE = 0.09
MOTOR_I0 = 0.5
MOTOR_ROTOR_INERTIA = 2.0e-5        # kg m^2, propeller + rotor assembly

SERVO_RATE_LIMIT = 500.0            # deg/s

# vehicle
VEHICLE_MASS = 0.602
ARM_LENGTH = 0.1794
INERTIA_DIAG = (3.34e-3, 3.34e-3, 6.66e-3)

# control loop rates
PHYSICS_DT = 0.001
INNER_RATE_HZ = 500.0
OUTER_RATE_HZ = 100.0

NOMINAL_PITCH_DEG = 4.0
FAULT_PITCH_13_DEG = 10.0
THRUST_BOUND_MARGIN = 0.85

# speed loop PI gains (volts per rad/s, volts per rad)
RPM_KP = 0.02
RPM_KI = 0.6
