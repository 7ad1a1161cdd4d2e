"""One-time blade chord calibration; the result is frozen in params.ROTOR_CHORD.

The absolute planform of the commercial variable-pitch blade is not
published, so the constant chord is the free parameter that anchors the
whole rotor model.  It is chosen so that the three-rotor failure
equilibrium at 0.600 kg all-up weight puts the zero-thrust rotor at
7100 RPM: that sits inside every downstream tolerance band at once
(pair torque, opposite-rotor torque, speed margin below the 8000 RPM
cap, and collective-thrust headroom for the recovery climb).

Run from the repo root:  python tools/calibrate_geometry.py
"""

from vpquad import params, rotor
from vpquad.airfoil import bundled_polar

TARGET_OMEGA2_RPM = 7100.0
MASS = 0.600


def main():
    cam = bundled_polar("cambered")
    chord = rotor.calibrate_chord(cam, MASS, TARGET_OMEGA2_RPM)
    print("calibrated chord  : %r" % chord)
    print("frozen in params  : %r" % params.ROTOR_CHORD)

    geom = rotor.BladeGeometry.constant_chord(
        params.ROTOR_RADIUS, params.ROTOR_ROOT_CUTOUT, chord
    )
    eq = rotor.failure_equilibrium(MASS, geom, cam)
    lam10 = rotor.torque_thrust_ratio(geom, cam, params.FAULT_PITCH_13_DEG)
    tau2max = rotor.rotor_performance(
        geom, cam, rotor.RotorOperatingPoint(eq.pitch2_deg, params.OMEGA_MAX)
    ).torque
    bound = params.THRUST_BOUND_MARGIN * tau2max / lam10
    print("pair thrust       : %.4f N each" % eq.thrust13)
    print("pair speed        : %.0f RPM" % (eq.omega13 * params.RADS_TO_RPM))
    print("pair torque       : %.5f N m each" % eq.tau13)
    print("zero-thrust pitch : %.3f deg" % eq.pitch2_deg)
    print("opposite speed    : %.0f RPM" % (eq.omega2 * params.RADS_TO_RPM))
    print("opposite torque   : %.5f N m" % eq.tau2)
    print("collective bound  : %.3f N (weight %.3f N)"
          % (bound, params.VEHICLE_MASS * params.GRAVITY))


if __name__ == "__main__":
    main()
