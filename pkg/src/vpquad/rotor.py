"""Blade element momentum theory (BEMT) rotor model.

Per radial station the blade-element thrust is balanced against the
annulus momentum flux to find the local induced velocity, then thrust
and torque are integrated over the span for all blades.  The momentum
side carries a Prandtl tip-loss factor and a signed extension
dT = 4 pi rho F Vi |Vi| r so that negative-pitch (reverse thrust)
operation is solvable.

Because the section coefficients depend only on the flow angle, scaling
omega scales the induced velocity proportionally: thrust and torque go
exactly as omega^2 at fixed pitch, and the torque-to-thrust ratio
depends on pitch alone.  The fault-mode allocation exploits both facts.

Built on top of the station solver: zero-thrust pitch search, the
pitch <-> torque/thrust-ratio lookup table, dense performance maps, and
the three-rotor hover equilibrium after one rotor fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import params
from .airfoil import AirfoilPolar, coeffs_clamped

RHO = params.RHO_AIR
_FOUR_PI_RHO = 4.0 * math.pi * RHO

_BISECT_ITERS = 90
_RESIDUAL_TOL = 1.0e-6
_VI_BRACKET = 0.3          # induced-velocity bracket, fraction of local omega*r


class RotorSolveError(RuntimeError):
    """A station failed to converge inside rotor_performance."""

    def __init__(self, station_index, r, pitch_deg, omega):
        self.station_index = int(station_index)
        super().__init__(
            "station %d (r=%.4f m) did not converge at pitch %.2f deg, omega %.1f rad/s"
            % (station_index, r, pitch_deg, omega)
        )


class ThrustSingularityError(ValueError):
    """Torque-to-thrust ratio requested too close to the zero-thrust pitch."""


class PitchNotFoundError(ValueError):
    """No zero-thrust pitch bracket inside the searched range."""


@dataclass(frozen=True)
class BladeGeometry:
    """Blade planform: radius, root cutout, piecewise-linear chord, blade count."""

    radius: float
    root_cutout: float
    chord_r: np.ndarray = field(repr=False)
    chord_c: np.ndarray = field(repr=False)
    num_blades: int = params.NUM_BLADES
    num_stations: int = params.NUM_STATIONS

    def __post_init__(self):
        if not 0.0 <= self.root_cutout < self.radius:
            raise ValueError("need 0 <= root_cutout < radius")
        if self.num_blades < 2:
            raise ValueError("num_blades must be >= 2")
        if self.num_stations < 20:
            raise ValueError("num_stations must be >= 20")
        cr = np.asarray(self.chord_r, dtype=float)
        cc = np.asarray(self.chord_c, dtype=float)
        if cr.ndim != 1 or cr.shape != cc.shape or cr.size < 2:
            raise ValueError("chord breakpoints must be two matching 1-d arrays")
        if not np.all(np.diff(cr) > 0.0):
            raise ValueError("chord breakpoints must be increasing in r")
        if np.any(cc <= 0.0):
            raise ValueError("chord must be positive over the span")
        object.__setattr__(self, "chord_r", cr)
        object.__setattr__(self, "chord_c", cc)

    @classmethod
    def constant_chord(cls, radius, root_cutout, chord, num_blades=params.NUM_BLADES,
                       num_stations=params.NUM_STATIONS) -> "BladeGeometry":
        return cls(
            radius=radius,
            root_cutout=root_cutout,
            chord_r=np.array([root_cutout, radius]),
            chord_c=np.array([chord, chord]),
            num_blades=num_blades,
            num_stations=num_stations,
        )

    def chord(self, r):
        return np.interp(r, self.chord_r, self.chord_c)

    def stations(self) -> np.ndarray:
        # the outermost station sits a hair inboard of the tip: at r = R the
        # tip-loss factor is exactly zero and the momentum balance degenerates
        return np.linspace(self.root_cutout, self.radius * (1.0 - 1.0e-4), self.num_stations)


def default_geometry(num_stations=params.NUM_STATIONS) -> BladeGeometry:
    """Calibrated constant-chord geometry used across the package."""
    return BladeGeometry.constant_chord(
        params.ROTOR_RADIUS, params.ROTOR_ROOT_CUTOUT, params.ROTOR_CHORD,
        num_stations=num_stations,
    )


@dataclass(frozen=True)
class RotorOperatingPoint:
    """Collective pitch (degrees) and rotational speed (rad/s)."""

    pitch_deg: float
    omega: float

    def __post_init__(self):
        if self.omega < 0.0:
            raise ValueError("omega must be >= 0")


@dataclass(frozen=True)
class StationSolution:
    """Converged induced-velocity balance at one radial station (per blade)."""

    r: float
    vi: float
    theta: float          # flow angle, rad
    alpha_deg: float
    dT_dr: float          # N/m, single blade
    dtau_dr: float        # N*m/m, single blade
    tip_loss: float
    converged: bool
    residual: float


@dataclass(frozen=True)
class RotorPerformance:
    """Integrated rotor thrust (N) and torque (N*m) at one operating point."""

    thrust: float
    torque: float

    @property
    def lam(self) -> float:
        """Torque-to-thrust ratio; guarded against the zero-thrust singularity."""
        if abs(self.thrust) <= params.LAMBDA_THRUST_GUARD:
            raise ThrustSingularityError(
                "|thrust| = %.4f N is below the %.2f N ratio guard"
                % (abs(self.thrust), params.LAMBDA_THRUST_GUARD)
            )
        return self.torque / self.thrust


def _station_terms(geom, polar, pitch_deg, omega, r, vi, use_tip_loss):
    """Blade-element and momentum thrust gradients for candidate vi arrays."""
    wr = omega * r
    theta = np.arctan2(vi, wr)
    alpha = pitch_deg - np.degrees(theta)
    cl, cd = coeffs_clamped(polar, alpha)
    v2 = vi * vi + wr * wr
    cth = np.cos(theta)
    sth = np.sin(theta)
    chord = geom.chord(r)
    common = 0.5 * RHO * v2 * chord
    bet = common * (cl * cth - cd * sth)
    dh = common * (cl * sth + cd * cth)
    if use_tip_loss:
        rbar = np.clip(r / geom.radius, 1.0e-9, None)
        gap = np.maximum(1.0 - rbar, 0.0)
        s = np.maximum(np.abs(sth), 1.0e-12)
        f = 0.5 * geom.num_blades * gap / (rbar * s)
        tip = (2.0 / math.pi) * np.arccos(np.exp(-np.minimum(f, 700.0)))
    else:
        tip = np.ones_like(bet)
    mt = _FOUR_PI_RHO * tip * vi * np.abs(vi) * r
    return bet, mt, theta, alpha, dh, tip


def _solve_stations(geom, polar, pitch_deg, omega, r, use_tip_loss):
    """Vector bisection of the induced-velocity balance over station array r.

    Returns dict of station arrays; `converged` marks stations whose
    relative residual |BET - MT| / max(|BET|, 1e-9) fell below 1e-6.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lo = -_VI_BRACKET * omega * r
    hi = _VI_BRACKET * omega * r
    g_lo = np.subtract(*_station_terms(geom, polar, pitch_deg, omega, r, lo, use_tip_loss)[:2])
    g_hi = np.subtract(*_station_terms(geom, polar, pitch_deg, omega, r, hi, use_tip_loss)[:2])
    bracketed = np.sign(g_lo) != np.sign(g_hi)

    mid = 0.5 * (lo + hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        g_mid = np.subtract(
            *_station_terms(geom, polar, pitch_deg, omega, r, mid, use_tip_loss)[:2]
        )
        same = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(same, mid, lo)
        g_lo = np.where(same, g_mid, g_lo)
        hi = np.where(same, hi, mid)

    vi = 0.5 * (lo + hi)
    bet, mt, theta, alpha, dh, tip = _station_terms(
        geom, polar, pitch_deg, omega, r, vi, use_tip_loss
    )
    # relative residual, floored at 1e-9 N/m plus the float64 noise level of
    # the balance at the local dynamic-pressure scale (near the zero-thrust
    # pitch both sides vanish and only rounding noise remains)
    q_scale = 0.5 * RHO * (vi * vi + (omega * r) ** 2) * geom.chord(r)
    floor = np.maximum(1.0e-9, 1.0e6 * np.finfo(float).eps * q_scale)
    residual = np.abs(bet - mt) / np.maximum(np.abs(bet), floor)
    return {
        "r": r,
        "vi": vi,
        "theta": theta,
        "alpha_deg": alpha,
        "dT_dr": bet,
        "dtau_dr": r * dh,
        "tip_loss": tip,
        "residual": residual,
        "converged": bracketed & (residual < _RESIDUAL_TOL),
    }


def solve_station(geom: BladeGeometry, polar: AirfoilPolar, op: RotorOperatingPoint,
                  r: float, use_tip_loss: bool = True) -> StationSolution:
    """Solve the induced-velocity balance at a single radial station."""
    if not geom.root_cutout <= r <= geom.radius:
        raise ValueError("station r=%.4f outside blade span" % r)
    if op.omega <= 0.0:
        raise ValueError("station solve needs omega > 0")
    out = _solve_stations(geom, polar, op.pitch_deg, op.omega, np.array([r]), use_tip_loss)
    return StationSolution(
        r=float(out["r"][0]),
        vi=float(out["vi"][0]),
        theta=float(out["theta"][0]),
        alpha_deg=float(out["alpha_deg"][0]),
        dT_dr=float(out["dT_dr"][0]),
        dtau_dr=float(out["dtau_dr"][0]),
        tip_loss=float(out["tip_loss"][0]),
        converged=bool(out["converged"][0]),
        residual=float(out["residual"][0]),
    )


def rotor_performance(geom: BladeGeometry, polar: AirfoilPolar, op: RotorOperatingPoint,
                      use_tip_loss: bool = True) -> RotorPerformance:
    """Integrated thrust and torque over all blades, trapezoidal in r.

    Raises RotorSolveError carrying the station index if any station
    fails to converge.  omega = 0 short-circuits to zero output.
    """
    if op.omega == 0.0:
        return RotorPerformance(0.0, 0.0)
    r = geom.stations()
    out = _solve_stations(geom, polar, op.pitch_deg, op.omega, r, use_tip_loss)
    if not np.all(out["converged"]):
        i = int(np.argmin(out["converged"]))
        raise RotorSolveError(i, r[i], op.pitch_deg, op.omega)
    nb = geom.num_blades
    thrust = nb * float(np.trapezoid(out["dT_dr"], r))
    torque = nb * float(np.trapezoid(out["dtau_dr"], r))
    return RotorPerformance(thrust, torque)


def zero_thrust_pitch(geom: BladeGeometry, polar: AirfoilPolar,
                      omega: float = 5000.0 * params.RPM_TO_RADS,
                      tol_thrust: float = 1.0e-3) -> float:
    """Pitch angle (degrees) at which net thrust vanishes.

    Bisection on pitch until |T| < tol_thrust newton.  The result is
    insensitive to omega: the station balance at T = 0 has Vi = 0, so
    the zero sits where the section lift vanishes at alpha = pitch.
    """

    def thrust(pitch):
        return rotor_performance(geom, polar, RotorOperatingPoint(pitch, omega)).thrust

    span = np.arange(-8.0, 8.5, 1.0)
    vals = [thrust(p) for p in span]
    bracket = None
    for i in range(len(span) - 1):
        if vals[i] == 0.0:
            return float(span[i])
        if vals[i] * vals[i + 1] < 0.0:
            bracket = (span[i], vals[i], span[i + 1])
            break
    if bracket is None:
        raise PitchNotFoundError("no zero-thrust pitch in [-8, 8] deg")

    # thrust is locally quadratic through its zero (the momentum balance pins
    # alpha near the zero-lift angle), so converge the interval as well as |T|
    lo, f_lo, hi = bracket
    mid = 0.5 * (lo + hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = thrust(mid)
        if fm == 0.0 or (abs(fm) < tol_thrust and hi - lo < 1.0e-7):
            return mid
        if (fm > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    if abs(thrust(mid)) >= tol_thrust:
        raise PitchNotFoundError("zero-thrust bisection stalled above tolerance")
    return mid


def torque_thrust_ratio(geom: BladeGeometry, polar: AirfoilPolar, pitch_deg: float,
                        omega: float = 5000.0 * params.RPM_TO_RADS) -> float:
    """tau/T at the reference speed; raises near the zero-thrust pitch."""
    return rotor_performance(geom, polar, RotorOperatingPoint(pitch_deg, omega)).lam


@dataclass(frozen=True)
class LambdaLut:
    """Monotone table of thrust-to-torque ratio mu = T/tau against pitch.

    mu, not tau/T, is tabulated so the zero-thrust pitch maps to mu = 0
    instead of a pole.  Knots exclude a guard band around the
    zero-thrust pitch; interpolation spans the gap smoothly.
    """

    pitch: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    pitch_t0: float

    @property
    def mu_min(self) -> float:
        return float(self.mu[0])

    @property
    def mu_max(self) -> float:
        return float(self.mu[-1])


def build_lambda_lut(geom: BladeGeometry, polar: AirfoilPolar,
                     pitch_min: float = -6.0, pitch_max: float = 14.0,
                     step: float = 0.25, guard: float = 0.5,
                     omega: float = 5000.0 * params.RPM_TO_RADS) -> LambdaLut:
    """Tabulate mu(pitch) = T/tau on a pitch grid, keeping the monotone branch.

    The returned table is strictly increasing in mu and straddles the
    zero-thrust pitch, so inverting a requested ratio is a plain
    interpolation in either thrust direction.
    """
    pitch_t0 = zero_thrust_pitch(geom, polar, omega)
    grid = np.arange(pitch_min, pitch_max + 0.5 * step, step)
    grid = grid[np.abs(grid - pitch_t0) >= guard]
    mus, pitches = [], []
    for p in grid:
        perf = rotor_performance(geom, polar, RotorOperatingPoint(float(p), omega))
        if perf.torque <= 0.0:
            continue
        mus.append(perf.thrust / perf.torque)
        pitches.append(float(p))
    mu = np.asarray(mus)
    pitch = np.asarray(pitches)

    # keep the maximal strictly-increasing run containing the sign change
    i0 = int(np.searchsorted(pitch, pitch_t0))
    lo, hi = i0 - 1, i0
    while lo > 0 and mu[lo - 1] < mu[lo]:
        lo -= 1
    while hi < mu.size - 1 and mu[hi + 1] > mu[hi]:
        hi += 1
    return LambdaLut(pitch=pitch[lo:hi + 1], mu=mu[lo:hi + 1], pitch_t0=pitch_t0)


def pitch_for_mu(lut: LambdaLut, mu: float) -> tuple[float, bool]:
    """Pitch whose thrust-to-torque ratio matches mu; clamps outside the table."""
    clamped = mu < lut.mu_min or mu > lut.mu_max
    return float(np.interp(mu, lut.mu, lut.pitch)), clamped


def pitch_for_lambda(lut: LambdaLut, lam: float) -> tuple[float, bool]:
    """Invert a requested torque-to-thrust ratio to a pitch command.

    lam = +-inf means torque with zero thrust and lands on the
    zero-thrust pitch.  Returns (pitch_deg, clamped_flag).
    """
    mu = 0.0 if math.isinf(lam) else 1.0 / lam
    return pitch_for_mu(lut, mu)


@dataclass(frozen=True)
class EquilibriumSolution:
    """Three-rotor hover equilibrium after losing one rotor.

    The two opposite healthy rotors carry half the weight each at the
    fixed pitch; the rotor opposite the failed one runs at the
    zero-thrust pitch and spins fast enough to cancel their torque.
    feasible is False when that speed exceeds omega_max; omega2 then
    reports the speed that would have been required.
    """

    thrust13: float
    omega13: float
    tau13: float
    pitch2_deg: float
    omega2: float
    tau2: float
    feasible: bool
    omega_max: float


def _bisect_omega(fn, target, omega_hi, iters=100):
    lo, hi = 1.0e-3, omega_hi
    if fn(hi) < target:
        raise ValueError("target %.4g not reachable below omega %.1f rad/s" % (target, omega_hi))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def failure_equilibrium(vehicle_mass: float, geom: BladeGeometry, polar: AirfoilPolar,
                        fixed_pitch_13: float = params.FAULT_PITCH_13_DEG,
                        omega_max: float = params.OMEGA_MAX) -> EquilibriumSolution:
    """Solve the hover equilibrium with one rotor out.

    Conditions: the opposite pair at fixed_pitch_13 produces mg/2 each;
    the remaining rotor produces zero thrust at its zero-thrust pitch
    while matching the pair's total torque.
    """
    weight = vehicle_mass * params.GRAVITY
    target13 = 0.5 * weight

    def thrust13(om):
        return rotor_performance(geom, polar, RotorOperatingPoint(fixed_pitch_13, om)).thrust

    max_total = 4.0 * thrust13(omega_max)
    if max_total < 2.0 * weight:
        raise ValueError(
            "thrust-to-weight %.2f below 2: equilibrium precondition violated"
            % (max_total / weight)
        )

    omega13 = _bisect_omega(thrust13, target13, omega_max)
    perf13 = rotor_performance(geom, polar, RotorOperatingPoint(fixed_pitch_13, omega13))
    pitch2 = zero_thrust_pitch(geom, polar)
    tau2_req = 2.0 * perf13.torque

    def torque2(om):
        return rotor_performance(geom, polar, RotorOperatingPoint(pitch2, om)).torque

    omega2 = _bisect_omega(torque2, tau2_req, 25000.0 * params.RPM_TO_RADS)
    return EquilibriumSolution(
        thrust13=perf13.thrust,
        omega13=omega13,
        tau13=perf13.torque,
        pitch2_deg=pitch2,
        omega2=omega2,
        tau2=tau2_req,
        feasible=omega2 <= omega_max,
        omega_max=omega_max,
    )


@dataclass(frozen=True)
class PerformanceMap:
    """Dense (pitch, omega) grid of rotor thrust and torque."""

    pitch_deg: np.ndarray
    omega: np.ndarray
    thrust: np.ndarray      # shape (n_pitch, n_omega)
    torque: np.ndarray
    converged: np.ndarray

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("pitch_deg,omega_rpm,thrust_N,torque_Nm,converged\n")
            for i, p in enumerate(self.pitch_deg):
                for j, om in enumerate(self.omega):
                    fh.write(
                        "%s,%s,%s,%s,%d\n"
                        % (repr(float(p)), repr(float(om * params.RADS_TO_RPM)),
                           repr(float(self.thrust[i, j])), repr(float(self.torque[i, j])),
                           int(self.converged[i, j]))
                    )


def performance_map(geom: BladeGeometry, polar: AirfoilPolar,
                    pitch_grid, omega_grid, use_tip_loss: bool = True) -> PerformanceMap:
    """Evaluate rotor performance on the outer product of the two grids.

    Non-converged cells are recorded (NaN output, converged = False)
    rather than raised, so map export survives awkward corners.
    """
    pitch_grid = np.asarray(pitch_grid, dtype=float)
    omega_grid = np.asarray(omega_grid, dtype=float)
    nt, nw = pitch_grid.size, omega_grid.size
    thrust = np.full((nt, nw), np.nan)
    torque = np.full((nt, nw), np.nan)
    ok = np.zeros((nt, nw), dtype=bool)
    for i, p in enumerate(pitch_grid):
        for j, om in enumerate(omega_grid):
            try:
                perf = rotor_performance(
                    geom, polar, RotorOperatingPoint(float(p), float(om)), use_tip_loss
                )
            except RotorSolveError:
                continue
            thrust[i, j] = perf.thrust
            torque[i, j] = perf.torque
            ok[i, j] = True
    return PerformanceMap(pitch_grid, omega_grid, thrust, torque, ok)


def calibrate_chord(polar: AirfoilPolar, vehicle_mass: float, target_omega2_rpm: float,
                    radius: float = params.ROTOR_RADIUS,
                    root_cutout: float = params.ROTOR_ROOT_CUTOUT,
                    chord_lo: float = 0.04, chord_hi: float = 0.40) -> float:
    """Constant chord for which the failure-equilibrium speed hits the target.

    omega2 falls as chord grows (more drag torque per rev), so a plain
    bisection closes the loop.  Used once offline; the result is frozen
    in params.ROTOR_CHORD.
    """
    target = target_omega2_rpm * params.RPM_TO_RADS

    def omega2(chord):
        geom = BladeGeometry.constant_chord(radius, root_cutout, chord)
        return failure_equilibrium(vehicle_mass, geom, polar).omega2

    lo, hi = chord_lo, chord_hi
    if omega2(lo) < target or omega2(hi) > target:
        raise ValueError("target omega2 not bracketed by chord range")
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if omega2(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
