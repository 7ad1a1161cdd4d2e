"""Tabulated airfoil polars: lift/drag coefficient lookup vs angle of attack.

Two polars ship with the package, both at a nominal Reynolds number of
100,000: a symmetric section (zero lift at zero incidence, low zero-lift
drag) and a cambered section (negative zero-lift angle, high zero-lift
drag).  The cambered section's elevated drag at zero lift is the property
the fault-tolerant allocation exploits for yaw authority.

Angles are degrees at every interface.  Interpolation is linear so that
monotonicity of the tables is preserved exactly.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

BUNDLED_POLARS = ("symmetric", "cambered")

# validation windows, degrees
_REQUIRED_SPAN = (-15.0, 15.0)
_MONOTONE_SPAN = (-5.0, 8.0)


class PolarError(ValueError):
    """Malformed or invalid polar table."""


class AlphaRangeError(ValueError):
    """Angle of attack outside the tabulated range."""


@dataclass(frozen=True)
class AirfoilPolar:
    """Immutable lift/drag table over angle of attack at a single Reynolds number.

    rows are strictly increasing in alpha (degrees), cd is positive
    everywhere, and cl is non-decreasing over the pre-stall window.
    """

    name: str
    reynolds: float
    alpha: np.ndarray = field(repr=False)
    cl: np.ndarray = field(repr=False)
    cd: np.ndarray = field(repr=False)

    @property
    def alpha_min(self) -> float:
        return float(self.alpha[0])

    @property
    def alpha_max(self) -> float:
        return float(self.alpha[-1])


def _validate(name, reynolds, alpha, cl, cd) -> AirfoilPolar:
    if alpha.size < 4:
        raise PolarError("polar needs at least 4 rows, got %d" % alpha.size)
    if not np.all(np.diff(alpha) > 0.0):
        raise PolarError("alpha column must be strictly increasing")
    if alpha[0] > _REQUIRED_SPAN[0] or alpha[-1] < _REQUIRED_SPAN[1]:
        raise PolarError(
            "alpha range [%g, %g] must cover [%g, %g] deg"
            % (alpha[0], alpha[-1], *_REQUIRED_SPAN)
        )
    if not np.all(cd > 0.0):
        raise PolarError("cd must be positive for every row")
    lo, hi = _MONOTONE_SPAN
    sel = (alpha >= lo) & (alpha <= hi)
    if np.any(np.diff(cl[sel]) < 0.0):
        raise PolarError("cl must be non-decreasing over [%g, %g] deg" % (lo, hi))
    for arr in (alpha, cl, cd):
        arr.setflags(write=False)
    return AirfoilPolar(name=name, reynolds=float(reynolds), alpha=alpha, cl=cl, cd=cd)


def load_polar(source, name: str | None = None, reynolds: float = 1.0e5) -> AirfoilPolar:
    """Parse and validate a polar table.

    `source` is a path or an open text file in the conventional column
    layout: '#' comment lines, then whitespace-separated "alpha cl cd"
    rows with alpha in degrees, ascending.
    """
    if hasattr(source, "read"):
        text = source.read()
        label = name or getattr(source, "name", "<polar>")
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        label = name or str(source)

    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise PolarError("line %d: expected 'alpha cl cd', got %r" % (lineno, line))
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise PolarError("line %d: %s" % (lineno, exc)) from exc
    if not rows:
        raise PolarError("no data rows in %s" % label)

    table = np.asarray(rows, dtype=float)
    return _validate(label, reynolds, table[:, 0].copy(), table[:, 1].copy(), table[:, 2].copy())


def bundled_polar(name: str) -> AirfoilPolar:
    """Load one of the polars shipped with the package ('symmetric' or 'cambered')."""
    if name not in BUNDLED_POLARS:
        raise KeyError("unknown bundled polar %r, available: %s" % (name, BUNDLED_POLARS))
    ref = importlib.resources.files("vpquad").joinpath("data").joinpath(name + ".pol")
    with ref.open("r", encoding="utf-8") as fh:
        return load_polar(fh, name=name)


def _interp(polar: AirfoilPolar, alpha_deg: float, column: np.ndarray) -> float:
    if alpha_deg < polar.alpha_min or alpha_deg > polar.alpha_max:
        raise AlphaRangeError(
            "alpha %.3f deg outside [%g, %g] of polar %s"
            % (alpha_deg, polar.alpha_min, polar.alpha_max, polar.name)
        )
    return float(np.interp(alpha_deg, polar.alpha, column))


def lift_coeff(polar: AirfoilPolar, alpha_deg: float) -> float:
    """Lift coefficient at the given angle of attack (degrees), linear interpolation."""
    return _interp(polar, alpha_deg, polar.cl)


def drag_coeff(polar: AirfoilPolar, alpha_deg: float) -> float:
    """Drag coefficient at the given angle of attack (degrees), linear interpolation."""
    return _interp(polar, alpha_deg, polar.cd)


def coeffs_clamped(polar: AirfoilPolar, alpha_deg):
    """(cl, cd) with alpha clamped to the table range.

    Solver-side helper: iterative sweeps may probe beyond the table while
    bracketing; the table edge value is used there instead of raising.
    Accepts scalars or arrays.
    """
    a = np.clip(alpha_deg, polar.alpha_min, polar.alpha_max)
    return np.interp(a, polar.alpha, polar.cl), np.interp(a, polar.alpha, polar.cd)


def alpha_zero_lift(polar: AirfoilPolar, tol: float = 1.0e-6) -> float:
    """Angle of attack (degrees) where the interpolated cl crosses zero.

    Found by bisection to |cl| < tol.  Raises if the table has no sign
    change.  Negative for the bundled cambered polar.
    """
    cl = polar.cl
    sign_change = np.nonzero(cl[:-1] * cl[1:] <= 0.0)[0]
    if sign_change.size == 0:
        raise PolarError("polar %s has no zero-lift crossing" % polar.name)
    # prefer the crossing closest to zero alpha
    mids = 0.5 * (polar.alpha[sign_change] + polar.alpha[sign_change + 1])
    i = int(sign_change[np.argmin(np.abs(mids))])
    lo, hi = float(polar.alpha[i]), float(polar.alpha[i + 1])
    flo = lift_coeff(polar, lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = lift_coeff(polar, mid)
        if abs(fm) < tol:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
