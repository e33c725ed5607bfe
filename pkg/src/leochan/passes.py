"""Visibility passes, elevation geometry and Doppler models.

Everything here works in the rotating Earth-fixed frame with geocentric
angles: the site zenith is the site position direction, which makes the
spherical-triangle elevation form exact and keeps Earth rotation implicit
in the sub-satellite track.  The closed-form Doppler model evaluates the
along-track law-of-cosines range geometry around culmination; its inputs
(culmination geometry, effective relative angular rate) are measured from
propagated states rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from . import frames
from .frames import EarthOrientation, earth_orientation, geodetic_to_ecef
from .sgp4 import GravityConstants, PropagatorState, sgp4_init, sgp4_propagate
from .states import StateVector
from .tle import Tle
from .timebase import minutes_between

SPEED_OF_LIGHT_KM_S = 299792.458
OMEGA_EARTH = frames.EARTH_ROTATION_RATE


class NoPassFound(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class Ephemeris:
    """One satellite's propagated states by UTC instant, through the full
    TEME -> ECI -> ECEF chain.  Pure and safe to share."""

    def __init__(self, tle: Tle, consts: GravityConstants | None = None):
        self.tle = tle
        self.state: PropagatorState = sgp4_init(tle, consts)

    def teme_at(self, t: datetime) -> StateVector:
        return sgp4_propagate(self.state, minutes_between(self.tle.epoch, t))

    def eci_at(self, t: datetime,
               eo: EarthOrientation | None = None) -> StateVector:
        if eo is None:
            eo = earth_orientation(t)
        return frames.teme_to_eci(self.teme_at(t), eo)

    def ecef_at(self, t: datetime,
                eo: EarthOrientation | None = None) -> StateVector:
        if eo is None:
            eo = earth_orientation(t)
        return frames.eci_to_ecef(self.eci_at(t, eo), eo)

    def inertial_angular_rate(self, t: datetime, h_s: float = 0.5) -> float:
        """Instantaneous angular speed of the position vector in ECI,
        rad/s, by central difference of the direction angle.

        Measured from positions rather than |r x v| / r^2 because the
        analytic theory's velocity is consistent with its position
        derivative only to ~1e-4 km/s, which matters for Hz-level
        Doppler closure.
        """
        ra = self.eci_at(t - timedelta(seconds=h_s)).position
        rb = self.eci_at(t + timedelta(seconds=h_s)).position
        cosang = float(ra @ rb) / float(np.linalg.norm(ra)
                                        * np.linalg.norm(rb))
        return math.acos(max(-1.0, min(1.0, cosang))) / (2.0 * h_s)


def elevation(site_ecef, sat_ecef) -> float:
    """Elevation of the satellite over the site's geocentric horizon.

    Vector form: angle of the slant vector above the plane normal to the
    site position.
    """
    site = np.asarray(site_ecef, dtype=float)
    sat = np.asarray(sat_ecef, dtype=float)
    slant = sat - site
    zenith = site / np.linalg.norm(site)
    sin_el = float(slant @ zenith) / float(np.linalg.norm(slant))
    return math.asin(max(-1.0, min(1.0, sin_el)))


def elevation_triangle(site_ecef, sat_ecef) -> float:
    """Same elevation via the law-of-cosines triangle (redundancy check):
    pi/2 minus the central angle minus the angle at the satellite."""
    site = np.asarray(site_ecef, dtype=float)
    sat = np.asarray(sat_ecef, dtype=float)
    r_e = float(np.linalg.norm(site))
    r = float(np.linalg.norm(sat))
    d = float(np.linalg.norm(sat - site))
    cos_gamma = float(site @ sat) / (r_e * r)
    gamma = math.acos(max(-1.0, min(1.0, cos_gamma)))
    cos_rso = (d * d + r * r - r_e * r_e) / (2.0 * d * r)
    angle_rso = math.acos(max(-1.0, min(1.0, cos_rso)))
    return math.pi / 2.0 - gamma - angle_rso


def gamma_at_culmination(theta_max: float, r_e: float, r: float) -> float:
    """Central angle between site and culmination sub-satellite point:
    acos((r_e / r) cos theta_max) - theta_max."""
    if r <= r_e:
        raise DomainError("satellite radius must exceed the site radius")
    if not 0.0 <= theta_max <= math.pi / 2.0:
        raise DomainError("culmination elevation must be in [0, pi/2]")
    return math.acos((r_e / r) * math.cos(theta_max)) - theta_max


@dataclass(frozen=True)
class PassWindow:
    """One visibility window above an elevation threshold."""

    t_start: datetime
    t_end: datetime
    t0: datetime            # culmination instant
    theta_max: float        # rad
    theta_min: float        # rad, visibility threshold used for the scan
    gamma_t0: float         # rad, central angle at culmination
    t_du_min: float         # scanned window duration, minutes
    t_du_analytic_min: float  # closed-form duration estimate, minutes


@dataclass(frozen=True)
class PassGeometry:
    """Inputs of the closed-form Doppler model, frozen at culmination."""

    r_e: float              # site geocentric radius, km
    r: float                # satellite geocentric radius at t0, km
    gamma_t0: float         # rad
    omega_s: float          # satellite inertial angular rate, rad/s
    omega_e: float          # Earth rotation rate, rad/s
    inclination: float      # rad
    omega_f: float          # effective relative rate omega_s - omega_e cos i
    fc_hz: float
    t0: datetime
    subsat0: np.ndarray     # unit sub-satellite direction at t0 (ECEF)
    ephemeris: Ephemeris

    def psi_delta(self, t: datetime, sat_ecef=None) -> float:
        """Signed along-track central angle between the sub-satellite
        points at t and at culmination (negative before culmination)."""
        if sat_ecef is None:
            sat_ecef = self.ephemeris.ecef_at(t).position
        u = np.asarray(sat_ecef, dtype=float)
        u = u / np.linalg.norm(u)
        cosang = max(-1.0, min(1.0, float(u @ self.subsat0)))
        ang = math.acos(cosang)
        return ang if t >= self.t0 else -ang

    def slant_range_model(self, psi_delta: float) -> float:
        """Law-of-cosines slant range for an along-track offset."""
        cos_g = math.cos(psi_delta) * math.cos(self.gamma_t0)
        return math.sqrt(self.r_e ** 2 + self.r ** 2
                         - 2.0 * self.r_e * self.r * cos_g)


def doppler_closed_form(t: datetime, geom: PassGeometry,
                        sat_ecef=None) -> float:
    """Closed-form Doppler at instant t, Hz.

    Positive while approaching (before culmination), zero at culmination,
    negative after.
    """
    dpsi = geom.psi_delta(t, sat_ecef)
    cos_g0 = math.cos(geom.gamma_t0)
    denom = SPEED_OF_LIGHT_KM_S * geom.slant_range_model(dpsi)
    num = (geom.fc_hz * geom.r_e * geom.r * math.sin(dpsi) * cos_g0
           * geom.omega_f)
    return -num / denom


def per_path_doppler(path, sat_vel_local, fc_hz: float) -> float:
    """Doppler of one traced path from the satellite velocity projection.

    The scene is static, so the path-length rate is the rate of the
    satellite-to-anchor segment alone; the anchor is the first
    interaction point (the receiver for the direct path).
    """
    v = np.asarray(sat_vel_local, dtype=float)
    return fc_hz / SPEED_OF_LIGHT_KM_S * float(v @ path.aod)


def _bisect_crossing(f, t_lo: datetime, t_hi: datetime,
                     rising: bool, tol_s: float = 0.1) -> datetime:
    """Refine a threshold crossing bracketed by (t_lo, t_hi)."""
    while (t_hi - t_lo).total_seconds() > tol_s:
        mid = t_lo + (t_hi - t_lo) / 2
        above = f(mid) > 0.0
        if above == rising:
            t_hi = mid
        else:
            t_lo = mid
    return t_lo + (t_hi - t_lo) / 2


def _golden_max(f, t_lo: datetime, t_hi: datetime,
                tol_s: float = 0.01) -> datetime:
    """Golden-section maximization of f over [t_lo, t_hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = t_lo, t_hi
    h = (b - a).total_seconds()
    c = a + timedelta(seconds=(1.0 - invphi) * h)
    d = a + timedelta(seconds=invphi * h)
    fc, fd = f(c), f(d)
    while (b - a).total_seconds() > tol_s:
        if fc > fd:
            b, d, fd = d, c, fc
            h = (b - a).total_seconds()
            c = a + timedelta(seconds=(1.0 - invphi) * h)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = (b - a).total_seconds()
            d = a + timedelta(seconds=invphi * h)
            fd = f(d)
    return a + (b - a) / 2


def find_pass(tle: Tle, site_geodetic: tuple[float, float, float],
              theta_min: float = 0.0, step_s: float = 30.0,
              search_hours: float = 48.0,
              consts: GravityConstants | None = None,
              ephemeris: Ephemeris | None = None) -> PassWindow:
    """Locate the first pass above ``theta_min`` after the element epoch.

    Numeric elevation scan at ``step_s`` resolution, crossings refined by
    bisection to 0.1 s, culmination by golden-section search; the
    closed-form window-duration estimate is evaluated alongside for
    comparison.  A pass already in progress at the epoch is skipped so
    the window is always a complete rise-culminate-set arc.
    """
    ephem = ephemeris if ephemeris is not None else Ephemeris(tle, consts)
    site_ecef = geodetic_to_ecef(*site_geodetic)

    def el(t: datetime) -> float:
        return elevation(site_ecef, ephem.ecef_at(t).position)

    def margin(t: datetime) -> float:
        return el(t) - theta_min

    t_epoch = tle.epoch
    n_steps = int(search_hours * 3600.0 / step_s)
    times = [t_epoch + timedelta(seconds=step_s * k)
             for k in range(n_steps + 1)]
    above = [margin(t) > 0.0 for t in times]

    rise_idx = None
    for k in range(len(times) - 1):
        if not above[k] and above[k + 1]:
            rise_idx = k
            break
    if rise_idx is None:
        raise NoPassFound(
            f"no pass above {math.degrees(theta_min):.1f} deg within "
            f"{search_hours:.0f} h of epoch")

    set_idx = None
    for k in range(rise_idx + 1, len(times) - 1):
        if above[k] and not above[k + 1]:
            set_idx = k
            break
    if set_idx is None:
        raise NoPassFound("pass does not set within the search horizon")

    t_start = _bisect_crossing(margin, times[rise_idx], times[rise_idx + 1],
                               rising=True)
    t_end = _bisect_crossing(margin, times[set_idx], times[set_idx + 1],
                             rising=False)
    t0 = _golden_max(el, t_start, t_end)
    theta_max = el(t0)

    sat0 = ephem.ecef_at(t0)
    r = float(np.linalg.norm(sat0.position))
    r_e = float(np.linalg.norm(site_ecef))
    gamma_t0 = gamma_at_culmination(theta_max, r_e, r)

    omega_s = ephem.inertial_angular_rate(t0)
    incl = math.radians(tle.inclination_deg)
    omega_f = omega_s - OMEGA_EARTH * math.cos(incl)

    gamma_min = gamma_at_culmination(theta_min, r_e, r)
    ratio = math.cos(gamma_min) / math.cos(gamma_t0)
    if ratio >= 1.0:
        t_du_analytic = 0.0
    else:
        t_du_analytic = 2.0 / omega_f * math.acos(ratio) / 60.0

    return PassWindow(
        t_start=t_start, t_end=t_end, t0=t0,
        theta_max=theta_max, theta_min=theta_min, gamma_t0=gamma_t0,
        t_du_min=(t_end - t_start).total_seconds() / 60.0,
        t_du_analytic_min=t_du_analytic,
    )


def build_pass_geometry(ephem: Ephemeris, window: PassWindow,
                        site_geodetic: tuple[float, float, float],
                        fc_hz: float) -> PassGeometry:
    """Freeze the closed-form Doppler inputs at the window culmination."""
    site_ecef = geodetic_to_ecef(*site_geodetic)
    sat0 = ephem.ecef_at(window.t0)
    r = float(np.linalg.norm(sat0.position))
    r_e = float(np.linalg.norm(site_ecef))
    subsat0 = np.asarray(sat0.position, dtype=float) / r

    site_u = site_ecef / r_e
    gamma_measured = math.acos(max(-1.0, min(1.0, float(site_u @ subsat0))))

    omega_s = ephem.inertial_angular_rate(window.t0)
    incl = math.radians(ephem.tle.inclination_deg)
    omega_f = omega_s - OMEGA_EARTH * math.cos(incl)

    return PassGeometry(
        r_e=r_e, r=r, gamma_t0=gamma_measured, omega_s=omega_s,
        omega_e=OMEGA_EARTH, inclination=incl, omega_f=omega_f,
        fc_hz=fc_hz, t0=window.t0, subsat0=subsat0, ephemeris=ephem,
    )
