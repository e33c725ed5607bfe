"""Reference-frame transforms: TEME <-> ECI(J2000) <-> ECEF <-> LOCAL.

The celestial side uses the classic equinox-based chain: equation-of-
equinoxes rotation (TEME to true-of-date), IAU 1980 nutation truncated to
its four largest terms (error below 0.003 deg in longitude, well under
scene scale), and the precession polynomials to J2000.  The Earth-fixed
side rotates by apparent sidereal time; polar motion is ignored (< 15 m).

The LOCAL frame is the scene frame: two rotations (about z then y) map
the Earth-center-to-anchor direction onto +z, and a translation puts the
anchor at the origin, so local +z is the site zenith.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .states import Frame, StateVector
from .timebase import gmst_rad, julian_centuries_tt

ARCSEC2RAD = math.pi / (180.0 * 3600.0)
DEG2RAD = math.pi / 180.0

EARTH_ROTATION_RATE = 7.2921150e-5  # rad/s

# WGS-84 ellipsoid for geodetic <-> ECEF conversions.
WGS84_A_KM = 6378.137
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

# Largest IAU 1980 nutation terms: multiples of the Delaunay arguments
# (l, l', F, D, Om) and sin/cos coefficients in 1e-4 arcsec (constant and
# per-Julian-century parts).
NUTATION_TERMS = (
    ((0, 0, 0, 0, 1), -171996.0, -174.2, 92025.0, 8.9),
    ((0, 0, 2, -2, 2), -13187.0, -1.6, 5736.0, -3.1),
    ((0, 0, 2, 0, 2), -2274.0, -0.2, 977.0, -0.5),
    ((0, 0, 0, 0, 2), 2062.0, 0.2, -895.0, 0.5),
)


class PoleDegenerate(ValueError):
    """Raised only when a caller explicitly forbids the polar fallback."""


def rot1(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rot2(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def rot3(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _delaunay_arguments(ttt: float) -> tuple[float, ...]:
    """Fundamental lunisolar arguments (IAU 1980), radians."""
    def wrap_deg(x):
        return math.fmod(x, 360.0) * DEG2RAD

    l = wrap_deg(134.96298139 + (1325.0 * 360.0 + 198.8673981) * ttt
                 + 0.0086972 * ttt * ttt + 1.78e-5 * ttt ** 3)
    lp = wrap_deg(357.52772333 + (99.0 * 360.0 + 359.0503400) * ttt
                  - 0.0001603 * ttt * ttt - 3.3e-6 * ttt ** 3)
    f = wrap_deg(93.27191028 + (1342.0 * 360.0 + 82.0175381) * ttt
                 - 0.0036825 * ttt * ttt + 3.1e-6 * ttt ** 3)
    d = wrap_deg(297.85036306 + (1236.0 * 360.0 + 307.1114800) * ttt
                 - 0.0019142 * ttt * ttt + 5.3e-6 * ttt ** 3)
    om = wrap_deg(125.04452222 - (5.0 * 360.0 + 134.1362608) * ttt
                  + 0.0020708 * ttt * ttt + 2.2e-6 * ttt ** 3)
    return l, lp, f, d, om


@dataclass(frozen=True)
class EarthOrientation:
    """Orientation angles at one instant (all radians)."""

    gmst: float
    precession_angles: tuple[float, float, float]  # (zeta, z, theta)
    nutation: tuple[float, float]                  # (dpsi, deps)
    mean_obliquity: float
    earth_rotation_rate: float = EARTH_ROTATION_RATE

    @property
    def equation_of_equinoxes(self) -> float:
        dpsi, _ = self.nutation
        return dpsi * math.cos(self.mean_obliquity)

    @property
    def gast(self) -> float:
        return self.gmst + self.equation_of_equinoxes


def earth_orientation(t: datetime,
                      extra_nutation_terms=()) -> EarthOrientation:
    """Compute Earth orientation angles for a UTC instant.

    ``extra_nutation_terms`` extends the built-in truncated series with
    additional rows in the same ((l,l',F,D,Om), S, St, C, Ct) layout.
    """
    ttt = julian_centuries_tt(t)

    zeta = (2306.2181 * ttt + 0.30188 * ttt * ttt
            + 0.017998 * ttt ** 3) * ARCSEC2RAD
    theta = (2004.3109 * ttt - 0.42665 * ttt * ttt
             - 0.041833 * ttt ** 3) * ARCSEC2RAD
    z = (2306.2181 * ttt + 1.09468 * ttt * ttt
         + 0.018203 * ttt ** 3) * ARCSEC2RAD

    eps_bar = (84381.448 - 46.8150 * ttt - 0.00059 * ttt * ttt
               + 0.001813 * ttt ** 3) * ARCSEC2RAD

    args = _delaunay_arguments(ttt)
    dpsi = 0.0
    deps = 0.0
    for mult, s_const, s_t, c_const, c_t in (
            tuple(NUTATION_TERMS) + tuple(extra_nutation_terms)):
        ang = sum(m * a for m, a in zip(mult, args))
        dpsi += (s_const + s_t * ttt) * math.sin(ang)
        deps += (c_const + c_t * ttt) * math.cos(ang)
    dpsi *= 1e-4 * ARCSEC2RAD
    deps *= 1e-4 * ARCSEC2RAD

    return EarthOrientation(
        gmst=gmst_rad(t),
        precession_angles=(zeta, z, theta),
        nutation=(dpsi, deps),
        mean_obliquity=eps_bar,
    )


def precession_matrix(eo: EarthOrientation) -> np.ndarray:
    """Mean-of-date -> J2000 rotation."""
    zeta, z, theta = eo.precession_angles
    return rot3(zeta) @ rot2(-theta) @ rot3(z)


def nutation_matrix(eo: EarthOrientation) -> np.ndarray:
    """True-of-date -> mean-of-date rotation."""
    dpsi, deps = eo.nutation
    eps_bar = eo.mean_obliquity
    return rot1(-eps_bar) @ rot3(dpsi) @ rot1(eps_bar + deps)


def teme_to_eci_matrix(eo: EarthOrientation) -> np.ndarray:
    return (precession_matrix(eo) @ nutation_matrix(eo)
            @ rot3(-eo.equation_of_equinoxes))


def teme_to_eci(state: StateVector, eo: EarthOrientation) -> StateVector:
    """Rotate a TEME state onto the J2000 mean equator and equinox."""
    state.require(Frame.TEME)
    m = teme_to_eci_matrix(eo)
    return StateVector(Frame.ECI, state.t, m @ state.position,
                       m @ state.velocity)


def eci_to_teme(state: StateVector, eo: EarthOrientation) -> StateVector:
    state.require(Frame.ECI)
    m = teme_to_eci_matrix(eo).T
    return StateVector(Frame.TEME, state.t, m @ state.position,
                       m @ state.velocity)


def eci_to_ecef(state: StateVector, eo: EarthOrientation) -> StateVector:
    """J2000 -> Earth-fixed: precession, nutation, then apparent sidereal
    rotation; velocity picks up the -omega x r frame-rate term."""
    state.require(Frame.ECI)
    to_tod = (precession_matrix(eo) @ nutation_matrix(eo)).T
    spin = rot3(eo.gast)
    r_ecef = spin @ (to_tod @ state.position)
    omega = np.array([0.0, 0.0, eo.earth_rotation_rate])
    v_ecef = spin @ (to_tod @ state.velocity) - np.cross(omega, r_ecef)
    return StateVector(Frame.ECEF, state.t, r_ecef, v_ecef)


def ecef_to_eci(state: StateVector, eo: EarthOrientation) -> StateVector:
    state.require(Frame.ECEF)
    omega = np.array([0.0, 0.0, eo.earth_rotation_rate])
    v_inertial_pef = state.velocity + np.cross(omega, state.position)
    unspin = rot3(-eo.gast)
    to_eci = precession_matrix(eo) @ nutation_matrix(eo)
    return StateVector(Frame.ECI, state.t,
                       to_eci @ (unspin @ state.position),
                       to_eci @ (unspin @ v_inertial_pef))


def geodetic_to_ecef(lat_deg: float, lon_deg: float, alt_km: float) -> np.ndarray:
    lat = lat_deg * DEG2RAD
    lon = lon_deg * DEG2RAD
    sin_lat = math.sin(lat)
    n = WGS84_A_KM / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    return np.array([
        (n + alt_km) * math.cos(lat) * math.cos(lon),
        (n + alt_km) * math.cos(lat) * math.sin(lon),
        (n * (1.0 - WGS84_E2) + alt_km) * sin_lat,
    ])


def ecef_to_geodetic(r: np.ndarray) -> tuple[float, float, float]:
    """(lat_deg, lon_deg, alt_km) via iterated Bowring formula."""
    x, y, z = float(r[0]), float(r[1]), float(r[2])
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    if p < 1e-12:  # on the polar axis
        lat = math.copysign(math.pi / 2.0, z)
        alt = abs(z) - WGS84_A_KM * math.sqrt(1.0 - WGS84_E2)
        return lat / DEG2RAD, lon / DEG2RAD, alt
    b = WGS84_A_KM * (1.0 - WGS84_F)
    ep2 = (WGS84_A_KM ** 2 - b ** 2) / b ** 2
    beta = math.atan2(z * WGS84_A_KM, p * b)
    lat = 0.0
    for _ in range(8):
        lat_new = math.atan2(z + ep2 * b * math.sin(beta) ** 3,
                             p - WGS84_E2 * WGS84_A_KM * math.cos(beta) ** 3)
        beta_new = math.atan2((1.0 - WGS84_F) * math.sin(lat_new),
                              math.cos(lat_new))
        if abs(lat_new - lat) < 1e-14:
            lat = lat_new
            break
        lat, beta = lat_new, beta_new
    sin_lat = math.sin(lat)
    n = WGS84_A_KM / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    if abs(lat) < math.pi / 4.0:
        alt = p / math.cos(lat) - n
    else:
        alt = z / sin_lat - n * (1.0 - WGS84_E2)
    return lat / DEG2RAD, lon / DEG2RAD, alt


@dataclass(frozen=True)
class LocalFrame:
    """Scene frame: rotation about z by gamma, about y by beta, then a
    translation that puts the anchor at the local origin."""

    origin_ecef: np.ndarray
    gamma: float
    beta: float
    translation: np.ndarray   # equals origin_ecef in the local->global form
    rotation: np.ndarray      # ECEF -> LOCAL direction cosine matrix

    def to_local_point(self, r_ecef: np.ndarray) -> np.ndarray:
        return self.rotation @ (np.asarray(r_ecef, dtype=float)
                                - self.translation)

    def to_global_point(self, r_local: np.ndarray) -> np.ndarray:
        return self.rotation.T @ np.asarray(r_local, dtype=float) \
            + self.translation


def _active_rz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _active_ry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def build_local_frame(site_geodetic: tuple[float, float, float],
                      ecef_anchor: np.ndarray | None = None) -> LocalFrame:
    """Construct the scene frame for a site.

    ``site_geodetic`` is (lat_deg, lon_deg, alt_km).  If an explicit ECEF
    anchor is supplied it must sit within 1 km of the geodetic site.  At
    the poles the first rotation angle is undefined and fixed to zero.
    """
    if not -90.0 <= site_geodetic[0] <= 90.0:
        raise ValueError("latitude must be in [-90, 90] degrees")
    site_ecef = geodetic_to_ecef(*site_geodetic)
    if ecef_anchor is None:
        anchor = site_ecef
    else:
        anchor = np.asarray(ecef_anchor, dtype=float)
        if np.linalg.norm(anchor - site_ecef) > 1.0:
            raise ValueError(
                "ECEF anchor disagrees with the geodetic site by more "
                "than 1 km")

    ux, uy, uz = anchor
    rho = math.hypot(ux, uy)
    gamma = 0.0 if rho == 0.0 else math.atan2(uy, ux)
    beta = math.atan2(rho, uz)
    rotation = _active_ry(-beta) @ _active_rz(-gamma)
    return LocalFrame(origin_ecef=anchor, gamma=gamma, beta=beta,
                      translation=anchor, rotation=rotation)


def global_to_local(state: StateVector, frame: LocalFrame) -> StateVector:
    """ECEF -> LOCAL.  The scene is static in ECEF, so velocity is a pure
    rotation."""
    state.require(Frame.ECEF)
    return StateVector(Frame.LOCAL, state.t,
                       frame.to_local_point(state.position),
                       frame.rotation @ state.velocity)


def local_to_global(state: StateVector, frame: LocalFrame) -> StateVector:
    state.require(Frame.LOCAL)
    return StateVector(Frame.ECEF, state.t,
                       frame.to_global_point(state.position),
                       frame.rotation.T @ state.velocity)
