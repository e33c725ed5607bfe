"""Per-path link budget and snapshot channel statistics.

Large-scale loss is free-space path loss over the full satellite-to-
receiver distance plus a rain term with an elevation-dependent effective
path, both in the dB domain.  Reflected paths additionally pay the
Fresnel power reflection loss of each surface interaction.  Snapshot
aggregates are the linear-power sum and the power-weighted RMS delay
spread.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .scene import Material
from .tracer import PathRecord

SPEED_OF_LIGHT_KM_S = 299792.458

# Effective rain-path constant as printed in the source model; the
# latitude-dependent alternate is selectable per LinkParams.
RAIN_PATH_CONSTANT = 0.232 - 0.00018


class NonPositiveInput(ValueError):
    pass


class InvalidElevation(ValueError):
    pass


class EmptyPathSet(ValueError):
    pass


@dataclass(frozen=True)
class LinkParams:
    """Carrier, transmit power and rain configuration."""

    fc_mhz: float = 2000.0
    pt_dbm: float = 30.0
    rain_rate_mm_h: float = 0.0
    rain_k: float = 0.0000847
    rain_alpha: float = 1.0664
    polarization: str = "V"
    # "verbatim" keeps the printed constant 0.23182; "latitude" replaces
    # it with (0.232 - 0.00018 * |site latitude in degrees|).
    rain_path_mode: str = "verbatim"
    site_lat_deg: float = 0.0

    def __post_init__(self):
        if self.fc_mhz <= 0.0:
            raise NonPositiveInput("carrier frequency must be positive")
        if self.rain_rate_mm_h < 0.0:
            raise ValueError("rain rate must be >= 0")
        if self.rain_k <= 0.0 or self.rain_alpha <= 0.0:
            raise ValueError("rain coefficients must be positive")
        if self.polarization not in ("H", "V"):
            raise ValueError("polarization must be 'H' or 'V'")
        if self.rain_path_mode not in ("verbatim", "latitude"):
            raise ValueError("rain_path_mode must be verbatim or latitude")

    @property
    def fc_hz(self) -> float:
        return self.fc_mhz * 1e6

    def rain_path_constant(self) -> float:
        if self.rain_path_mode == "latitude":
            return 0.232 - 0.00018 * abs(self.site_lat_deg)
        return RAIN_PATH_CONSTANT


def fspl_db(distance_km: float, fc_mhz: float) -> float:
    """Free-space path loss: 32.4 + 20 log10 D(km) + 20 log10 fc(MHz)."""
    if distance_km <= 0.0 or fc_mhz <= 0.0:
        raise NonPositiveInput("distance and frequency must be positive")
    return 32.4 + 20.0 * math.log10(distance_km) + 20.0 * math.log10(fc_mhz)


def effective_rain_path_km(rain_rate_mm_h: float, elevation_rad: float,
                           path_constant: float = RAIN_PATH_CONSTANT) -> float:
    """Elevation-dependent effective distance through rain."""
    if not 0.0 < elevation_rad <= math.pi / 2.0:
        raise InvalidElevation(
            f"elevation must be in (0, pi/2], got {elevation_rad}")
    return 1.0 / (0.00741 * rain_rate_mm_h ** 0.776
                  + path_constant * math.sin(elevation_rad))


def rain_attenuation_db(rain_rate_mm_h: float, k: float, alpha: float,
                        elevation_rad: float,
                        path_constant: float = RAIN_PATH_CONSTANT) -> float:
    """Rain attenuation k * R^alpha * L(R, elevation), dB."""
    if rain_rate_mm_h < 0.0:
        raise ValueError("rain rate must be >= 0")
    if rain_rate_mm_h == 0.0:
        return 0.0
    path = effective_rain_path_km(rain_rate_mm_h, elevation_rad,
                                  path_constant)
    return k * rain_rate_mm_h ** alpha * path


def fresnel_power_reflectance(incidence_angle: float, material: Material,
                              fc_mhz: float, polarization: str) -> float:
    """|Gamma|^2 at a material interface.

    Incidence is measured from the surface normal.  The medium enters as
    the complex relative permittivity  eps_r - j 60 lambda sigma.
    """
    if not 0.0 <= incidence_angle < math.pi / 2.0 + 1e-12:
        raise ValueError("incidence angle must be in [0, pi/2)")
    wavelength_m = SPEED_OF_LIGHT_KM_S * 1e3 / (fc_mhz * 1e6)
    eps = complex(material.relative_permittivity,
                  -60.0 * wavelength_m * material.conductivity)
    cos_i = math.cos(incidence_angle)
    sin2_i = math.sin(incidence_angle) ** 2
    root = cmath.sqrt(eps - sin2_i)
    if polarization == "V":
        gamma = (eps * cos_i - root) / (eps * cos_i + root)
    elif polarization == "H":
        gamma = (cos_i - root) / (cos_i + root)
    else:
        raise ValueError("polarization must be 'H' or 'V'")
    return abs(gamma) ** 2


def reflection_loss_db(incidence_angle: float, material: Material,
                       fc_mhz: float, polarization: str = "V") -> float:
    """Power lost at one specular reflection, dB (>= 0)."""
    reflectance = fresnel_power_reflectance(incidence_angle, material,
                                            fc_mhz, polarization)
    return -10.0 * math.log10(reflectance)


def path_power_dbm(path: PathRecord, lp: LinkParams, elevation_rad: float,
                   materials: list[Material]) -> float:
    """Received power of one traced path.

    Transmit power minus free-space loss over the total distance, minus
    rain attenuation, minus the Fresnel loss of every reflection.
    Antennas are isotropic (0 dBi).
    """
    total = path.total_distance
    power = lp.pt_dbm - fspl_db(total, lp.fc_mhz)
    if lp.rain_rate_mm_h > 0.0:
        power -= rain_attenuation_db(lp.rain_rate_mm_h, lp.rain_k,
                                     lp.rain_alpha, elevation_rad,
                                     lp.rain_path_constant())
    for interaction in path.interactions:
        material = materials[interaction.material_id]
        power -= reflection_loss_db(interaction.incidence_angle, material,
                                    lp.fc_mhz, lp.polarization)
    return power


def path_delay_us(path: PathRecord) -> float:
    return path.total_distance / SPEED_OF_LIGHT_KM_S * 1e6


@dataclass(frozen=True)
class ScoredPath:
    record: PathRecord
    power_dbm: float
    delay_us: float
    doppler_hz: float


@dataclass(frozen=True)
class ChannelSnapshot:
    """All scored paths at one simulation instant plus aggregates."""

    t: datetime
    elevation_deg: float
    paths: tuple[ScoredPath, ...]
    total_power_dbm: float
    rms_delay_spread_ns: float


def total_power_dbm(powers_dbm) -> float:
    powers = np.asarray(list(powers_dbm), dtype=float)
    if len(powers) == 0:
        raise EmptyPathSet("no paths to aggregate")
    return 10.0 * math.log10(np.sum(10.0 ** (powers / 10.0)))


def rms_delay_spread_ns(powers_dbm, delays_us) -> float:
    """Power-weighted second central moment of the path delays."""
    powers = np.asarray(list(powers_dbm), dtype=float)
    delays = np.asarray(list(delays_us), dtype=float)
    if len(powers) == 0:
        raise EmptyPathSet("no paths to aggregate")
    if len(powers) != len(delays):
        raise ValueError("powers and delays must pair up")
    w = 10.0 ** (powers / 10.0)
    mean = float(np.sum(w * delays) / np.sum(w))
    # two-pass second central moment: the one-pass E[t^2] - E[t]^2 form
    # cancels catastrophically for microsecond offsets with ns spreads
    variance = float(np.sum(w * (delays - mean) ** 2) / np.sum(w))
    return math.sqrt(max(variance, 0.0)) * 1e3  # us -> ns


def snapshot_stats(scored: list[ScoredPath]):
    """(total power dBm, RMS delay spread ns, PDP sorted by delay)."""
    if not scored:
        raise EmptyPathSet("snapshot has no paths")
    total = total_power_dbm(p.power_dbm for p in scored)
    spread = rms_delay_spread_ns((p.power_dbm for p in scored),
                                 (p.delay_us for p in scored))
    pdp = sorted(((p.delay_us, p.power_dbm) for p in scored),
                 key=lambda x: x[0])
    return total, spread, pdp


def build_snapshot(t: datetime, elevation_rad: float,
                   paths: list[PathRecord], lp: LinkParams,
                   materials: list[Material],
                   dopplers_hz: list[float]) -> ChannelSnapshot:
    """Score traced paths and assemble the per-instant snapshot."""
    if len(dopplers_hz) != len(paths):
        raise ValueError("one Doppler value per path required")
    scored = [
        ScoredPath(record=p,
                   power_dbm=path_power_dbm(p, lp, elevation_rad, materials),
                   delay_us=path_delay_us(p),
                   doppler_hz=float(fd))
        for p, fd in zip(paths, dopplers_hz)
    ]
    scored.sort(key=lambda s: s.delay_us)
    total, spread, _ = snapshot_stats(scored)
    return ChannelSnapshot(t=t, elevation_deg=math.degrees(elevation_rad),
                           paths=tuple(scored), total_power_dbm=total,
                           rms_delay_spread_ns=spread)
