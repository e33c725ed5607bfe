"""Flat key = value simulation configuration.

Every numeric key carries its unit in the name (fc_mhz, spacing_m, ...)
so a config file can never be unit-ambiguous.  Unknown keys are errors:
a typo should fail, not silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    # inputs
    tle_path: str = ""
    site_lat_deg: float = 0.0
    site_lon_deg: float = 0.0
    site_alt_km: float = 0.0
    # scene: either an external triangle file or the procedural city
    scene_file: str = ""
    scene_grid_nx: int = 6
    scene_grid_ny: int = 6
    scene_block_w_m: float = 80.0
    scene_street_w_m: float = 20.0
    scene_height_law: str = "uniform"
    scene_h_min_m: float = 20.0
    scene_h_max_m: float = 120.0
    scene_h_const_m: float = 30.0
    # receiver point, local frame meters
    rx_x_m: float = 0.0
    rx_y_m: float = 0.0
    rx_z_m: float = 1.5
    # link
    fc_mhz: float = 2000.0
    pt_dbm: float = 30.0
    rain_rate_mm_h: float = 0.0
    rain_k: float = 0.0000847
    rain_alpha: float = 1.0664
    polarization: str = "V"
    rain_path_mode: str = "verbatim"
    # pass and stepping
    theta_min_deg: float = 0.0
    time_step_s: float = 30.0
    # tracer
    spacing_m: float = 8.0
    rx_radius_m: float = 0.0   # 0 -> 1.5 * spacing_m
    max_bounces: int = 2
    # misc
    seed: int = 0
    output_dir: str = "out"
    jobs: int = 1

    def __post_init__(self):
        if self.time_step_s <= 0.0:
            raise ConfigError("time_step_s must be positive")
        if self.spacing_m <= 0.0:
            raise ConfigError("spacing_m must be positive")
        if self.max_bounces < 0:
            raise ConfigError("max_bounces must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not -90.0 <= self.site_lat_deg <= 90.0:
            raise ConfigError("site_lat_deg must be in [-90, 90]")
        if self.rx_radius_m < 0.0:
            raise ConfigError("rx_radius_m must be >= 0 (0 = auto)")

    @property
    def effective_rx_radius_m(self) -> float:
        if self.rx_radius_m > 0.0:
            return self.rx_radius_m
        return 1.5 * self.spacing_m

    @property
    def site_geodetic(self) -> tuple[float, float, float]:
        return self.site_lat_deg, self.site_lon_deg, self.site_alt_km


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}
_INT_KEYS = {"scene_grid_nx", "scene_grid_ny", "max_bounces", "seed", "jobs"}
_STR_KEYS = {"tle_path", "scene_file", "scene_height_law", "polarization",
             "rain_path_mode", "output_dir"}


def parse_config_text(text: str, base_dir: Path | None = None) -> SimConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _STR_KEYS:
                values[key] = value
            elif key in _INT_KEYS:
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: bad value for {key!r}: {value!r}") from None

    try:
        cfg = SimConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    if base_dir is not None:
        for key in ("tle_path", "scene_file"):
            val = getattr(cfg, key)
            if val and not Path(val).is_absolute():
                setattr(cfg, key, str(base_dir / val))
    if not cfg.tle_path:
        raise ConfigError("tle_path is required")
    if not Path(cfg.tle_path).exists():
        raise ConfigError(f"tle_path does not exist: {cfg.tle_path}")
    if cfg.scene_file and not Path(cfg.scene_file).exists():
        raise ConfigError(f"scene_file does not exist: {cfg.scene_file}")
    return cfg


def parse_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config_text(text, base_dir=path.parent)
