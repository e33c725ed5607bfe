"""End-to-end pass simulation and table emission.

One snapshot per time step inside the visibility window: propagate,
transform into the scene frame, trace the planar wavefront, score the
captured paths, attach per-path Doppler.  Steps are independent, so they
can run on a thread pool; results land in preallocated slots, keeping
the output byte-identical at any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import frames, link, passes, scene as scene_mod, tracer
from .config import SimConfig
from .link import ChannelSnapshot, LinkParams
from .passes import Ephemeris, PassWindow
from .states import Frame
from .tle import read_tle_file
from .tracer import SatelliteBelowHorizon


@dataclass(frozen=True)
class PassReport:
    window: PassWindow
    snapshots: tuple[ChannelSnapshot, ...]
    config: SimConfig


def _fmt(x: float) -> str:
    """Fixed nine-significant-digit record format (bit-exact goldens)."""
    return f"{x:.8e}"


def _build_scene(config: SimConfig) -> scene_mod.Scene:
    if config.scene_file:
        return scene_mod.scene_from_text(Path(config.scene_file).read_text())
    return scene_mod.generate_city(
        config.scene_grid_nx, config.scene_grid_ny,
        block_w_m=config.scene_block_w_m,
        street_w_m=config.scene_street_w_m,
        height_law=config.scene_height_law,
        h_min_m=config.scene_h_min_m, h_max_m=config.scene_h_max_m,
        h_const_m=config.scene_h_const_m, seed=config.seed)


def _empty_snapshot(t: datetime, elevation_rad: float) -> ChannelSnapshot:
    return ChannelSnapshot(t=t, elevation_deg=math.degrees(elevation_rad),
                           paths=(), total_power_dbm=float("nan"),
                           rms_delay_spread_ns=float("nan"))


def simulate_snapshot(t: datetime, ephem: Ephemeris,
                      local_frame: frames.LocalFrame,
                      site_ecef: np.ndarray, city: scene_mod.Scene,
                      receiver: np.ndarray, lp: LinkParams,
                      config: SimConfig) -> ChannelSnapshot:
    """One fully scored channel snapshot (empty if the satellite is not
    usable at this instant: below horizon or totally blocked)."""
    ecef = ephem.ecef_at(t)
    elevation = passes.elevation(site_ecef, ecef.position)
    if elevation <= 0.0:
        return _empty_snapshot(t, elevation)
    local = frames.global_to_local(ecef, local_frame)
    try:
        plane = tracer.build_launch_plane(local, city, config.spacing_m)
    except SatelliteBelowHorizon:
        return _empty_snapshot(t, elevation)
    paths = tracer.trace(plane, city, receiver,
                         rx_radius_m=config.effective_rx_radius_m,
                         max_bounces=config.max_bounces)
    if not paths:
        return _empty_snapshot(t, elevation)
    dopplers = [passes.per_path_doppler(p, local.velocity, lp.fc_hz)
                for p in paths]
    return link.build_snapshot(t, elevation, paths, lp,
                               city.materials, dopplers)


def run_pass_simulation(config: SimConfig) -> PassReport:
    """Find the first pass and simulate every time step inside it."""
    tles = read_tle_file(config.tle_path)
    if not tles:
        raise ValueError(f"no element sets in {config.tle_path}")
    tle = tles[0]
    ephem = Ephemeris(tle)
    window = passes.find_pass(tle, config.site_geodetic,
                              theta_min=math.radians(config.theta_min_deg),
                              ephemeris=ephem)

    city = _build_scene(config)
    site_ecef = frames.geodetic_to_ecef(*config.site_geodetic)
    local_frame = frames.build_local_frame(config.site_geodetic)
    receiver = np.array([config.rx_x_m, config.rx_y_m, config.rx_z_m]) / 1e3
    lp = LinkParams(fc_mhz=config.fc_mhz, pt_dbm=config.pt_dbm,
                    rain_rate_mm_h=config.rain_rate_mm_h,
                    rain_k=config.rain_k, rain_alpha=config.rain_alpha,
                    polarization=config.polarization,
                    rain_path_mode=config.rain_path_mode,
                    site_lat_deg=config.site_lat_deg)

    n_steps = int(math.floor(
        (window.t_end - window.t_start).total_seconds() / config.time_step_s))
    times = [window.t_start + timedelta(seconds=config.time_step_s * k)
             for k in range(n_steps + 1)]

    def job(t: datetime) -> ChannelSnapshot:
        return simulate_snapshot(t, ephem, local_frame, site_ecef, city,
                                 receiver, lp, config)

    if config.jobs > 1:
        snapshots: list[ChannelSnapshot | None] = [None] * len(times)
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            for k, snap in enumerate(pool.map(job, times)):
                snapshots[k] = snap
        result = tuple(snapshots)
    else:
        result = tuple(job(t) for t in times)

    return PassReport(window=window, snapshots=result, config=config)


def _utc_str(t: datetime) -> str:
    return t.strftime("%Y-%m-%dT%H:%M:%S.%f")


def emit_outputs(report: PassReport, out_dir,
                 steps_only: bool = False) -> list[Path]:
    """Write the analysis tables; returns the created file paths.

    pass_summary.csv   window geometry, one key,value row per line
    timeseries.csv     per-step aggregates (7 columns)
    paths.csv          per-path records
    delay_spread_cdf.csv  empirical CDF of snapshot RMS delay spreads
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w = report.window
    created = []

    summary = out / "pass_summary.csv"
    with summary.open("w", newline="") as fh:
        fh.write("key,value\n")
        fh.write(f"t_start_utc,{_utc_str(w.t_start)}\n")
        fh.write(f"t_end_utc,{_utc_str(w.t_end)}\n")
        fh.write(f"t0_utc,{_utc_str(w.t0)}\n")
        fh.write(f"theta_max_deg,{_fmt(math.degrees(w.theta_max))}\n")
        fh.write(f"theta_min_deg,{_fmt(math.degrees(w.theta_min))}\n")
        fh.write(f"gamma_t0_deg,{_fmt(math.degrees(w.gamma_t0))}\n")
        fh.write(f"t_du_scan_min,{_fmt(w.t_du_min)}\n")
        fh.write(f"t_du_analytic_min,{_fmt(w.t_du_analytic_min)}\n")
        fh.write(f"n_snapshots,{len(report.snapshots)}\n")
    created.append(summary)

    timeseries = out / "timeseries.csv"
    with timeseries.open("w", newline="") as fh:
        fh.write("t_s,elevation_deg,n_paths,total_power_dbm,rms_ds_ns,"
                 "doppler_min_hz,doppler_max_hz\n")
        for snap in report.snapshots:
            t_s = (snap.t - w.t_start).total_seconds()
            if snap.paths:
                dmin = min(p.doppler_hz for p in snap.paths)
                dmax = max(p.doppler_hz for p in snap.paths)
            else:
                dmin = dmax = float("nan")
            fh.write(",".join([
                _fmt(t_s), _fmt(snap.elevation_deg), str(len(snap.paths)),
                _fmt(snap.total_power_dbm), _fmt(snap.rms_delay_spread_ns),
                _fmt(dmin), _fmt(dmax)]) + "\n")
    created.append(timeseries)

    if steps_only:
        return created

    paths_file = out / "paths.csv"
    with paths_file.open("w", newline="") as fh:
        fh.write("t_s,path_id,bounce_count,delay_us,power_dbm,doppler_hz\n")
        for snap in report.snapshots:
            t_s = (snap.t - w.t_start).total_seconds()
            for pid, p in enumerate(snap.paths):
                fh.write(",".join([
                    _fmt(t_s), str(pid), str(p.record.bounce_count),
                    _fmt(p.delay_us), _fmt(p.power_dbm),
                    _fmt(p.doppler_hz)]) + "\n")
    created.append(paths_file)

    cdf_file = out / "delay_spread_cdf.csv"
    spreads = sorted(s.rms_delay_spread_ns for s in report.snapshots
                     if s.paths)
    with cdf_file.open("w", newline="") as fh:
        fh.write("rms_ds_ns,cdf\n")
        n = len(spreads)
        for i, v in enumerate(spreads):
            fh.write(f"{_fmt(v)},{_fmt((i + 1) / n)}\n")
    created.append(cdf_file)
    return created


def dump_debug_paths(report: PassReport, out_dir) -> Path:
    """Tracer-level debug dump: launch index, bounces, interaction
    points and near-ground length for every kept path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = out / "paths_debug.txt"
    with fp.open("w", newline="") as fh:
        for snap in report.snapshots:
            t_s = (snap.t - report.window.t_start).total_seconds()
            fh.write(f"# t_s={_fmt(t_s)}\n")
            fh.write(tracer.dump_paths([p.record for p in snap.paths]))
    return fp
