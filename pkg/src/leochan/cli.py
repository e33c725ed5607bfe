"""Command-line entry points.

    leochan simulate --config sim.cfg [--out DIR] [--steps-only]
                     [--dump-paths] [--jobs N]
    leochan pass --tle file.tle --site LAT,LON,ALT_KM [--min-elev DEG]
    leochan trace-once --config sim.cfg --at-minute M

Exit codes: 0 success, 2 configuration error, 3 no pass found,
4 simulation runtime error.
"""

from __future__ import annotations

import argparse
import math
import sys

from .config import ConfigError, parse_config
from .passes import Ephemeris, NoPassFound, find_pass
from .simulate import (dump_debug_paths, emit_outputs, run_pass_simulation,
                       simulate_snapshot)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_PASS = 3
EXIT_RUNTIME = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leochan",
        description="LEO satellite-to-ground multipath channel simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate a full pass")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None,
                       help="output directory (default: config output_dir)")
    p_sim.add_argument("--steps-only", action="store_true",
                       help="emit only the summary and timeseries tables")
    p_sim.add_argument("--dump-paths", action="store_true",
                       help="also write the tracer debug dump")
    p_sim.add_argument("--jobs", type=int, default=None,
                       help="worker threads for the time steps")

    p_pass = sub.add_parser("pass", help="print the next visibility window")
    p_pass.add_argument("--tle", required=True)
    p_pass.add_argument("--site", required=True,
                        help="lat_deg,lon_deg,alt_km")
    p_pass.add_argument("--min-elev", type=float, default=0.0)
    p_pass.add_argument("--step", type=float, default=30.0,
                        help="scan step, seconds")

    p_once = sub.add_parser("trace-once",
                            help="trace a single instant of the pass")
    p_once.add_argument("--config", required=True)
    p_once.add_argument("--at-minute", type=float, required=True,
                        help="minutes after the window start")
    return parser


def _cmd_simulate(args) -> int:
    config = parse_config(args.config)
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        config.jobs = args.jobs
    out_dir = args.out if args.out is not None else config.output_dir
    report = run_pass_simulation(config)
    files = emit_outputs(report, out_dir, steps_only=args.steps_only)
    if args.dump_paths:
        files.append(dump_debug_paths(report, out_dir))
    for fp in files:
        print(fp)
    return EXIT_OK


def _cmd_pass(args) -> int:
    from .tle import read_tle_file

    parts = args.site.split(",")
    if len(parts) != 3:
        raise ConfigError("--site expects lat_deg,lon_deg,alt_km")
    try:
        site = (float(parts[0]), float(parts[1]), float(parts[2]))
    except ValueError:
        raise ConfigError(f"bad --site value: {args.site!r}") from None
    tles = read_tle_file(args.tle)
    if not tles:
        raise ConfigError(f"no element sets in {args.tle}")
    window = find_pass(tles[0], site,
                       theta_min=math.radians(args.min_elev),
                       step_s=args.step)
    print(f"satellite      {tles[0].name or tles[0].satnum}")
    print(f"rise           {window.t_start.isoformat()}")
    print(f"culminate      {window.t0.isoformat()}")
    print(f"set            {window.t_end.isoformat()}")
    print(f"max elevation  {math.degrees(window.theta_max):.3f} deg")
    print(f"duration       {window.t_du_min:.3f} min "
          f"(closed form {window.t_du_analytic_min:.3f} min)")
    return EXIT_OK


def _cmd_trace_once(args) -> int:
    import numpy as np
    from datetime import timedelta

    from . import frames, passes
    from .link import LinkParams
    from .simulate import _build_scene
    from .tle import read_tle_file

    config = parse_config(args.config)
    tles = read_tle_file(config.tle_path)
    if not tles:
        raise ConfigError(f"no element sets in {config.tle_path}")
    ephem = Ephemeris(tles[0])
    window = find_pass(tles[0], config.site_geodetic,
                       theta_min=math.radians(config.theta_min_deg),
                       ephemeris=ephem)
    t = window.t_start + timedelta(minutes=args.at_minute)
    if not window.t_start <= t <= window.t_end:
        raise ConfigError(
            f"--at-minute {args.at_minute} falls outside the "
            f"{window.t_du_min:.2f} min window")
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
    snap = simulate_snapshot(t, ephem, local_frame, site_ecef, city,
                             receiver, lp, config)
    print(f"t              {snap.t.isoformat()}")
    print(f"elevation      {snap.elevation_deg:.4f} deg")
    print(f"paths          {len(snap.paths)}")
    if snap.paths:
        print(f"total power    {snap.total_power_dbm:.4f} dBm")
        print(f"rms ds         {snap.rms_delay_spread_ns:.4f} ns")
        print("bounces  delay_us      power_dbm    doppler_hz")
        for p in snap.paths:
            print(f"{p.record.bounce_count:7d}  {p.delay_us:12.6f} "
                  f"{p.power_dbm:12.4f} {p.doppler_hz:13.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "pass":
            return _cmd_pass(args)
        if args.command == "trace-once":
            return _cmd_trace_once(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoPassFound as exc:
        print(f"no pass: {exc}", file=sys.stderr)
        return EXIT_NO_PASS
    except Exception as exc:  # simulation failure with context
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
