import math

import numpy as np
import pytest

from leochan.scene import generate_city, ground_plane
from leochan.states import Frame, StateVector
from leochan.timebase import utc
from leochan.tracer import (LaunchPlane, SatelliteBelowHorizon,
                            build_launch_plane, dump_paths, trace)

T0 = utc(2023, 1, 1)


def _sat_state(position):
    return StateVector(Frame.LOCAL, T0, np.asarray(position, float),
                       np.zeros(3))


def _flat_setup(elevation_deg, spacing_m, rx=None, pad_km=0.02,
                width_m=1000.0):
    scene = ground_plane(width_m)
    el = math.radians(elevation_deg)
    sat = 550.0 * np.array([math.cos(el), 0.0, math.sin(el)])
    plane = build_launch_plane(_sat_state(sat), scene, spacing_m,
                               extent_pad_km=pad_km)
    if rx is None:
        rx = np.array([0.0, -0.02, 0.0015])  # off the ground diagonal
    return scene, plane, np.asarray(rx)


def test_plane_at_zenith_sits_above_scene_top():
    # scene top at 0.15 km, margin 0.05 -> plane plane at z = 0.2
    city = generate_city(2, 2, height_law="constant", h_const_m=150.0)
    sat = _sat_state([0.0, 0.0, 550.0])
    plane = build_launch_plane(sat, city, spacing_m=5.0, margin_km=0.05)
    assert np.allclose(plane.direction, [0.0, 0.0, -1.0], atol=1e-12)
    assert plane.origin[2] == pytest.approx(0.2, abs=1e-9)
    assert plane.plane_altitude == 0.05
    assert plane.d_atmosphere == pytest.approx(550.0 - 0.2, abs=1e-9)


def test_atmosphere_plus_los_equals_slant_range():
    scene = ground_plane(600.0)
    el = math.radians(40.0)
    sat = 600.0 * np.array([math.cos(el), 0.0, math.sin(el)])
    plane = build_launch_plane(_sat_state(sat), scene, spacing_m=2.0)
    # receiver exactly at the aim point (scene footprint center, ground)
    rx = np.zeros(3)
    los_leg = float(plane.direction @ (rx - plane.origin))
    slant = float(np.linalg.norm(sat - rx))
    assert plane.d_atmosphere + los_leg == pytest.approx(slant, abs=1e-6)


def test_below_horizon_raises():
    scene = ground_plane(500.0)
    with pytest.raises(SatelliteBelowHorizon):
        build_launch_plane(_sat_state([550.0, 0.0, -1.0]), scene, 2.0)


def test_low_elevation_extent_covers_scene_shadow():
    # oracle: every scene corner projects inside the plane rectangle
    city = generate_city(3, 3, seed=1)
    el = math.radians(5.0)
    sat = 1500.0 * np.array([math.cos(el), 0.0, math.sin(el)])
    plane = build_launch_plane(_sat_state(sat), city, spacing_m=4.0)
    tilt = math.degrees(math.acos(abs(plane.direction[2])))
    assert tilt == pytest.approx(85.0, abs=0.5)
    bmin, bmax = city.bounds
    corners = np.array([[x, y, z]
                        for x in (bmin[0], bmax[0])
                        for y in (bmin[1], bmax[1])
                        for z in (bmin[2], bmax[2])])
    d = plane.direction
    c = float(d @ plane.origin)
    feet = corners - np.outer(corners @ d - c, d)
    u = (feet - plane.origin) @ plane.e1
    v = (feet - plane.origin) @ plane.e2
    assert (np.abs(u) <= plane.half_u + 1e-12).all()
    assert (np.abs(v) <= plane.half_v + 1e-12).all()


def test_flat_ground_exactly_two_paths():
    scene, plane, rx = _flat_setup(45.0, spacing_m=2.0)
    paths = trace(plane, scene, rx, rx_radius_m=3.0, max_bounces=2)
    assert [p.bounce_count for p in paths] == [0, 1]


def test_flat_ground_image_source_lengths():
    spacing = 2.0
    scene, plane, rx = _flat_setup(45.0, spacing_m=spacing)
    paths = trace(plane, scene, rx, rx_radius_m=1.5 * spacing, max_bounces=2)
    d = plane.direction
    p0 = plane.origin
    los_oracle = float(d @ (rx - p0))
    rx_image = rx * np.array([1.0, 1.0, -1.0])
    ref_oracle = float(d @ (rx_image - p0))
    bound = 2.0 * spacing / 1000.0
    assert abs(paths[0].d_near_ground - los_oracle) <= bound
    assert abs(paths[1].d_near_ground - ref_oracle) <= bound


def test_capture_miss_distance_bounded_by_radius():
    scene, plane, rx = _flat_setup(60.0, spacing_m=3.0)
    paths = trace(plane, scene, rx, rx_radius_m=4.5, max_bounces=1)
    for p in paths:
        assert p.miss_distance <= 4.5 / 1000.0


def test_occluded_receiver_yields_empty_result():
    # receiver inside a closed box, direct rays only
    city = generate_city(1, 1, block_w_m=60.0, street_w_m=20.0,
                         height_law="constant", h_const_m=40.0)
    rx = np.array([0.0, 0.0, 0.02])  # center of the lone building
    sat = _sat_state([200.0, 0.0, 500.0])
    plane = build_launch_plane(sat, city, spacing_m=3.0)
    assert trace(plane, city, rx, rx_radius_m=4.5, max_bounces=0) == []


def test_specularity_and_segment_validity():
    city = generate_city(2, 2, seed=8)
    el = math.radians(35.0)
    sat = 600.0 * np.array([math.cos(el), math.sin(el) * 0.2, math.sin(el)])
    sat = 600.0 * sat / np.linalg.norm(sat)
    plane = build_launch_plane(_sat_state(sat), city, spacing_m=3.0)
    rx = np.array([0.0, 0.0, 0.0015])
    paths = trace(plane, city, rx, rx_radius_m=4.5, max_bounces=2)
    assert paths, "expected at least one path in the test scene"
    launch_points = plane.launch_points()
    for p in paths:
        start = launch_points[p.launch_index]
        direction = plane.direction
        for inter in p.interactions:
            seg = inter.point - start
            seg_len = np.linalg.norm(seg)
            seg_dir = seg / seg_len
            # incoming matches the current direction
            assert np.allclose(seg_dir, direction, atol=1e-9)
            normal = city._normals[inter.face_id]
            if float(normal @ direction) > 0.0:
                normal = -normal
            # specular: angle in == angle out, coplanar in/out/normal
            out = direction - 2.0 * float(direction @ normal) * normal
            angle_in = math.acos(min(1.0, -float(direction @ normal)))
            angle_out = math.acos(min(1.0, float(out @ normal)))
            assert abs(angle_in - angle_out) < 1e-9
            assert abs(float(np.cross(direction, normal) @ out)) < 1e-9
            assert abs(angle_in - inter.incidence_angle) < 1e-9
            # no scene hit strictly inside the segment
            blocker = city.intersect(start, seg_dir, 1e-7, seg_len - 1e-7)
            assert blocker is None
            start = inter.point
            direction = out


def test_deterministic_trace():
    city = generate_city(3, 2, seed=4)
    sat = _sat_state([300.0, 100.0, 480.0])
    plane = build_launch_plane(sat, city, spacing_m=4.0)
    rx = np.array([0.0, 0.0, 0.0015])
    a = trace(plane, city, rx, rx_radius_m=6.0, max_bounces=2)
    b = trace(plane, city, rx, rx_radius_m=6.0, max_bounces=2)
    assert len(a) == len(b)
    for pa, pb in zip(a, b):
        assert pa.launch_index == pb.launch_index
        assert pa.face_sequence() == pb.face_sequence()
        assert pa.d_near_ground == pb.d_near_ground


def test_refining_spacing_keeps_coarse_paths():
    coarse_spacing = 4.0
    scene, plane, rx = _flat_setup(50.0, spacing_m=coarse_spacing,
                                   pad_km=0.05)
    fine_plane = LaunchPlane(
        direction=plane.direction, origin=plane.origin, e1=plane.e1,
        e2=plane.e2, half_u=plane.half_u, half_v=plane.half_v,
        spacing=plane.spacing / 2.0, plane_altitude=plane.plane_altitude,
        d_atmosphere=plane.d_atmosphere, sat_position=plane.sat_position)
    coarse = trace(plane, scene, rx, rx_radius_m=1.5 * coarse_spacing,
                   max_bounces=2)
    fine = trace(fine_plane, scene, rx, rx_radius_m=1.5 * coarse_spacing,
                 max_bounces=2)
    coarse_keys = {p.face_sequence() for p in coarse}
    fine_keys = {p.face_sequence() for p in fine}
    assert coarse_keys <= fine_keys


def test_paths_sorted_and_unit_vectors():
    city = generate_city(2, 2, seed=8)
    sat = _sat_state([250.0, -40.0, 490.0])
    plane = build_launch_plane(sat, city, spacing_m=4.0)
    rx = np.array([0.0, 0.0, 0.0015])
    paths = trace(plane, city, rx, rx_radius_m=6.0, max_bounces=2)
    keys = [(p.bounce_count, p.d_near_ground) for p in paths]
    assert keys == sorted(keys)
    for p in paths:
        assert abs(np.linalg.norm(p.aod) - 1.0) < 1e-9
        assert abs(np.linalg.norm(p.aoa) - 1.0) < 1e-9
        assert p.bounce_count == len(p.interactions) <= 2
        # near-ground length consistent with the recorded geometry
        pts = [plane.launch_points()[p.launch_index]]
        pts += [i.point for i in p.interactions]
        seg_sum = sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:]))
        foot_leg = abs(p.d_near_ground - seg_sum)
        # remaining leg reaches the receiver up to the capture radius
        last_to_rx = np.linalg.norm(rx - pts[-1])
        assert foot_leg <= last_to_rx + 1e-9


def test_dump_paths_format():
    scene, plane, rx = _flat_setup(45.0, spacing_m=3.0)
    paths = trace(plane, scene, rx, rx_radius_m=4.5, max_bounces=1)
    text = dump_paths(paths)
    lines = [ln for ln in text.splitlines() if ln]
    assert len(lines) == len(paths)
    assert lines[0].split()[1] == "0"  # LOS first
