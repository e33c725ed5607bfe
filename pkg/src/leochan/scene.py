"""Urban scene geometry: triangle soup, procedural grid city, BVH queries.

All geometry is stored in kilometers in the LOCAL frame (generator inputs
are meters and are converted).  Intersection queries through the BVH are
required to agree exactly with brute force over every triangle; both
paths share one Moller-Trumbore kernel and break distance ties on the
lower face id.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

M_PER_KM = 1000.0

# Ray-triangle determinant cutoff (parallel rays) and degenerate-triangle
# area floor, in km units.
_DET_EPS = 1e-14
MIN_TRIANGLE_AREA_KM2 = 1e-12

# BVH leaves hold at most this many triangles; boxes are padded so that
# floating-point slab rounding can never prune a genuine hit.
_LEAF_SIZE = 4
_BOX_PAD = 1e-9


class InvalidDimensions(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    name: str
    relative_permittivity: float
    conductivity: float  # S/m

    def __post_init__(self):
        if self.relative_permittivity < 1.0:
            raise ValueError("relative permittivity must be >= 1")
        if self.conductivity < 0.0:
            raise ValueError("conductivity must be >= 0")


# ITU-style building-material constants used as the single default.
CONCRETE = Material("concrete", 5.31, 0.1395)


@dataclass(frozen=True)
class Hit:
    distance: float
    face_id: int
    normal: np.ndarray  # unit, oriented against the incoming ray
    material_id: int


def _triangle_fields(triangles: np.ndarray):
    v0 = triangles[:, 0, :]
    e1 = triangles[:, 1, :] - v0
    e2 = triangles[:, 2, :] - v0
    return v0, e1, e2


def _ray_tris_t(origin, direction, v0, e1, e2) -> np.ndarray:
    """Hit parameters of one ray against a triangle block; +inf = miss."""
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > _DET_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", direction, qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    ok &= (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0)
    return np.where(ok, t, np.inf)


class Bvh:
    """Static bounding-volume hierarchy, median split on the longest
    centroid axis.  Construction is fully deterministic.

    Nodes and triangle data are flattened to plain Python floats: the
    per-ray traversal is scalar code, which beats numpy dispatch overhead
    at the few-triangles-per-leaf scale this tree uses.
    """

    def __init__(self, triangles: np.ndarray):
        n = len(triangles)
        tri_min = triangles.min(axis=1) - _BOX_PAD
        tri_max = triangles.max(axis=1) + _BOX_PAD
        centroids = triangles.mean(axis=1)

        nodes: list[tuple] = []   # (bmin3, bmax3, left, right, start, count)
        order: list[int] = []

        def build(idx: np.ndarray) -> int:
            node = len(nodes)
            lo = tuple(float(v) for v in tri_min[idx].min(axis=0))
            hi = tuple(float(v) for v in tri_max[idx].max(axis=0))
            nodes.append(None)
            if len(idx) <= _LEAF_SIZE:
                nodes[node] = (lo, hi, -1, -1, len(order), len(idx))
                order.extend(int(i) for i in idx)
                return node
            extent = centroids[idx].max(axis=0) - centroids[idx].min(axis=0)
            axis = int(np.argmax(extent))
            sorted_idx = idx[np.argsort(centroids[idx, axis], kind="stable")]
            mid = len(sorted_idx) // 2
            left = build(sorted_idx[:mid])
            right = build(sorted_idx[mid:])
            nodes[node] = (lo, hi, left, right, -1, 0)
            return node

        if n:
            build(np.arange(n))
        self._nodes = nodes
        self._order = order
        v0, e1, e2 = _triangle_fields(triangles)
        self._tri = [tuple(map(float, np.concatenate([v0[i], e1[i], e2[i]])))
                     for i in range(n)]

    def nearest(self, origin, direction, t_min, t_max):
        """Nearest (t, face_id) in (t_min, t_max], or None."""
        nodes = self._nodes
        if not nodes:
            return None
        ox, oy, oz = float(origin[0]), float(origin[1]), float(origin[2])
        dx, dy, dz = (float(direction[0]), float(direction[1]),
                      float(direction[2]))
        inv_x = 1.0 / dx if dx != 0.0 else math.inf
        inv_y = 1.0 / dy if dy != 0.0 else math.inf
        inv_z = 1.0 / dz if dz != 0.0 else math.inf
        tri = self._tri
        order = self._order
        best_t = math.inf
        best_fid = -1
        stack = [0]
        pop = stack.pop
        push = stack.append
        while stack:
            lo, hi, left, right, start, count = nodes[pop()]
            limit = t_max if t_max < best_t else best_t
            # slab test against the padded box
            if dx != 0.0:
                t0 = (lo[0] - ox) * inv_x
                t1 = (hi[0] - ox) * inv_x
                if t0 > t1:
                    t0, t1 = t1, t0
                enter, exit_ = t0, t1
            elif lo[0] <= ox <= hi[0]:
                enter, exit_ = -math.inf, math.inf
            else:
                continue
            if dy != 0.0:
                t0 = (lo[1] - oy) * inv_y
                t1 = (hi[1] - oy) * inv_y
                if t0 > t1:
                    t0, t1 = t1, t0
                if t0 > enter:
                    enter = t0
                if t1 < exit_:
                    exit_ = t1
                if enter > exit_:
                    continue
            elif not lo[1] <= oy <= hi[1]:
                continue
            if dz != 0.0:
                t0 = (lo[2] - oz) * inv_z
                t1 = (hi[2] - oz) * inv_z
                if t0 > t1:
                    t0, t1 = t1, t0
                if t0 > enter:
                    enter = t0
                if t1 < exit_:
                    exit_ = t1
                if enter > exit_:
                    continue
            elif not lo[2] <= oz <= hi[2]:
                continue
            if enter > limit or exit_ < t_min:
                continue
            if left < 0:
                for k in range(start, start + count):
                    fid = order[k]
                    (v0x, v0y, v0z, e1x, e1y, e1z,
                     e2x, e2y, e2z) = tri[fid]
                    # Moller-Trumbore, same arithmetic as the array kernel
                    px = dy * e2z - dz * e2y
                    py = dz * e2x - dx * e2z
                    pz = dx * e2y - dy * e2x
                    det = e1x * px + e1y * py + e1z * pz
                    if -_DET_EPS < det < _DET_EPS:
                        continue
                    inv = 1.0 / det
                    tx = ox - v0x
                    ty = oy - v0y
                    tz = oz - v0z
                    u = (tx * px + ty * py + tz * pz) * inv
                    if u < 0.0 or u > 1.0:
                        continue
                    qx = ty * e1z - tz * e1y
                    qy = tz * e1x - tx * e1z
                    qz = tx * e1y - ty * e1x
                    v = (dx * qx + dy * qy + dz * qz) * inv
                    if v < 0.0 or u + v > 1.0:
                        continue
                    t = (e2x * qx + e2y * qy + e2z * qz) * inv
                    if t <= t_min or t > t_max:
                        continue
                    if t < best_t or (t == best_t and fid < best_fid):
                        best_t = t
                        best_fid = fid
            else:
                push(right)
                push(left)
        if best_fid < 0:
            return None
        return best_t, best_fid


class Scene:
    """Immutable triangle soup with materials and a spatial index."""

    def __init__(self, triangles: np.ndarray, material_ids: np.ndarray,
                 materials: list[Material]):
        triangles = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)
        material_ids = np.asarray(material_ids, dtype=int)
        if len(material_ids) != len(triangles):
            raise ValueError("one material id per triangle required")
        v0, e1, e2 = _triangle_fields(triangles)
        areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        if len(triangles) and areas.min() <= MIN_TRIANGLE_AREA_KM2:
            raise ValueError("degenerate triangle in scene")
        self.triangles = triangles
        self.material_ids = material_ids
        self.materials = list(materials)
        self._v0, self._e1, self._e2 = v0, e1, e2
        normals = np.cross(e1, e2)
        self._normals = normals / np.linalg.norm(normals, axis=1)[:, None] \
            if len(triangles) else normals
        if len(triangles):
            self.bounds = np.stack([triangles.min(axis=(0, 1)),
                                    triangles.max(axis=(0, 1))])
        else:
            self.bounds = np.zeros((2, 3))
        self.accel = Bvh(triangles)

    def __len__(self) -> int:
        return len(self.triangles)

    def _make_hit(self, t: float, fid: int, direction) -> Hit:
        n = self._normals[fid]
        if float(np.dot(n, direction)) > 0.0:
            n = -n
        return Hit(distance=t, face_id=fid, normal=n,
                   material_id=int(self.material_ids[fid]))

    def intersect(self, origin, direction, t_min: float = 0.0,
                  t_max: float = np.inf) -> Hit | None:
        """Nearest hit in (t_min, t_max] through the BVH.

        ``direction`` must be unit length (within 1e-9) so hit distances
        are metric.
        """
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        if abs(float(np.linalg.norm(direction)) - 1.0) > 1e-9:
            raise ValueError("direction must be a unit vector")
        res = self.accel.nearest(origin, direction, t_min, t_max)
        if res is None:
            return None
        return self._make_hit(res[0], res[1], direction)

    def intersect_brute(self, origin, direction, t_min: float = 0.0,
                        t_max: float = np.inf) -> Hit | None:
        """Reference query over every triangle (no acceleration)."""
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        if len(self.triangles) == 0:
            return None
        ts = _ray_tris_t(origin, direction, self._v0, self._e1, self._e2)
        ts = np.where((ts > t_min) & (ts <= t_max), ts, np.inf)
        fid = int(np.argmin(ts))
        if not np.isfinite(ts[fid]):
            return None
        return self._make_hit(float(ts[fid]), fid, direction)

    def intersect_batch(self, origins: np.ndarray, directions: np.ndarray,
                        t_min: float = 0.0):
        """Nearest hits for many rays at once.

        Returns (t, face_id, normal): misses get t = +inf, face_id = -1.
        Normals are unit and oriented against each ray.  Used by the
        tracer; agrees with the single-ray queries by construction (same
        kernel, same tie-break).
        """
        origins = np.asarray(origins, dtype=float)
        directions = np.asarray(directions, dtype=float)
        m = len(origins)
        t_out = np.full(m, np.inf)
        fid_out = np.full(m, -1, dtype=int)
        n_tris = len(self.triangles)
        if n_tris == 0 or m == 0:
            return t_out, fid_out, np.zeros((m, 3))

        # Cull rays whose forward half-line misses the scene box; after a
        # reflection most rays head up and away, so this pays off.
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / directions
            t_a = (self.bounds[0][None, :] - origins) * inv
            t_b = (self.bounds[1][None, :] - origins) * inv
            lo = np.minimum(t_a, t_b)
            hi = np.maximum(t_a, t_b)
            par = directions == 0.0
            inside = ((origins >= self.bounds[0][None, :])
                      & (origins <= self.bounds[1][None, :]))
            lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
            hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
        enter = np.nanmax(lo, axis=1)
        exit_ = np.nanmin(hi, axis=1)
        live = np.flatnonzero((enter <= exit_) & (exit_ > t_min))
        if len(live) == 0:
            return t_out, fid_out, np.zeros((m, 3))
        origins_live = origins[live]
        directions_live = directions[live]
        m_live = len(live)

        chunk = max(1, min(int(2e6) // n_tris, 1 << 18))
        v0 = self._v0[None, :, :]
        e1 = self._e1[None, :, :]
        e2 = self._e2[None, :, :]
        for a in range(0, m_live, chunk):
            b = min(a + chunk, m_live)
            o = origins_live[a:b, None, :]
            d = directions_live[a:b, None, :]
            pvec = np.cross(d, e2)
            det = np.einsum("mtj,mtj->mt", np.broadcast_arrays(e1, pvec)[0],
                            pvec)
            ok = np.abs(det) > _DET_EPS
            inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            tvec = o - v0
            u = np.einsum("mtj,mtj->mt", tvec, pvec) * inv
            qvec = np.cross(tvec, e1)
            v = np.einsum("mtj,mtj->mt", np.broadcast_arrays(d, qvec)[0],
                          qvec) * inv
            t = np.einsum("mtj,mtj->mt", np.broadcast_arrays(e2, qvec)[0],
                          qvec) * inv
            ok &= (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0)
            t = np.where(ok & (t > t_min), t, np.inf)
            idx = np.argmin(t, axis=1)
            rows = np.arange(b - a)
            tbest = t[rows, idx]
            hit = np.isfinite(tbest)
            t_out[live[a:b]] = tbest
            fid_out[live[a:b]] = np.where(hit, idx, -1)

        normals = np.zeros((m, 3))
        hit_mask = fid_out >= 0
        if hit_mask.any():
            n = self._normals[fid_out[hit_mask]]
            flip = np.einsum("ij,ij->i", n, directions[hit_mask]) > 0.0
            n = np.where(flip[:, None], -n, n)
            normals[hit_mask] = n
        return t_out, fid_out, normals


def _box(x0, x1, y0, y1, z0, z1) -> np.ndarray:
    """12 triangles of an axis-aligned box, outward winding."""
    c = np.array([[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
                  [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]])
    quads = [(0, 3, 2, 1),   # bottom (z0, normal -z)
             (4, 5, 6, 7),   # top
             (0, 1, 5, 4),   # south
             (2, 3, 7, 6),   # north
             (1, 2, 6, 5),   # east
             (3, 0, 4, 7)]   # west
    tris = []
    for a, b, cc, d in quads:
        tris.append(c[[a, b, cc]])
        tris.append(c[[a, cc, d]])
    return np.asarray(tris)


def generate_city(grid_nx: int, grid_ny: int, block_w_m: float = 80.0,
                  street_w_m: float = 20.0, height_law: str = "uniform",
                  h_min_m: float = 20.0, h_max_m: float = 120.0,
                  h_const_m: float = 30.0, seed: int = 0,
                  materials: list[Material] | None = None) -> Scene:
    """Procedural Manhattan-style grid: box buildings over a ground plane.

    Deterministic for a fixed seed; buildings are watertight 12-triangle
    boxes; the ground plane covers the street grid including the
    perimeter streets.  Distances are meters here, kilometers inside the
    returned scene.
    """
    if grid_nx <= 0 or grid_ny <= 0 or block_w_m <= 0 or street_w_m <= 0:
        raise InvalidDimensions("grid counts and widths must be positive")
    if grid_nx * grid_ny > 10_000:
        raise InvalidDimensions("more than 10^4 blocks requested")
    if height_law not in ("uniform", "constant"):
        raise InvalidDimensions(f"unknown height law {height_law!r}")
    if height_law == "uniform" and not 0.0 < h_min_m <= h_max_m:
        raise InvalidDimensions("need 0 < h_min <= h_max")
    if height_law == "constant" and h_const_m <= 0.0:
        raise InvalidDimensions("constant height must be positive")

    period = block_w_m + street_w_m
    width_x = grid_nx * period + street_w_m
    width_y = grid_ny * period + street_w_m
    x0 = -width_x / 2.0
    y0 = -width_y / 2.0

    if height_law == "uniform":
        rng = np.random.default_rng(seed)
        heights = rng.uniform(h_min_m, h_max_m, size=grid_nx * grid_ny)
    else:
        heights = np.full(grid_nx * grid_ny, h_const_m)

    tris = []
    k = 0
    for i in range(grid_nx):
        bx0 = x0 + street_w_m + i * period
        for j in range(grid_ny):
            by0 = y0 + street_w_m + j * period
            tris.append(_box(bx0, bx0 + block_w_m, by0, by0 + block_w_m,
                             0.0, heights[k]))
            k += 1
    ground = np.array([[x0, y0, 0.0], [x0 + width_x, y0, 0.0],
                       [x0 + width_x, y0 + width_y, 0.0],
                       [x0, y0 + width_y, 0.0]])
    tris.append(np.asarray([ground[[0, 1, 2]], ground[[0, 2, 3]]]))

    triangles = np.concatenate(tris) / M_PER_KM
    if materials is None:
        materials = [CONCRETE]
    material_ids = np.zeros(len(triangles), dtype=int)
    return Scene(triangles, material_ids, materials)


def ground_plane(width_m: float = 1000.0,
                 materials: list[Material] | None = None) -> Scene:
    """Bare square ground plane centered at the origin (two triangles)."""
    h = width_m / 2.0 / M_PER_KM
    quad = np.array([[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]])
    tris = np.asarray([quad[[0, 1, 2]], quad[[0, 2, 3]]])
    if materials is None:
        materials = [CONCRETE]
    return Scene(tris, np.zeros(2, dtype=int), materials)


def scene_to_text(scene: Scene) -> str:
    """One triangle per line: nine vertex coordinates (km) + material id."""
    buf = io.StringIO()
    for tri, mat in zip(scene.triangles, scene.material_ids):
        coords = ",".join(repr(float(v)) for v in tri.reshape(9))
        buf.write(f"{coords},{int(mat)}\n")
    return buf.getvalue()


def scene_from_text(text: str,
                    materials: list[Material] | None = None) -> Scene:
    tris = []
    mats = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 10:
            raise ValueError(f"line {lineno}: expected 10 fields, "
                             f"got {len(parts)}")
        values = [float(p) for p in parts[:9]]
        tris.append(np.asarray(values).reshape(3, 3))
        mats.append(int(parts[9]))
    if materials is None:
        materials = [CONCRETE]
    return Scene(np.asarray(tris).reshape(-1, 3, 3),
                 np.asarray(mats, dtype=int), materials)
