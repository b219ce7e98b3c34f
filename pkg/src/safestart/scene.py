"""Obstacle scenes, clearance queries, insertion-surface meshes and I/O.

Obstacles are spheres; voxel obstacles are stored as their conservative
enclosing spheres (radius edge*sqrt(3)/2).  Clearance queries run through
a kd-tree but are exact: the tree only prunes candidates, never changes
the answer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .needle import ArcSegment, NeedleSpec, segment_points

DEFAULT_COLLISION_STEP = 1.0  # mm
DEFAULT_TRIANGLE_EDGE = 5.0  # mm


@dataclass
class Scene:
    """Sphere obstacles behind an exact nearest-neighbor index."""

    centers: np.ndarray  # (N, 3)
    radii: np.ndarray  # (N,)
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    voxel_edge: float | None = None
    n_voxels: int = 0
    _tree: cKDTree | None = field(default=None, repr=False)
    _r_max: float = 0.0

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        self.bounds_min = np.asarray(self.bounds_min, dtype=float).reshape(3)
        self.bounds_max = np.asarray(self.bounds_max, dtype=float).reshape(3)
        if len(self.centers):
            self._tree = cKDTree(self.centers)
            self._r_max = float(self.radii.max())

    @classmethod
    def empty(cls, bounds_min=(-500, -500, -500), bounds_max=(500, 500, 500)) -> "Scene":
        return cls(np.zeros((0, 3)), np.zeros(0), np.array(bounds_min, float),
                   np.array(bounds_max, float))

    @classmethod
    def from_parts(cls, spheres: list[tuple] | None = None,
                   voxel_centers=None, voxel_edge: float | None = None,
                   bounds_min=None, bounds_max=None) -> "Scene":
        cs, rs = [], []
        for c, r in (spheres or []):
            cs.append(c)
            rs.append(r)
        n_vox = 0
        if voxel_centers is not None and len(voxel_centers):
            vr = voxel_edge * math.sqrt(3.0) / 2.0
            for c in voxel_centers:
                cs.append(c)
                rs.append(vr)
            n_vox = len(voxel_centers)
        centers = np.array(cs, float).reshape(-1, 3)
        radii = np.array(rs, float)
        if bounds_min is None or bounds_max is None:
            if len(centers):
                pad = (radii.max() if len(radii) else 0.0) + 50.0
                bounds_min = centers.min(axis=0) - pad
                bounds_max = centers.max(axis=0) + pad
            else:
                bounds_min, bounds_max = (-500.0,) * 3, (500.0,) * 3
        return cls(centers, radii, np.array(bounds_min, float),
                   np.array(bounds_max, float), voxel_edge, n_vox)

    def surface_distances(self, points: np.ndarray) -> np.ndarray:
        """Exact min over obstacles of (center distance - radius), per point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._tree is None:
            return np.full(len(points), math.inf)
        d_near, i_near = self._tree.query(points)
        best = d_near - self.radii[i_near]
        # A farther center with a big radius can still win; re-scan the
        # candidates inside the exact pruning ball.
        balls = self._tree.query_ball_point(points, best + self._r_max + 1e-12)
        for k, idx in enumerate(balls):
            if idx:
                idx = np.asarray(idx)
                d = np.linalg.norm(self.centers[idx] - points[k], axis=1) - self.radii[idx]
                best[k] = min(best[k], d.min())
        return best

    def to_json(self) -> dict:
        n_sph = len(self.centers) - self.n_voxels
        out = {
            "spheres": [{"c": self.centers[i].tolist(), "r": float(self.radii[i])}
                        for i in range(n_sph)],
            "bounds": {"min": self.bounds_min.tolist(),
                       "max": self.bounds_max.tolist()},
        }
        if self.n_voxels:
            out["voxels"] = {
                "edge": self.voxel_edge,
                "centers": self.centers[n_sph:].tolist(),
            }
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Scene":
        spheres = [(s["c"], s["r"]) for s in d.get("spheres", [])]
        vox = d.get("voxels") or {}
        return cls.from_parts(
            spheres,
            voxel_centers=vox.get("centers"),
            voxel_edge=vox.get("edge"),
            bounds_min=d["bounds"]["min"],
            bounds_max=d["bounds"]["max"],
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path) -> "Scene":
        with open(path) as f:
            return cls.from_json(json.load(f))


def min_clearance(p: np.ndarray, spec: NeedleSpec, scene: Scene) -> float:
    """Minimum obstacle distance at a tip position: center distance minus
    obstacle radius minus needle radius.  Negative means collision;
    +inf in an empty scene."""
    d = scene.surface_distances(np.asarray(p, dtype=float).reshape(1, 3))[0]
    if math.isinf(d):
        return math.inf
    return float(d - spec.d_needle / 2.0)


def min_clearances(points: np.ndarray, spec: NeedleSpec, scene: Scene) -> np.ndarray:
    return scene.surface_distances(points) - spec.d_needle / 2.0


def segment_collision_free(seg: ArcSegment, spec: NeedleSpec, scene: Scene,
                           step: float = DEFAULT_COLLISION_STEP) -> bool:
    """Sampled collision test along one section.

    Clearance must be positive at every sample; where it drops below the
    step the local interval is re-sampled at a quarter step so convex
    obstacles cannot slip between samples.
    """
    if seg.length <= 0:
        p = seg.start.p
        return min_clearance(p, spec, scene) > 0.0
    pts = segment_points(seg, step)
    clear = min_clearances(pts, spec, scene)
    if (clear <= 0.0).any():
        return False
    tight = clear < step
    if tight.any():
        fine = segment_points(seg, step / 4.0)
        if (min_clearances(fine, spec, scene) <= 0.0).any():
            return False
    return True


# ---------------------------------------------------------------------------
# insertion-surface meshes
# ---------------------------------------------------------------------------

@dataclass
class StartRegion:
    """Triangle mesh of candidate entry poses.

    Per-triangle data: centroid, unit normal pointing into the workspace
    (the side the needle deploys toward) and admissible half-angle theta.
    """

    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) int
    theta: np.ndarray  # (F,) radians
    kind: str = "mesh"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        v = self.vertices
        f = self.faces
        self.centroids = v[f].mean(axis=1)
        n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        norms = np.linalg.norm(n, axis=1, keepdims=True)
        self.normals = n / np.where(norms > 0, norms, 1.0)
        self._build_adjacency()

    def _build_adjacency(self):
        edge_map: dict[tuple[int, int], list[int]] = {}
        for t, (a, b, c) in enumerate(self.faces):
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                edge_map.setdefault(key, []).append(t)
        self.neighbors: list[list[int]] = [[] for _ in range(len(self.faces))]
        self.boundary_tri = np.zeros(len(self.faces), dtype=bool)
        for key, tris in edge_map.items():
            if len(tris) == 2:
                a, b = tris
                self.neighbors[a].append(b)
                self.neighbors[b].append(a)
            elif len(tris) == 1:
                self.boundary_tri[tris[0]] = True
        self._edge_map = edge_map

    @property
    def n_triangles(self) -> int:
        return len(self.faces)

    def typical_edge(self) -> float:
        f = self.faces
        v = self.vertices
        e = np.linalg.norm(v[f[:, 0]] - v[f[:, 1]], axis=1)
        return float(np.median(e))

    def containing_triangle(self, p: np.ndarray) -> int:
        """Triangle nearest to p (exact point-triangle distances)."""
        p = np.asarray(p, dtype=float)
        cand = np.argsort(np.linalg.norm(self.centroids - p, axis=1))[:32]
        best_t, best_d = int(cand[0]), math.inf
        for t in cand:
            d = _point_triangle_distance(p, self.vertices[self.faces[t]])
            if d < best_d:
                best_d, best_t = d, int(t)
        return best_t

    def find_crossing(self, a: np.ndarray, b: np.ndarray):
        """First intersection of segment a->b with the mesh.

        Returns (triangle index, point, fraction) or None.
        """
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        d = b - a
        v0 = self.vertices[self.faces[:, 0]]
        e1 = self.vertices[self.faces[:, 1]] - v0
        e2 = self.vertices[self.faces[:, 2]] - v0
        h = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, h)
        ok = np.abs(det) > 1e-12
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = a - v0
        u = np.einsum("ij,ij->i", s, h) * inv
        q = np.cross(s, e1)
        v = np.einsum("j,ij->i", d, q) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        hit = ok & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9) & \
            (t >= -1e-9) & (t <= 1 + 1e-9)
        if not hit.any():
            return None
        idx = np.where(hit)[0]
        best = idx[np.argmin(t[idx])]
        frac = float(max(0.0, min(1.0, t[best])))
        return int(best), a + frac * d, frac

    def is_exterior(self, p: np.ndarray) -> bool:
        """True when p lies on the non-workspace side of the surface
        (only meaningful for generated planar/cylinder regions)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "planar":
            return p[2] < 0.0
        if self.kind == "cylinder":
            return math.hypot(p[1], p[2]) < self.params["radius"]
        return False

    def save_obj(self, path) -> None:
        with open(path, "w") as f:
            for v in self.vertices:
                f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
            for a, b, c in self.faces:
                f.write(f"f {a + 1} {b + 1} {c + 1}\n")

    def save_theta(self, path) -> None:
        with open(path, "w") as f:
            json.dump({str(i): float(t) for i, t in enumerate(self.theta)}, f)

    @classmethod
    def load_obj(cls, obj_path, theta_path=None, default_theta: float = math.pi / 2,
                 kind: str = "mesh", params: dict | None = None) -> "StartRegion":
        verts, faces = [], []
        with open(obj_path) as f:
            for line in f:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                    if len(idx) != 3:
                        raise ValueError("start-region meshes must be pure triangles")
                    faces.append(idx)
        theta = np.full(len(faces), default_theta)
        if theta_path is not None:
            with open(theta_path) as f:
                for k, v in json.load(f).items():
                    theta[int(k)] = float(v)
        return cls(np.array(verts), np.array(faces), theta, kind=kind,
                   params=params or {})


def _point_triangle_distance(p: np.ndarray, tri: np.ndarray) -> float:
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    n = np.cross(ab, ac)
    nn = np.dot(n, n)
    if nn < 1e-18:
        return float(np.linalg.norm(ap))
    u = np.dot(np.cross(ap, ac), n) / nn
    v = np.dot(np.cross(ab, ap), n) / nn
    w = 1.0 - u - v
    if u >= -1e-12 and v >= -1e-12 and w >= -1e-12:
        return abs(float(np.dot(ap, n) / math.sqrt(nn)))
    best = math.inf
    for s, e in ((a, b), (b, c), (c, a)):
        se = e - s
        t = float(np.clip(np.dot(p - s, se) / np.dot(se, se), 0.0, 1.0))
        best = min(best, float(np.linalg.norm(p - (s + t * se))))
    return best


def make_planar_region(size: float, theta: float = math.pi / 2,
                       edge: float = DEFAULT_TRIANGLE_EDGE) -> StartRegion:
    """Square region in the z=0 plane, normals +z, grid-triangulated with
    triangle edges no longer than ``edge``."""
    n = max(1, math.ceil(size / edge))
    xs = np.linspace(-size / 2.0, size / 2.0, n + 1)
    vid = lambda i, j: i * (n + 1) + j
    verts = np.array([[xs[i], xs[j], 0.0] for i in range(n + 1) for j in range(n + 1)])
    faces = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            # CCW viewed from +z so normals face the workspace
            faces.append([v00, v10, v11])
            faces.append([v00, v11, v01])
    return StartRegion(verts, np.array(faces), np.full(len(faces), theta),
                       kind="planar", params={"size": size})


def make_cylinder_region(radius: float, length: float, theta: float,
                         edge: float = DEFAULT_TRIANGLE_EDGE) -> StartRegion:
    """Cylindrical surface around the x axis, triangulated, with normals
    pointing away from the axis (into the tissue the needle deploys into)."""
    n_ax = max(1, math.ceil(length / edge))
    n_ang = max(8, math.ceil(2.0 * math.pi * radius / edge))
    xs = np.linspace(-length / 2.0, length / 2.0, n_ax + 1)
    phis = np.linspace(0.0, 2.0 * math.pi, n_ang, endpoint=False)
    verts = np.array([[x, radius * math.cos(ph), radius * math.sin(ph)]
                      for x in xs for ph in phis])
    vid = lambda i, j: i * n_ang + (j % n_ang)
    faces = []
    for i in range(n_ax):
        for j in range(n_ang):
            v00, v01 = vid(i, j), vid(i, j + 1)
            v10, v11 = vid(i + 1, j), vid(i + 1, j + 1)
            faces.append([v00, v11, v10])
            faces.append([v00, v01, v11])
    region = StartRegion(verts, np.array(faces), np.full(2 * n_ax * n_ang, theta),
                         kind="cylinder", params={"radius": radius, "length": length})
    # fix winding so normals point radially outward
    flip = np.einsum("ij,ij->i", region.normals,
                     region.centroids - np.array([1.0, 0.0, 0.0]) * region.centroids[:, [0]]) < 0
    if flip.any():
        region.faces[flip] = region.faces[flip][:, [0, 2, 1]]
        region.__post_init__()
    return region


def generate_sphere_scenario(seed: int, n_obstacles: int, region_size: float,
                             target_height: float = 100.0, r_max: float = 10.0,
                             target_clearance: float = 20.0,
                             theta: float = math.pi / 2,
                             edge: float = DEFAULT_TRIANGLE_EDGE,
                             ) -> tuple[Scene, StartRegion, np.ndarray]:
    """Planar start region with uniformly sampled sphere obstacles between
    the surface and the target plane; obstacle centers are re-drawn until
    they keep the requested distance from the target.  Deterministic in
    the seed."""
    rng = np.random.default_rng(seed)
    region = make_planar_region(region_size, theta, edge)
    target = np.array([0.0, 0.0, target_height])
    centers, radii = [], []
    attempts = 0
    while len(centers) < n_obstacles:
        attempts += 1
        if attempts > 10 ** 5 + n_obstacles:
            raise RuntimeError("obstacle rejection sampling failed")
        c = np.array([
            rng.uniform(-region_size / 2.0, region_size / 2.0),
            rng.uniform(-region_size / 2.0, region_size / 2.0),
            rng.uniform(0.0, target_height),
        ])
        if np.linalg.norm(c - target) < target_clearance:
            continue
        r = rng.uniform(0.0, r_max)
        if r <= 0.0:
            continue
        centers.append(c)
        radii.append(r)
    pad = r_max + 30.0
    half = region_size / 2.0
    bounds_min = np.array([-half - pad, -half - pad, -pad])
    bounds_max = np.array([half + pad, half + pad, target_height + pad])
    scene = Scene(np.array(centers, float).reshape(-1, 3), np.array(radii, float),
                  bounds_min, bounds_max)
    return scene, region, target
