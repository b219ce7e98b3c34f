"""Needle kinematics: poses, constant-curvature plan sections, validation.

The tip frame follows the 3D unicycle convention: the needle advances
along the frame's z column and curves toward -y.  An axial rotation about
z applied at the start of a section re-aims the curving plane.

Straight sections use ``math.inf`` as the radius sentinel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

STRAIGHT = math.inf
CHAIN_TOL = 1e-6
TARGET_TOL = 1.0  # mm
TOTAL_TURN_CAP = math.pi / 2


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Re-orthonormalize a drifting frame, keeping z exact first."""
    z = R[:, 2] / np.linalg.norm(R[:, 2])
    y = R[:, 1] - np.dot(R[:, 1], z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


@dataclass
class Pose:
    """Rigid tip configuration: position p (mm) and frame R (columns x,y,z)."""

    p: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.R = np.asarray(self.R, dtype=float).reshape(3, 3)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.eye(3))

    @property
    def x(self) -> np.ndarray:
        return self.R[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.R[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.R[:, 2]

    def frame_error(self) -> float:
        return float(np.abs(self.R.T @ self.R - np.eye(3)).max())

    def is_close(self, other: "Pose", pos_tol: float = CHAIN_TOL,
                 ang_tol: float = CHAIN_TOL) -> bool:
        if np.linalg.norm(self.p - other.p) > pos_tol:
            return False
        cosang = (np.trace(self.R.T @ other.R) - 1.0) / 2.0
        return math.acos(max(-1.0, min(1.0, cosang))) <= ang_tol

    def to_json(self) -> dict:
        return {"p": self.p.tolist(), "R": self.R.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Pose":
        return cls(np.array(d["p"], dtype=float), np.array(d["R"], dtype=float))


@dataclass
class ArcSegment:
    """Constant-curvature plan section: start pose, radius, length and the
    axial rotation applied before insertion."""

    start: Pose
    radius: float
    length: float
    axial_rotation: float = 0.0

    @property
    def is_straight(self) -> bool:
        return math.isinf(self.radius)

    @property
    def turn(self) -> float:
        return 0.0 if self.is_straight else self.length / self.radius

    def to_json(self) -> dict:
        return {
            "pose": self.start.to_json(),
            "radius": None if self.is_straight else self.radius,
            "length": self.length,
            "gamma": self.axial_rotation,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ArcSegment":
        radius = d["radius"]
        return cls(Pose.from_json(d["pose"]),
                   STRAIGHT if radius is None else float(radius),
                   float(d["length"]), float(d.get("gamma", 0.0)))


@dataclass
class NeedleSpec:
    """Hardware parameters: minimum turn radius, diameter, max length."""

    r_min: float
    d_needle: float = 1.0
    l_needle: float = 150.0


@dataclass
class MotionPlan:
    segments: list[ArcSegment] = field(default_factory=list)
    target: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float).reshape(3)

    @property
    def start_pose(self) -> Pose:
        return self.segments[0].start

    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    def total_turn(self) -> float:
        return sum(abs(s.turn) for s in self.segments)

    def end_poses(self) -> list[Pose]:
        """Poses after each segment, recomputed by forward kinematics."""
        out = []
        q = self.segments[0].start
        for seg in self.segments:
            q = propagate_pose(q, ArcSegment(q, seg.radius, seg.length,
                                             seg.axial_rotation))
            out.append(q)
        return out

    def to_json(self) -> dict:
        return {"segments": [s.to_json() for s in self.segments],
                "target": self.target.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "MotionPlan":
        return cls([ArcSegment.from_json(s) for s in d["segments"]],
                   np.array(d["target"], dtype=float))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)

    @classmethod
    def load(cls, path) -> "MotionPlan":
        with open(path) as f:
            return cls.from_json(json.load(f))


def propagate_pose(q: Pose, seg: ArcSegment) -> Pose:
    """Advance a pose through one section: rotate about z by the axial
    rotation, then sweep the arc in the plane spanned by z and -y."""
    R1 = q.R @ _rot_z(seg.axial_rotation)
    if seg.is_straight:
        return Pose(q.p + seg.length * R1[:, 2], orthonormalize(R1))
    theta = seg.length / seg.radius
    if theta > math.pi / 2 + 1e-9:
        raise ValueError(f"segment turns {theta:.4f} rad > pi/2")
    r = seg.radius
    db = np.array([0.0, -r * (1.0 - math.cos(theta)), r * math.sin(theta)])
    p_new = q.p + R1 @ db
    R_new = R1 @ _rot_x(theta)
    return Pose(p_new, orthonormalize(R_new))


def segment_pose_at(seg: ArcSegment, s: float) -> Pose:
    """Pose after inserting distance s (0 <= s <= length) into a section.
    The axial rotation applies entirely at s = 0."""
    sub = ArcSegment(seg.start, seg.radius, s, seg.axial_rotation)
    return propagate_pose(seg.start, sub)


def segment_points(seg: ArcSegment, step: float) -> np.ndarray:
    """Sampled tip positions along a section at arc-length spacing <= step."""
    n = max(1, math.ceil(seg.length / step)) if seg.length > 0 else 1
    ts = np.linspace(0.0, seg.length, n + 1)
    R1 = seg.start.R @ _rot_z(seg.axial_rotation)
    if seg.is_straight:
        return seg.start.p[None, :] + ts[:, None] * R1[:, 2][None, :]
    r = seg.radius
    th = ts / r
    db = np.stack([np.zeros_like(th), -r * (1.0 - np.cos(th)), r * np.sin(th)], axis=1)
    return seg.start.p[None, :] + db @ R1.T


@dataclass
class PlaneFrame:
    """In-plane embedding of a section: origin plus the lateral axis e1
    (the curve direction -y) and forward axis e2 (deployment direction z)."""

    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def to_2d(self, p: np.ndarray) -> tuple[float, float]:
        d = np.asarray(p, dtype=float) - self.origin
        return (float(d @ self.e1), float(d @ self.e2))

    def vec_to_2d(self, v: np.ndarray) -> tuple[float, float]:
        v = np.asarray(v, dtype=float)
        return (float(v @ self.e1), float(v @ self.e2))

    def to_3d(self, xy: tuple[float, float]) -> np.ndarray:
        return self.origin + xy[0] * self.e1 + xy[1] * self.e2

    def vec_to_3d(self, xy: tuple[float, float]) -> np.ndarray:
        return xy[0] * self.e1 + xy[1] * self.e2

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.e1, self.e2)

    def out_of_plane(self, p: np.ndarray) -> float:
        return float(abs((np.asarray(p, dtype=float) - self.origin) @ self.normal))


def section_plane_frame(seg: ArcSegment) -> PlaneFrame:
    """Plane the section curves in, anchored at the section start.

    The axial rotation happens before insertion, so the plane uses the
    post-rotation frame.
    """
    R1 = seg.start.R @ _rot_z(seg.axial_rotation)
    return PlaneFrame(seg.start.p.copy(), -R1[:, 1], R1[:, 2])


def validate_plan(plan: MotionPlan, spec: NeedleSpec, scene=None,
                  collision_step: float = 1.0) -> list[str]:
    """Check chaining, curvature, length, total turn, target reach and
    (when a scene is given) collision freedom.  Returns all violations."""
    problems: list[str] = []
    if not plan.segments:
        return ["plan has no segments"]
    q = plan.segments[0].start
    total_turn = 0.0
    for i, seg in enumerate(plan.segments):
        if not seg.start.is_close(q):
            problems.append(f"segment {i}: start pose does not chain")
        if seg.length <= 0:
            problems.append(f"segment {i}: non-positive length")
        if not seg.is_straight and seg.radius < spec.r_min - 1e-9:
            problems.append(f"segment {i}: radius {seg.radius:.3f} < r_min")
        total_turn += abs(seg.turn)
        try:
            q = propagate_pose(q, ArcSegment(q, seg.radius, seg.length,
                                             seg.axial_rotation))
        except ValueError as exc:
            problems.append(f"segment {i}: {exc}")
            return problems
        if scene is not None:
            from .scene import segment_collision_free
            if not segment_collision_free(seg, spec, scene, collision_step):
                problems.append(f"segment {i}: collision")
    if plan.total_length() > spec.l_needle + 1e-6:
        problems.append(f"total length {plan.total_length():.2f} > l_needle")
    if total_turn > TOTAL_TURN_CAP + 1e-9:
        problems.append(f"total turn {total_turn:.4f} > pi/2")
    miss = float(np.linalg.norm(q.p - plan.target))
    if miss > TARGET_TOL:
        problems.append(f"endpoint misses target by {miss:.3f} mm")
    return problems
