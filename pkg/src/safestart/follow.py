"""Greedy execution of a propagated fan chain from a deviated start pose.

Given the radial fans computed by the propagation, this module steers a
needle from a perturbed start state through the successive fans to the
target, using the same primitive families the propagation itself builds
on (free-radius tangent arcs and minimum-radius CSC connections).  It is
the constructive witness for the safe-start guarantee: a follow that
succeeds IS a collision-free plan from the deviated pose.

Each steering hop happens in the plane spanned by the current heading and
the direction to the next fan anchor (the needle reorients that plane for
free via axial rotation).  The next fan's ring meets that plane at two
points per radius; cones are intersected with the plane to get admissible
in-plane arrival intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry2d as g2
from .needle import ArcSegment, NeedleSpec, Pose, STRAIGHT
from .propagation import PropagationResult, SectionFan
from .scene import Scene, segment_collision_free

TURN_CAP = math.pi / 2
ANG_EPS = 1e-9


@dataclass
class FollowResult:
    success: bool
    reason: str = ""
    end_point: np.ndarray | None = None
    segments: list[ArcSegment] = field(default_factory=list)
    turn_used: float = 0.0

    def miss_distance(self, target: np.ndarray) -> float:
        if self.end_point is None:
            return math.inf
        return float(np.linalg.norm(self.end_point - np.asarray(target, float)))


def _plane_basis(h: np.ndarray, aim: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (lateral, forward) basis of the steering plane spanned
    by the heading and the aim direction."""
    e_f = h / np.linalg.norm(h)
    lat = aim - np.dot(aim, e_f) * e_f
    n = np.linalg.norm(lat)
    if n < 1e-9:
        # dead ahead: any perpendicular will do
        trial = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(trial, e_f)) > 0.9:
            trial = np.array([0.0, 1.0, 0.0])
        lat = trial - np.dot(trial, e_f) * e_f
        n = np.linalg.norm(lat)
    return lat / n, e_f


def _csc_paths(q2: tuple[float, float], h_t: tuple[float, float], r: float,
               budget: float) -> list[g2.DubinsBoundaryPath]:
    """CSC Dubins paths (radius exactly r) from ((0,0),(0,1)) to the pose
    (q2, h_t), cheapest turn first."""
    a, ha = (0.0, 0.0), (0.0, 1.0)
    out = []
    combos = (("L", "L"), ("R", "R"), ("L", "R"), ("R", "L"))
    for c1_side, c2_side in combos:
        c1 = g2.add(a, g2.scale(g2.rot90(ha) if c1_side == "L" else g2.rot270(ha), r))
        c2 = g2.add(q2, g2.scale(g2.rot90(h_t) if c2_side == "L" else g2.rot270(h_t), r))
        v = g2.sub(c2, c1)
        d = math.hypot(*v)
        if d < 1e-12:
            continue
        if c1_side == c2_side:
            t_dir = g2.scale(v, 1.0 / d)
            s_len = d
        else:
            if d < 2.0 * r - 1e-12:
                continue
            s_len = math.sqrt(max(0.0, d * d - 4.0 * r * r))
            phi = math.atan2(2.0 * r, s_len)
            t_dir = g2.rot(g2.scale(v, 1.0 / d), phi if c1_side == "L" else -phi)
        t1 = g2.ccw_span(ha, t_dir) if c1_side == "L" else g2.cw_span(ha, t_dir)
        t2 = g2.ccw_span(t_dir, h_t) if c2_side == "L" else g2.cw_span(t_dir, h_t)
        if t1 + t2 > budget + ANG_EPS:
            continue
        pieces = []
        if t1 > ANG_EPS:
            pieces.append(g2.PathPiece("arc", center=c1, radius=r,
                                       turn=t1 if c1_side == "L" else -t1))
        if s_len > 1e-12:
            pieces.append(g2.PathPiece("straight", length=s_len))
        if t2 > ANG_EPS:
            pieces.append(g2.PathPiece("arc", center=c2, radius=r,
                                       turn=t2 if c2_side == "L" else -t2))
        if not pieces:
            pieces.append(g2.PathPiece("straight", length=0.0))
        out.append(g2.DubinsBoundaryPath(
            c1_side + "S" + c2_side, a, ha, q2, h_t, tuple(pieces)))
    out.sort(key=lambda p: p.total_turn)
    return out


def _free_arc(q2: tuple[float, float], budget: float,
              r_min: float) -> g2.DubinsBoundaryPath | None:
    """Single arc from ((0,0),(0,1)) through q2, radius free but >= r_min."""
    x, y = q2
    if math.hypot(x, y) < 1e-12:
        return None
    if abs(x) < 1e-12:
        if y < 0.0:
            return None
        return g2.DubinsBoundaryPath(
            "ARC_LEFT", (0.0, 0.0), (0.0, 1.0), q2, (0.0, 1.0),
            (g2.PathPiece("straight", length=y),))
    radius = (x * x + y * y) / (2.0 * abs(x))
    if radius < r_min * (1.0 - 1e-12):
        return None
    center = (math.copysign(radius, x), 0.0)
    a_start = math.atan2(-center[1], -center[0])
    a_end = math.atan2(y - center[1], x - center[0])
    if x > 0:  # clockwise motion
        sweep = (a_start - a_end) % (2.0 * math.pi)
        turn = -sweep
    else:
        sweep = (a_end - a_start) % (2.0 * math.pi)
        turn = sweep
    if sweep > budget + ANG_EPS:
        return None
    h_end = g2.rot((0.0, 1.0), turn)
    piece = g2.PathPiece("arc", center=center, radius=radius, turn=turn)
    return g2.DubinsBoundaryPath("ARC_LEFT" if turn >= 0 else "ARC_RIGHT",
                                 (0.0, 0.0), (0.0, 1.0), q2, h_end, (piece,))


def _pieces_to_segments(p3: np.ndarray, e_l: np.ndarray, e_f: np.ndarray,
                        path: g2.DubinsBoundaryPath) -> list[ArcSegment]:
    """Lift a planar path into 3D needle segments for collision checking.
    Each piece gets its own start frame (z = heading, -y = bend side)."""
    segs = []
    cur2 = path.start_point
    h2 = path.start_heading
    for piece in path.pieces:
        p = p3 + cur2[0] * e_l + cur2[1] * e_f
        z = h2[0] * e_l + h2[1] * e_f
        if piece.kind == "straight":
            if piece.length > 1e-12:
                y_col = np.cross(z, np.cross(e_l, e_f))
                y_col /= np.linalg.norm(y_col)
                R = np.column_stack([np.cross(y_col, z), y_col, z])
                segs.append(ArcSegment(Pose(p, R), STRAIGHT, piece.length))
            cur2 = g2.add(cur2, g2.scale(h2, piece.length))
        else:
            bend2 = g2.rot90(h2) if piece.turn >= 0 else g2.rot270(h2)
            y_col = -(bend2[0] * e_l + bend2[1] * e_f)
            R = np.column_stack([np.cross(y_col, z), y_col, z])
            length = abs(piece.turn) * piece.radius
            if length > 1e-12:
                segs.append(ArcSegment(Pose(p, R), piece.radius, length))
            radial = g2.sub(cur2, piece.center)
            cur2 = g2.add(piece.center, g2.rot(radial, piece.turn))
            h2 = g2.rot(h2, piece.turn)
    return segs


def _cone_plane_interval(axis3: np.ndarray, beta: float, e_l: np.ndarray,
                         e_f: np.ndarray) -> g2.OrientationRange2D | None:
    """Intersection of a 3D cone with the steering plane as an in-plane
    orientation range, or None when the cone misses the plane."""
    ax = float(np.dot(axis3, e_l))
    ay = float(np.dot(axis3, e_f))
    amp = math.hypot(ax, ay)
    if amp < 1e-12:
        return None
    cosw = math.cos(beta) / amp
    if cosw > 1.0 + 1e-12:
        return None
    width = math.acos(max(-1.0, min(1.0, cosw)))
    return g2.OrientationRange2D((ax / amp, ay / amp), width)


def follow_fans(result: PropagationResult, scene: Scene, spec: NeedleSpec,
                start_p: np.ndarray, start_h: np.ndarray,
                collision_step: float = 1.0) -> FollowResult:
    """Steer greedily from (start_p, start_h) through the fan chain.

    The state starts in fan 0's neighborhood; each hop connects to some
    admissible state of the next fan, the last hop targets the plan end
    position itself.
    """
    p = np.asarray(start_p, dtype=float).copy()
    h = np.asarray(start_h, dtype=float)
    h = h / np.linalg.norm(h)
    spent = 0.0
    all_segments: list[ArcSegment] = []

    fans = result.fans
    for hop in range(1, len(fans)):
        sf = fans[hop]
        anchor = sf.pose.p
        axis = sf.pose.z
        final_hop = hop == len(fans) - 1
        aim = anchor - p
        if np.linalg.norm(aim) < 1e-9:
            continue
        e_l, e_f = _plane_basis(h, aim)

        def q2_of(point3) -> tuple[float, float]:
            d = point3 - p
            return (float(np.dot(d, e_l)), float(np.dot(d, e_f)))

        # candidate arrival states on the next fan, nominal axis first
        candidates = []
        if final_hop:
            candidates.append((anchor, None, 0.0))
        else:
            n_plane = np.cross(e_l, e_f)
            w = np.cross(n_plane, axis)
            nw = np.linalg.norm(w)
            if nw < 1e-9:
                w = e_l - np.dot(e_l, axis) * axis
                nw = np.linalg.norm(w)
                if nw < 1e-9:
                    return FollowResult(False, f"hop {hop}: degenerate ring plane")
            w = w / nw
            for entry in sf.fan.entries:
                if entry.d == 0.0:
                    interval = _cone_plane_interval(axis, entry.beta, e_l, e_f)
                    candidates.append((anchor, interval, entry.btg))
                    continue
                for sgn in (1.0, -1.0):
                    away = sgn * w
                    cone_axis = math.cos(entry.gamma) * axis + \
                        math.sin(entry.gamma) * away
                    interval = _cone_plane_interval(cone_axis, entry.beta, e_l, e_f)
                    candidates.append((anchor + entry.d * away, interval, entry.btg))

        advanced = False
        for cand_p, interval, btg in candidates:
            if interval is None and not final_hop:
                continue
            q2 = q2_of(cand_p)
            budget = TURN_CAP - spent - btg + ANG_EPS
            if budget <= 0.0:
                continue
            paths: list[g2.DubinsBoundaryPath] = []
            arc = _free_arc(q2, budget, spec.r_min)
            if arc is not None:
                if final_hop or g2.range_distance(arc.end_heading, interval) == 0.0:
                    paths.append(arc)
            if not final_hop:
                targets = [interval.o, interval.right_border, interval.left_border]
                for h_t in targets:
                    paths.extend(_csc_paths(q2, h_t, spec.r_min, budget))
            ok_path = None
            for path in paths:
                segs = _pieces_to_segments(p, e_l, e_f, path)
                if all(segment_collision_free(s, spec, scene, collision_step)
                       for s in segs):
                    ok_path = (path, segs)
                    break
            if ok_path is None:
                continue
            path, segs = ok_path
            all_segments.extend(segs)
            spent += path.total_turn
            p = p + path.end_point[0] * e_l + path.end_point[1] * e_f
            h = path.end_heading[0] * e_l + path.end_heading[1] * e_f
            advanced = True
            break
        if not advanced:
            return FollowResult(False, f"hop {hop}: no feasible connection",
                                end_point=p, segments=all_segments,
                                turn_used=spent)
    return FollowResult(True, "", end_point=p, segments=all_segments,
                        turn_used=spent)


def sample_start_states(result: PropagationResult, rho: float, alpha: float,
                        n: int, rng: np.random.Generator,
                        on_surface_plane: bool = True):
    """Sample (position, heading) start states within the reported
    robustness bounds around the nominal start pose."""
    sf = result.start_fan
    p1 = sf.pose.p
    ex, ey, ez = sf.pose.x, sf.pose.y, sf.pose.z
    out = []
    for _ in range(n):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        rad = rho * math.sqrt(rng.uniform(0.0, 1.0))
        pos = p1 + rad * (math.cos(ang) * ex + math.sin(ang) * ey)
        tilt = alpha * math.sqrt(rng.uniform(0.0, 1.0))
        azim = rng.uniform(0.0, 2.0 * math.pi)
        dev = math.cos(azim) * ex + math.sin(azim) * ey
        heading = math.cos(tilt) * ez + math.sin(tilt) * dev
        out.append((pos, heading / np.linalg.norm(heading)))
    return out
