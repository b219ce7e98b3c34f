"""Backward propagation of orientation-range fans along a motion plan.

Working backward from the target, each plan section gets a fan of 2m+1
orientation ranges laid out laterally about the nominal point.  Fans are
computed in the section's curving plane with the planar boundary
constructions, then shrunk to a centrosymmetric radial profile so they
stay valid anywhere on the circle around the nominal axis (which is what
lets consecutive sections curve in different planes).

Obstacles clamp the lateral extent: walking backward along a section,
wherever the obstacle clearance undercuts the lateral distance to the
backward-workspace wall the extent is clamped and the section is split.

Every fan entry carries a turn budget-to-go (the worst heading change a
deviated path still needs to reach the target from that entry), and every
construction into an entry must fit inside pi/2 minus that debt, so the
total-curvature cap holds for whole deviated paths, not just single
connections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry2d as g2
from .needle import (
    ArcSegment,
    MotionPlan,
    NeedleSpec,
    PlaneFrame,
    Pose,
    propagate_pose,
    section_plane_frame,
    segment_pose_at,
    validate_plan,
)
from .scene import Scene, min_clearance

TURN_CAP = math.pi / 2
MIN_SPLIT_DROP = 0.5  # mm of extent loss before a new split is recorded


class PropagationError(RuntimeError):
    """A fan collapsed entirely; the plan cannot carry any deviation."""

    def __init__(self, section_index: int, message: str):
        super().__init__(f"section {section_index}: {message}")
        self.section_index = section_index


@dataclass(frozen=True)
class FanEntry3D:
    """Radial fan entry: cone tilted ``gamma`` away from the section axis
    at radial distance ``d``, half-angle ``beta``; ``btg`` is the turn
    budget already owed downstream of this entry."""

    d: float
    gamma: float
    beta: float
    btg: float = 0.0


@dataclass(frozen=True)
class RadialFan3D:
    entries: tuple[FanEntry3D, ...]

    @property
    def d_max(self) -> float:
        return self.entries[-1].d if self.entries else 0.0

    def nearest_entry(self, d: float) -> FanEntry3D:
        return min(self.entries, key=lambda e: abs(e.d - d))


@dataclass(frozen=True)
class SectionFan:
    """A radial fan anchored at a (sub-)section start pose."""

    pose: Pose
    fan: RadialFan3D
    section_index: int


@dataclass
class PropagationResult:
    fans: list[SectionFan]  # ordered start -> target; last is the target fan
    split_log: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def start_fan(self) -> SectionFan:
        return self.fans[0]

    def to_json(self) -> dict:
        return {
            "sections": [
                {
                    "section_index": sf.section_index,
                    "anchor_p": sf.pose.p.tolist(),
                    "anchor_z": sf.pose.z.tolist(),
                    "entries": [
                        {"d": e.d, "gamma_deg": math.degrees(e.gamma),
                         "beta_deg": math.degrees(e.beta)}
                        for e in sf.fan.entries
                    ],
                }
                for sf in self.fans
            ],
            "splits": [{"section_index": i, "p": p.tolist()}
                       for i, p in self.split_log],
        }


@dataclass(frozen=True)
class FanSlot2D:
    """One next-fan range reified into the current section plane."""

    pos: tuple[float, float]
    rng: g2.OrientationRange2D | None
    btg: float


def restore_fan_2d(fan: RadialFan3D, anchor: Pose, frame: PlaneFrame) -> list[FanSlot2D]:
    """Lay the radial fan back out in the given plane, curve side first.

    The plane contains the fan's axis (the anchor z), so the fan's ring at
    each radius meets the plane at the two lateral offsets; the cone tilt
    ``gamma`` points away from the axis on either side.
    """
    axis = g2.unit(frame.vec_to_2d(anchor.z))
    lat = g2.rot270(axis)  # curve-side lateral direction
    center = frame.to_2d(anchor.p)
    entries = fan.entries
    slots: list[FanSlot2D] = []
    for e in reversed(entries[1:]):  # curve side, outermost first
        pos = g2.add(center, g2.scale(lat, e.d))
        slots.append(FanSlot2D(pos, g2.OrientationRange2D(
            g2.rot(axis, -e.gamma), e.beta), e.btg))
    e0 = entries[0]
    slots.append(FanSlot2D(center, g2.OrientationRange2D(
        g2.rot(axis, 0.0), e0.beta), e0.btg))
    for e in entries[1:]:  # anti-curve side, innermost first
        pos = g2.add(center, g2.scale(lat, -e.d))
        slots.append(FanSlot2D(pos, g2.OrientationRange2D(
            g2.rot(axis, e.gamma), e.beta), e.btg))
    return slots


def propagate_section(x_i: tuple[float, float], axis: tuple[float, float],
                      slots_next: list[FanSlot2D], r_min: float, m: int,
                      extent: float):
    """One run of the range-propagation sweep (both boundary directions).

    Positions are spaced extent/m about x_i, index 0 on the curve side.
    Returns (positions, ranges, btgs) where ranges holds None for
    positions with no feasible connection.
    """
    lat = g2.rot270(axis)
    n_pos = 2 * m + 1 if m > 0 else 1
    offsets = [(m - j) / m * extent for j in range(n_pos)] if m > 0 else [0.0]
    positions = [g2.add(x_i, g2.scale(lat, off)) for off in offsets]
    K = len(slots_next)

    def sweep(flow, j_order, k_start, k_step):
        limits: list[tuple[g2.DubinsBoundaryPath, float] | None] = [None] * n_pos
        c = k_start
        for j in j_order:
            while 0 <= c < K:
                slot = slots_next[c]
                if slot.rng is None or TURN_CAP - slot.btg <= 1e-9:
                    c += k_step
                    continue
                status, path = flow(positions[j], slot.rng, slot.pos, r_min,
                                    TURN_CAP - slot.btg)
                if status == g2.BEYOND:
                    c += k_step
                    continue
                if status == g2.OK:
                    limits[j] = (path, path.total_turn + slot.btg)
                break
        return limits

    curve_limits = sweep(g2._rightmost_flow, range(n_pos), 0, +1)
    anti_limits = sweep(g2._leftmost_flow, range(n_pos - 1, -1, -1), K - 1, -1)

    ranges: list[g2.OrientationRange2D | None] = [None] * n_pos
    btgs = [math.inf] * n_pos
    for j in range(n_pos):
        if curve_limits[j] is None or anti_limits[j] is None:
            continue
        path_r, btg_r = curve_limits[j]
        path_l, btg_l = anti_limits[j]
        o_r, o_l = path_r.start_heading, path_l.start_heading
        if g2.signed_angle(o_r, o_l) < -1e-9:
            continue  # crossed limits cannot form a sound range
        try:
            ranges[j] = g2.make_range(o_l, o_r)
        except ValueError:
            continue
        btgs[j] = max(btg_r, btg_l)
    return positions, ranges, btgs


def symmetrize_to_3d(ranges, btgs, axis: tuple[float, float], m: int,
                     spacing: float) -> RadialFan3D:
    """Shrink the 2D fan to the largest centrosymmetric radial profile.

    For each radius the curve-side and anti-curve-side tilt intervals
    (expressed away-from-axis positive) are intersected; an empty
    intersection truncates the fan at the previous radius.
    """
    n_pos = len(ranges)
    entries: list[FanEntry3D] = []
    for k in range(m + 1 if m > 0 else 1):
        j_curve = (m - k) if m > 0 else 0
        j_anti = (m + k) if m > 0 else 0
        r_c, r_a = ranges[j_curve], ranges[j_anti]
        if r_c is None or r_a is None:
            break
        a_c = g2.signed_angle(axis, r_c.o)
        a_a = g2.signed_angle(axis, r_a.o)
        lo = max(-a_c - r_c.beta, a_a - r_a.beta)
        hi = min(-a_c + r_c.beta, a_a + r_a.beta)
        if hi < lo - 1e-12:
            break
        gamma = 0.5 * (lo + hi)
        beta = max(0.0, 0.5 * (hi - lo))
        if k == 0:
            gamma = 0.0  # away-direction undefined at the center
        entries.append(FanEntry3D(k * spacing, gamma, beta,
                                  max(btgs[j_curve], btgs[j_anti])))
    return RadialFan3D(tuple(entries))


def _next_boundary(seg: ArcSegment, frame: PlaneFrame,
                   slots_next: list[FanSlot2D], scene: Scene,
                   spec: NeedleSpec, step: float, sub_end: float):
    """Walk backward from arc length ``sub_end`` comparing the obstacle
    clearance f_s with the lateral wall distance d_s of the workspace the
    next fan spans.

    Returns (s, extent, is_split): the first pinch tight enough to split
    the section, or the section start (s = 0) with its extent, clamped by
    any milder intrusions passed on the way.
    """
    curve_slot = next((s for s in slots_next if s.rng is not None), None)
    anti_slot = next((s for s in reversed(slots_next) if s.rng is not None), None)
    if curve_slot is None or anti_slot is None:
        return 0.0, 0.0, False

    n = max(1, math.ceil(sub_end / step))
    clamp = math.inf

    def wall_distance(pt2d, lat2d):
        d_curve = g2.lateral_workspace_extent(
            pt2d, lat2d, curve_slot.rng, curve_slot.pos, spec.r_min)
        d_anti = g2.lateral_workspace_extent(
            pt2d, g2.scale(lat2d, -1.0), anti_slot.rng, anti_slot.pos, spec.r_min)
        return min(d_curve, d_anti)

    for k in range(n - 1, -1, -1):
        s = sub_end * k / n
        pose_s = segment_pose_at(seg, s)
        pt2d = frame.to_2d(pose_s.p)
        tan2d = g2.unit(frame.vec_to_2d(pose_s.z))
        lat2d = g2.rot270(tan2d)
        d_s = wall_distance(pt2d, lat2d)
        f_s = min_clearance(pose_s.p, spec, scene)
        if s == 0.0:
            return 0.0, max(0.0, min(d_s, clamp)), False
        if f_s < d_s:
            # obstacle inside the backward workspace: shrink; a markedly
            # tighter pinch splits the section so the workspace below it
            # re-grows from the clamped fan
            if f_s < clamp - MIN_SPLIT_DROP:
                return s, max(0.0, min(d_s, f_s)), True
            clamp = min(clamp, f_s)
    return 0.0, 0.0, False


def propagate_plan(plan: MotionPlan, scene: Scene, spec: NeedleSpec,
                   m: int = 10, step: float = 1.0) -> PropagationResult:
    """Propagate orientation ranges backward from the target to the start.

    The plan must validate (chaining, curvature, length, collisions).
    Raises PropagationError when a fan collapses entirely.
    """
    problems = validate_plan(plan, spec, scene, collision_step=step)
    if problems:
        raise ValueError("plan invalid: " + "; ".join(problems))

    # chained poses (recomputed so that fans anchor on the exact chain)
    poses = [plan.segments[0].start]
    for seg in plan.segments:
        poses.append(propagate_pose(poses[-1], ArcSegment(
            poses[-1], seg.radius, seg.length, seg.axial_rotation)))

    target_pose = poses[-1]
    current = SectionFan(target_pose, RadialFan3D((FanEntry3D(0.0, 0.0, 0.0, 0.0),)),
                         len(plan.segments))
    fans = [current]
    split_log: list[tuple[int, np.ndarray]] = []

    for i in range(len(plan.segments) - 1, -1, -1):
        seg = ArcSegment(poses[i], plan.segments[i].radius,
                         plan.segments[i].length,
                         plan.segments[i].axial_rotation)
        frame = section_plane_frame(seg)
        slots = restore_fan_2d(current.fan, current.pose, frame)
        sub_end = seg.length
        while True:
            s, extent, is_split = _next_boundary(seg, frame, slots, scene,
                                                 spec, step, sub_end)
            anchor = segment_pose_at(seg, s)
            x_sub = frame.to_2d(anchor.p)
            axis_sub = g2.unit(frame.vec_to_2d(anchor.z))
            m_eff = m if extent > 1e-9 else 0
            positions, ranges, btgs = propagate_section(
                x_sub, axis_sub, slots, spec.r_min, m_eff, extent)
            if all(r is None for r in ranges):
                raise PropagationError(i, "all orientation ranges empty")
            fan3d = symmetrize_to_3d(ranges, btgs, axis_sub, m_eff,
                                     extent / m_eff if m_eff > 0 else 0.0)
            if not fan3d.entries:
                raise PropagationError(i, "no centrosymmetric cone survives")
            current = SectionFan(anchor, fan3d, i)
            fans.append(current)
            if not is_split:
                break
            split_log.append((i, anchor.p.copy()))
            slots = restore_fan_2d(current.fan, current.pose, frame)
            sub_end = s

    fans.reverse()
    return PropagationResult(fans, split_log)
