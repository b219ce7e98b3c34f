"""Planar constructions for curvature-bounded boundary headings.

Everything in this module lives in a local 2D plane.  Points and headings
are plain ``(x, y)`` float tuples; headings are unit vectors.  Angles are
radians, counterclockwise positive, so "left" means CCW and "right" means
CW throughout.

The central objects are orientation ranges (a center heading plus a
half-width) and the boundary paths that connect a free-heading start
position to an orientation range at another position:

* a single constant-curvature arc of the minimum radius,
* a two-arc path with tangent circles (the degenerate LSR/RSL Dubins
  path whose straight section has length zero), targeting a range border,
* an arc followed by a straight run into a range border (used when the
  chord is too long for the minimum-radius arc).

All constructions respect a turn budget (total absolute heading change,
normally pi/2) and a minimum turning radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TOL = 1e-9
ANG_TOL = 1e-10
TURN_CAP = math.pi / 2

LEFT = "LEFT"
RIGHT = "RIGHT"

Vec2 = tuple[float, float]


# ---------------------------------------------------------------------------
# small vector helpers
# ---------------------------------------------------------------------------

def unit(v: Vec2) -> Vec2:
    n = math.hypot(v[0], v[1])
    if n < TOL:
        raise ValueError("cannot normalize near-zero vector")
    return (v[0] / n, v[1] / n)


def rot90(v: Vec2) -> Vec2:
    """CCW quarter turn."""
    return (-v[1], v[0])


def rot270(v: Vec2) -> Vec2:
    """CW quarter turn."""
    return (v[1], -v[0])


def rot(v: Vec2, a: float) -> Vec2:
    c, s = math.cos(a), math.sin(a)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def dot(a: Vec2, b: Vec2) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: Vec2, b: Vec2) -> float:
    return a[0] * b[1] - a[1] * b[0]


def sub(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] - b[0], a[1] - b[1])


def add(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] + b[0], a[1] + b[1])


def scale(a: Vec2, s: float) -> Vec2:
    return (a[0] * s, a[1] * s)


def dist(a: Vec2, b: Vec2) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def signed_angle(a: Vec2, b: Vec2) -> float:
    """Signed angle rotating a onto b, CCW positive, in (-pi, pi]."""
    return math.atan2(cross(a, b), dot(a, b))


def ccw_span(a: Vec2, b: Vec2) -> float:
    """CCW rotation amount from a to b in [0, 2*pi)."""
    ang = signed_angle(a, b)
    if ang < -ANG_TOL:
        ang += 2.0 * math.pi
    return max(0.0, ang)


def cw_span(a: Vec2, b: Vec2) -> float:
    """CW rotation amount from a to b in [0, 2*pi)."""
    ang = signed_angle(a, b)
    if ang > ANG_TOL:
        ang -= 2.0 * math.pi
    return max(0.0, -ang)


# ---------------------------------------------------------------------------
# orientation ranges
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrientationRange2D:
    """A cone of admissible headings: center ``o`` and half-width ``beta``.

    ``o`` must be a unit vector, ``beta`` in [0, pi/2].
    """

    o: Vec2
    beta: float

    def __post_init__(self):
        n = math.hypot(self.o[0], self.o[1])
        if abs(n - 1.0) > 1e-9:
            object.__setattr__(self, "o", (self.o[0] / n, self.o[1] / n))
        if not (-1e-12 <= self.beta <= math.pi / 2 + 1e-9):
            raise ValueError(f"beta out of range: {self.beta}")

    @property
    def left_border(self) -> Vec2:
        return rot(self.o, self.beta)

    @property
    def right_border(self) -> Vec2:
        return rot(self.o, -self.beta)


def range_distance(o: Vec2, phi: OrientationRange2D) -> float:
    """Signed angular excess of heading ``o`` outside range ``phi``.

    Zero when o lies inside the range (closed).  Positive values measure
    how far o sits beyond the left (CCW) border, negative values how far
    beyond the right (CW) border.
    """
    delta = signed_angle(phi.o, o)
    if delta > phi.beta:
        return delta - phi.beta
    if delta < -phi.beta:
        return delta + phi.beta
    return 0.0


def make_range(o_l: Vec2, o_r: Vec2) -> OrientationRange2D:
    """Range spanning from right border ``o_r`` CCW to left border ``o_l``."""
    s = add(o_l, o_r)
    n = math.hypot(s[0], s[1])
    if n < 1e-9:
        raise ValueError("borders are opposite; range center undefined")
    center = (s[0] / n, s[1] / n)
    beta = math.acos(max(-1.0, min(1.0, dot(center, o_l))))
    return OrientationRange2D(center, beta)


# ---------------------------------------------------------------------------
# boundary paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathPiece:
    """One primitive of a boundary path.

    ``kind`` is "arc" (center, radius, signed turn; + is CCW) or
    "straight" (length along the current heading).
    """

    kind: str
    center: Vec2 | None = None
    radius: float = 0.0
    turn: float = 0.0
    length: float = 0.0


@dataclass(frozen=True)
class DubinsBoundaryPath:
    """A constructed boundary connection with its primitives.

    ``kind`` is one of ARC_LEFT, ARC_RIGHT, LSR, RSL (composites keep the
    Dubins name even when a section degenerates to zero length).
    """

    kind: str
    start_point: Vec2
    start_heading: Vec2
    end_point: Vec2
    end_heading: Vec2
    pieces: tuple[PathPiece, ...]

    @property
    def total_turn(self) -> float:
        return sum(abs(p.turn) for p in self.pieces if p.kind == "arc")

    @property
    def length(self) -> float:
        total = 0.0
        for p in self.pieces:
            total += p.length if p.kind == "straight" else abs(p.turn) * p.radius
        return total


def sample_path(path: DubinsBoundaryPath, step: float) -> list[tuple[Vec2, Vec2]]:
    """Sample (point, heading) pairs along a path at spacing <= step."""
    out = [(path.start_point, path.start_heading)]
    p, h = path.start_point, path.start_heading
    for piece in path.pieces:
        if piece.kind == "straight":
            n = max(1, math.ceil(piece.length / step))
            for k in range(1, n + 1):
                out.append((add(p, scale(h, piece.length * k / n)), h))
            p = out[-1][0]
        else:
            radial = sub(p, piece.center)
            n = max(1, math.ceil(abs(piece.turn) * piece.radius / step))
            for k in range(1, n + 1):
                a = piece.turn * k / n
                rp = rot(radial, a)
                hp = rot(h, a)
                out.append((add(piece.center, rp), hp))
            p, h = out[-1]
    return out


def _arc_path(p_a: Vec2, p_b: Vec2, center: Vec2, radius: float, turn: float) -> DubinsBoundaryPath:
    kind = "ARC_LEFT" if turn >= 0 else "ARC_RIGHT"
    tangent = rot90 if turn >= 0 else rot270
    h_a = tangent(unit(sub(p_a, center)))
    h_b = tangent(unit(sub(p_b, center)))
    piece = PathPiece("arc", center=center, radius=radius, turn=turn)
    return DubinsBoundaryPath(kind, p_a, h_a, p_b, h_b, (piece,))


def arc_connect(p_a: Vec2, p_b: Vec2, r_min: float, side: str,
                turn_cap: float = TURN_CAP) -> DubinsBoundaryPath | None:
    """Single arc of radius exactly r_min through p_a and p_b.

    ``side`` is the turn direction (LEFT = CCW).  Returns None when the
    chord exceeds the diameter, when the arc's turn exceeds the cap, or
    when the points coincide.
    """
    d = dist(p_a, p_b)
    if d < TOL:
        return None
    if d > 2.0 * r_min:
        return None
    theta = 2.0 * math.asin(min(1.0, d / (2.0 * r_min)))
    if theta > turn_cap + 1e-9:
        return None
    mid = scale(add(p_a, p_b), 0.5)
    h = math.sqrt(max(0.0, r_min * r_min - 0.25 * d * d))
    chord = unit(sub(p_b, p_a))
    # CCW arc keeps its center on the left of the chord.
    offset = rot90(chord) if side == LEFT else rot270(chord)
    center = add(mid, scale(offset, h))
    turn = theta if side == LEFT else -theta
    return _arc_path(p_a, p_b, center, r_min, turn)


def _tangent_arcs_to_pose(p_a: Vec2, p_b: Vec2, h_b: Vec2, r: float,
                          first: str, turn_cap: float) -> DubinsBoundaryPath | None:
    """Two tangent arcs from p_a into the pose (p_b, h_b).

    ``first`` = LEFT builds the LSR shape (CCW arc, then CW arc into the
    pose); RIGHT builds RSL.  The circles are tangent, i.e. the straight
    Dubins section has length zero.  Uses the law-of-cosines triangle with
    sides (r, 2r, |p_a - c2|).
    """
    if first == LEFT:
        c2 = add(p_b, scale(rot270(h_b), r))
        sgn = 1.0
        kind = "LSR"
    else:
        c2 = add(p_b, scale(rot90(h_b), r))
        sgn = -1.0
        kind = "RSL"
    d2 = dist(p_a, c2)
    if d2 < r - TOL or d2 > 3.0 * r + TOL:
        return None
    d2 = max(d2, r)
    cos_g = (d2 * d2 - 3.0 * r * r) / (2.0 * r * d2)
    gamma = math.acos(max(-1.0, min(1.0, cos_g)))
    u = unit(sub(c2, p_a))

    best = None
    for sigma in (1.0, -1.0):
        c1 = add(p_a, scale(rot(u, sigma * gamma), r))
        tm = scale(add(c1, c2), 0.5)
        if first == LEFT:
            t1 = ccw_span(unit(sub(p_a, c1)), unit(sub(tm, c1)))
            t2 = cw_span(unit(sub(tm, c2)), unit(sub(p_b, c2)))
        else:
            t1 = cw_span(unit(sub(p_a, c1)), unit(sub(tm, c1)))
            t2 = ccw_span(unit(sub(tm, c2)), unit(sub(p_b, c2)))
        total = t1 + t2
        if total > turn_cap + 1e-9:
            continue
        if best is None or total < best[0]:
            best = (total, c1, tm, t1, t2)
    if best is None:
        return None
    _, c1, tm, t1, t2 = best
    tangent = rot90 if first == LEFT else rot270
    h_a = tangent(unit(sub(p_a, c1)))
    pieces = (
        PathPiece("arc", center=c1, radius=r, turn=sgn * t1),
        PathPiece("arc", center=c2, radius=r, turn=-sgn * t2),
    )
    return DubinsBoundaryPath(kind, p_a, h_a, p_b, h_b, pieces)


def _arc_line_to_pose(p_a: Vec2, p_b: Vec2, h_b: Vec2, r: float,
                      first: str, turn_cap: float) -> DubinsBoundaryPath | None:
    """Arc of radius r from p_a, then a straight run into (p_b, h_b).

    Used when the chord is too long for the single r-arc.  ``first`` is
    the arc's turn direction.  Degenerates to the pure straight connection
    when p_a already sits on the arrival line.
    """
    offside = rot90 if first == LEFT else rot270
    q0 = add(p_b, scale(offside(h_b), r))
    v = sub(p_a, q0)
    b = dot(v, h_b)
    disc = b * b - (dot(v, v) - r * r)
    if disc < 0.0:
        return None
    best = None
    for root in (-b + math.sqrt(disc), -b - math.sqrt(disc)):
        s = root
        if s < -TOL:
            continue
        s = max(0.0, s)
        # circle tangent to the arrival line at p_b - s*h_b
        c1 = add(q0, scale(h_b, -s))
        tangent = rot90 if first == LEFT else rot270
        h_a = tangent(unit(sub(p_a, c1)))
        span = ccw_span(h_a, h_b) if first == LEFT else cw_span(h_a, h_b)
        if span > turn_cap + 1e-9:
            continue
        if best is None or span > best[0]:
            best = (span, s, c1, h_a)
    if best is None:
        return None
    span, s, c1, h_a = best
    turn = span if first == LEFT else -span
    pieces = []
    if span > ANG_TOL:
        pieces.append(PathPiece("arc", center=c1, radius=r, turn=turn))
    if s > TOL:
        pieces.append(PathPiece("straight", length=s))
    if not pieces:
        pieces.append(PathPiece("straight", length=0.0))
    kind = "LSR" if first == LEFT else "RSL"
    return DubinsBoundaryPath(kind, p_a, h_a, p_b, h_b, tuple(pieces))


# status values for the sweep in the propagation module
OK = "ok"
BEYOND = "beyond"
NONE = "none"


def _rightmost_flow(p_i: Vec2, phi_next: OrientationRange2D, p_next: Vec2,
                    r_min: float, turn_cap: float) -> tuple[str, DubinsBoundaryPath | None]:
    """Rightmost (most clockwise) start heading reaching phi_next at p_next.

    Returns (status, path).  BEYOND means even the most counterclockwise
    arrival falls right of the range, so the range is unreachable from
    this and any position further clockwise along the sweep axis.
    """
    arc = arc_connect(p_i, p_next, r_min, LEFT, turn_cap)
    if arc is not None:
        eps = range_distance(arc.end_heading, phi_next)
        if eps < -ANG_TOL:
            return BEYOND, None
        if eps <= ANG_TOL:
            return OK, arc
        border = phi_next.left_border
        path = _tangent_arcs_to_pose(p_i, p_next, border, r_min, LEFT, turn_cap)
        if path is None:
            path = _arc_line_to_pose(p_i, p_next, border, r_min, LEFT, turn_cap)
        return (OK, path) if path is not None else (NONE, None)

    # Chord beyond the r_min arc's reach: aim a left arc plus straight at a
    # range border; prefer the more clockwise feasible start.
    best = None
    for border in (phi_next.right_border, phi_next.left_border):
        path = _tangent_arcs_to_pose(p_i, p_next, border, r_min, LEFT, turn_cap)
        if path is None:
            path = _arc_line_to_pose(p_i, p_next, border, r_min, LEFT, turn_cap)
        if path is None:
            continue
        if best is None or signed_angle(best.start_heading, path.start_heading) < 0.0:
            best = path
    return (OK, best) if best is not None else (NONE, None)


def _reflect_point(p: Vec2) -> Vec2:
    return (p[0], -p[1])


def _reflect_range(phi: OrientationRange2D) -> OrientationRange2D:
    return OrientationRange2D((phi.o[0], -phi.o[1]), phi.beta)


def _reflect_path(path: DubinsBoundaryPath) -> DubinsBoundaryPath:
    swap = {"ARC_LEFT": "ARC_RIGHT", "ARC_RIGHT": "ARC_LEFT", "LSR": "RSL", "RSL": "LSR"}
    pieces = tuple(
        PathPiece(p.kind,
                  center=None if p.center is None else _reflect_point(p.center),
                  radius=p.radius, turn=-p.turn, length=p.length)
        for p in path.pieces
    )
    return DubinsBoundaryPath(
        swap[path.kind],
        _reflect_point(path.start_point), _reflect_point(path.start_heading),
        _reflect_point(path.end_point), _reflect_point(path.end_heading),
        pieces,
    )


def _leftmost_flow(p_i: Vec2, phi_next: OrientationRange2D, p_next: Vec2,
                   r_min: float, turn_cap: float) -> tuple[str, DubinsBoundaryPath | None]:
    """Mirror of _rightmost_flow: most counterclockwise feasible start."""
    status, path = _rightmost_flow(
        _reflect_point(p_i), _reflect_range(phi_next), _reflect_point(p_next),
        r_min, turn_cap)
    return status, None if path is None else _reflect_path(path)


def rightmost_orientation_lsr(p_i: Vec2, phi_next: OrientationRange2D, p_next: Vec2,
                              r_min: float, turn_cap: float = TURN_CAP
                              ) -> DubinsBoundaryPath | None:
    """Boundary path realizing the most clockwise start heading at p_i
    from which some heading inside phi_next at p_next stays reachable."""
    status, path = _rightmost_flow(p_i, phi_next, p_next, r_min, turn_cap)
    return path if status == OK else None


def leftmost_orientation_rsl(p_i: Vec2, phi_next: OrientationRange2D, p_next: Vec2,
                             r_min: float, turn_cap: float = TURN_CAP
                             ) -> DubinsBoundaryPath | None:
    """Mirror of rightmost_orientation_lsr (most counterclockwise start)."""
    status, path = _leftmost_flow(p_i, phi_next, p_next, r_min, turn_cap)
    return path if status == OK else None


# ---------------------------------------------------------------------------
# backward reachable workspace
# ---------------------------------------------------------------------------

def _inside_left_wall(x: float, y: float, r: float, turn_cap: float) -> bool:
    """Local test in the frame where the left border heading is +y at the
    origin.  The wall is the backward r-arc (sweeping up to the cap) plus
    its tangent ray; inside means on or right of the wall and behind the
    pose."""
    if y > TOL:
        return False
    y_arc_end = -r * math.sin(turn_cap)
    if y >= y_arc_end:
        return x >= -r + math.sqrt(max(0.0, r * r - y * y)) - TOL
    c = math.cos(turn_cap)
    if c <= 1e-12:
        return True  # cap = pi/2: the wall ray is lateral, everything deeper is inside
    t = (y_arc_end - y) / c
    x_wall = -r * (1.0 - c) - t * math.sin(turn_cap)
    return x >= x_wall - TOL


def _frame_coords(rel: Vec2, heading: Vec2) -> tuple[float, float]:
    """Coordinates of rel in the frame whose +y axis is ``heading``."""
    ex = rot270(heading)
    return dot(rel, ex), dot(rel, heading)


def _inside_single_trumpet(rel: Vec2, heading: Vec2, r: float, cap: float) -> bool:
    x, y = _frame_coords(rel, heading)
    return _inside_left_wall(x, y, r, cap) and _inside_left_wall(-x, y, r, cap)


def in_backward_workspace(p_i: Vec2, phi_next: OrientationRange2D, p_next: Vec2,
                          r_min: float, turn_cap: float = TURN_CAP) -> bool:
    """True when p_i can reach some heading of phi_next at p_next, i.e.
    lies in the union of the single-heading trumpets over the range
    (boundary inclusive).

    Near the pose the union is wider than the region between the two
    border-heading walls alone, so the test sweeps the heading parameter
    t across the range.  Restricted to frames where the point sits behind
    the pose, the left-wall check is monotone decreasing in t and the
    right-wall check monotone increasing, so bisection is exact.  The
    behind-the-pose frames form an analytic interval because the frame
    depth is a pure cosine in t.
    """
    rel = sub(p_i, p_next)
    beta = phi_next.beta

    def inside_left(t: float) -> bool:
        x, y = _frame_coords(rel, rot(phi_next.o, t))
        return _inside_left_wall(x, min(y, 0.0), r_min, turn_cap)

    def inside_right(t: float) -> bool:
        x, y = _frame_coords(rel, rot(phi_next.o, t))
        return _inside_left_wall(-x, min(y, 0.0), r_min, turn_cap)

    # frame depth y(t) = C cos(t - t_star) must be <= 0
    a0 = dot(rel, phi_next.o)
    b0 = dot(rel, rot90(phi_next.o))
    c_amp = math.hypot(a0, b0)
    if c_amp < TOL:
        return True  # at the pose itself
    t_star = math.atan2(b0, a0)
    pieces = []
    for k in (-1.0, 0.0, 1.0):
        lo = t_star + math.pi / 2 + 2.0 * math.pi * k
        hi = t_star + 3.0 * math.pi / 2 + 2.0 * math.pi * k
        lo, hi = max(lo, -beta), min(hi, beta)
        if lo <= hi:
            pieces.append((lo, hi))

    for tl, th in pieces:
        if not inside_left(tl):
            continue  # left test is decreasing: false at tl means false on the piece
        if not inside_right(th):
            continue
        # largest t with the left test passing
        if inside_left(th):
            t_a = th
        else:
            lo, hi = tl, th
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                if inside_left(mid):
                    lo = mid
                else:
                    hi = mid
            t_a = lo
        # smallest t with the right test passing
        if inside_right(tl):
            t_b = tl
        else:
            lo, hi = tl, th
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                if inside_right(mid):
                    hi = mid
                else:
                    lo = mid
            t_b = hi
        if t_b <= t_a + 1e-9:
            return True
    return False


def _ray_exit_single(rel: Vec2, direction: Vec2, heading: Vec2, r: float,
                     cap: float) -> float:
    """Distance along ``direction`` from rel (pose-relative) to the wall of
    the single-heading trumpet.  0 when outside, inf when the ray stays
    inside forever."""
    x0, y0 = _frame_coords(rel, heading)
    dx0, dy0 = _frame_coords(direction, heading)
    if not (_inside_left_wall(x0, y0, r, cap) and _inside_left_wall(-x0, y0, r, cap)):
        return 0.0

    best = math.inf

    def wall_hits(px, py, dx, dy):
        nonlocal best
        # wall arc: circle center (-r, 0), wall is its right half down to
        # the cap depth
        fx, fy = px + r, py
        b = fx * dx + fy * dy
        c = fx * fx + fy * fy - r * r
        disc = b * b - c
        if disc >= 0.0:
            sq = math.sqrt(disc)
            for t in (-b - sq, -b + sq):
                if t < -TOL:
                    continue
                yy = py + t * dy
                xx = px + t * dx
                if -r * math.sin(cap) - 1e-9 <= yy <= 1e-9 and xx >= -r - 1e-9:
                    best = min(best, max(0.0, t))
        # tangent ray beyond the arc end
        cap_c, cap_s = math.cos(cap), math.sin(cap)
        ex0, ey0 = -r * (1.0 - cap_c), -r * cap_s
        rdx, rdy = -cap_s, -cap_c
        den = dx * (-rdy) - dy * (-rdx)
        if abs(den) > 1e-15:
            t = ((ex0 - px) * (-rdy) + (ey0 - py) * rdx) / den
            u = (dx * (ey0 - py) - dy * (ex0 - px)) / den
            if t >= -TOL and u >= -TOL:
                best = min(best, max(0.0, t))

    wall_hits(x0, y0, dx0, dy0)          # left wall
    wall_hits(-x0, y0, -dx0, dy0)        # right wall, mirrored
    if dy0 > 1e-15:                      # front boundary y = 0
        t = -y0 / dy0
        if t >= -TOL:
            best = min(best, max(0.0, t))
    return best


def lateral_workspace_extent(p: Vec2, direction: Vec2, phi: OrientationRange2D,
                             p_next: Vec2, r_min: float,
                             turn_cap: float = TURN_CAP,
                             n_headings: int = 17,
                             max_extent_factor: float = 4.0) -> float:
    """How far p can slide along ``direction`` while staying inside the
    backward workspace of phi at p_next.

    Evaluated as the best single-heading trumpet exit over a heading grid
    across the range (a slight under-estimate between grid points, which
    errs conservative).  Capped at ``max_extent_factor * r_min``.
    """
    rel = sub(p, p_next)
    cap_len = max_extent_factor * r_min
    if phi.beta == 0.0 or n_headings <= 1:
        return min(cap_len, _ray_exit_single(rel, direction, phi.o, r_min, turn_cap))

    def exit_at(t: float) -> float:
        return _ray_exit_single(rel, direction, rot(phi.o, t), r_min, turn_cap)

    ts = [-phi.beta + 2.0 * phi.beta * k / (n_headings - 1)
          for k in range(n_headings)]
    vals = [exit_at(t) for t in ts]
    best_k = max(range(n_headings), key=lambda k: vals[k])
    best = vals[best_k]
    if best >= cap_len:
        return cap_len
    # golden-section polish around the best grid heading
    lo = ts[max(0, best_k - 1)]
    hi = ts[min(n_headings - 1, best_k + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = exit_at(c), exit_at(d)
    for _ in range(40):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = exit_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = exit_at(d)
    best = max(best, fc, fd)
    return min(best, cap_len)
