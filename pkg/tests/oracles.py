"""Independent brute-force oracles for the geometry tests.

Everything here re-derives feasibility from raw path primitives (arcs,
straights) without touching the library's boundary constructions, so the
tests compare two genuinely different computations.
"""

import math

from safestart.geometry2d import OrientationRange2D, range_distance

TWO_PI = 2.0 * math.pi


def rot_v(v, a):
    c, s = math.cos(a), math.sin(a)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def integrate_path(path, substeps=4096):
    """Forward-integrate a DubinsBoundaryPath with plain stepping;
    independent of the closed-form sampling in the library."""
    p = [path.start_point[0], path.start_point[1]]
    h = [path.start_heading[0], path.start_heading[1]]
    for piece in path.pieces:
        if piece.kind == "straight":
            p[0] += h[0] * piece.length
            p[1] += h[1] * piece.length
        else:
            n = max(1, int(abs(piece.turn) / TWO_PI * substeps) * 4)
            da = piece.turn / n
            step = 2.0 * piece.radius * math.sin(abs(da) / 2.0)
            for _ in range(n):
                hm = rot_v(h, da / 2.0)
                p[0] += hm[0] * step
                p[1] += hm[1] * step
                h = list(rot_v(h, da))
    return (p[0], p[1]), (h[0], h[1])


def _arc_between(p_a, h_a, p_b):
    """The unique circle arc leaving (p_a, h_a) and passing through p_b.

    Returns (radius, signed_turn, arrival_heading) or None (straight /
    behind cases handled separately)."""
    dx, dy = p_b[0] - p_a[0], p_b[1] - p_a[1]
    d2 = dx * dx + dy * dy
    if d2 < 1e-24:
        return None
    crossv = h_a[0] * dy - h_a[1] * dx
    dotv = h_a[0] * dx + h_a[1] * dy
    if abs(crossv) < 1e-14:
        if dotv <= 0.0:
            return None
        return (math.inf, 0.0, h_a)  # straight
    radius = d2 / (2.0 * abs(crossv))
    turn = 2.0 * math.atan2(crossv, dotv)
    return (radius, turn, rot_v(h_a, turn))


def path_feasible(p_a, h_a, p_b, phi, r_min, budget=math.pi / 2,
                  radii=(1.0, 1.25, 1.8, 3.0, 8.0), n_turn=121, n_s=17):
    """Brute-force search over discretized 2-arc and arc-line-arc paths
    from the fixed pose (p_a, h_a) to the range phi at p_b.

    All primitives respect radius >= r_min; total turn <= budget.
    """
    d_ab = math.hypot(p_b[0] - p_a[0], p_b[1] - p_a[1])

    def closes(p, h, used):
        res = _arc_between(p, h, p_b)
        if res is None:
            return False
        radius, turn, h_end = res
        if radius < r_min * (1.0 - 1e-9):
            return False
        if used + abs(turn) > budget + 1e-9:
            return False
        return abs(range_distance(h_end, phi)) <= 1e-9

    if closes(p_a, h_a, 0.0):
        return True

    s_grid = [d_ab * k / (n_s - 1) for k in range(n_s)]
    for rad_f in radii:
        r1 = r_min * rad_f
        for k in range(n_turn):
            t1 = -budget + 2.0 * budget * k / (n_turn - 1)
            if abs(t1) < 1e-12:
                continue
            c = (p_a[0] - math.copysign(1.0, t1) * r1 * h_a[1],
                 p_a[1] + math.copysign(1.0, t1) * r1 * h_a[0])
            rel = (p_a[0] - c[0], p_a[1] - c[1])
            rel2 = rot_v(rel, t1)
            p1 = (c[0] + rel2[0], c[1] + rel2[1])
            h1 = rot_v(h_a, t1)
            used = abs(t1)
            if closes(p1, h1, used):
                return True
            for s in s_grid:
                if s <= 0.0:
                    continue
                p2 = (p1[0] + s * h1[0], p1[1] + s * h1[1])
                if closes(p2, h1, used):
                    return True
    return False


def position_reachable(q, p_b, phi, r_min, budget=math.pi / 2, n_headings=181,
                       n_t2=160):
    """Free-start-heading reachability of the range phi at p_b from
    position q, searched over arrival headings and path shapes:
    a single free-radius arc, or a straight run into a final r_min arc.
    """
    for k in range(n_headings):
        t = -phi.beta + 2.0 * phi.beta * k / max(1, n_headings - 1)
        h = rot_v(phi.o, t)
        if _pose_reachable_free_start(q, p_b, h, r_min, budget, n_t2):
            return True
        if phi.beta == 0.0:
            break
    return False


def position_reachable_grid(qs, p_b, phi, r_min, budget=math.pi / 2,
                            n_headings=181, n_t2=240):
    """Vectorized position_reachable over an (N, 2) array of query points."""
    import numpy as np

    qs = np.asarray(qs, dtype=float)
    rel = qs - np.asarray(p_b, dtype=float)
    feasible = np.zeros(len(qs), dtype=bool)
    t2 = np.linspace(1e-9, min(budget, math.pi / 2 - 1e-6), n_t2)
    sin_t2, cos_t2 = np.sin(t2), np.cos(t2)

    ts = [0.0] if phi.beta == 0.0 else list(
        np.linspace(-phi.beta, phi.beta, n_headings))
    for t in ts:
        h = rot_v(phi.o, t)
        ex = (h[1], -h[0])
        x = rel[:, 0] * ex[0] + rel[:, 1] * ex[1]
        y = rel[:, 0] * h[0] + rel[:, 1] * h[1]
        todo = ~feasible
        if not todo.any():
            break
        xs, ys = x[todo], y[todo]
        ok = np.zeros(len(xs), dtype=bool)

        # single free-radius arc tangent to the arrival pose
        ax = np.abs(xs)
        curved = ax > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            R = (xs * xs + ys * ys) / (2.0 * ax)
        cx = np.sign(xs) * R
        a_q = np.arctan2(ys, xs - cx)
        sweep = np.where(cx > 0, (a_q - math.pi) % TWO_PI, (-a_q) % TWO_PI)
        ok |= curved & (R >= r_min * (1.0 - 1e-9)) & (sweep <= budget + 1e-9)
        ok |= (~curved) & (ys < 0.0)

        # straight run, then a final r_min arc (both bending sides);
        # a sign change of the closure residual over the t2 grid means a
        # root (= an exact path) exists between the grid points
        pending = ~ok
        if pending.any():
            xp, yp = xs[pending], ys[pending]
            hit = np.zeros(len(xp), dtype=bool)
            s = (-r_min * sin_t2[None, :] - yp[:, None]) / cos_t2[None, :]
            valid = s >= 0.0
            base = -r_min * (1.0 - cos_t2)[None, :] - s * sin_t2[None, :]
            for sign in (1.0, -1.0):
                g = base - sign * xp[:, None]
                near = valid & (np.abs(g) < 1e-9 * max(1.0, r_min))
                hit |= near.any(axis=1)
                sgn_change = valid[:, 1:] & valid[:, :-1] & (g[:, 1:] * g[:, :-1] < 0.0)
                hit |= sgn_change.any(axis=1)
            ok[pending] = hit
        sub = np.where(todo)[0]
        feasible[sub[ok]] = True
    return feasible


def _pose_reachable_free_start(q, p_b, h_b, r_min, budget, n_t2):
    rel = (q[0] - p_b[0], q[1] - p_b[1])
    ex = (h_b[1], -h_b[0])  # rot270(h_b)
    x = rel[0] * ex[0] + rel[1] * ex[1]
    y = rel[0] * h_b[0] + rel[1] * h_b[1]
    if abs(x) < 1e-12 and abs(y) < 1e-12:
        return True
    # single arc tangent to the arrival pose through q: circle tangent to
    # +y at the origin, center (+-R, 0); the arrival heading fixes the
    # motion direction (CW on the +x circle, CCW on the -x circle)
    if abs(x) > 1e-12:
        R = (x * x + y * y) / (2.0 * abs(x))
        if R >= r_min * (1.0 - 1e-9):
            cx = math.copysign(R, x)
            a_q = math.atan2(y, x - cx)
            a_o = 0.0 if cx < 0 else math.pi
            if cx > 0:
                sweep = (a_q - a_o) % TWO_PI
            else:
                sweep = (a_o - a_q) % TWO_PI
            if sweep <= budget + 1e-9:
                return True
    elif y < 0.0:
        return True  # straight along the axis
    # straight run, then a final r_min arc; root-find the arc sweep t2
    # that lines the backward ray up with q
    t_hi = min(budget, math.pi / 2 - 1e-6)

    def residual(t2, sign):
        s = (-r_min * math.sin(t2) - y) / math.cos(t2)
        if s < 0.0:
            return None
        ax = sign * (-r_min * (1.0 - math.cos(t2)) - s * math.sin(t2))
        return ax - x

    for sign in (1.0, -1.0):
        prev_t, prev_g = None, None
        for k in range(n_t2 + 1):
            t2 = 1e-9 + (t_hi - 1e-9) * k / n_t2
            g = residual(t2, sign)
            if g is not None and abs(g) < 1e-9:
                return True
            if g is not None and prev_g is not None and g * prev_g < 0.0:
                lo, hi, glo = prev_t, t2, prev_g
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    gm = residual(mid, sign)
                    if gm is None:
                        break
                    if gm * glo <= 0.0:
                        hi = mid
                    else:
                        lo, glo = mid, gm
                else:
                    return True
            prev_t, prev_g = t2, g
    return False


def _wrap(a):
    while a > math.pi:
        a -= TWO_PI
    while a < -math.pi:
        a += TWO_PI
    return a
