"""Planar intersection primitives shared by sensing, collision and path code.

All functions are pure numpy and operate in world units. Rays are given by an
origin and a unit direction; "distance" always means the ray parameter t >= 0.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def unit(angle):
    """Unit vector for a heading angle (vectorised over angle)."""
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def ray_disc_hits(origin, dirs, centres, radii):
    """First-hit distances from one origin along many rays against many discs.

    dirs: (R, 2) unit vectors; centres: (M, 2); radii: (M,).
    Returns (R, M) array of hit distances, inf where a ray misses a disc.
    Origins inside a disc report distance 0.
    """
    proj = dirs @ (centres - origin).T                          # (R, M)
    d2 = np.sum((centres - origin) ** 2, axis=-1)[None, :]      # (1, M)
    disc = proj**2 - (d2 - radii[None, :] ** 2)
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, np.maximum(disc, 0.0), 0.0))
    t_near = proj - sq
    t_far = proj + sq
    t = np.where(t_near >= 0, t_near, np.where(t_far >= 0, 0.0, np.inf))
    return np.where(hit & (t_far >= 0), t, np.inf)


def ray_segment_hits(origin, dirs, seg_a, seg_b):
    """Hit distances from one origin along many rays against many segments.

    dirs: (R, 2); seg_a, seg_b: (M, 2) segment endpoints.
    Returns (R, M) distances, inf where no hit.
    """
    if len(seg_a) == 0:
        return np.full((len(dirs), 0), np.inf)
    e = seg_b - seg_a                                           # (M, 2)
    rel = seg_a[None, :, :] - origin[None, None, :]             # (1, M, 2)
    # Solve origin + t*dir = a + s*e for t, s via 2x2 cross products.
    denom = dirs[:, None, 0] * (-e[None, :, 1]) - dirs[:, None, 1] * (-e[None, :, 0])
    rx, ry = rel[..., 0], rel[..., 1]
    t_num = rx * (-e[None, :, 1]) - ry * (-e[None, :, 0])
    s_num = dirs[:, None, 0] * ry - dirs[:, None, 1] * rx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        s = s_num / denom
    ok = (np.abs(denom) > EPS) & (t >= 0) & (s >= -EPS) & (s <= 1 + EPS)
    return np.where(ok, t, np.inf)


def point_segment_distance(p, a, b):
    """Distance from point p to segment [a, b]."""
    e = b - a
    L2 = float(e @ e)
    if L2 < EPS:
        return float(np.linalg.norm(p - a))
    s = float(np.clip((p - a) @ e / L2, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + s * e)))


def move_until_contact(p0, direction, dist, centres, radii, lo, hi):
    """Advance p0 along a unit direction by up to `dist`, stopping at the first
    contact with any disc (centres/radii already inflated by the mover's own
    radius) or with the axis-aligned box [lo, hi]^2.

    Returns the end position; never penetrates a disc or leaves the box.
    """
    t_max = dist
    # Walls: solve p0 + t*d hitting each of the four planes.
    for axis in (0, 1):
        d = direction[axis]
        if d > EPS:
            t_max = min(t_max, (hi - p0[axis]) / d)
        elif d < -EPS:
            t_max = min(t_max, (lo - p0[axis]) / d)
    if len(centres):
        rel = centres - p0
        proj = rel @ direction
        d2 = np.sum(rel * rel, axis=-1)
        disc = proj**2 - (d2 - radii**2)
        mask = disc >= 0
        if mask.any():
            sq = np.sqrt(disc[mask])
            t_near = proj[mask] - sq
            t_far = proj[mask] + sq
            blocking = (t_near >= -EPS) & (t_near <= t_max) & (t_far > 0)
            if blocking.any():
                t_max = min(t_max, float(np.min(np.maximum(t_near[blocking], 0.0))))
    t_max = max(t_max, 0.0)
    end = p0 + direction * t_max
    return np.clip(end, lo, hi)


def segments_properly_cross(p1, q1, p2, q2):
    """True iff open segments (p1,q1) and (p2,q2) cross at a single interior
    point. Endpoint touches and collinear overlaps are not proper crossings;
    collinear overlap is reported via ValueError by callers that need it.
    """
    d1 = _orient(p2, q2, p1)
    d2 = _orient(p2, q2, q1)
    d3 = _orient(p1, q1, p2)
    d4 = _orient(p1, q1, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def collinear_overlap(p1, q1, p2, q2):
    """True iff the two segments are collinear and overlap in more than a point."""
    if _orient(p1, q1, p2) != 0 or _orient(p1, q1, q2) != 0:
        return False
    lo1, hi1 = sorted([tuple(p1), tuple(q1)])
    lo2, hi2 = sorted([tuple(p2), tuple(q2)])
    return max(lo1, lo2) < min(hi1, hi2)
