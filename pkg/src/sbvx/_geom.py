"""Planar geometric primitives: segment/disk clipping, triangle-disk areas,
segment intersection tests, convex hulls.

Everything here is exact up to floating point; no sampling. Segment arrays
are stored as (n, 2) endpoint pairs.
"""
from __future__ import annotations

import numpy as np

EPS = 1e-12


def seg_lengths(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean lengths of segments a[i] -> b[i]."""
    return np.linalg.norm(np.asarray(b) - np.asarray(a), axis=-1)


def segment_disk_length(a, b, center, radius) -> np.ndarray:
    """Length of (segment a->b) ∩ (closed disk) for each segment.

    Solves |a + t(b-a) - c|^2 = r^2 and clamps the inside interval to [0,1].
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.asarray(center, dtype=float)
    d = b - a
    f = a - c
    A = np.einsum("ij,ij->i", d, d)
    B = 2.0 * np.einsum("ij,ij->i", f, d)
    C = np.einsum("ij,ij->i", f, f) - radius**2
    disc = B * B - 4.0 * A * C
    out = np.zeros(len(a))
    ok = (disc > 0) & (A > EPS)
    if np.any(ok):
        sq = np.sqrt(disc[ok])
        t1 = (-B[ok] - sq) / (2.0 * A[ok])
        t2 = (-B[ok] + sq) / (2.0 * A[ok])
        lo = np.clip(t1, 0.0, 1.0)
        hi = np.clip(t2, 0.0, 1.0)
        out[ok] = (hi - lo) * np.sqrt(A[ok])
    # degenerate zero-length segments contribute nothing
    return out


def segment_annulus_length(a, b, center, r_outer, r_inner) -> np.ndarray:
    """Length of segment ∩ (closed annulus r_inner <= |x-c| <= r_outer)."""
    return segment_disk_length(a, b, center, r_outer) - segment_disk_length(
        a, b, center, r_inner
    )


def clip_segments_outside_disk(a, b, center, radius):
    """Return the parts of segments a->b lying outside the open disk.

    Output is a pair (a2, b2) of arrays; each input segment contributes 0, 1
    or 2 sub-segments. Sub-segments shorter than EPS are dropped.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.asarray(center, dtype=float)
    keep_a, keep_b = [], []
    d = b - a
    f = a - c
    A = np.einsum("ij,ij->i", d, d)
    B = 2.0 * np.einsum("ij,ij->i", f, d)
    C = np.einsum("ij,ij->i", f, f) - radius**2
    disc = B * B - 4.0 * A * C
    for i in range(len(a)):
        if A[i] <= EPS:
            continue
        if disc[i] <= 0:
            keep_a.append(a[i])
            keep_b.append(b[i])
            continue
        sq = np.sqrt(disc[i])
        t1 = (-B[i] - sq) / (2.0 * A[i])
        t2 = (-B[i] + sq) / (2.0 * A[i])
        lo, hi = max(t1, 0.0), min(t2, 1.0)
        if hi <= lo:
            keep_a.append(a[i])
            keep_b.append(b[i])
            continue
        L = np.sqrt(A[i])
        if lo * L > EPS:
            keep_a.append(a[i])
            keep_b.append(a[i] + lo * d[i])
        if (1.0 - hi) * L > EPS:
            keep_a.append(a[i] + hi * d[i])
            keep_b.append(b[i])
    if not keep_a:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.asarray(keep_a), np.asarray(keep_b)


def clip_segments_to_disk(a, b, center, radius):
    """Return the parts of segments a->b inside the closed disk."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.asarray(center, dtype=float)
    keep_a, keep_b = [], []
    d = b - a
    f = a - c
    A = np.einsum("ij,ij->i", d, d)
    B = 2.0 * np.einsum("ij,ij->i", f, d)
    C = np.einsum("ij,ij->i", f, f) - radius**2
    disc = B * B - 4.0 * A * C
    for i in range(len(a)):
        if A[i] <= EPS or disc[i] <= 0:
            continue
        sq = np.sqrt(disc[i])
        t1 = (-B[i] - sq) / (2.0 * A[i])
        t2 = (-B[i] + sq) / (2.0 * A[i])
        lo, hi = max(t1, 0.0), min(t2, 1.0)
        if (hi - lo) * np.sqrt(A[i]) > EPS:
            keep_a.append(a[i] + lo * d[i])
            keep_b.append(a[i] + hi * d[i])
    if not keep_a:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.asarray(keep_a), np.asarray(keep_b)


def point_segment_distance(x, a, b) -> np.ndarray:
    """Distances from points x (m,2) to segments (a,b) (n,2): result (m,n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d = b - a  # (n,2)
    L2 = np.maximum(np.einsum("ij,ij->i", d, d), EPS**2)
    w = x[:, None, :] - a[None, :, :]  # (m,n,2)
    t = np.clip(np.einsum("mnj,nj->mn", w, d) / L2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * d[None, :, :]
    return np.linalg.norm(x[:, None, :] - proj, axis=-1)


def segments_intersect(p0, p1, q0, q1, tol: float = EPS) -> np.ndarray:
    """Whether segment p0->p1 intersects each segment q0[i]->q1[i].

    Touching configurations (endpoint on the other segment) count as
    intersections; collinear overlap counts too.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    r = p1 - p0
    s = q1 - q0  # (n,2)
    denom = r[0] * s[:, 1] - r[1] * s[:, 0]
    qp = q0 - p0  # (n,2)
    t_num = qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]
    u_num = qp[:, 0] * r[1] - qp[:, 1] * r[0]
    out = np.zeros(len(q0), dtype=bool)
    nonpar = np.abs(denom) > tol
    if np.any(nonpar):
        t = t_num[nonpar] / denom[nonpar]
        u = u_num[nonpar] / denom[nonpar]
        out[nonpar] = (t >= -tol) & (t <= 1 + tol) & (u >= -tol) & (u <= 1 + tol)
    par = ~nonpar
    if np.any(par):
        # parallel: intersect iff collinear and 1D intervals overlap
        coll = par & (np.abs(t_num) <= tol * (1 + np.abs(qp).max()))
        if np.any(coll):
            rr = max(float(r @ r), EPS)
            t0 = (qp[coll] @ r) / rr
            t1v = t0 + (s[coll] @ r) / rr
            lo = np.minimum(t0, t1v)
            hi = np.maximum(t0, t1v)
            out[coll] = (hi >= -tol) & (lo <= 1 + tol)
    return out


def triangle_areas(v0, v1, v2) -> np.ndarray:
    """Unsigned areas of triangles."""
    v0, v1, v2 = (np.atleast_2d(np.asarray(v)) for v in (v0, v1, v2))
    cr = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (
        v1[:, 1] - v0[:, 1]
    )
    return 0.5 * np.abs(cr)


def polygon_area(pts: np.ndarray) -> float:
    """Shoelace area of a simple polygon (vertices in order)."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_disk_area(pts: np.ndarray, center, radius: float) -> float:
    """Exact area of (simple ccw polygon) ∩ (disk), via Green's theorem.

    Each edge contributes triangle pieces (with the circle centre) where the
    edge runs inside the disk, and circular sectors where it runs outside.
    """
    c = np.asarray(center, dtype=float)
    p = np.asarray(pts, dtype=float) - c
    # force ccw
    x, y = p[:, 0], p[:, 1]
    signed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    if signed < 0:
        p = p[::-1]
    n = len(p)
    r2 = radius * radius
    total = 0.0
    for i in range(n):
        A = p[i]
        B = p[(i + 1) % n]
        d = B - A
        dd = float(d @ d)
        if dd <= EPS * EPS:
            continue
        # circle intersections on the edge
        bq = 2.0 * float(A @ d)
        cq = float(A @ A) - r2
        disc = bq * bq - 4.0 * dd * cq
        ts = [0.0, 1.0]
        if disc > 0:
            sq = np.sqrt(disc)
            for t in ((-bq - sq) / (2 * dd), (-bq + sq) / (2 * dd)):
                if 0.0 < t < 1.0:
                    ts.append(t)
        ts = sorted(ts)
        for t0, t1 in zip(ts[:-1], ts[1:]):
            if t1 - t0 <= EPS:
                continue
            P = A + t0 * d
            Q = A + t1 * d
            mid = A + 0.5 * (t0 + t1) * d
            if float(mid @ mid) <= r2:
                total += 0.5 * (P[0] * Q[1] - P[1] * Q[0])
            else:
                a0 = np.arctan2(P[1], P[0])
                a1 = np.arctan2(Q[1], Q[0])
                da = a1 - a0
                if da > np.pi:
                    da -= 2 * np.pi
                elif da < -np.pi:
                    da += 2 * np.pi
                total += 0.5 * r2 * da
    return abs(total)


def tri_disk_area(v0, v1, v2, center, radius: float) -> float:
    """Exact area of triangle ∩ disk."""
    return polygon_disk_area(np.array([v0, v1, v2], dtype=float), center, radius)


def circular_segment_area(radius: float, chord_p0, chord_p1, center) -> float:
    """Area of the circular segment cut by chord p0-p1 (minor side)."""
    c = np.asarray(center, dtype=float)
    a0 = np.arctan2(*(np.asarray(chord_p0) - c)[::-1])
    a1 = np.arctan2(*(np.asarray(chord_p1) - c)[::-1])
    da = abs(a1 - a0)
    if da > np.pi:
        da = 2 * np.pi - da
    return 0.5 * radius * radius * (da - np.sin(da))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices in ccw order."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list = []
    for q in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.asarray(lower[:-1] + upper[:-1])


def points_in_convex_polygon(x: np.ndarray, poly: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Membership of points x (m,2) in a ccw convex polygon."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e0 = poly
    e1 = np.roll(poly, -1, axis=0)
    d = e1 - e0  # (p,2)
    w = x[:, None, :] - e0[None, :, :]  # (m,p,2)
    cr = d[None, :, 0] * w[:, :, 1] - d[None, :, 1] * w[:, :, 0]
    return np.all(cr >= -tol, axis=1)


def hull_of_disks(centers: np.ndarray, radii: np.ndarray, narc: int = 48) -> np.ndarray:
    """Polygonal convex hull of a union of disks (narc points per circle)."""
    th = np.linspace(0.0, 2 * np.pi, narc, endpoint=False)
    ring = np.stack([np.cos(th), np.sin(th)], axis=1)
    pts = np.concatenate(
        [c + r * ring for c, r in zip(np.atleast_2d(centers), np.atleast_1d(radii))]
    )
    return convex_hull(pts)


def clip_convex_polygons(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of a polygon with a ccw convex clip."""
    out = [np.asarray(v, dtype=float) for v in subject]
    clip = np.asarray(clip, dtype=float)
    n = len(clip)
    for i in range(n):
        if not out:
            return np.zeros((0, 2))
        e0, e1 = clip[i], clip[(i + 1) % n]
        d = e1 - e0
        prev = out[-1]
        prev_in = d[0] * (prev[1] - e0[1]) - d[1] * (prev[0] - e0[0]) >= -EPS
        nxt = []
        for cur in out:
            cur_in = d[0] * (cur[1] - e0[1]) - d[1] * (cur[0] - e0[0]) >= -EPS
            if cur_in != prev_in:
                w = cur - prev
                denom = d[0] * w[1] - d[1] * w[0]
                if abs(denom) > EPS:
                    t = (d[0] * (e0[1] - prev[1]) - d[1] * (e0[0] - prev[0])) / denom
                    nxt.append(prev + np.clip(t, 0.0, 1.0) * w)
            if cur_in:
                nxt.append(cur)
            prev, prev_in = cur, cur_in
        out = nxt
    return np.asarray(out) if out else np.zeros((0, 2))


def stadium_polygon(a, b, width: float, narc: int = 16) -> np.ndarray:
    """Polygonal approximation of {x : dist(x, segment ab) < width}."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    L = np.linalg.norm(d)
    if L <= EPS:
        th = np.linspace(0, 2 * np.pi, 2 * narc, endpoint=False)
        return a + width * np.stack([np.cos(th), np.sin(th)], axis=1)
    t = d / L
    base = np.arctan2(t[1], t[0])
    th_b = base - np.pi / 2 + np.linspace(0, np.pi, narc)
    th_a = base + np.pi / 2 + np.linspace(0, np.pi, narc)
    cap_b = b + width * np.stack([np.cos(th_b), np.sin(th_b)], axis=1)
    cap_a = a + width * np.stack([np.cos(th_a), np.sin(th_a)], axis=1)
    return np.concatenate([cap_b, cap_a])


def polyline_arclength_points(a: np.ndarray, b: np.ndarray, spacing: float) -> np.ndarray:
    """Arc-length-uniform points on a family of segments, spacing <= given."""
    pts = []
    for i in range(len(a)):
        L = float(np.linalg.norm(b[i] - a[i]))
        if L <= EPS:
            continue
        n = max(2, int(np.ceil(L / spacing)) + 1)
        t = np.linspace(0.0, 1.0, n)
        pts.append(a[i] + t[:, None] * (b[i] - a[i]))
    if not pts:
        return np.zeros((0, 2))
    return np.concatenate(pts)
