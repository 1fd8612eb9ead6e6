"""Boundary-refining dyadic triangulation of a disk and its adaptation to a
jump set.

The grid places 2^h vertices on the circle of radius R(1 - 2^-h) for
h = 0..h_max (ring 0 is the centre), stitches consecutive rings into
triangles, and grafts a final polygonal ring onto the boundary circle.
Adaptation perturbs every vertex inside a ball of radius alpha * delta_h so
that no triangle edge meets the jump set and every vertex keeps a positive
clearance from it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geom
from .errors import AdaptationError, JumpBudgetError, SearchExhaustedError, ToolkitError
from .quadrature import Disk
from .sbv2d import DiscreteSbvMap, JumpSet

__all__ = ["DyadicGrid", "AdaptedTriangulation", "build_grid", "select_good_radius", "adapt_to_jump"]

H_MAX_LIMIT = 14
LEBESGUE_CLEARANCE = 1e-3  # times delta_h, distance kept from jump segments


@dataclass(frozen=True)
class DyadicGrid:
    """Dyadic vertex rings, triangle topology, and measured edge constants."""

    R: float
    center: np.ndarray
    h_max: int
    rotation: float
    verts: np.ndarray  # (nv, 2) absolute positions
    ring_of: np.ndarray  # (nv,) ring index; the graft ring reports h_max
    on_boundary: np.ndarray  # (nv,) bool, True for the grafted circle ring
    tris: np.ndarray  # (nt, 3)
    edges: np.ndarray  # (ne, 2) unique vertex pairs
    c1_hat: float
    c2_hat: float
    alpha: float
    min_angle: float
    max_angle: float

    @property
    def delta(self) -> np.ndarray:
        """delta_h = R 2^-h for h = 0..h_max."""
        return self.R * 2.0 ** (-np.arange(self.h_max + 1, dtype=float))

    def ring_radius(self, h: int) -> float:
        return self.R * (1.0 - 2.0**-h)

    def vertex(self, h: int, j: int) -> np.ndarray:
        """Vertex x'_{h,j}, j = 1..2^h (paper indexing)."""
        Rh = self.ring_radius(h)
        ang = 2 * np.pi * j / 2**h + self.rotation
        return self.center + Rh * np.array([np.cos(ang), np.sin(ang)])

    def vertex_delta(self) -> np.ndarray:
        """Perturbation scale delta_h per vertex (graft ring uses delta_hmax)."""
        return self.R * 2.0 ** (-self.ring_of.astype(float))

    def to_json(self) -> dict:
        return {
            "R": self.R,
            "center": self.center.tolist(),
            "h_max": self.h_max,
            "rotation": self.rotation,
            "verts": self.verts.tolist(),
            "ring_of": self.ring_of.tolist(),
            "on_boundary": self.on_boundary.tolist(),
            "tris": self.tris.tolist(),
            "c1_hat": self.c1_hat,
            "c2_hat": self.c2_hat,
            "alpha": self.alpha,
        }


def _ring_points(center, R: float, h: int, rotation: float = 0.0) -> np.ndarray:
    n = 2**h
    j = np.arange(1, n + 1)
    ang = 2 * np.pi * j / n + rotation
    Rh = R * (1.0 - 2.0**-h)
    return center + Rh * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _stitch_doubling(inner_idx, outer_idx):
    """Aligned 3-triangles-per-sector stitch between ring h and ring h+1.

    inner_idx[i] sits at angle 2 pi (i+1)/n; outer_idx[2i+1] is aligned
    under it.
    """
    n = len(inner_idx)
    assert len(outer_idx) == 2 * n
    tris = []
    for i in range(n):
        a0 = inner_idx[i]
        a1 = inner_idx[(i + 1) % n]
        b0 = outer_idx[(2 * i + 1) % (2 * n)]
        b1 = outer_idx[(2 * i + 2) % (2 * n)]
        b2 = outer_idx[(2 * i + 3) % (2 * n)]
        tris += [(a0, b0, b1), (a0, b1, a1), (a1, b1, b2)]
    return tris


def _stitch_graft(inner_idx, outer_idx):
    """Quad split between two aligned rings of equal cardinality."""
    n = len(inner_idx)
    tris = []
    for i in range(n):
        a0, a1 = inner_idx[i], inner_idx[(i + 1) % n]
        d0, d1 = outer_idx[i], outer_idx[(i + 1) % n]
        tris += [(a0, d0, d1), (a0, d1, a1)]
    return tris


def build_grid(R: float, h_max: int, center=(0.0, 0.0), rotation: float = 0.0) -> DyadicGrid:
    """Construct the dyadic grid of B_R with rings h = 0..h_max plus the
    boundary graft ring, and measure its edge-length constants.

    rotation turns the whole vertex pattern rigidly; the adaptation step uses
    it to steer coarse edges away from the jump.
    """
    if not (2 <= h_max <= H_MAX_LIMIT):
        raise ToolkitError(f"h_max must lie in [2, {H_MAX_LIMIT}], got {h_max}")
    if R <= 0:
        raise ToolkitError("R must be positive")
    center = np.asarray(center, dtype=float)

    verts = [center.copy()]
    ring_of = [0]
    ring_index: list[np.ndarray] = [np.array([0])]
    for h in range(1, h_max + 1):
        pts = _ring_points(center, R, h, rotation)
        ring_index.append(np.arange(len(verts), len(verts) + len(pts)))
        verts.extend(pts)
        ring_of.extend([h] * len(pts))
    # graft ring on the boundary circle, aligned with ring h_max
    n_b = 2**h_max
    jb = np.arange(1, n_b + 1)
    ang = 2 * np.pi * jb / n_b + rotation
    bpts = center + R * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    boundary_index = np.arange(len(verts), len(verts) + n_b)
    verts.extend(bpts)
    ring_of.extend([h_max] * n_b)
    verts = np.asarray(verts)
    ring_of = np.asarray(ring_of)
    on_boundary = np.zeros(len(verts), dtype=bool)
    on_boundary[boundary_index] = True

    tris: list = []
    # core: ring-2 square with the centre and the two ring-1 vertices inside.
    c_idx = 0
    p1, p2 = ring_index[1]  # angles pi and 2 pi -> (-R/2, 0), (R/2, 0)
    q1, q2, q3, q4 = ring_index[2]  # angles pi/2, pi, 3pi/2, 2pi
    tris += [
        (q1, q2, p1), (q1, p1, c_idx), (q1, c_idx, p2), (q1, p2, q4),
        (q3, p1, q2), (q3, c_idx, p1), (q3, p2, c_idx), (q3, q4, p2),
    ]
    for h in range(2, h_max):
        tris += _stitch_doubling(ring_index[h], ring_index[h + 1])
    tris += _stitch_graft(ring_index[h_max], boundary_index)
    tris = np.asarray(tris, dtype=int)

    edges = np.unique(np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1), axis=0)
    elen = np.linalg.norm(verts[edges[:, 0]] - verts[edges[:, 1]], axis=1)
    h_edge = np.maximum(ring_of[edges[:, 0]], ring_of[edges[:, 1]])
    delta_edge = R * 2.0 ** (-h_edge.astype(float))
    ratios = elen / delta_edge
    c1_hat = float(ratios.min())
    c2_hat = float(ratios.max())
    alpha = c1_hat / (8.0 * c2_hat)

    v = verts[tris]
    angs = []
    for i in range(3):
        e1 = v[:, (i + 1) % 3] - v[:, i]
        e2 = v[:, (i + 2) % 3] - v[:, i]
        cosang = np.einsum("ij,ij->i", e1, e2) / (
            np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
        )
        angs.append(np.arccos(np.clip(cosang, -1, 1)))
    angs = np.stack(angs)

    return DyadicGrid(
        R=float(R),
        center=center,
        h_max=h_max,
        rotation=float(rotation),
        verts=verts,
        ring_of=ring_of,
        on_boundary=on_boundary,
        tris=tris,
        edges=edges,
        c1_hat=c1_hat,
        c2_hat=c2_hat,
        alpha=alpha,
        min_angle=float(angs.min()),
        max_angle=float(angs.max()),
    )


def select_good_radius(
    J: JumpSet,
    r: float,
    eta: float,
    trials: int = 64,
    seed: int = 0,
    center=(0.0, 0.0),
    h_max: int = 8,
    annulus_multiplier: float = 10.0,
) -> float:
    """Sample R in (r, 2r) until the jump misses the circle entirely and every
    dyadic boundary annulus carries less than multiplier * eta * delta_h of
    jump length.

    For polyline jumps the measure-zero condition on the circle is exactly
    "no crossing at the sampled radius", which we enforce outright: it is
    what the edge-avoidance of the graft ring needs.
    """
    center = np.asarray(center, dtype=float)
    budget = J.length_in(Disk(tuple(center), 2 * r)) if len(J) else 0.0
    if budget >= eta * 2 * r:
        raise JumpBudgetError(
            f"H1(J ∩ B_2r) = {budget:.6g} exceeds the smallness bound {eta * 2 * r:.6g}"
        )
    rng = np.random.default_rng(seed)
    worst_h = None
    for _ in range(trials):
        R = float(rng.uniform(r, 2 * r))
        if len(J):
            din = np.linalg.norm(J.a - center, axis=1)
            dout = np.linalg.norm(J.b - center, axis=1)
            # a segment crosses the circle iff its endpoint radii straddle R
            # or its closest approach dips under R while an endpoint is outside
            close = _geom.point_segment_distance(center[None, :], J.a, J.b)[0]
            crosses = ((din - R) * (dout - R) < 0) | (
                (close < R) & ((din > R) | (dout > R))
            )
            if np.any(crosses):
                continue
        ok = True
        for h in range(h_max + 1):
            delta_h = R * 2.0**-h
            ann_len = (
                J.length_in(Disk(tuple(center), R))
                - J.length_in(Disk(tuple(center), R - delta_h))
                if len(J)
                else 0.0
            )
            if ann_len >= annulus_multiplier * eta * delta_h:
                ok = False
                worst_h = h
                break
        if ok:
            return R
    raise SearchExhaustedError(
        f"no good radius found in {trials} samples (last violation at h = {worst_h})",
        violating_h=worst_h,
    )


@dataclass(frozen=True)
class AdaptedTriangulation:
    """Perturbed-vertex triangulation avoiding a jump set, with envelope and
    edge diagnostics."""

    base: DyadicGrid
    verts: np.ndarray  # perturbed positions, same indexing as base.verts
    tris: np.ndarray
    perturbation_ratio_max: float
    envelopes: list = field(repr=False)  # per-triangle hull polygons of the base balls
    kappa_hat: int = 0
    lambda_stats: dict = field(default_factory=dict)
    edge_stats: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def envelope_areas(self) -> np.ndarray:
        return np.array([_geom.polygon_area(e) for e in self.envelopes])

    def to_json(self) -> dict:
        return {
            "base": self.base.to_json(),
            "verts": self.verts.tolist(),
            "tris": self.tris.tolist(),
            "envelopes": [e.tolist() for e in self.envelopes],
            "kappa_hat": self.kappa_hat,
            "lambda_stats": self.lambda_stats,
            "perturbation_ratio_max": self.perturbation_ratio_max,
            "seed": self.seed,
        }


def _edges_avoid_jump(p, committed_pts, J: JumpSet) -> bool:
    if len(J) == 0:
        return True
    for q in committed_pts:
        if np.any(_geom.segments_intersect(p, q, J.a, J.b)):
            return False
    return True


def adapt_to_jump(
    grid: DyadicGrid,
    u: DiscreteSbvMap,
    samples_per_vertex: int = 200,
    seed: int = 0,
    compute_stats: bool = True,
    kappa_samples: int = 2000,
) -> AdaptedTriangulation:
    """Perturb grid vertices by rejection sampling so no edge meets u's jump.

    Vertices commit ring by ring; the zero perturbation is tried first, so a
    jump-free instance keeps the base grid verbatim. Boundary-ring vertices
    perturb along the circle (angular jitter) so the grid keeps covering B_R.
    """
    J = u.jump
    rng = np.random.default_rng(seed)
    verts = grid.verts.copy()
    delta_v = grid.vertex_delta()
    alpha = grid.alpha
    n = len(verts)

    # adjacency from the triangle list
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for e in grid.edges:
        nbrs[e[0]].append(e[1])
        nbrs[e[1]].append(e[0])

    order = np.lexsort((np.arange(n), grid.on_boundary.astype(int), grid.ring_of))
    committed = np.zeros(n, dtype=bool)
    max_ratio = 0.0
    for vi in order:
        base_pt = grid.verts[vi]
        rad = alpha * delta_v[vi]
        clearance = LEBESGUE_CLEARANCE * delta_v[vi]
        placed = False
        committed_nbr_pts = [verts[w] for w in nbrs[vi] if committed[w]]
        for trial in range(samples_per_vertex):
            if trial == 0:
                cand = base_pt.copy()
            elif grid.on_boundary[vi]:
                # angular jitter keeps the vertex on the circle
                dtheta = rng.uniform(-rad, rad) / grid.R
                rel = base_pt - grid.center
                ca, sa = np.cos(dtheta), np.sin(dtheta)
                cand = grid.center + np.array(
                    [ca * rel[0] - sa * rel[1], sa * rel[0] + ca * rel[1]]
                )
            else:
                rr = rad * np.sqrt(rng.random())
                tt = 2 * np.pi * rng.random()
                cand = base_pt + rr * np.array([np.cos(tt), np.sin(tt)])
            if len(J):
                if np.min(_geom.point_segment_distance(cand[None, :], J.a, J.b)) < clearance:
                    continue
                if not _edges_avoid_jump(cand, committed_nbr_pts, J):
                    continue
            verts[vi] = cand
            committed[vi] = True
            max_ratio = max(max_ratio, float(np.linalg.norm(cand - base_pt) / rad))
            placed = True
            break
        if not placed:
            raise AdaptationError(
                f"vertex {vi} (ring {grid.ring_of[vi]}) could not be placed in "
                f"{samples_per_vertex} samples; jump budget too large here",
                vertex=int(vi),
            )

    envelopes = []
    for t in grid.tris:
        centers = grid.verts[t]
        radii = alpha * delta_v[t]
        envelopes.append(_geom.hull_of_disks(centers, radii, narc=24))

    kappa_hat = 0
    lambda_stats: dict = {}
    edge_stats: dict = {}
    if compute_stats:
        pts = grid.center + grid.R * np.sqrt(rng.random(kappa_samples))[:, None] * _dirs(
            kappa_samples, rng
        )
        counts = np.zeros(kappa_samples, dtype=int)
        for poly in envelopes:
            counts += _geom.points_in_convex_polygon(pts, poly)
        kappa_hat = int(counts.max())
        lambda_stats = _lambda_ratios(grid, envelopes)
        edge_stats = _edge_integrals(grid, verts, u, delta_v)

    return AdaptedTriangulation(
        base=grid,
        verts=verts,
        tris=grid.tris,
        perturbation_ratio_max=max_ratio,
        envelopes=envelopes,
        kappa_hat=kappa_hat,
        lambda_stats=lambda_stats,
        edge_stats=edge_stats,
        seed=seed,
    )


def _dirs(n, rng):
    t = 2 * np.pi * rng.random(n)
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def _lambda_ratios(grid: DyadicGrid, envelopes) -> dict:
    """Per-triangle area ratios of envelope vs strip vs ball vs triangle."""
    ratios = []
    delta_v = grid.vertex_delta()
    for ti, t in enumerate(grid.tris):
        x, y = grid.verts[t[0]], grid.verts[t[1]]
        exy = float(np.linalg.norm(x - y))
        w = exy / (8.0 * grid.c2_hat)
        tri_poly = grid.verts[t]
        area_T = float(_geom.triangle_areas(tri_poly[0][None], tri_poly[1][None], tri_poly[2][None])[0])
        area_CT = _geom.polygon_area(envelopes[ti])
        strip = _geom.stadium_polygon(x, y, w)
        area_Q = _geom.polygon_area(strip)
        inter = _geom.clip_convex_polygons(strip, _geom.convex_hull(tri_poly))
        area_QT = _geom.polygon_area(inter) if len(inter) >= 3 else 0.0
        ball = np.pi * (grid.alpha * delta_v[t[0]]) ** 2
        cap_area = _geom.polygon_area(
            _geom.hull_of_disks(
                np.stack([x, y]), grid.alpha * delta_v[t[:2]], narc=24
            )
        )
        vals = [area_CT / area_Q, area_T / max(area_QT, 1e-12 * area_T), ball / area_T, cap_area / area_CT]
        ratios.append(vals)
    ratios = np.asarray(ratios)
    return {
        "lambda1_hat": float(ratios.min()),
        "lambda2_hat": float(ratios.max()),
        "per_triangle_min": ratios.min(axis=1).tolist(),
        "per_triangle_max": ratios.max(axis=1).tolist(),
    }


def _edge_integrals(grid: DyadicGrid, verts, u: DiscreteSbvMap, delta_v, n_line: int = 16) -> dict:
    """Line integrals of |grad u| along edges and capsule averages."""
    line_int = []
    cap_avg = []
    for e in grid.edges:
        a, b = verts[e[0]], verts[e[1]]
        t = (np.arange(n_line) + 0.5) / n_line
        pts = a + t[:, None] * (b - a)
        g = np.linalg.norm(u.grad_at(pts).reshape(n_line, -1), axis=1)
        L = float(np.linalg.norm(b - a))
        line_int.append(float(np.mean(g) * L))
        # capsule of the base balls around the edge
        x, y = grid.verts[e[0]], grid.verts[e[1]]
        r1, r2 = grid.alpha * delta_v[e[0]], grid.alpha * delta_v[e[1]]
        hull = _geom.hull_of_disks(np.stack([x, y]), np.array([r1, r2]), narc=16)
        area = _geom.polygon_area(hull)
        lo = hull.min(axis=0)
        hi = hull.max(axis=0)
        rng_local = np.random.default_rng(int(e[0]) * 100003 + int(e[1]))
        samp = lo + (hi - lo) * rng_local.random((64, 2))
        inside = _geom.points_in_convex_polygon(samp, hull)
        if np.any(inside):
            gg = np.linalg.norm(u.grad_at(samp[inside]).reshape(int(inside.sum()), -1), axis=1)
            integral = float(np.mean(gg) * area)
        else:
            integral = 0.0
        h_e = max(grid.ring_of[e[0]], grid.ring_of[e[1]])
        cap_avg.append(integral / (grid.R * 2.0 ** (-float(h_e))))
    return {
        "edge_line_integrals": line_int,
        "envelope_averages": cap_avg,
    }
