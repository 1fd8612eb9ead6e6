"""Discrete SBV maps on planar disks.

A map is a stack of triangulated patches (a base patch covering the domain
disk, then replacement patches confined to smaller disks; later patches
override earlier ones) plus an explicit polyline jump set with two-sided
traces. Bulk data is per-cell affine: a value at the cell barycenter and a
constant k x 2 gradient. Boundary cells of a patch bulge to the patch circle
so that cell areas partition the patch disk exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from . import _geom
from .errors import ConstructionError, DegenerateInputError, ToolkitError
from .quadrature import Annulus, Disk, Rect, tri_subcentroids, tri_subtriangles

__all__ = [
    "JumpSet",
    "CellPatch",
    "DiscreteSbvMap",
    "jump_length",
    "total_variation_parts",
    "bv_poincare_check",
    "synthesize",
    "fan_mesh",
    "delaunay_disk_mesh",
    "dilate_map",
]


# ---------------------------------------------------------------------------
# jump sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpSet:
    """Polyline jump set: segments with per-segment constant traces."""

    a: np.ndarray  # (n, 2)
    b: np.ndarray  # (n, 2)
    trace_plus: np.ndarray  # (n, k)
    trace_minus: np.ndarray  # (n, k)
    normal: np.ndarray  # (n, 2) unit, perpendicular to b - a

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float)).reshape(-1, 2)
        b = np.atleast_2d(np.asarray(self.b, dtype=float)).reshape(-1, 2)
        tp = np.atleast_2d(np.asarray(self.trace_plus, dtype=float))
        tm = np.atleast_2d(np.asarray(self.trace_minus, dtype=float))
        nrm = np.atleast_2d(np.asarray(self.normal, dtype=float)).reshape(-1, 2)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "trace_plus", tp)
        object.__setattr__(self, "trace_minus", tm)
        object.__setattr__(self, "normal", nrm)
        if len(a) == 0:
            return
        L = _geom.seg_lengths(a, b)
        if np.any(L <= 0):
            raise ToolkitError("jump segments must have positive length")
        d = (b - a) / L[:, None]
        if np.max(np.abs(np.einsum("ij,ij->i", d, nrm))) > 1e-12:
            raise ToolkitError("jump normals must be perpendicular to the segments")
        if np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > 1e-12:
            raise ToolkitError("jump normals must be unit vectors")
        if np.min(np.linalg.norm(tp - tm, axis=1)) <= 0:
            raise ToolkitError("jump traces must differ on every segment (true jumps only)")

    def __len__(self) -> int:
        return len(self.a)

    @property
    def total_length(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.sum(_geom.seg_lengths(self.a, self.b)))

    @staticmethod
    def empty(k: int = 1) -> "JumpSet":
        return JumpSet(
            np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, k)), np.zeros((0, k)), np.zeros((0, 2))
        )

    @staticmethod
    def from_segments(a, b, trace_plus, trace_minus) -> "JumpSet":
        """Build with normals derived by rotating segment directions +90 deg."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if len(a) == 0:
            k = np.atleast_2d(np.asarray(trace_plus)).shape[-1] if np.size(trace_plus) else 1
            return JumpSet.empty(k)
        d = b - a
        L = _geom.seg_lengths(a, b)
        if np.any(L <= 0):
            raise ToolkitError("jump segments must have positive length")
        nrm = np.stack([-d[:, 1], d[:, 0]], axis=1) / L[:, None]
        return JumpSet(a, b, trace_plus, trace_minus, nrm)

    def length_in(self, region) -> float:
        """Exact H^1 measure of the jump inside a Disk or Annulus region."""
        if len(self) == 0:
            return 0.0
        if isinstance(region, Disk):
            return float(np.sum(_geom.segment_disk_length(self.a, self.b, region.center, region.radius)))
        if isinstance(region, Annulus):
            return float(
                np.sum(
                    _geom.segment_annulus_length(
                        self.a, self.b, region.center, region.r_outer, region.r_inner
                    )
                )
            )
        raise ToolkitError(f"unsupported region {region!r} for jump measurement")

    def clip_outside_disk(self, disk: Disk) -> "JumpSet":
        """Keep only the parts of the jump outside the given disk."""
        if len(self) == 0:
            return self
        keep_a, keep_b, keep_tp, keep_tm, keep_n = [], [], [], [], []
        for i in range(len(self)):
            a2, b2 = _geom.clip_segments_outside_disk(
                self.a[i : i + 1], self.b[i : i + 1], disk.center, disk.radius
            )
            for j in range(len(a2)):
                keep_a.append(a2[j])
                keep_b.append(b2[j])
                keep_tp.append(self.trace_plus[i])
                keep_tm.append(self.trace_minus[i])
                keep_n.append(self.normal[i])
        if not keep_a:
            return JumpSet.empty(self.trace_plus.shape[1])
        return JumpSet(
            np.asarray(keep_a), np.asarray(keep_b), np.asarray(keep_tp),
            np.asarray(keep_tm), np.asarray(keep_n),
        )

    def transformed(self, origin, scale: float, new_origin=(0.0, 0.0)) -> "JumpSet":
        """Affine reparametrisation x -> new_origin + (x - origin) * scale."""
        if len(self) == 0:
            return self
        o = np.asarray(origin, dtype=float)
        no = np.asarray(new_origin, dtype=float)
        return JumpSet(
            no + (self.a - o) * scale,
            no + (self.b - o) * scale,
            self.trace_plus,
            self.trace_minus,
            self.normal,
        )

    def scaled_traces(self, factor: float) -> "JumpSet":
        return JumpSet(self.a, self.b, self.trace_plus * factor, self.trace_minus * factor, self.normal)


# ---------------------------------------------------------------------------
# cell patches
# ---------------------------------------------------------------------------


class CellPatch:
    """A triangulated disk patch with per-cell affine data.

    Cells flagged in ``arc_cells`` have their outermost edge replaced by the
    patch circle arc, so that patch cell areas sum exactly to the disk area.
    """

    def __init__(self, verts, tris, values, grads, circle: Disk, arc_cells=None):
        self.verts = np.asarray(verts, dtype=float)
        self.tris = np.asarray(tris, dtype=int)
        self.values = np.asarray(values, dtype=float)
        self.grads = np.asarray(grads, dtype=float)
        self.circle = circle
        nt = len(self.tris)
        if arc_cells is None:
            arc_cells = np.zeros(nt, dtype=bool)
        self.arc_cells = np.asarray(arc_cells, dtype=bool)
        v0, v1, v2 = (self.verts[self.tris[:, i]] for i in range(3))
        self.barycenters = (v0 + v1 + v2) / 3.0
        self.tri_areas = _geom.triangle_areas(v0, v1, v2)
        self._tree = cKDTree(self.barycenters)
        self._arc_extra = np.zeros(nt)
        for t in np.nonzero(self.arc_cells)[0]:
            i, j = self._arc_edge(t)
            self._arc_extra[t] = _geom.circular_segment_area(
                self.circle.radius, self.verts[self.tris[t, i]], self.verts[self.tris[t, j]],
                self.circle.center,
            )

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def cell_areas(self) -> np.ndarray:
        return self.tri_areas + self._arc_extra

    def _arc_edge(self, t: int):
        """Indices (into the triangle) of the two vertices on the circle."""
        c = np.asarray(self.circle.center)
        d = np.linalg.norm(self.verts[self.tris[t]] - c, axis=1)
        order = np.argsort(np.abs(d - self.circle.radius))
        return int(order[0]), int(order[1])

    def locate(self, pts: np.ndarray, k_query: int = 12) -> np.ndarray:
        """Containing cell index per point (nearest-cell fallback)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        nq = min(k_query, len(self.tris))
        _, cand = self._tree.query(pts, k=nq)
        cand = np.atleast_2d(cand)
        out = np.full(len(pts), -1, dtype=int)
        v = self.verts[self.tris]  # (nt, 3, 2)
        for col in range(cand.shape[1]):
            miss = out < 0
            if not np.any(miss):
                break
            t = cand[miss, col]
            p = pts[miss]
            inside = _points_in_tris(p, v[t])
            idx = np.nonzero(miss)[0]
            out[idx[inside]] = t[inside]
        miss = out < 0
        if np.any(miss):
            # points in an arc bulge or marginally outside: nearest cell wins
            out[miss] = cand[miss, 0]
        return out

    def eval(self, pts: np.ndarray, cells: np.ndarray | None = None):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if cells is None:
            cells = self.locate(pts)
        d = pts - self.barycenters[cells]
        return self.values[cells] + np.einsum("nkj,nj->nk", self.grads[cells], d)

    def grad(self, pts: np.ndarray, cells: np.ndarray | None = None):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if cells is None:
            cells = self.locate(pts)
        return self.grads[cells]


def _points_in_tris(pts: np.ndarray, tri_verts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """pts (m,2) vs matching tri_verts (m,3,2): barycentric membership."""
    v0 = tri_verts[:, 0]
    d1 = tri_verts[:, 1] - v0
    d2 = tri_verts[:, 2] - v0
    w = pts - v0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    det = np.where(np.abs(det) < 1e-300, 1e-300, det)
    l1 = (w[:, 0] * d2[:, 1] - w[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * w[:, 1] - d1[:, 1] * w[:, 0]) / det
    return (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1 + tol)


# ---------------------------------------------------------------------------
# disk meshes
# ---------------------------------------------------------------------------


def fan_mesh(disk: Disk, n_rings: int = 10):
    """Structured spiderweb mesh of a disk: ring j has 6j vertices.

    Returns (verts, tris, arc_cells); outer-ring cells are arc-flagged.
    """
    c = np.asarray(disk.center, dtype=float)
    R = disk.radius
    verts = [c.copy()]
    ring_start = [0]
    for j in range(1, n_rings + 1):
        n = 6 * j
        th = 2 * np.pi * np.arange(n) / n
        ring_start.append(len(verts))
        verts.extend(c + (R * j / n_rings) * np.stack([np.cos(th), np.sin(th)], axis=1))
    verts = np.asarray(verts)
    tris = []
    for j in range(n_rings):
        inner = np.arange(6 * j) + ring_start[j] if j > 0 else np.array([0])
        outer = np.arange(6 * (j + 1)) + ring_start[j + 1]
        tris.extend(_stitch_rings(verts, inner, outer))
    tris = np.asarray(tris, dtype=int)
    outer_start = ring_start[-1]
    on_outer = tris >= outer_start
    arc_cells = on_outer.sum(axis=1) == 2
    return verts, tris, arc_cells


def _stitch_rings(verts, inner_idx, outer_idx):
    """Triangulate the annulus between two concentric vertex rings."""
    tris = []
    if len(inner_idx) == 1:
        cidx = inner_idx[0]
        n = len(outer_idx)
        for i in range(n):
            tris.append((cidx, outer_idx[i], outer_idx[(i + 1) % n]))
        return tris
    ang_i = np.arctan2(*(verts[inner_idx] - verts[inner_idx].mean(axis=0)).T[::-1])
    ang_o = np.arctan2(*(verts[outer_idx] - verts[inner_idx].mean(axis=0)).T[::-1])
    oi = inner_idx[np.argsort(ang_i)]
    oo = outer_idx[np.argsort(ang_o)]
    ni, no = len(oi), len(oo)
    i = j = 0
    # advancing-front walk around both rings
    while i < ni or j < no:
        fi = (i + 0.5) / ni
        fj = (j + 0.5) / no
        if j >= no or (i < ni and fi <= fj):
            tris.append((oi[i % ni], oo[j % no], oi[(i + 1) % ni]))
            i += 1
        else:
            tris.append((oi[i % ni], oo[j % no], oo[(j + 1) % no]))
            j += 1
    return tris


def delaunay_disk_mesh(disk: Disk, n_interior: int, rng: np.random.Generator, n_boundary: int = 48):
    """Delaunay mesh of seeded random interior points plus a boundary ring."""
    c = np.asarray(disk.center, dtype=float)
    R = disk.radius
    r = R * np.sqrt(rng.random(n_interior)) * 0.97
    t = 2 * np.pi * rng.random(n_interior)
    interior = c + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    th = 2 * np.pi * np.arange(n_boundary) / n_boundary
    boundary = c + R * np.stack([np.cos(th), np.sin(th)], axis=1)
    verts = np.concatenate([interior, boundary])
    tris = Delaunay(verts).simplices
    on_b = tris >= n_interior
    arc_cells = on_b.sum(axis=1) == 2
    return verts, tris, arc_cells


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteSbvMap:
    """Bulk piecewise-affine data plus an explicit polyline jump set."""

    domain: Disk
    patches: tuple  # CellPatch stack; later entries override within their circle
    jump: JumpSet
    target: dict = field(default_factory=lambda: {"kind": "free"})

    def __post_init__(self):
        if len(self.patches) == 0:
            raise ToolkitError("a map needs at least a base patch")
        if self.target.get("kind") == "sphere":
            t = self.target.get("radius", 1.0)
            norms = np.linalg.norm(self.patches[0].values, axis=1)
            if np.max(np.abs(norms - t)) > 1e-9:
                raise ToolkitError("sphere-target map has off-sphere cell values")
        if len(self.jump) > 0:
            mid = 0.5 * (self.jump.a + self.jump.b)
            dc = np.linalg.norm(mid - np.asarray(self.domain.center), axis=1)
            if np.any(dc > self.domain.radius + 1e-9):
                raise ToolkitError("jump segments must lie inside the closed domain")

    @property
    def k(self) -> int:
        return self.patches[0].k

    @property
    def base(self) -> CellPatch:
        return self.patches[0]

    def _layer_of(self, pts: np.ndarray) -> np.ndarray:
        """Index of the topmost patch containing each point."""
        pts = np.atleast_2d(pts)
        layer = np.zeros(len(pts), dtype=int)
        for i, patch in enumerate(self.patches[1:], start=1):
            inside = patch.circle.contains(pts)
            layer[inside] = i
        return layer

    def value_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        layer = self._layer_of(pts)
        out = np.empty((len(pts), self.k))
        for i, patch in enumerate(self.patches):
            sel = layer == i
            if np.any(sel):
                out[sel] = patch.eval(pts[sel])
        return out

    def grad_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        layer = self._layer_of(pts)
        out = np.empty((len(pts), self.k, 2))
        for i, patch in enumerate(self.patches):
            sel = layer == i
            if np.any(sel):
                out[sel] = patch.grad(pts[sel])
        return out

    def with_patch(self, patch: CellPatch, clip_jump: bool = True) -> "DiscreteSbvMap":
        jump = self.jump.clip_outside_disk(patch.circle) if clip_jump else self.jump
        return replace(self, patches=self.patches + (patch,), jump=jump)

    def sup_norm(self) -> float:
        """Sup of |u| over cell vertex evaluations (exact for affine cells)."""
        best = 0.0
        for i, patch in enumerate(self.patches):
            vv = patch.verts[patch.tris]  # (nt, 3, 2)
            d = vv - patch.barycenters[:, None, :]
            vals = patch.values[:, None, :] + np.einsum("nkj,nmj->nmk", patch.grads, d)
            best = max(best, float(np.max(np.linalg.norm(vals, axis=-1))))
        return best

    # -- quadrature ---------------------------------------------------------

    def bulk_samples(self, region=None, level: int = 2):
        """Midpoint sample decomposition of the bulk layers.

        Returns (pts, weights, gmag): subcell centroids that survive the
        patch layering, their areas, and the per-subcell gradient Frobenius
        norms. For disk regions, subcells straddling the region boundary
        carry their exact clipped area; patch layering uses the centroid
        indicator. Arc bulges contribute an extra sample at the arc midpoint
        carrying the segment area.
        """
        all_pts, all_w, all_g = [np.zeros((0, 2))], [np.zeros(0)], [np.zeros(0)]
        for i, patch in enumerate(self.patches):
            if isinstance(region, Disk) and not _disks_meet(patch.circle, region):
                continue
            pts_i, w_i, g_i, _, corners = _patch_samples_with_ids(patch, level)
            w_i = w_i.copy()
            keep = np.ones(len(pts_i), dtype=bool)
            laters = [
                q.circle for q in self.patches[i + 1 :] if _disks_meet(patch.circle, q.circle)
            ]
            rad_sub = np.linalg.norm(corners - pts_i[:, None, :], axis=-1).max(axis=1)
            near_later = np.zeros(len(pts_i), dtype=bool)
            dls = []
            for lc in laters:
                dl = np.linalg.norm(pts_i - np.asarray(lc.center), axis=1)
                dls.append(dl)
                near_later |= np.abs(dl - lc.radius) <= rad_sub
            for lc, dl in zip(laters, dls):
                keep &= near_later | (dl > lc.radius)
            if isinstance(region, Disk):
                _clip_weights_disk(pts_i, w_i, keep, corners, region.center, region.radius,
                                   skip=near_later)
            elif isinstance(region, Annulus):
                w_out = w_i.copy()
                keep_out = keep.copy()
                _clip_weights_disk(pts_i, w_out, keep_out, corners, region.center,
                                   region.r_outer, skip=near_later)
                w_inn = w_i.copy()
                keep_inn = keep.copy()
                _clip_weights_disk(pts_i, w_inn, keep_inn, corners, region.center,
                                   region.r_inner, skip=near_later)
                w_i = np.where(keep_out, w_out, 0.0) - np.where(keep_inn, w_inn, 0.0)
                keep &= keep_out & ((w_i > 0) | near_later)
            elif region is not None:
                keep &= near_later | region.contains(pts_i)
            # subcells meeting a later-patch boundary: refined indicator,
            # consistent between the region and the layering
            for s in np.nonzero(near_later & keep)[0]:
                w_i[s] = _refined_weight(corners[s], region, laters)
            sel = keep & (w_i > 0)
            all_pts.append(pts_i[sel])
            all_w.append(w_i[sel])
            all_g.append(g_i[sel])
        return np.concatenate(all_pts), np.concatenate(all_w), np.concatenate(all_g)

    def value_samples(self, region=None, level: int = 2):
        """Like bulk_samples but returns map values at the sample points."""
        pts, w, _ = self.bulk_samples(region, level)
        return pts, w, self.value_at(pts)

    def cell_samples(self, region=None, level: int = 2):
        """Visible subcell decomposition keyed by flat cell ids.

        Returns (cell_values (nc,k), cell_grads (nc,k,2), sub_cell_id (m,),
        sub_pts (m,2), sub_w (m,)): the per-cell data of every cell in the
        patch stack plus the surviving subcell samples referencing them.
        """
        values = np.concatenate([p.values for p in self.patches])
        grads = np.concatenate([p.grads for p in self.patches])
        ids_all, pts_all, w_all = [], [], []
        offset = 0
        for i, patch in enumerate(self.patches):
            pts_i, w_i, _, cid_i, _ = _patch_samples_with_ids(patch, level)
            keep = np.ones(len(pts_i), dtype=bool)
            for later in self.patches[i + 1 :]:
                keep &= ~later.circle.contains(pts_i)
            if region is not None:
                keep &= region.contains(pts_i)
            ids_all.append(cid_i[keep] + offset)
            pts_all.append(pts_i[keep])
            w_all.append(w_i[keep])
            offset += len(patch.tris)
        return (
            values,
            grads,
            np.concatenate(ids_all),
            np.concatenate(pts_all),
            np.concatenate(w_all),
        )

    def modular_of_gradient(self, p, region=None, level: int = 2) -> float:
        """Integral of |grad u|^{p(x)} over the region."""
        pts, w, g = self.bulk_samples(region, level)
        return float(np.sum(w * g ** p(pts)))

    def gradient_q_integral(self, q: float, region=None, level: int = 2) -> float:
        pts, w, g = self.bulk_samples(region, level)
        return float(np.sum(w * g**q))

    def gradient_luxembourg_norm(self, p, region=None, level: int = 2) -> float:
        """Luxembourg norm of |grad u| over the region, by bisection."""
        from .vexp import BISECT_MAX_ITER, BISECT_TOL

        pts, w, g = self.bulk_samples(region, level)
        pv = p(pts)
        m0 = float(np.sum(w * g**pv))
        if m0 == 0.0:
            return 0.0
        lo = hi = 1.0
        if float(np.sum(w * g**pv)) > 1.0:
            for _ in range(BISECT_MAX_ITER):
                hi *= 2.0
                if float(np.sum(w * (g / hi) ** pv)) <= 1.0:
                    break
            lo = hi / 2.0
        else:
            for _ in range(BISECT_MAX_ITER):
                lo /= 2.0
                if float(np.sum(w * (g / lo) ** pv)) > 1.0:
                    break
            else:
                return 0.0
            hi = lo * 2.0
        for _ in range(BISECT_MAX_ITER):
            if hi - lo <= BISECT_TOL:
                break
            mid = 0.5 * (lo + hi)
            if float(np.sum(w * (g / mid) ** pv)) > 1.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def to_json(self) -> dict:
        return {
            "domain": {"center": list(self.domain.center), "radius": self.domain.radius},
            "target": self.target,
            "patches": [
                {
                    "verts": p.verts.tolist(),
                    "tris": p.tris.tolist(),
                    "values": p.values.tolist(),
                    "grads": p.grads.tolist(),
                    "circle": {"center": list(p.circle.center), "radius": p.circle.radius},
                    "arc_cells": p.arc_cells.tolist(),
                }
                for p in self.patches
            ],
            "jump": {
                "a": self.jump.a.tolist(),
                "b": self.jump.b.tolist(),
                "trace_plus": self.jump.trace_plus.tolist(),
                "trace_minus": self.jump.trace_minus.tolist(),
                "normal": self.jump.normal.tolist(),
            },
        }

    @staticmethod
    def from_json(obj: dict) -> "DiscreteSbvMap":
        patches = tuple(
            CellPatch(
                np.asarray(p["verts"]), np.asarray(p["tris"]), np.asarray(p["values"]),
                np.asarray(p["grads"]),
                Disk(tuple(p["circle"]["center"]), p["circle"]["radius"]),
                np.asarray(p["arc_cells"], dtype=bool),
            )
            for p in obj["patches"]
        )
        j = obj["jump"]
        k = patches[0].k
        jump = (
            JumpSet(
                np.asarray(j["a"]), np.asarray(j["b"]), np.asarray(j["trace_plus"]),
                np.asarray(j["trace_minus"]), np.asarray(j["normal"]),
            )
            if len(j["a"])
            else JumpSet.empty(k)
        )
        return DiscreteSbvMap(
            Disk(tuple(obj["domain"]["center"]), obj["domain"]["radius"]),
            patches,
            jump,
            obj.get("target", {"kind": "free"}),
        )


def _clip_weights_disk(pts, w, keep, corners, center, radius, skip=None):
    """In-place: drop subcells outside the disk, exact-clip straddlers."""
    c = np.asarray(center)
    d = np.linalg.norm(pts - c, axis=1)
    rad_sub = np.linalg.norm(corners - pts[:, None, :], axis=-1).max(axis=1)
    keep &= (d <= radius + rad_sub) | (False if skip is None else skip)
    straddle = keep & (d > radius - rad_sub)
    if skip is not None:
        straddle &= ~skip
    for s in np.nonzero(straddle)[0]:
        w[s] = _geom.polygon_disk_area(corners[s], c, radius)


def _refined_weight(corners, region, laters, depth: int = 3) -> float:
    """Indicator-refined area of subtriangle ∩ region minus later circles."""
    if np.allclose(corners[0], corners[1]):  # degenerate arc sample
        pt = corners[:1]
        ok = True
        if region is not None:
            ok = bool(region.contains(pt)[0])
        for lc in laters:
            ok &= not bool(lc.contains(pt)[0])
        return 0.0  # arc slivers at a later boundary are negligible by area
    cents, areas = tri_subcentroids(corners[0], corners[1], corners[2], depth)
    mask = np.ones(len(cents), dtype=bool)
    if region is not None:
        mask &= region.contains(cents)
    for lc in laters:
        mask &= ~lc.contains(cents)
    return float(np.sum(areas[mask]))


def _disks_meet(d1: Disk, d2: Disk) -> bool:
    return (
        np.linalg.norm(np.asarray(d1.center) - np.asarray(d2.center))
        <= d1.radius + d2.radius + 1e-12
    )


def _patch_samples_with_ids(patch: CellPatch, level: int):
    """Subcell centroids/areas/corners, gradient magnitudes, and cell ids."""
    key = ("_samples", level)
    cached = getattr(patch, "_sample_cache", None)
    if cached is not None and cached[0] == key:
        return cached[1]
    v = patch.verts[patch.tris]
    pts_list, w_list, g_list, id_list, corner_list = [], [], [], [], []
    gmag = np.linalg.norm(patch.grads.reshape(len(patch.tris), -1), axis=1)
    for t in range(len(patch.tris)):
        cents, areas = tri_subcentroids(v[t, 0], v[t, 1], v[t, 2], level)
        subtris = tri_subtriangles(v[t, 0], v[t, 1], v[t, 2], level)
        pts_list.append(cents)
        w_list.append(areas)
        g_list.append(np.full(len(cents), gmag[t]))
        id_list.append(np.full(len(cents), t, dtype=int))
        corner_list.append(subtris)
        if patch.arc_cells[t] and patch._arc_extra[t] > 0:
            i, j = patch._arc_edge(t)
            mid_chord = 0.5 * (patch.verts[patch.tris[t, i]] + patch.verts[patch.tris[t, j]])
            c = np.asarray(patch.circle.center)
            d = mid_chord - c
            nd = np.linalg.norm(d)
            arc_mid = c + d / nd * patch.circle.radius * (1 - 1e-12) if nd > 0 else mid_chord
            pts_list.append(arc_mid[None, :])
            w_list.append(np.array([patch._arc_extra[t]]))
            g_list.append(np.array([gmag[t]]))
            id_list.append(np.array([t], dtype=int))
            corner_list.append(np.repeat(arc_mid[None, None, :], 3, axis=1))
    out = (
        np.concatenate(pts_list),
        np.concatenate(w_list),
        np.concatenate(g_list),
        np.concatenate(id_list),
        np.concatenate(corner_list),
    )
    patch._sample_cache = (key, out)
    return out


def _patch_samples(patch: CellPatch, level: int):
    pts, w, g, _, _ = _patch_samples_with_ids(patch, level)
    return pts, w, g


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


def jump_length(u: DiscreteSbvMap, region) -> float:
    """H^1 measure of the jump set inside a ball or annulus (exact clipping)."""
    return u.jump.length_in(region)


def total_variation_parts(u: DiscreteSbvMap, region, level: int = 2):
    """(bulk, jump) parts of |Du|(region).

    bulk integrates |grad u| by cell quadrature; jump sums |u+ - u-| times
    exact clipped segment lengths.
    """
    pts, w, g = u.bulk_samples(region, level)
    bulk = float(np.sum(w * g))
    jump = 0.0
    if len(u.jump) > 0:
        amp = np.linalg.norm(u.jump.trace_plus - u.jump.trace_minus, axis=1)
        if isinstance(region, Disk):
            lens = _geom.segment_disk_length(u.jump.a, u.jump.b, region.center, region.radius)
        elif isinstance(region, Annulus):
            lens = _geom.segment_annulus_length(
                u.jump.a, u.jump.b, region.center, region.r_outer, region.r_inner
            )
        else:
            raise ToolkitError(f"unsupported region {region!r}")
        jump = float(np.sum(amp * lens))
    return bulk, jump


def bv_poincare_check(u: DiscreteSbvMap, convex_region, level: int = 3):
    """L^1 Poincare data on a convex region.

    Returns (lhs, ratio): lhs = ||u - mean||_L1(region); ratio = lhs over
    diam(region) * |Du|(region).
    """
    pts, w, vals = u.value_samples(convex_region, level)
    area = float(np.sum(w))
    if area <= 0:
        raise ToolkitError("region does not meet the map domain")
    mean = np.sum(w[:, None] * vals, axis=0) / area
    lhs = float(np.sum(w * np.linalg.norm(vals - mean, axis=1)))
    bulk, jump = total_variation_parts(u, convex_region, level)
    du = bulk + jump
    if du <= 0:
        spread = float(np.max(np.linalg.norm(vals - mean, axis=1)))
        if spread > 1e-9:
            raise DegenerateInputError(
                "|Du|(region) = 0 but the sampled map is not constant on the region"
            )
        return lhs, 0.0
    return lhs, lhs / (convex_region.diameter * du)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def _regular_loop(center, perimeter: float, n_sides: int, rng: np.random.Generator):
    """Closed regular polygon with the requested perimeter (random phase)."""
    r = perimeter / (2 * n_sides * np.sin(np.pi / n_sides))
    phase = 2 * np.pi * rng.random()
    th = phase + 2 * np.pi * np.arange(n_sides) / n_sides
    pts = np.asarray(center) + r * np.stack([np.cos(th), np.sin(th)], axis=1)
    return pts, r


def synthesize(kind: str, params: dict, seed: int) -> DiscreteSbvMap:
    """Deterministic test-map generator.

    kinds: affine | piecewise-constant-with-arc-jump | sphere-vortex-with-slit
    | random-cells-with-random-polyline. The reported jump length matches the
    requested budget to well under 1%.
    """
    rng = np.random.default_rng(seed)
    domain = params.get("domain", Disk((0.0, 0.0), 1.0))
    n_rings = params.get("n_rings", 10)

    if kind == "affine":
        k = params.get("k", 2)
        G = np.asarray(params.get("G", rng.standard_normal((k, 2))), dtype=float)
        u0 = np.asarray(params.get("u0", rng.standard_normal(k)), dtype=float)
        verts, tris, arc = fan_mesh(domain, n_rings)
        bc = verts[tris].mean(axis=1)
        values = u0 + (bc - np.asarray(domain.center)) @ G.T
        grads = np.repeat(G[None, :, :], len(tris), axis=0)
        patch = CellPatch(verts, tris, values, grads, domain, arc)
        return DiscreteSbvMap(domain, (patch,), JumpSet.empty(k))

    if kind == "piecewise-constant-with-arc-jump":
        k = params.get("k", 2)
        budget = float(params["budget"])
        n_sides = params.get("n_sides", 12)
        max_perim = 2 * np.pi * domain.radius * 0.5
        if budget <= 0 or budget > max_perim:
            raise ConstructionError(
                f"jump budget {budget} incompatible with domain radius {domain.radius}"
            )
        loop_center = params.get("loop_center")
        r_loop = budget / (2 * n_sides * np.sin(np.pi / n_sides))
        if loop_center is None:
            lim = max(domain.radius - 2.5 * r_loop, 0.0)
            ang = 2 * np.pi * rng.random()
            rad = lim * 0.6 * np.sqrt(rng.random())
            loop_center = np.asarray(domain.center) + rad * np.array([np.cos(ang), np.sin(ang)])
        loop_center = np.asarray(loop_center, dtype=float)
        if np.linalg.norm(loop_center - np.asarray(domain.center)) + r_loop >= domain.radius:
            raise ConstructionError("jump loop does not fit inside the domain")
        loop, _ = _regular_loop(loop_center, budget, n_sides, rng)
        c_out = params.get("c_out")
        c_in = params.get("c_in")
        if c_out is None:
            c_out = rng.standard_normal(k)
            c_out /= np.linalg.norm(c_out)
        if c_in is None:
            c_in = rng.standard_normal(k)
            c_in /= np.linalg.norm(c_in)
            if np.linalg.norm(c_in - c_out) < 0.1:
                c_in = -c_out
        c_out = np.asarray(c_out, dtype=float)
        c_in = np.asarray(c_in, dtype=float)
        verts, tris, arc = fan_mesh(domain, n_rings)
        bc = verts[tris].mean(axis=1)
        inside = np.linalg.norm(bc - loop_center, axis=1) <= r_loop * np.cos(np.pi / n_sides)
        # classify by the polygon itself, not the inradius shortcut
        inside = _points_in_convex_loop(bc, loop)
        values = np.where(inside[:, None], c_in[None, :], c_out[None, :])
        grads = np.zeros((len(tris), k, 2))
        patch = CellPatch(verts, tris, values, grads, domain, arc)
        a = loop
        b = np.roll(loop, -1, axis=0)
        jump = JumpSet.from_segments(
            a, b, np.repeat(c_in[None, :], n_sides, axis=0), np.repeat(c_out[None, :], n_sides, axis=0)
        )
        tag = {"kind": "free"}
        if abs(np.linalg.norm(c_in) - 1) < 1e-12 and abs(np.linalg.norm(c_out) - 1) < 1e-12:
            tag = {"kind": "sphere", "radius": 1.0}
        return DiscreteSbvMap(domain, (patch,), jump, tag)

    if kind == "sphere-vortex-with-slit":
        return _vortex_with_slit(domain, params, rng)

    if kind == "random-cells-with-random-polyline":
        return _random_map(domain, params, rng)

    raise ToolkitError(f"unknown synthesis kind {kind!r}")


def _points_in_convex_loop(pts, loop):
    return _geom.points_in_convex_polygon(pts, _geom.convex_hull(loop))


def _vortex_with_slit(domain: Disk, params: dict, rng: np.random.Generator) -> DiscreteSbvMap:
    """Unit vortex u = (x - c)/|x - c| with a phase-dislocation slit.

    Away from a narrow strip around a short radial slit the map is exactly
    the vortex; inside the strip the phase picks up an extra twist that
    jumps across the slit and tapers to zero at the slit ends and the strip
    edge, so the jump set is exactly the slit segment.
    """
    slit_len = float(params.get("budget", domain.radius * 0.1))
    if slit_len <= 0 or slit_len > 0.5 * domain.radius:
        raise ConstructionError("slit length must lie in (0, radius/2]")
    c = np.asarray(domain.center, dtype=float)
    ang = params.get("slit_angle")
    if ang is None:
        ang = 2 * np.pi * rng.random()
    d = np.array([np.cos(ang), np.sin(ang)])
    r_s = float(params.get("slit_start_radius", 0.35 * domain.radius))
    r_s = min(r_s, domain.radius - slit_len - 1e-6)
    q0 = c + r_s * d
    width = 0.5 * slit_len
    delta_twist = float(params.get("twist", 2.0))
    perp = np.array([-d[1], d[0]])

    def taper(s):
        t = np.clip(s / (0.15 * slit_len), 0.0, 1.0)
        t2 = np.clip((slit_len - s) / (0.15 * slit_len), 0.0, 1.0)
        return (t * t * (3 - 2 * t)) * (t2 * t2 * (3 - 2 * t2))

    def taper_prime(s):
        h = 1e-7 * slit_len
        return (taper(s + h) - taper(s - h)) / (2 * h)

    def beta_grad(pts):
        rel = np.atleast_2d(pts) - q0
        s = rel @ d
        t = rel @ perp
        inside = (s >= 0) & (s <= slit_len) & (t > 0) & (t < width)
        beta = np.zeros(len(rel))
        gb = np.zeros((len(rel), 2))
        if np.any(inside):
            ss, tt = s[inside], t[inside]
            prof = 1.0 - tt / width
            beta[inside] = delta_twist * taper(ss) * prof
            gs = delta_twist * taper_prime(ss) * prof
            gt = -delta_twist * taper(ss) / width
            gb[inside] = gs[:, None] * d[None, :] + gt[:, None] * perp[None, :]
        return beta, gb

    def value_grad(pts):
        pts = np.atleast_2d(pts)
        rel = pts - c
        r = np.maximum(np.linalg.norm(rel, axis=1), 1e-12)
        phi_v = np.arctan2(rel[:, 1], rel[:, 0])
        that = np.stack([-rel[:, 1], rel[:, 0]], axis=1) / r[:, None]
        gphi_v = that / r[:, None]
        beta, gb = beta_grad(pts)
        phi = phi_v + beta
        uu = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        up = np.stack([-uu[:, 1], uu[:, 0]], axis=1)
        grads = up[:, :, None] * (gphi_v + gb)[:, None, :]
        return uu, grads

    n_rings = params.get("n_rings", 12)
    verts, tris, arc = fan_mesh(domain, n_rings)
    bc = verts[tris].mean(axis=1)
    values, grads = value_grad(bc)
    patch = CellPatch(verts, tris, values, grads, domain, arc)

    n_seg = max(4, int(params.get("slit_segments", 8)))
    ss = np.linspace(0.0, slit_len, n_seg + 1)
    seg_a = q0 + ss[:-1, None] * d
    seg_b = q0 + ss[1:, None] * d
    smid = 0.5 * (ss[:-1] + ss[1:])
    mid_pts = q0 + smid[:, None] * d
    relm = mid_pts - c
    phim = np.arctan2(relm[:, 1], relm[:, 0])
    bplus = delta_twist * np.array([taper(s) for s in smid])
    tp = np.stack([np.cos(phim + bplus), np.sin(phim + bplus)], axis=1)
    tm = np.stack([np.cos(phim), np.sin(phim)], axis=1)
    keep = np.linalg.norm(tp - tm, axis=1) > 1e-9
    jump = JumpSet.from_segments(seg_a[keep], seg_b[keep], tp[keep], tm[keep])
    return DiscreteSbvMap(domain, (patch,), jump, {"kind": "sphere", "radius": 1.0})


def _random_map(domain: Disk, params: dict, rng: np.random.Generator) -> DiscreteSbvMap:
    k = params.get("k", 2)
    budget = float(params.get("budget", 0.0))
    if budget > 2 * domain.radius * 4:
        raise ConstructionError("jump budget incompatible with domain size")
    n_pts = params.get("n_points", 220)
    verts, tris, arc = delaunay_disk_mesh(domain, n_pts, rng)
    # smooth trigonometric bulk field
    nmodes = 3
    A = 0.4 * rng.standard_normal((k, nmodes))
    B = 0.4 * rng.standard_normal((k, nmodes))
    freq = rng.uniform(0.5, 2.5, (nmodes, 2)) / max(domain.radius, 1e-9)
    phase = 2 * np.pi * rng.random(nmodes)

    def field(pts):
        arg = pts @ freq.T + phase  # (n, modes)
        vals = np.sin(arg) @ A.T + np.cos(arg) @ B.T
        dsin = np.cos(arg)[:, :, None] * freq[None, :, :]
        dcos = -np.sin(arg)[:, :, None] * freq[None, :, :]
        grads = np.einsum("km,nmj->nkj", A, dsin) + np.einsum("km,nmj->nkj", B, dcos)
        return vals, grads

    bc = verts[tris].mean(axis=1)
    values, grads = field(bc)
    patch = CellPatch(verts, tris, values, grads, domain, arc)
    jump = JumpSet.empty(k)
    if budget > 0:
        n_seg = params.get("jump_segments", 5)
        # random open polyline, rescaled to the exact budget
        start = np.asarray(domain.center) + 0.4 * domain.radius * (rng.random(2) - 0.5)
        steps = rng.standard_normal((n_seg, 2))
        pts = np.concatenate([start[None, :], start + np.cumsum(steps, axis=0)])
        L = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
        pts = start + (pts - start) * (budget / L)
        # keep the polyline inside the domain: shrink towards the centre if needed
        far = np.max(np.linalg.norm(pts - np.asarray(domain.center), axis=1))
        if far > 0.9 * domain.radius:
            ctr = np.asarray(domain.center)
            pts = ctr + (pts - ctr) * (0.9 * domain.radius / far)
            scale = budget / np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
            pts = pts[0] + (pts - pts[0]) * scale
        a, b = pts[:-1], pts[1:]
        tp = rng.standard_normal((n_seg, k))
        tm = tp + 0.2 + rng.random((n_seg, k))
        jump = JumpSet.from_segments(a, b, tp, tm)
    return DiscreteSbvMap(domain, (patch,), jump)


def two_constant_map(
    domain: Disk,
    chain: np.ndarray,
    c_plus,
    c_minus,
    n_rings: int = 10,
    target: dict | None = None,
) -> DiscreteSbvMap:
    """Two-valued map jumping across an open polyline chain.

    The chain's endpoints should reach the domain boundary (or beyond) so the
    two-sided picture is consistent; cells take the value of the side their
    barycentre falls on (side of the nearest chain segment).
    """
    chain = np.asarray(chain, dtype=float)
    a, b = chain[:-1], chain[1:]
    c_plus = np.asarray(c_plus, dtype=float)
    c_minus = np.asarray(c_minus, dtype=float)
    k = len(c_plus)
    verts, tris, arc = fan_mesh(domain, n_rings)
    bc = verts[tris].mean(axis=1)
    d = _geom.point_segment_distance(bc, a, b)
    nearest = np.argmin(d, axis=1)
    seg_d = b - a
    nrm = np.stack([-seg_d[:, 1], seg_d[:, 0]], axis=1)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    side = np.einsum("ij,ij->i", bc - a[nearest], nrm[nearest]) >= 0
    values = np.where(side[:, None], c_plus[None, :], c_minus[None, :])
    grads = np.zeros((len(tris), k, 2))
    patch = CellPatch(verts, tris, values, grads, domain, arc)
    tp = np.repeat(c_plus[None, :], len(a), axis=0)
    tm = np.repeat(c_minus[None, :], len(a), axis=0)
    jump = JumpSet(a, b, tp, tm, nrm)
    # keep only the part of the jump inside the closed domain
    ctr = np.asarray(domain.center)
    aa, bb = _geom.clip_segments_to_disk(a, b, ctr, domain.radius)
    if len(aa) < len(a) or np.max(np.abs(aa - a)) > 1e-12 or np.max(np.abs(bb - b)) > 1e-12:
        na = len(aa)
        jump = JumpSet.from_segments(
            aa, bb, np.repeat(c_plus[None, :], na, axis=0), np.repeat(c_minus[None, :], na, axis=0)
        )
    return DiscreteSbvMap(domain, (patch,), jump, target or {"kind": "free"})


def dilate_map(u: DiscreteSbvMap, factor: float, new_center=(0.0, 0.0)) -> DiscreteSbvMap:
    """Push the map through x -> new_center + factor * (x - old_center).

    Gradients scale by 1/factor; values and traces are unchanged, so jump
    lengths scale by exactly factor and cell areas by factor^2.
    """
    oc = np.asarray(u.domain.center, dtype=float)
    nc = np.asarray(new_center, dtype=float)
    patches = []
    for p in u.patches:
        circle = Disk(
            tuple(nc + factor * (np.asarray(p.circle.center) - oc)), p.circle.radius * factor
        )
        patches.append(
            CellPatch(
                nc + factor * (p.verts - oc), p.tris, p.values, p.grads / factor, circle, p.arc_cells
            )
        )
    jump = u.jump.transformed(oc, factor, nc)
    dom = Disk(tuple(nc), u.domain.radius * factor)
    return DiscreteSbvMap(dom, tuple(patches), jump, u.target)
