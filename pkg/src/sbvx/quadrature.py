"""Integration regions and fixed composite quadrature rules.

Closed-form integrands over disks/annuli/rectangles are integrated with
composite Gauss-Legendre panels (polar panels for disks, so radial kinks at
the centre and angular jumps aligned with panel boundaries are harmless).
Cell-complex integrands use midpoint sums over uniformly subdivided
triangles; those live with the map machinery.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    @property
    def area(self) -> float:
        return np.pi * self.radius**2

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) <= self.radius + tol

    def scaled(self, factor: float, origin=None) -> "Disk":
        o = np.asarray(self.center if origin is None else origin, dtype=float)
        c = o + factor * (np.asarray(self.center) - o)
        return Disk((float(c[0]), float(c[1])), factor * self.radius)


@dataclass(frozen=True)
class Annulus:
    center: tuple[float, float]
    r_inner: float
    r_outer: float

    @property
    def area(self) -> float:
        return np.pi * (self.r_outer**2 - self.r_inner**2)

    @property
    def diameter(self) -> float:
        return 2.0 * self.r_outer

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        return (d >= self.r_inner - tol) & (d <= self.r_outer + tol)


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (
            (pts[:, 0] >= self.x0 - tol)
            & (pts[:, 0] <= self.x1 + tol)
            & (pts[:, 1] >= self.y0 - tol)
            & (pts[:, 1] <= self.y1 + tol)
        )


Region = Disk | Annulus | Rect


def _panel_nodes(a: float, b: float, n_panels: int, order: int):
    """Composite Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def disk_rule(disk: Disk, n_r: int = 24, n_t: int = 48, order: int = 8):
    """Polar composite GL rule on a disk: points (N,2), weights (N,)."""
    r, wr = _panel_nodes(0.0, disk.radius, n_r, order)
    t, wt = _panel_nodes(0.0, TWO_PI, n_t, order)
    R, T = np.meshgrid(r, t, indexing="ij")
    W = (wr[:, None] * wt[None, :]) * R
    pts = np.stack(
        [
            disk.center[0] + R.ravel() * np.cos(T.ravel()),
            disk.center[1] + R.ravel() * np.sin(T.ravel()),
        ],
        axis=1,
    )
    return pts, W.ravel()


def annulus_rule(ann: Annulus, n_r: int = 16, n_t: int = 48, order: int = 8):
    r, wr = _panel_nodes(ann.r_inner, ann.r_outer, n_r, order)
    t, wt = _panel_nodes(0.0, TWO_PI, n_t, order)
    R, T = np.meshgrid(r, t, indexing="ij")
    W = (wr[:, None] * wt[None, :]) * R
    pts = np.stack(
        [
            ann.center[0] + R.ravel() * np.cos(T.ravel()),
            ann.center[1] + R.ravel() * np.sin(T.ravel()),
        ],
        axis=1,
    )
    return pts, W.ravel()


def rect_rule(rect: Rect, n_x: int = 24, n_y: int = 24, order: int = 8):
    x, wx = _panel_nodes(rect.x0, rect.x1, n_x, order)
    y, wy = _panel_nodes(rect.y0, rect.y1, n_y, order)
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = wx[:, None] * wy[None, :]
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return pts, W.ravel()


def region_rule(region: Region, resolution: int = 24, order: int = 8):
    """Fixed quadrature rule for a region; resolution scales panel counts."""
    if isinstance(region, Disk):
        return disk_rule(region, n_r=resolution, n_t=2 * resolution, order=order)
    if isinstance(region, Annulus):
        return annulus_rule(region, n_r=resolution, n_t=2 * resolution, order=order)
    if isinstance(region, Rect):
        return rect_rule(region, n_x=resolution, n_y=resolution, order=order)
    raise TypeError(f"unsupported region type {type(region)!r}")


def tri_subcentroids(v0, v1, v2, level: int):
    """Centroids and areas of the uniform 4**level subdivision of a triangle.

    Returns (centroids (m,2), areas (m,)); m = 4**level, all areas equal.
    """
    n = 1 << level
    e1 = np.asarray(v1, dtype=float) - np.asarray(v0, dtype=float)
    e2 = np.asarray(v2, dtype=float) - np.asarray(v0, dtype=float)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    up = ii + jj <= n - 1
    bu = np.stack([(3 * ii[up] + 1) / (3 * n), (3 * jj[up] + 1) / (3 * n)], axis=1)
    dn = ii + jj <= n - 2
    bd = np.stack([(3 * ii[dn] + 2) / (3 * n), (3 * jj[dn] + 2) / (3 * n)], axis=1)
    bary = np.concatenate([bu, bd])
    cents = np.asarray(v0) + bary[:, :1] * e1 + bary[:, 1:] * e2
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0]) / (n * n)
    return cents, np.full(len(cents), area)


def tri_subtriangles(v0, v1, v2, level: int):
    """Vertices of the uniform subdivision: array (m, 3, 2)."""
    n = 1 << level
    v0 = np.asarray(v0, dtype=float)
    e1 = np.asarray(v1, dtype=float) - v0
    e2 = np.asarray(v2, dtype=float) - v0

    def P(i, j):
        return v0 + np.outer(i, e1) / n + np.outer(j, e2) / n

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    up = ii + jj <= n - 1
    iu, ju = ii[up], jj[up]
    tri_up = np.stack([P(iu, ju), P(iu + 1, ju), P(iu, ju + 1)], axis=1)
    dn = ii + jj <= n - 2
    idn, jdn = ii[dn], jj[dn]
    tri_dn = np.stack([P(idn + 1, jdn), P(idn, jdn + 1), P(idn + 1, jdn + 1)], axis=1)
    return np.concatenate([tri_up, tri_dn])
