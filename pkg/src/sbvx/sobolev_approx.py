"""Local piecewise-affine approximation, jump covering by ball families, and
the iterated global replacement that removes the jump inside a smaller disk.

The local step picks a good radius R inside a ball carrying little jump,
adapts the dyadic grid to the jump, and replaces the map by the affine
interpolant of its vertex values on B_R. The global step covers the jump of
the map by balls found through a dyadic density window, splits them into
pairwise-disjoint families, and applies the local step ball by ball; family
l consumes the iterate produced by family l-1. Residual jump left between
replacement disks is re-covered in further rounds until the target disk is
jump free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geom
from .dyadic_grid import adapt_to_jump, build_grid, select_good_radius
from .errors import (
    AdaptationError,
    DegenerateInputError,
    JumpBudgetError,
    SearchExhaustedError,
    ToolkitError,
    WindowNotFoundError,
)
from .quadrature import Disk, disk_rule
from .sbv2d import CellPatch, DiscreteSbvMap

__all__ = ["BallFamily", "ApproxReport", "local_phi", "cover_jump", "global_approx",
           "project_to_sphere_stage"]

XI_CAP = 16


@dataclass(frozen=True)
class BallFamily:
    """Cover of a jump set by balls split into pairwise-disjoint families."""

    centers: np.ndarray  # (n, 2)
    radii: np.ndarray  # (n,)
    family_index: np.ndarray  # (n,) values in 1..xi_hat
    xi_hat: int
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.radii)

    def balls_of(self, j: int):
        sel = self.family_index == j
        return self.centers[sel], self.radii[sel]

    def merged_with(self, other: "BallFamily") -> "BallFamily":
        if len(other) == 0:
            return self
        if len(self) == 0:
            return other
        return BallFamily(
            centers=np.concatenate([self.centers, other.centers]),
            radii=np.concatenate([self.radii, other.radii]),
            family_index=np.concatenate(
                [self.family_index, other.family_index + self.xi_hat]
            ),
            xi_hat=self.xi_hat + other.xi_hat,
            stats=dict(self.stats),
        )

    def to_json(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
            "family_index": self.family_index.tolist(),
            "xi_hat": self.xi_hat,
            "stats": self.stats,
        }

    @staticmethod
    def empty() -> "BallFamily":
        return BallFamily(np.zeros((0, 2)), np.zeros(0), np.zeros(0, dtype=int), 0, {})


@dataclass
class ApproxReport:
    w: DiscreteSbvMap
    family: BallFamily
    estimates: dict

    def to_json(self) -> dict:
        return {"family": self.family.to_json(), "estimates": self.estimates}


# ---------------------------------------------------------------------------
# local step
# ---------------------------------------------------------------------------


def _interpolant_patch(u: DiscreteSbvMap, adapted, center, R: float) -> CellPatch:
    """Piecewise-affine interpolant of u at the adapted vertices."""
    verts = adapted.verts
    tris = adapted.tris
    vv = u.value_at(verts)  # (nv, k)
    v0, v1, v2 = (verts[tris[:, i]] for i in range(3))
    E = np.stack([v1 - v0, v2 - v0], axis=1)  # (nt, 2, 2), rows e1, e2
    dV = np.stack([vv[tris[:, 1]] - vv[tris[:, 0]], vv[tris[:, 2]] - vv[tris[:, 0]]], axis=1)
    Einv = np.linalg.inv(E)
    # G satisfies G @ e_i = dv_i: G[k, j] = sum_i dv_i[k] (E^-1)[j, i]
    grads = np.einsum("nik,nji->nkj", dV, Einv)
    bc = (v0 + v1 + v2) / 3.0
    values = (vv[tris[:, 0]] + vv[tris[:, 1]] + vv[tris[:, 2]]) / 3.0
    on_b = adapted.base.on_boundary[tris]
    arc_cells = on_b.sum(axis=1) == 2
    return CellPatch(verts, tris, values, grads, Disk(tuple(center), R), arc_cells)


def _sup_norm_visible(u: DiscreteSbvMap) -> float:
    """Sup of |u| over corner evaluations of cells not fully overridden."""
    best = 0.0
    for i, patch in enumerate(u.patches):
        vv = patch.verts[patch.tris]
        hidden = np.zeros(len(patch.tris), dtype=bool)
        for later in u.patches[i + 1 :]:
            inside = later.circle.contains(vv.reshape(-1, 2)).reshape(-1, 3)
            hidden |= inside.all(axis=1)
        if hidden.all():
            continue
        d = vv - patch.barycenters[:, None, :]
        vals = patch.values[:, None, :] + np.einsum("nkj,nmj->nmk", patch.grads, d)
        best = max(best, float(np.max(np.linalg.norm(vals[~hidden], axis=-1))))
    return best


def local_phi(
    u: DiscreteSbvMap,
    p,
    eta: float,
    seed: int = 0,
    center=None,
    r: float | None = None,
    h_max: int = 5,
    radius_retries: int = 8,
    samples_per_vertex: int = 200,
    quad_level: int = 2,
    compute_grid_stats: bool = False,
):
    """Local approximation inside B_2r: returns (R, phi_map, report).

    phi agrees with u outside closure(B_R); inside it is the piecewise-affine
    interpolant of u at the jump-avoiding adapted vertices. The report
    carries the measured constants of every estimate the construction
    promises.
    """
    center = np.asarray(u.domain.center if center is None else center, dtype=float)
    if r is None:
        r = u.domain.radius / 2.0
    ball2r = Disk(tuple(center), 2 * r)
    jump_in_2r = u.jump.length_in(ball2r)
    if jump_in_2r >= eta * 2 * r:
        raise JumpBudgetError(
            f"H1(J ∩ B_2r) = {jump_in_2r:.6g} >= eta*2r = {eta * 2 * r:.6g}"
        )

    rng = np.random.default_rng(seed)
    last_err: Exception | None = None
    adapted = None
    R = None
    n_rot = 16
    for attempt in range(radius_retries):
        sub = int(rng.integers(0, 2**31 - 1))
        try:
            R = select_good_radius(u.jump, r, eta, seed=sub, center=center, h_max=h_max)
        except SearchExhaustedError as err:
            last_err = err
            continue
        base_rot = float(rng.uniform(0, 2 * np.pi))
        for irot in range(n_rot):
            # steering the coarse edges: rigid rotations of the vertex pattern
            grid = build_grid(R, h_max, center=center, rotation=base_rot + irot * np.pi / n_rot)
            try:
                adapted = adapt_to_jump(
                    grid, u, samples_per_vertex=samples_per_vertex, seed=sub,
                    compute_stats=compute_grid_stats,
                )
                break
            except AdaptationError as err:
                last_err = err
                adapted = None
        if adapted is not None:
            break
    if adapted is None:
        raise last_err  # type: ignore[misc]

    patch = _interpolant_patch(u, adapted, center, R)
    phi = u.with_patch(patch)

    ball_R = Disk(tuple(center), R)
    p_minus = p.p_minus
    report = {"R": R, "center": center.tolist(), "eta": eta}

    for q, tag in ((1.0, "q1"), (p_minus, "q_pminus")):
        out_q = phi.gradient_q_integral(q, ball_R, quad_level)
        in_q = u.gradient_q_integral(q, ball_R, quad_level)
        report[f"grad_{tag}_out"] = out_q
        report[f"grad_{tag}_in"] = in_q
        report[f"c_hat_{tag}"] = out_q / in_q if in_q > 0 else (0.0 if out_q <= 1e-12 else np.inf)

    modular_out = phi.modular_of_gradient(p, ball_R, quad_level)
    modular_in = u.modular_of_gradient(p, ball_R, quad_level)
    norm_in = u.gradient_luxembourg_norm(p, ball_R, quad_level)
    var_bound = (1 + R**2) * max(norm_in**p_minus, norm_in**p.p_plus)
    report["modular_out"] = modular_out
    report["modular_in"] = modular_in
    report["grad_norm_in"] = norm_in
    report["modular_bound_const"] = modular_out / var_bound if var_bound > 0 else 0.0

    pts, w = disk_rule(ball_R, n_r=10, n_t=20, order=4)
    diff = np.linalg.norm(u.value_at(pts) - phi.value_at(pts), axis=1)
    l1 = float(np.sum(w * diff))
    from .sbv2d import total_variation_parts

    bulk, jmp = total_variation_parts(u, ball_R, quad_level)
    du = bulk + jmp
    report["l1_distance"] = l1
    report["l1_C_hat"] = l1 / (R * du) if du > 0 else (0.0 if l1 <= 1e-10 else np.inf)
    report["max_pointwise_distance"] = float(diff.max())

    report["linf_in"] = _sup_norm_visible(u)
    report["linf_out"] = _sup_norm_visible(phi)

    # trace agreement band on the boundary circle (graft edges are chords)
    nb = 2 ** adapted.base.h_max
    th = 2 * np.pi * (np.arange(2 * nb) + 0.5) / (2 * nb)
    bpts = center + R * np.stack([np.cos(th), np.sin(th)], axis=1) * (1 - 1e-12)
    band = float(np.max(np.linalg.norm(u.value_at(bpts) - phi.value_at(bpts), axis=1)))
    report["trace_band"] = band

    report["jump_in_2r"] = jump_in_2r
    report["jump_out_2r"] = phi.jump.length_in(ball2r)
    report["jump_removed"] = jump_in_2r - report["jump_out_2r"]
    report["jump_new"] = _new_jump_length(phi, u)
    if compute_grid_stats:
        report["kappa_hat"] = adapted.kappa_hat
        report["lambda_stats"] = {
            k: v for k, v in adapted.lambda_stats.items() if not k.startswith("per_")
        }
        report["perturbation_ratio_max"] = adapted.perturbation_ratio_max
    return R, phi, report


def _new_jump_length(w: DiscreteSbvMap, u: DiscreteSbvMap, tol_factor: float = 1e-9) -> float:
    """Length of parts of w's jump not geometrically inside u's jump."""
    if len(w.jump) == 0:
        return 0.0
    if len(u.jump) == 0:
        return w.jump.total_length
    tol = tol_factor * u.domain.radius
    mids = 0.5 * (w.jump.a + w.jump.b)
    probes = [0.25 * w.jump.a + 0.75 * w.jump.b, mids, 0.75 * w.jump.a + 0.25 * w.jump.b]
    far = np.zeros(len(w.jump), dtype=bool)
    for pr in probes:
        far |= np.min(_geom.point_segment_distance(pr, u.jump.a, u.jump.b), axis=1) > tol
    if not far.any():
        return 0.0
    return float(np.sum(_geom.seg_lengths(w.jump.a[far], w.jump.b[far])))


# ---------------------------------------------------------------------------
# covering
# ---------------------------------------------------------------------------


def _window_radius(J, x, lam: float, eta: float, k_max: int = 60):
    """Largest dyadic radius lam / 2^k whose ball sees jump density >= eta."""
    for k in range(1, k_max + 1):
        rk = lam / 2.0**k
        if J.length_in(Disk(tuple(x), rk)) >= eta * rk:
            return rk, k
    return None, None


def cover_jump(
    u: DiscreteSbvMap,
    s: float,
    eta: float,
    rho: float | None = None,
    seed: int = 0,
    spacing_cap: int = 400,
) -> BallFamily:
    """Cover J_u ∩ B_{s rho} by balls found through the dyadic density window,
    greedily thinned and split into pairwise-disjoint families.

    Each ball B_r(x) satisfies eta r <= H1(J ∩ B_r) and, by dyadic
    maximality, H1(J ∩ B_2r) < 2 eta r; its radius is below (1-s) rho / 2.
    """
    rho = u.domain.radius if rho is None else rho
    center = np.asarray(u.domain.center, dtype=float)
    J = u.jump
    budget = J.length_in(Disk(tuple(center), rho))
    bound = eta * (1 - s) * rho / 2
    if budget >= bound:
        raise JumpBudgetError(f"H1(J ∩ B_rho) = {budget:.6g} >= eta(1-s)rho/2 = {bound:.6g}")
    if len(J) == 0:
        return BallFamily.empty()

    rng = np.random.default_rng(seed)
    # candidate centres: free polyline endpoints first (they give the
    # adaptation the most room around straight runs), then arc-length samples
    lens = _geom.seg_lengths(J.a, J.b)
    spacing = max(float(lens.min()) / 4.0, J.total_length / spacing_cap)
    ends = _free_endpoints(J)
    mids = _geom.polyline_arclength_points(J.a, J.b, spacing)
    in_s = lambda q: q[np.linalg.norm(q - center, axis=1) <= s * rho]  # noqa: E731
    ends, mids = in_s(ends), in_s(mids)
    if len(ends) == 0 and len(mids) == 0:
        return BallFamily.empty()

    def window_balls(cands):
        out = []
        for x in cands:
            lam = float(rng.uniform((1 - s) * rho, 2 * (1 - s) * rho))
            rx, k = _window_radius(J, x, lam, eta)
            if rx is None:
                raise WindowNotFoundError(
                    f"density window empty at {x} (eta = {eta}); refine sampling"
                )
            if rx >= (1 - s) * rho / 2:
                continue  # k = 1 draw, outside the admissible covering radius range
            out.append((x, rx))
        return out

    end_balls = window_balls(ends)
    mid_balls = window_balls(mids)
    if not end_balls and not mid_balls:
        raise WindowNotFoundError("no admissible window radii found")

    # greedy thinning: endpoint candidates first, then biggest balls first
    end_balls.sort(key=lambda br: -br[1])
    mid_balls.sort(key=lambda br: -br[1])
    kept_c, kept_r = [], []
    for x, rx in end_balls + mid_balls:
        covered = any(
            np.linalg.norm(x - c) <= 0.5 * rr for c, rr in zip(kept_c, kept_r)
        )
        if not covered:
            kept_c.append(x)
            kept_r.append(rx)
    centers = np.asarray(kept_c)
    radii = np.asarray(kept_r)

    # greedy family split: smallest family index without intra-family overlap
    order = np.argsort(-radii)
    fam = np.zeros(len(radii), dtype=int)
    for i in order:
        used = set()
        for j in order:
            if fam[j] > 0 and j != i:
                if np.linalg.norm(centers[i] - centers[j]) <= radii[i] + radii[j]:
                    used.add(fam[j])
        f = 1
        while f in used:
            f += 1
        fam[i] = f
    xi_hat = int(fam.max())
    if xi_hat > XI_CAP:
        raise ToolkitError(f"greedy colouring needed {xi_hat} families (cap {XI_CAP})")

    # measured max overlap at sampled points
    probe = centers[:, None, :] + radii[:, None, None] * 0.5 * _dirgrid(8)[None, :, :]
    probe = probe.reshape(-1, 2)
    counts = np.zeros(len(probe), dtype=int)
    for c, rr in zip(centers, radii):
        counts += np.linalg.norm(probe - c, axis=1) <= rr
    perim = float(np.sum(2 * np.pi * radii))
    area = float(np.sum(np.pi * radii**2))
    h1 = budget
    stats = {
        "n_balls": len(radii),
        "xi_hat": xi_hat,
        "eta": eta,
        "s": s,
        "rho": rho,
        "total_perimeter": perim,
        "total_area": area,
        "max_overlap": int(counts.max()),
        "h1_jump": h1,
        "perimeter_bound": 2 * np.pi * xi_hat / eta * h1,
        "area_bound_min_form": float(
            min(2 * np.pi * xi_hat / eta * rho * h1, np.pi * (xi_hat / eta * h1) ** 2)
        ),
        "max_center_norm_plus_radius": float(
            np.max(np.linalg.norm(centers - center, axis=1) + radii)
        ),
    }
    return BallFamily(centers, radii, fam, xi_hat, stats)


def _dirgrid(n):
    t = 2 * np.pi * np.arange(n) / n
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def _free_endpoints(J) -> np.ndarray:
    """Endpoints that belong to exactly one segment (free chain ends)."""
    pts = np.concatenate([J.a, J.b])
    keys = np.round(pts / 1e-9).astype(np.int64)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return pts[counts[inv] == 1]


# ---------------------------------------------------------------------------
# global iteration
# ---------------------------------------------------------------------------


def global_approx(
    u: DiscreteSbvMap,
    p,
    s: float,
    eta: float,
    seed: int = 0,
    h_max: int = 5,
    quad_level: int = 2,
    max_rounds: int = 6,
    resid_tol_factor: float = 1e-9,
) -> ApproxReport:
    """Remove the jump of u inside B_{s rho} by iterated local replacement.

    Every covering ball B_r(x) satisfies the density window, hence the local
    step applies on it with smallness constant 2 eta; replacements stay
    strictly inside their ball, so w = u holds exactly outside the union.
    Jump remaining between replacement disks is re-covered in later rounds.
    """
    rho = u.domain.radius
    center = np.asarray(u.domain.center, dtype=float)
    budget = u.jump.length_in(Disk(tuple(center), rho))
    bound = eta * (1 - s) * rho / 2
    if budget >= bound:
        raise JumpBudgetError(f"H1(J) = {budget:.6g} >= eta(1-s)rho/2 = {bound:.6g}")

    rng = np.random.default_rng(seed)
    w = u
    family = BallFamily.empty()
    s_disk = Disk(tuple(center), s * rho)
    resid_tol = resid_tol_factor * rho
    rounds = 0
    while rounds < max_rounds:
        resid = w.jump.length_in(s_disk)
        if resid <= resid_tol:
            break
        rounds += 1
        fam = cover_jump(w, s, eta, rho, seed=int(rng.integers(0, 2**31 - 1)))
        if len(fam) == 0:
            break
        for j in range(1, fam.xi_hat + 1):
            cs, rs = fam.balls_of(j)
            for x, rx in zip(cs, rs):
                # the ball is the B_2r of the local step; the window bound
                # H1(J ∩ B_r) < 2 eta r is exactly its hypothesis at 2 eta
                _, w, _ = local_phi(
                    w, p, eta=2 * eta, seed=int(rng.integers(0, 2**31 - 1)),
                    center=x, r=rx / 2, h_max=h_max, quad_level=quad_level,
                )
        family = family.merged_with(fam)
    resid = w.jump.length_in(s_disk)
    if resid > resid_tol:
        raise ToolkitError(
            f"residual jump {resid:.3g} in B_s_rho after {max_rounds} rounds"
        )

    ball_rho = Disk(tuple(center), rho)
    est: dict = {
        "rho": rho, "s": s, "eta": eta, "rounds": rounds,
        "jump_budget": budget, "jump_residual_srho": resid,
    }
    est["jump_new"] = _new_jump_length(w, u)
    est["jump_in"] = budget
    est["jump_out"] = w.jump.length_in(ball_rho)

    # outside identity, checked pointwise at seeded samples
    if len(family) > 0:
        probe = _sample_outside(u.domain, family, rng, 512)
        if len(probe):
            dmax = float(np.max(np.linalg.norm(u.value_at(probe) - w.value_at(probe), axis=1)))
        else:
            dmax = 0.0
        est["outside_identity_max_error"] = dmax
    else:
        est["outside_identity_max_error"] = 0.0

    est["linf_in"] = _sup_norm_visible(u)
    est["linf_out"] = _sup_norm_visible(w)

    p_minus, p_plus = p.p_minus, p.p_plus
    modular_in = u.modular_of_gradient(p, ball_rho, quad_level)
    modular_out = w.modular_of_gradient(p, ball_rho, quad_level)
    norm_in = u.gradient_luxembourg_norm(p, ball_rho, quad_level)
    est["modular_in"] = modular_in
    est["modular_out"] = modular_out
    est["grad_norm_in"] = norm_in
    max_pow = max(norm_in**p_minus, norm_in**p_plus)
    est["modular_bound_const_var"] = (
        modular_out / ((1 + rho**2) * max_pow) if max_pow > 0 else 0.0
    )
    est["modular_bound_const_stripped"] = modular_out / max_pow if max_pow > 0 else 0.0

    for q, tag in ((1.0, "q1"), (p_minus, "q_pminus")):
        in_q = u.gradient_q_integral(q, ball_rho, quad_level)
        out_q = w.gradient_q_integral(q, ball_rho, quad_level)
        est[f"grad_{tag}_in"] = in_q
        est[f"grad_{tag}_out"] = out_q
        est[f"c_hat_{tag}"] = out_q / in_q if in_q > 0 else (0.0 if out_q <= 1e-12 else np.inf)

    pts, wq = disk_rule(ball_rho, n_r=10, n_t=20, order=4)
    est["l1_distance"] = float(
        np.sum(wq * np.linalg.norm(u.value_at(pts) - w.value_at(pts), axis=1))
    )

    if len(family) > 0:
        st = family.stats
        h1 = budget
        est["family_perimeter"] = float(np.sum(2 * np.pi * family.radii))
        est["family_perimeter_bound"] = 2 * np.pi * family.xi_hat / eta * h1
        est["family_area"] = float(np.sum(np.pi * family.radii**2))
        est["family_area_bound_min_form"] = float(
            min(
                2 * np.pi * family.xi_hat / eta * rho * h1,
                np.pi * (family.xi_hat / eta * h1) ** 2,
            )
        )
        est["union_containment_margin"] = float(
            (1 + s) * rho / 2
            - np.max(np.linalg.norm(family.centers - center, axis=1) + family.radii)
        )
        est["xi_hat"] = family.xi_hat
    else:
        est["xi_hat"] = 0
    return ApproxReport(w=w, family=family, estimates=est)


def _sample_outside(domain: Disk, family: BallFamily, rng, n: int) -> np.ndarray:
    c = np.asarray(domain.center)
    out = []
    for _ in range(20 * n):
        if len(out) >= n:
            break
        r = domain.radius * np.sqrt(rng.random())
        t = 2 * np.pi * rng.random()
        x = c + r * np.array([np.cos(t), np.sin(t)])
        if np.all(np.linalg.norm(family.centers - x, axis=1) > family.radii + 1e-9):
            out.append(x)
    return np.asarray(out) if out else np.zeros((0, 2))


# ---------------------------------------------------------------------------
# sphere stage
# ---------------------------------------------------------------------------


def project_to_sphere_stage(
    w: DiscreteSbvMap,
    p,
    s: float,
    config=None,
    seed: int = 0,
):
    """Retract the values of w onto the unit sphere inside B_{s rho}, keeping
    w as it is outside; returns (map, report).

    Cells already on the sphere are bitwise untouched, so the gluing across
    the stage boundary is exact wherever the trace is sphere-valued.
    """
    from .retract import RetractionConfig, project_w

    rho = w.domain.radius
    center = np.asarray(w.domain.center, dtype=float)
    stage = Disk(tuple(center), s * rho)
    if config is None:
        sup_w = max(np.linalg.norm(q.values, axis=1).max() for q in w.patches)
        config = RetractionConfig(k=w.k, M_bound=max(1.0, float(sup_w) * (1 + 1e-9)))
    w_tilde, rep = project_w(w, p, config, seed=seed, region=stage)
    th = 2 * np.pi * (np.arange(256) + 0.5) / 256
    bpts = center + (s * rho) * np.stack([np.cos(th), np.sin(th)], axis=1)
    mism = float(np.max(np.linalg.norm(w.value_at(bpts) - w_tilde.value_at(bpts), axis=1)))
    sph = float(np.max(np.abs(np.linalg.norm(w.value_at(bpts), axis=1) - 1.0)))
    rep = dict(rep)
    rep["stage_boundary_mismatch"] = mism
    rep["stage_boundary_sphericity"] = sph
    return w_tilde, rep
