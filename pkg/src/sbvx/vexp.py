"""Variable exponent fields, modulars, Luxembourg norms, log-Hoelder diagnostics.

An exponent field assigns to each point of a planar domain an exponent in
(1, p_plus]. The modular of a function f is the integral of |f|^{p(x)} and
the Luxembourg norm is the scaling lambda that brings the modular of f/lambda
down to one.

Closed-form fields are restricted to a whitelist (see ``CLOSED_FORMS``):
    affine        p0 + a . x
    radial_log    p0 + c / (-ln max(|x - x0|, r_floor)), capped at r_cap
    radial_power  p0 + c |x - x0|**beta
    ridge_power   p0 + c |x . u - b|**beta   (abs-affine ridge; beta = 1
                  gives fields like 1.3 + 0.2 |x1|)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatchError, OrderingViolationError, ToolkitError
from .quadrature import Disk, Rect, Region, region_rule

__all__ = [
    "ExponentField",
    "LogHolderReport",
    "modular",
    "luxembourg_norm",
    "log_holder_diagnose",
    "embedding_constant",
]

CLOSED_FORMS = ("affine", "radial_log", "radial_power", "ridge_power")

BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


def _eval_closed_form(form: str, params: dict, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    if form == "affine":
        a = np.asarray(params["a"], dtype=float)
        return params["p0"] + pts @ a
    if form == "radial_log":
        x0 = np.asarray(params.get("x0", (0.0, 0.0)), dtype=float)
        r_cap = params.get("r_cap", 0.5)
        r_floor = params.get("r_floor", 1e-300)
        r = np.linalg.norm(pts - x0, axis=-1)
        r = np.clip(r, r_floor, r_cap)
        return params["p0"] + params["c"] / (-np.log(r))
    if form == "radial_power":
        x0 = np.asarray(params.get("x0", (0.0, 0.0)), dtype=float)
        r = np.linalg.norm(pts - x0, axis=-1)
        return params["p0"] + params["c"] * r ** params.get("beta", 1.0)
    if form == "ridge_power":
        u = np.asarray(params["u"], dtype=float)
        t = np.abs(pts @ u - params.get("b", 0.0))
        return params["p0"] + params["c"] * t ** params.get("beta", 1.0)
    raise ToolkitError(f"closed form {form!r} is not in the whitelist {CLOSED_FORMS}")


def _region_to_json(region: Region) -> dict:
    if isinstance(region, Disk):
        return {"type": "disk", "center": list(region.center), "radius": region.radius}
    if isinstance(region, Rect):
        return {"type": "rect", "x0": region.x0, "x1": region.x1, "y0": region.y0, "y1": region.y1}
    raise ToolkitError(f"cannot serialise region {region!r}")


def _region_from_json(obj: dict) -> Region:
    if obj["type"] == "disk":
        return Disk(tuple(obj["center"]), obj["radius"])
    if obj["type"] == "rect":
        return Rect(obj["x0"], obj["x1"], obj["y0"], obj["y1"])
    raise ToolkitError(f"unknown region type {obj['type']!r}")


@dataclass(frozen=True)
class ExponentField:
    """Variable exponent p(.) on a planar domain with certified bounds."""

    kind: str  # "constant" | "closed_form" | "grid"
    domain: Region
    p_minus: float
    p_plus: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("constant", "closed_form", "grid"):
            raise ToolkitError(f"unknown exponent field kind {self.kind!r}")
        if not (1.0 < self.p_minus <= self.p_plus):
            raise ToolkitError(
                f"exponent bounds must satisfy 1 < p_minus <= p_plus, "
                f"got ({self.p_minus}, {self.p_plus})"
            )
        vals = self(self._validation_points())
        if vals.min() < self.p_minus - 1e-9 or vals.max() > self.p_plus + 1e-9:
            raise ToolkitError(
                f"sampled exponent range [{vals.min():.6g}, {vals.max():.6g}] "
                f"escapes the declared bounds [{self.p_minus}, {self.p_plus}]"
            )

    def _validation_points(self, n: int = 4096) -> np.ndarray:
        rng = np.random.default_rng(0)
        return sample_region(self.domain, n, rng)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "constant":
            return np.full(len(pts), float(self.params["value"]))
        if self.kind == "closed_form":
            return _eval_closed_form(self.params["form"], self.params, pts)
        # sampled grid, bilinear interpolation
        x0, y0 = self.params["x0"], self.params["y0"]
        dx, dy = self.params["dx"], self.params["dy"]
        vals = np.asarray(self.params["values"], dtype=float)
        ny, nx = vals.shape
        fx = np.clip((pts[:, 0] - x0) / dx, 0.0, nx - 1 - 1e-12)
        fy = np.clip((pts[:, 1] - y0) / dy, 0.0, ny - 1 - 1e-12)
        ix, iy = fx.astype(int), fy.astype(int)
        tx, ty = fx - ix, fy - iy
        v00 = vals[iy, ix]
        v01 = vals[iy, ix + 1]
        v10 = vals[iy + 1, ix]
        v11 = vals[iy + 1, ix + 1]
        return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def covers(self, region: Region, tol: float = 1e-9) -> bool:
        """Whether the field's domain contains the region."""
        dom = self.domain
        if isinstance(dom, Disk):
            c = np.asarray(dom.center)
            if isinstance(region, Disk):
                return np.linalg.norm(np.asarray(region.center) - c) + region.radius <= dom.radius + tol
            if isinstance(region, Rect):
                corners = np.array(
                    [[region.x0, region.y0], [region.x0, region.y1],
                     [region.x1, region.y0], [region.x1, region.y1]]
                )
                return bool(np.all(np.linalg.norm(corners - c, axis=1) <= dom.radius + tol))
            # annulus
            return np.linalg.norm(np.asarray(region.center) - c) + region.r_outer <= dom.radius + tol
        if isinstance(dom, Rect):
            if isinstance(region, Rect):
                return (
                    region.x0 >= dom.x0 - tol and region.x1 <= dom.x1 + tol
                    and region.y0 >= dom.y0 - tol and region.y1 <= dom.y1 + tol
                )
            c = np.asarray(region.center)
            r = region.radius if isinstance(region, Disk) else region.r_outer
            return (
                c[0] - r >= dom.x0 - tol and c[0] + r <= dom.x1 + tol
                and c[1] - r >= dom.y0 - tol and c[1] + r <= dom.y1 + tol
            )
        return False

    def rescaled(self, center, scale: float) -> "ExponentField":
        """Field y -> p(center + scale * y) on the unit-scaled domain."""
        c = np.asarray(center, dtype=float)

        base = self

        class _Rescaled(ExponentField):
            def __call__(self, pts):  # noqa: D401
                pts = np.atleast_2d(np.asarray(pts, dtype=float))
                return base(c + scale * pts)

        obj = _Rescaled.__new__(_Rescaled)
        object.__setattr__(obj, "kind", "closed_form")
        object.__setattr__(obj, "domain", Disk((0.0, 0.0), 1.0))
        object.__setattr__(obj, "p_minus", self.p_minus)
        object.__setattr__(obj, "p_plus", self.p_plus)
        object.__setattr__(obj, "params", {"form": "rescaled"})
        return obj

    def to_json(self) -> dict:
        if self.params.get("form") == "rescaled":
            raise ToolkitError("rescaled exponent fields are in-memory only")
        params = dict(self.params)
        if "values" in params:
            params["values"] = np.asarray(params["values"]).tolist()
        if "a" in params:
            params["a"] = list(np.asarray(params["a"], dtype=float))
        if "u" in params:
            params["u"] = list(np.asarray(params["u"], dtype=float))
        if "x0" in params:
            params["x0"] = list(np.asarray(params["x0"], dtype=float))
        return {
            "kind": self.kind,
            "domain": _region_to_json(self.domain),
            "p_minus": self.p_minus,
            "p_plus": self.p_plus,
            "params": params,
        }

    @staticmethod
    def from_json(obj: dict) -> "ExponentField":
        return ExponentField(
            kind=obj["kind"],
            domain=_region_from_json(obj["domain"]),
            p_minus=obj["p_minus"],
            p_plus=obj["p_plus"],
            params=dict(obj["params"]),
        )

    @staticmethod
    def constant(value: float, domain: Region) -> "ExponentField":
        return ExponentField("constant", domain, value, value, {"value": value})


def sample_region(region: Region, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in a region."""
    if isinstance(region, Disk):
        r = region.radius * np.sqrt(rng.random(n))
        t = 2 * np.pi * rng.random(n)
        return np.asarray(region.center) + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    if isinstance(region, Rect):
        x = rng.uniform(region.x0, region.x1, n)
        y = rng.uniform(region.y0, region.y1, n)
        return np.stack([x, y], axis=1)
    raise ToolkitError(f"cannot sample region {region!r}")


@dataclass(frozen=True)
class LogHolderReport:
    """Measured continuity constants of an exponent field."""

    C_p: float
    ell: float
    strong_profile: list  # [(scale, omega(scale) * log(1/scale)), ...] decreasing scales
    is_strong: bool
    sample_budget: int
    seed: int

    def __post_init__(self):
        scales = [s for s, _ in self.strong_profile]
        if any(s2 >= s1 for s1, s2 in zip(scales, scales[1:])):
            raise ToolkitError("strong_profile scales must be strictly decreasing")


def _as_magnitude(fv: np.ndarray) -> np.ndarray:
    fv = np.asarray(fv, dtype=float)
    if fv.ndim == 1:
        return np.abs(fv)
    return np.linalg.norm(fv, axis=-1)


def _sampled_integrand(f, p: ExponentField, region: Region, resolution: int):
    pts, w = region_rule(region, resolution=resolution)
    if callable(f):
        fv = _as_magnitude(f(pts))
    else:
        fv = np.full(len(pts), abs(float(f)))
    return fv, p(pts), w


def modular(f, p: ExponentField, region: Region, resolution: int = 24) -> float:
    """Modular of f over region: integral of |f(x)|^{p(x)} dx.

    f may be a callable (points -> scalars or vectors) or a constant.
    Uses the fixed composite rule of the region; the rule resolution is an
    explicit argument so callers can report their integration tolerance.
    """
    if not p.covers(region):
        raise DomainMismatchError(f"region {region!r} escapes exponent domain {p.domain!r}")
    fv, pv, w = _sampled_integrand(f, p, region, resolution)
    if not np.all(np.isfinite(fv)):
        raise ToolkitError("integrand is not finite on the region")
    return float(np.sum(w * fv**pv))


def modular_from_samples(fv: np.ndarray, pv: np.ndarray, w: np.ndarray, lam: float = 1.0) -> float:
    """Modular of f/lam from precomputed samples (used by norm bisection)."""
    return float(np.sum(w * (fv / lam) ** pv))


def luxembourg_norm(f, p: ExponentField, region: Region, resolution: int = 24) -> float:
    """Luxembourg norm inf{lam > 0 : modular(f/lam) <= 1} by bisection.

    Bracket expansion around lam = 1 followed by bisection to absolute
    tolerance BISECT_TOL on lam (hard cap BISECT_MAX_ITER iterations).
    """
    if not p.covers(region):
        raise DomainMismatchError(f"region {region!r} escapes exponent domain {p.domain!r}")
    fv, pv, w = _sampled_integrand(f, p, region, resolution)
    if not np.all(np.isfinite(fv)):
        raise ToolkitError("modular is not finite: integrand has non-finite values")
    m0 = float(np.sum(w * fv**pv))
    if m0 == 0.0:
        return 0.0
    if not np.isfinite(m0):
        raise ToolkitError("modular is not finite")
    lo = hi = 1.0
    if modular_from_samples(fv, pv, w, hi) > 1.0:
        for _ in range(BISECT_MAX_ITER):
            hi *= 2.0
            if modular_from_samples(fv, pv, w, hi) <= 1.0:
                break
        lo = hi / 2.0
    else:
        for _ in range(BISECT_MAX_ITER):
            lo /= 2.0
            if modular_from_samples(fv, pv, w, lo) > 1.0:
                break
        else:
            return 0.0
        hi = lo * 2.0
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if modular_from_samples(fv, pv, w, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _pair_cloud(p: ExponentField, n: int, rng: np.random.Generator):
    """Sample point pairs probing both generic and near-centre behaviour."""
    dom = p.domain
    n_uni = n // 2
    x = sample_region(dom, n_uni, rng)
    y = sample_region(dom, n_uni, rng)
    # near-pair cloud at log-spaced separations
    n_near = n - n_uni
    base = sample_region(dom, n_near, rng)
    sep = np.exp(rng.uniform(np.log(1e-8), np.log(0.5), n_near))
    ang = 2 * np.pi * rng.random(n_near)
    mate = base + sep[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    inside = dom.contains(mate)
    xs = np.concatenate([x, base[inside]])
    ys = np.concatenate([y, mate[inside]])
    if isinstance(dom, Disk):
        # log-radial cluster towards the centre: probes radial-log singularities
        m = max(16, n // 8)
        r = np.exp(rng.uniform(np.log(1e-12), np.log(max(dom.radius / 2, 1e-10)), m))
        t = 2 * np.pi * rng.random(m)
        ctr = np.asarray(dom.center) + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
        xs = np.concatenate([xs, ctr[:-1]])
        ys = np.concatenate([ys, ctr[1:]])
    return xs, ys


def log_holder_diagnose(
    p: ExponentField,
    sample_budget: int = 100_000,
    scales=None,
    seed: int = 0,
    strong_ratio: float = 0.8,
) -> LogHolderReport:
    """Estimate the log-Hoelder constant, the ball constant, and the strong
    profile of an exponent field by seeded sampling.

    C_p is the max of |p(x)-p(y)| * (-ln|x-y|) over sampled pairs with
    0 < |x-y| <= 1/2; ell is the max over sampled balls B of
    |B|^(p_B^- - p_B^+). The strong profile lists omega(rho) * log(1/rho)
    at the requested scales; the field is flagged strong when the profile
    decays by the configured ratio at the three smallest scales.
    """
    if sample_budget <= 0:
        raise ToolkitError("sample budget must be positive")
    if scales is None:
        scales = [2.0**-k for k in range(2, 10)]
    scales = sorted(float(s) for s in scales)[::-1]
    if any(s > 0.5 or s <= 0 for s in scales):
        raise ToolkitError("scales must lie in (0, 1/2]")
    rng = np.random.default_rng(seed)

    xs, ys = _pair_cloud(p, sample_budget, rng)
    d = np.linalg.norm(xs - ys, axis=1)
    ok = (d > 0) & (d <= 0.5)
    dp = np.abs(p(xs[ok]) - p(ys[ok]))
    C_p = float(np.max(dp * (-np.log(d[ok])))) if np.any(ok) else 0.0
    if np.max(dp, initial=0.0) <= 1e-14:
        C_p = 0.0

    # ball constant: sampled balls inside the domain
    n_balls = 256
    ell = 1.0
    dom = p.domain
    for _ in range(n_balls):
        c = sample_region(dom, 1, rng)[0]
        if isinstance(dom, Disk):
            rmax = dom.radius - np.linalg.norm(c - np.asarray(dom.center))
        else:
            rmax = min(c[0] - dom.x0, dom.x1 - c[0], c[1] - dom.y0, dom.y1 - c[1])
        if rmax <= 1e-9:
            continue
        r = rmax * np.exp(rng.uniform(np.log(1e-4), 0.0))
        pts = np.asarray(c) + r * np.sqrt(rng.random(64))[:, None] * _unit_dirs(64, rng)
        pv = p(pts)
        ell = max(ell, float((np.pi * r * r) ** (pv.min() - pv.max())))

    # strong profile
    per_scale = max(512, sample_budget // (8 * len(scales)))
    profile = []
    for s in scales:
        base = sample_region(dom, per_scale, rng)
        mate = base + s * _unit_dirs(per_scale, rng)
        inside = dom.contains(mate)
        omega = 0.0
        if np.any(inside):
            omega = float(np.max(np.abs(p(base[inside]) - p(mate[inside]))))
        if isinstance(dom, Disk):
            # radial pairs towards the centre at separation ~ s
            r0 = np.exp(rng.uniform(np.log(1e-12), np.log(min(s, dom.radius / 2)), 64))
            pts0 = np.asarray(dom.center) + r0[:, None] * _unit_dirs(64, rng)
            pts1 = np.asarray(dom.center) + (r0 * 1e-3)[:, None] * _unit_dirs(64, rng)
            omega = max(omega, float(np.max(np.abs(p(pts0) - p(pts1)))))
        profile.append((s, omega * np.log(1.0 / s)))

    vals = [v for _, v in profile]
    is_strong = True
    if len(vals) >= 4:
        for j in range(len(vals) - 3, len(vals)):
            if not (vals[j] <= strong_ratio * vals[j - 1] + 1e-12):
                is_strong = False
                break
    return LogHolderReport(
        C_p=C_p,
        ell=ell,
        strong_profile=profile,
        is_strong=is_strong,
        sample_budget=sample_budget,
        seed=seed,
    )


def _unit_dirs(n: int, rng: np.random.Generator) -> np.ndarray:
    t = 2 * np.pi * rng.random(n)
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def embedding_constant(
    p: ExponentField,
    q: ExponentField,
    region: Region,
    samples: int = 8192,
    seed: int = 0,
) -> float:
    """Upper bound for the L^{p(.)} -> L^{q(.)} embedding constant on a region
    of finite measure: min of 2(1+|A|) and 2 max(|A|^sup(1/q-1/p), |A|^inf(1/q-1/p)),
    with the extremes of the exponent difference estimated from samples.
    """
    rng = np.random.default_rng(seed)
    pts = sample_region(region if not hasattr(region, "r_inner") else p.domain, samples, rng)
    pv, qv = p(pts), q(pts)
    if np.any(qv > pv + 1e-9):
        raise OrderingViolationError("q(x) > p(x) at a sampled point")
    d = 1.0 / qv - 1.0 / pv
    area = region.area
    branch = 2.0 * max(area ** float(d.max()), area ** float(d.min()))
    return float(min(2.0 * (1.0 + area), branch))
