import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from sbvx.errors import DomainMismatchError, OrderingViolationError, ToolkitError
from sbvx.quadrature import Disk, Rect
from sbvx.vexp import (
    ExponentField,
    embedding_constant,
    log_holder_diagnose,
    luxembourg_norm,
    modular,
)


# ---------------------------------------------------------------------------
# modular
# ---------------------------------------------------------------------------


def test_modular_constant_one_gives_area(unit_disk, affine_field):
    assert modular(1.0, affine_field, unit_disk) == pytest.approx(np.pi, rel=1e-12)


def test_modular_constant_two_p2(unit_disk):
    p2 = ExponentField.constant(2.0, unit_disk)
    assert modular(2.0, p2, unit_disk) == pytest.approx(4 * np.pi, rel=1e-12)


def test_modular_halfdisk_vs_adaptive_oracle(unit_disk, halfdisk_field):
    # f(x) = |x| with p = 1.5 on the left half-disk and 1.8 on the right.
    f = lambda pts: np.linalg.norm(pts, axis=1)  # noqa: E731
    got = modular(f, halfdisk_field, unit_disk)
    # independent adaptive quadrature oracle, radial per half-disk
    left, _ = integrate.quad(lambda r: r**1.5 * r, 0, 1, epsabs=1e-13, epsrel=1e-13)
    right, _ = integrate.quad(lambda r: r**1.8 * r, 0, 1, epsabs=1e-13, epsrel=1e-13)
    expect = np.pi * (left + right)
    assert got == pytest.approx(expect, rel=1e-8)


def test_modular_domain_mismatch(affine_field):
    with pytest.raises(DomainMismatchError):
        modular(1.0, affine_field, Disk((5.0, 0.0), 1.0))


def test_modular_additive_over_disjoint_regions(unit_disk, affine_field):
    from sbvx.quadrature import Annulus

    f = lambda pts: 1.0 + pts[:, 0] ** 2  # noqa: E731
    inner = Disk((0, 0), 0.5)
    ring = Annulus((0, 0), 0.5, 1.0)
    total = modular(f, affine_field, unit_disk)
    assert modular(f, affine_field, inner) + modular(f, affine_field, ring) == pytest.approx(
        total, rel=1e-10
    )


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1.0, max_value=4.0))
def test_modular_monotone_in_amplitude(c):
    disk = Disk((0.0, 0.0), 1.0)
    p = ExponentField.constant(1.6, disk)
    f = lambda pts: 0.5 + np.abs(np.sin(3 * pts[:, 0]))  # noqa: E731
    fc = lambda pts: c * f(pts)  # noqa: E731
    assert modular(fc, p, disk) >= modular(f, p, disk) - 1e-12


# ---------------------------------------------------------------------------
# Luxembourg norm
# ---------------------------------------------------------------------------


def test_norm_constant_exponent_is_classical(unit_disk):
    q = 1.7
    p = ExponentField.constant(q, unit_disk)
    f = lambda pts: 0.3 + pts[:, 0] ** 2  # noqa: E731
    m = modular(f, p, unit_disk)
    assert luxembourg_norm(f, p, unit_disk) == pytest.approx(m ** (1 / q), abs=1e-10)


def test_norm_unit_modular_fixed_point(unit_disk, affine_field):
    f0 = lambda pts: 0.4 + np.abs(pts[:, 1])  # noqa: E731
    lam = luxembourg_norm(f0, affine_field, unit_disk)
    f1 = lambda pts: f0(pts) / lam  # noqa: E731
    assert modular(f1, affine_field, unit_disk) == pytest.approx(1.0, abs=1e-8)
    assert luxembourg_norm(f1, affine_field, unit_disk) == pytest.approx(1.0, abs=1e-8)


def test_norm_zero_function(unit_disk, affine_field):
    assert luxembourg_norm(0.0, affine_field, unit_disk) == 0.0


def test_norm_two_piece_square_vs_root_oracle():
    # f = 1 on the unit square, p = 1.4 left half / 1.9 right half
    square = Rect(0.0, 1.0, 0.0, 1.0)

    class TwoPiece(ExponentField):
        def __init__(self):
            object.__setattr__(self, "kind", "closed_form")
            object.__setattr__(self, "domain", square)
            object.__setattr__(self, "p_minus", 1.4)
            object.__setattr__(self, "p_plus", 1.9)
            object.__setattr__(self, "params", {"form": "twopiece"})

        def __call__(self, pts):
            pts = np.atleast_2d(pts)
            return np.where(pts[:, 0] < 0.5, 1.4, 1.9)

    p = TwoPiece()
    got = luxembourg_norm(1.0, p, square)
    root = optimize.brentq(
        lambda lam: 0.5 * lam**-1.4 + 0.5 * lam**-1.9 - 1.0, 1e-6, 1e6, xtol=1e-14
    )
    assert got == pytest.approx(root, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.01, max_value=50.0))
def test_norm_homogeneity(c):
    disk = Disk((0.0, 0.0), 1.0)
    p = ExponentField("closed_form", disk, 1.3, 1.7, {"form": "affine", "p0": 1.5, "a": [0.1, 0.05]})
    f = lambda pts: 0.2 + np.abs(np.cos(2 * pts[:, 0] + pts[:, 1]))  # noqa: E731
    fc = lambda pts: c * f(pts)  # noqa: E731
    n1 = luxembourg_norm(f, p, disk)
    nc = luxembourg_norm(fc, p, disk)
    assert nc == pytest.approx(c * n1, rel=1e-7, abs=1e-8)


def test_norm_modular_inequalities_both_branches(unit_disk, affine_field):
    rng = np.random.default_rng(7)
    pm, pp = affine_field.p_minus, affine_field.p_plus
    for _ in range(40):
        amp = float(np.exp(rng.uniform(np.log(0.02), np.log(30.0))))
        freq = rng.uniform(0.5, 4.0, 2)

        def f(pts, amp=amp, freq=freq):
            return amp * (0.3 + np.abs(np.sin(pts @ freq)))

        m = modular(f, affine_field, unit_disk)
        nrm = luxembourg_norm(f, affine_field, unit_disk)
        if nrm > 1:
            assert m ** (1 / pp) - 1e-8 <= nrm <= m ** (1 / pm) + 1e-8
        else:
            assert m ** (1 / pm) - 1e-8 <= nrm <= m ** (1 / pp) + 1e-8


# ---------------------------------------------------------------------------
# log-Hoelder diagnostics
# ---------------------------------------------------------------------------


def test_log_holder_constant_field(unit_disk, constant_field):
    rep = log_holder_diagnose(constant_field, sample_budget=20_000, seed=0)
    assert rep.C_p == 0.0
    assert rep.ell == pytest.approx(1.0, abs=1e-12)
    assert rep.is_strong


def test_log_holder_lipschitz_field(unit_disk):
    # p(x) = 1.3 + 0.2 |x_1|: Lipschitz, hence strongly log-Hoelder
    p = ExponentField(
        "closed_form", unit_disk, 1.3, 1.5,
        {"form": "ridge_power", "p0": 1.3, "c": 0.2, "u": [1.0, 0.0], "b": 0.0, "beta": 1.0},
    )
    rep = log_holder_diagnose(p, sample_budget=120_000, seed=1)
    assert rep.is_strong
    # brute-force maximisation over 1e6 random pairs as the oracle
    rng = np.random.default_rng(99)
    n = 10**6
    r = np.sqrt(rng.random(n))
    t = 2 * np.pi * rng.random(n)
    xs = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    r2 = np.sqrt(rng.random(n))
    t2 = 2 * np.pi * rng.random(n)
    ys = np.stack([r2 * np.cos(t2), r2 * np.sin(t2)], axis=1)
    d = np.linalg.norm(xs - ys, axis=1)
    ok = (d > 0) & (d <= 0.5)
    brute = float(np.max(np.abs(p(xs[ok]) - p(ys[ok])) * (-np.log(d[ok]))))
    assert rep.C_p == pytest.approx(brute, rel=0.05)


def test_log_holder_radial_log_field(unit_disk):
    # p(x) = 1.3 + 0.1/(-ln |x|) near 0: log-Hoelder but not strongly
    p = ExponentField(
        "closed_form", unit_disk, 1.3, 1.3 + 0.1 / (-np.log(0.5)) + 1e-9,
        {"form": "radial_log", "p0": 1.3, "c": 0.1, "x0": [0.0, 0.0], "r_cap": 0.5},
    )
    rep = log_holder_diagnose(p, sample_budget=120_000, seed=2)
    assert rep.C_p == pytest.approx(0.1, rel=0.10)
    assert not rep.is_strong


def test_log_holder_profile_scales_decreasing(constant_field):
    rep = log_holder_diagnose(constant_field, sample_budget=5_000, seed=3)
    scales = [s for s, _ in rep.strong_profile]
    assert all(s2 < s1 for s1, s2 in zip(scales, scales[1:]))


def test_log_holder_empty_budget(constant_field):
    with pytest.raises(ToolkitError):
        log_holder_diagnose(constant_field, sample_budget=0)


# ---------------------------------------------------------------------------
# embedding constant
# ---------------------------------------------------------------------------


def test_embedding_equal_exponents(unit_disk):
    p = ExponentField.constant(1.6, unit_disk)
    assert embedding_constant(p, p, unit_disk) == pytest.approx(2.0, abs=1e-12)


def test_embedding_unit_measure_region():
    dom = Disk((0.5, 0.5), 1.0)
    p = ExponentField.constant(1.8, dom)
    q = ExponentField.constant(1.4, dom)
    square = Rect(0.0, 1.0, 0.0, 1.0)
    assert embedding_constant(p, q, square) == pytest.approx(2.0, abs=1e-12)


def test_embedding_disk_vs_direct_formula(unit_disk):
    p = ExponentField.constant(1.8, unit_disk)
    q = ExponentField.constant(1.5, unit_disk)
    got = embedding_constant(p, q, unit_disk)
    d = 1 / 1.5 - 1 / 1.8
    expect = min(2 * (1 + np.pi), 2 * max(np.pi**d, np.pi**d))
    assert got == pytest.approx(expect, rel=1e-12)


def test_embedding_ordering_violation(unit_disk):
    p = ExponentField.constant(1.5, unit_disk)
    q = ExponentField.constant(1.8, unit_disk)
    with pytest.raises(OrderingViolationError):
        embedding_constant(p, q, unit_disk)


# ---------------------------------------------------------------------------
# field plumbing
# ---------------------------------------------------------------------------


def test_field_json_roundtrip(unit_disk, affine_field):
    obj = affine_field.to_json()
    back = ExponentField.from_json(obj)
    pts = np.array([[0.1, 0.2], [-0.5, 0.3]])
    assert np.allclose(back(pts), affine_field(pts))


def test_grid_field_bilinear(unit_disk):
    xs = np.linspace(-1, 1, 21)
    vals = 1.4 + 0.1 * np.abs(np.subtract.outer(xs, 0 * xs) * 0 + xs[None, :])
    p = ExponentField(
        "grid", unit_disk, 1.4, 1.5,
        {"x0": -1.0, "y0": -1.0, "dx": 0.1, "dy": 0.1, "values": vals},
    )
    assert p(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.4, abs=1e-12)
    assert p(np.array([[0.95, 0.0]]))[0] == pytest.approx(1.4 + 0.095, abs=1e-12)


def test_field_bounds_validated(unit_disk):
    with pytest.raises(ToolkitError):
        ExponentField("closed_form", unit_disk, 1.3, 1.35, {"form": "affine", "p0": 1.5, "a": [0.1, 0.0]})
    with pytest.raises(ToolkitError):
        ExponentField.constant(1.0, unit_disk)  # p_minus must exceed 1
