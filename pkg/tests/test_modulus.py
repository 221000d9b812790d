import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ellipk, ellipkm1

from qbk.mobius import Inversion, MobiusMap, Translation, canonical_T
from qbk.modulus import (
    CapacityBounds,
    DegenerateRingError,
    Disk,
    PointSet,
    Polygon,
    RingDomain,
    Segment,
    annulus_modulus,
    capacity_2d,
    comparison_constant,
    gehring_lower_bound,
    grotzsch_bounds,
    lambda_bounds,
    ring_image,
    sector_modulus,
    solve_capacity_2d,
    sphere_constants,
    teichmuller_bounds,
)

E = math.e


def _mu(r):
    """Modulus of the planar Groetzsch ring, pi K'(r) / (2 K(r))."""
    return math.pi * ellipkm1(r * r) / (2 * ellipk(r * r))


def gamma2(s):
    """Exact planar Groetzsch capacity: gamma_2(s) = 2 pi / mu(1/s)."""
    return 2 * math.pi / _mu(1 / s)


def tau2(t):
    return gamma2(math.sqrt(1 + t)) / 2


def test_sphere_constants():
    assert sphere_constants(2) == pytest.approx((math.pi, 2 * math.pi), rel=1e-15)
    assert sphere_constants(3) == pytest.approx((4 * math.pi / 3, 4 * math.pi), rel=1e-15)
    assert sphere_constants(4) == pytest.approx((math.pi**2 / 2, 2 * math.pi**2), rel=1e-15)
    with pytest.raises(ValueError):
        sphere_constants(1)


def test_annulus_modulus_examples():
    assert annulus_modulus(1, E, 2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert annulus_modulus(1, E, 3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert annulus_modulus(1, E**2, 2) == pytest.approx(math.pi, rel=1e-15)
    for a, b in ((1, 1), (2, 1), (0, 1)):
        with pytest.raises(ValueError):
            annulus_modulus(a, b, 2)


def test_annulus_modulus_homogeneous_and_decreasing():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = rng.uniform(0.01, 10)
        q = rng.uniform(1.01, 20)
        n = int(rng.integers(2, 7))
        assert annulus_modulus(a, a * q, n) == pytest.approx(annulus_modulus(1, q, n), rel=1e-12)
        assert annulus_modulus(a, a * q * 1.1, n) < annulus_modulus(a, a * q, n)


def test_lambda_bounds():
    assert lambda_bounds(2) == (4.0, 4.0)
    assert lambda_bounds(3) == pytest.approx((2 * math.exp(1.52), 2 * E**2))
    assert lambda_bounds(4) == pytest.approx((2 * math.exp(2.28), 2 * E**3))


def test_grotzsch_examples():
    b = grotzsch_bounds(E, 2)
    assert (b.lower, b.upper) == pytest.approx((2 * math.pi / (math.log(4) + 1), 2 * math.pi), rel=1e-14)
    b3 = grotzsch_bounds(10, 3)
    lo_alt = 4 * math.pi * math.log(lambda_bounds(3)[0] * 10) ** -2
    assert b3.lower <= lo_alt <= b3.upper
    t = teichmuller_bounds(E**2 - 1, 2)
    assert (t.lower, t.upper) == pytest.approx((b.lower / 2, b.upper / 2), rel=1e-12)
    with pytest.raises(ValueError):
        grotzsch_bounds(1.0, 2)
    with pytest.raises(ValueError):
        teichmuller_bounds(0.0, 2)


@pytest.mark.parametrize("s", [1.01, 1.5, E, 10, 1e3, 1e6])
def test_grotzsch_bounds_contain_exact_planar_value(s):
    b = grotzsch_bounds(s, 2)
    g = gamma2(s)
    assert b.lower * (1 - 1e-12) <= g <= b.upper * (1 + 1e-12)
    tb = teichmuller_bounds(s, 2)
    assert tb.lower * (1 - 1e-12) <= tau2(s) <= tb.upper * (1 + 1e-12)


def test_lambda2_is_the_asymptotic_constant():
    # mu(1/s) - log(4 s) -> 0, i.e. the lower bound is sharp at infinity
    for s in (1e3, 1e5):
        assert _mu(1 / s) == pytest.approx(math.log(4 * s), abs=1e-5)


@settings(max_examples=200)
@given(st.floats(1.0001, 1e8), st.floats(1.0001, 1e8), st.integers(2, 8))
def test_grotzsch_bounds_properties(s1, s2, n):
    lo, hi = sorted((s1, s2))
    b1, b2 = grotzsch_bounds(lo, n), grotzsch_bounds(hi, n)
    assert 0 <= b1.lower <= b1.upper
    if hi > lo * (1 + 1e-9):
        assert b2.lower < b1.lower and b2.upper < b1.upper


def test_gehring_lower_bound():
    b = gehring_lower_bound(np.array([1 / E, 0.0]))
    assert b.to_json() == grotzsch_bounds(E, 2).to_json()
    assert gehring_lower_bound(np.array([0.99, 0.0])).upper > gehring_lower_bound(np.array([0.9, 0.0])).upper
    assert gehring_lower_bound(np.array([0.5, 0.0, 0.0])).to_json() == grotzsch_bounds(2.0, 3).to_json()
    for bad in ([0.0, 0.0], [1.0, 0.0], [0.8, 0.8]):
        with pytest.raises(ValueError):
            gehring_lower_bound(np.array(bad))


def test_comparison_constant():
    assert comparison_constant(2, 1 / E) == pytest.approx(1 / (1 + math.log(4)), abs=1e-15)
    assert comparison_constant(2, 1e-300) == pytest.approx(1.0, abs=0.01)
    lam = 2 * E**2
    assert comparison_constant(3, 0.5) == pytest.approx((1 + math.log(lam) / math.log(2)) ** -2, rel=1e-14)
    assert comparison_constant(3, 0.5, "lower") > comparison_constant(3, 0.5)
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            comparison_constant(2, bad)


def test_comparison_constant_lemma_on_planar_values():
    # C M(annulus) <= gamma(1/r) <= M(annulus) for r < r0
    for r0 in (0.2, 0.5, 0.9):
        c = comparison_constant(2, r0)
        for r in np.linspace(0.01, r0 * 0.999, 20):
            m = annulus_modulus(r, 1.0, 2)
            assert c * m <= gamma2(1 / r) * (1 + 1e-12) and gamma2(1 / r) <= m * (1 + 1e-12)


def test_capacity_bounds_type():
    with pytest.raises(ValueError):
        CapacityBounds(2.0, 1.0)
    with pytest.raises(ValueError):
        CapacityBounds(-1.0, 1.0)


def test_sector_modulus():
    assert sector_modulus(1, E, 2 * math.pi) == pytest.approx(annulus_modulus(1, E, 2))


def test_capacity_annulus_e2():
    r = solve_capacity_2d(RingDomain.annulus(1, E**2), 512)
    assert r.value == pytest.approx(math.pi, rel=0.02)
    assert r.residual < 1e-10


def test_capacity_grid_convergence():
    ring = RingDomain.annulus(0.7, 2.1, center=(0.3, -0.2))
    a, b = capacity_2d(ring, 128), capacity_2d(ring, 256)
    assert abs(a - b) / b < 0.01
    assert b == pytest.approx(annulus_modulus(0.7, 2.1, 2), rel=0.01)


def test_conformal_invariance_under_T_a():
    ring = RingDomain.annulus(0.1, 0.1 * E)
    img = ring_image(ring, canonical_T(np.array([0.3, 0.4])))
    assert capacity_2d(img, 512) == pytest.approx(2 * math.pi, rel=0.03)
    # inversion after a shift: z -> (z - 3)/|z - 3|^2
    img = ring_image(RingDomain.annulus(1, E), MobiusMap((Translation(np.array([-3.0, 0.0])), Inversion())))
    assert img.inner.radius == pytest.approx(1 / 8) and img.inner.center[0] == pytest.approx(-3 / 8)


def test_polygon_outer_boundary_is_bracketed():
    # the square lies between the circles of radius 2 and 2 sqrt 2, so by monotonicity
    inner = Disk(np.zeros(2), 0.5)
    square = Polygon(np.array([[-2.0, -2.0], [2.0, -2.0], [2.0, 2.0], [-2.0, 2.0]]))
    c = capacity_2d(RingDomain(inner, square), 256)
    assert annulus_modulus(0.5, 2.0 * math.sqrt(2), 2) <= c <= annulus_modulus(0.5, 2.0, 2)


@pytest.mark.parametrize("a", [0.3, 0.5])
def test_segment_condenser_matches_elliptic_oracle(a):
    # z -> z^2 folds (disk, [-a, a]) two-to-one onto the Groetzsch ring (disk, [0, a^2]),
    # whose capacity is 2 pi / mu(a^2); the modulus doubles upstairs
    seg = Segment(np.array([-a, 0.0]), np.array([a, 0.0]))
    c = capacity_2d(RingDomain(seg, Disk(np.zeros(2), 1.0)), 512)
    assert c == pytest.approx(4 * math.pi / _mu(a * a), rel=0.02)


def test_pointset_and_degenerate_rings():
    t = np.linspace(0, 2 * math.pi, 400, endpoint=False)
    pts = 0.5 * np.column_stack([np.cos(t), np.sin(t)])
    c = capacity_2d(RingDomain(PointSet(pts), Disk(np.zeros(2), 1.5)), 256)
    assert c == pytest.approx(annulus_modulus(0.5, 1.5, 2), rel=0.05)
    with pytest.raises(DegenerateRingError):
        capacity_2d(RingDomain(Disk(np.zeros(2), 1.0), Disk(np.array([0.5, 0.0]), 1.2)), 128)
    with pytest.raises(DegenerateRingError):
        capacity_2d(RingDomain(Disk(np.zeros(2), 1.0), Disk(np.zeros(2), 1.0 + 1e-6)), 128)


def test_ring_json_round_trip():
    ring = RingDomain(Segment(np.array([0.0, 0.0]), np.array([1.0, 0.0])), Disk(np.zeros(2), 3.0))
    assert RingDomain.from_json(ring.to_json()).to_json() == ring.to_json()
    with pytest.raises(ValueError):
        RingDomain.from_json({"inner": {"type": "sphere", "center": [0, 0], "radius": 1}, "outer": ring.to_json()["outer"]})
