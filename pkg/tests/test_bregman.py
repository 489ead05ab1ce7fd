import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregprox.bregman import (BREGMAN_KEYS, bregman_distance, breg1_expanded, breg1_printed,
                              breg2_closed_form, check_b2_b3, check_level_set_bounded,
                              det_closed_form, make_breg1, make_breg2, make_bregman,
                              make_det_bregman, make_org, make_trace_bregman, trace_closed_form)
from bregprox.errors import DomainError
from bregprox.manifolds import PositiveOrthant, SPDManifold

E = np.e


def _zone_point(phi, rng, scale=1.0):
    """Random point inside the zone of ``phi``."""
    m = phi.manifold
    if phi.name == "breg2":
        return 1.0 + np.exp(scale * rng.standard_normal(m.n))
    return m.random_point(rng, scale)


INSTANCES = {
    "org": make_org(PositiveOrthant(3)),
    "org-spd": make_org(SPDManifold(2)),
    "breg1": make_breg1(3),
    "breg2": make_breg2(3),
    "spd-det": make_det_bregman(2),
    "spd-trace": make_trace_bregman(2),
}


# ---------------------------------------------------------------------------
# worked examples with independent oracles

def test_org_examples():
    m = PositiveOrthant(2)
    phi = make_org(m)
    assert phi(np.ones(2)) == 0.0
    assert np.allclose(phi.gradient(np.ones(2)), 0.0)
    assert phi(np.array([E, 1.0])) == pytest.approx(0.5, abs=1e-15)


def test_org_distance_from_origin():
    mpmath.mp.dps = 40
    oracle = (mpmath.log(20) ** 2 + mpmath.log(5) ** 2 + mpmath.log(3) ** 2) / 2
    d = INSTANCES["org"].distance([20, 5, 3], [1, 1, 1])
    assert d == pytest.approx(float(oracle), abs=1e-12)
    assert d == pytest.approx(6.385825, abs=1e-6)


def test_breg1_examples():
    phi = make_breg1(3)
    assert phi(np.ones(3)) == 3.0
    assert np.allclose(phi.gradient(np.ones(3)), 2.0)


def test_breg1_distance_high_precision():
    # D((2,1),(1,1)) from the intrinsic definition, evaluated in mpmath
    mpmath.mp.dps = 40
    x, y = [mpmath.mpf(2), mpmath.mpf(1)], [mpmath.mpf(1), mpmath.mpf(1)]
    val = sum(mpmath.log(a) ** 2 + a ** 2 for a in x) - sum(mpmath.log(b) ** 2 + b ** 2 for b in y)
    val -= sum((2 * b * mpmath.log(b) + 2 * b ** 3) * b * mpmath.log(a / b) / b ** 2
               for a, b in zip(x, y))
    assert float(val) == pytest.approx(float(mpmath.log(2) ** 2 + 3 - 2 * mpmath.log(2)), abs=1e-30)
    got = make_breg1(2).distance([2.0, 1.0], [1.0, 1.0])
    assert got == pytest.approx(float(val), abs=1e-14)
    assert got == pytest.approx(2.0941587, abs=1e-7)


def test_breg2_examples():
    phi = make_breg2(3)
    assert phi(np.full(3, E)) == pytest.approx(0.0, abs=1e-15)
    x = np.array([E ** 2, E])
    assert make_breg2(2).distance(x, x) == 0.0
    assert make_breg2(2).distance(x, [E, E]) == pytest.approx(2 * np.log(2) - 1, abs=1e-14)


@pytest.mark.parametrize("bad", [[1.0, 2.0, 2.0], [0.5, 2.0, 2.0], [1.0 + 1e-13, 3, 3]])
def test_breg2_zone(bad):
    phi = make_breg2(3)
    assert not phi.in_zone(bad)
    with pytest.raises(DomainError):
        phi.distance(bad, [2.0, 2.0, 2.0])
    with pytest.raises(DomainError):
        phi.distance([2.0, 2.0, 2.0], bad)


def test_det_examples():
    phi = make_det_bregman(2)
    assert phi.distance(np.eye(2), np.eye(2)) == 0.0
    assert phi.distance(np.diag([2.0, 1.0]), np.eye(2)) == pytest.approx(1 - np.log(2), abs=1e-14)
    assert np.allclose(phi.gradient(np.eye(2)), np.eye(2))


def test_trace_examples():
    phi = make_trace_bregman(2)
    assert phi.distance(np.eye(2), np.eye(2)) == 0.0
    assert phi.distance(np.diag([E, 1.0]), np.eye(2)) == pytest.approx(E - 2, abs=1e-14)
    assert np.allclose(phi.gradient(np.diag([2.0, 3.0])), np.diag([4.0, 9.0]))


def test_make_bregman_keys():
    for key in BREGMAN_KEYS:
        assert make_bregman(key).name == key
    with pytest.raises(KeyError):
        make_bregman("entropy")


# ---------------------------------------------------------------------------
# closed forms

@pytest.mark.parametrize("name, closed", [
    ("breg2", breg2_closed_form),
    ("spd-det", det_closed_form),
    ("spd-trace", trace_closed_form),
])
def test_intrinsic_formula_matches_closed_form(name, closed):
    phi = INSTANCES[name]
    rng = np.random.default_rng(0)
    for _ in range(100):
        x, y = _zone_point(phi, rng), _zone_point(phi, rng)
        assert phi.distance(x, y) == pytest.approx(closed(x, y), abs=1e-10)


def test_breg1_direct_expansion():
    phi = INSTANCES["breg1"]
    rng = np.random.default_rng(1)
    for _ in range(100):
        x, y = _zone_point(phi, rng), _zone_point(phi, rng)
        assert phi.distance(x, y) == pytest.approx(breg1_expanded(x, y), rel=1e-12, abs=1e-10)


def test_breg1_printed_form_disagrees():
    # the printed closed form is not the intrinsic distance; keep it that way
    phi = INSTANCES["breg1"]
    rng = np.random.default_rng(2)
    gaps = []
    for _ in range(20):
        x, y = _zone_point(phi, rng), _zone_point(phi, rng)
        gaps.append(abs(phi.distance(x, y) - breg1_printed(x, y)))
    assert min(gaps) > 1e-3
    assert breg1_printed(np.array([2.0, 1.0]), np.array([1.0, 1.0])) != pytest.approx(
        make_breg1(2).distance([2.0, 1.0], [1.0, 1.0]), abs=1e-3)


def test_org_is_half_squared_distance_on_orthant():
    phi, m = INSTANCES["org"], PositiveOrthant(3)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x, y = m.random_point(rng, 2.0), m.random_point(rng, 2.0)
        assert phi.distance(x, y) == pytest.approx(0.5 * m.dist(x, y) ** 2, abs=1e-10)


def test_org_dominates_half_squared_distance_on_spd():
    phi, m = INSTANCES["org-spd"], SPDManifold(2)
    rng = np.random.default_rng(4)
    for _ in range(100):
        x, y = m.random_point(rng, 1.5), m.random_point(rng, 1.5)
        assert phi.distance(x, y) >= 0.5 * m.dist(x, y) ** 2 - 1e-10


# ---------------------------------------------------------------------------
# invariants

@pytest.mark.parametrize("name", list(INSTANCES))
def test_positivity(name):
    phi = INSTANCES[name]
    rng = np.random.default_rng(5)
    for _ in range(500):
        x, y = _zone_point(phi, rng), _zone_point(phi, rng)
        assert phi.distance(x, y) > 0
        assert abs(phi.distance(x, x)) <= 1e-12


@pytest.mark.parametrize("name", list(INSTANCES))
def test_gradient_against_finite_differences(name):
    phi = INSTANCES[name]
    m = phi.manifold
    rng = np.random.default_rng(6)
    h = 1e-6
    for _ in range(20):
        x = _zone_point(phi, rng, 0.5)
        v = m.random_unit_tangent(x, rng)
        fd = (phi(m.exp(x, h * v)) - phi(m.exp(x, -h * v))) / (2 * h)
        assert m.inner(x, phi.gradient(x), v) == pytest.approx(fd, abs=1e-5 * max(1.0, abs(fd)))


@pytest.mark.parametrize("name", list(INSTANCES))
def test_sum_identity(name):
    # D(x,y) + D(y,x) = -<grad phi(x) - P_{x<-y} grad phi(y), log(x,y)>_x
    phi = INSTANCES[name]
    m = phi.manifold
    rng = np.random.default_rng(7)
    for _ in range(100):
        x, y = _zone_point(phi, rng), _zone_point(phi, rng)
        lhs = phi.distance(x, y) + phi.distance(y, x)
        diff = phi.gradient(x) - m.transport(y, x, phi.gradient(y))
        assert lhs == pytest.approx(-m.inner(x, diff, m.log(x, y)), abs=1e-9 * max(1, abs(lhs)))


@pytest.mark.parametrize("name", list(INSTANCES))
def test_three_point_identity(name):
    phi = INSTANCES[name]
    m = phi.manifold
    g = phi.gradient
    rng = np.random.default_rng(8)
    for _ in range(100):
        x, y, z = (_zone_point(phi, rng) for _ in range(3))
        lhs = phi.distance(x, y) - phi.distance(x, z) - phi.distance(z, y)
        rhs = (-m.inner(y, g(y), m.log(y, x)) + m.inner(z, g(z), m.log(z, x))
               + m.inner(y, g(y), m.log(y, z)))
        assert lhs == pytest.approx(rhs, abs=1e-9 * max(1, abs(lhs)))


@pytest.mark.parametrize("name", ["org", "org-spd", "breg1", "breg2", "spd-trace"])
def test_strict_geodesic_convexity(name):
    phi = INSTANCES[name]
    m = phi.manifold
    rng = np.random.default_rng(9)
    for _ in range(100):
        x, y = _zone_point(phi, rng), _zone_point(phi, rng)
        geo = m.geodesic(x, y)
        for t in (0.25, 0.5, 0.75):
            assert phi(geo(t)) < (1 - t) * phi(x) + t * phi(y) + 1e-12


def test_det_is_not_strictly_convex():
    # det is constant along geodesics joining matrices of equal determinant,
    # so its Bregman distance vanishes there even though x != y
    phi, m = INSTANCES["spd-det"], SPDManifold(2)
    x, y = np.diag([2.0, 0.5]), np.diag([0.5, 2.0])
    assert phi(m.geodesic(x, y)(0.5)) == pytest.approx(0.5 * phi(x) + 0.5 * phi(y), abs=1e-12)
    assert phi.distance(x, y) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 3.0), min_size=3, max_size=3),
       st.lists(st.floats(0.01, 3.0), min_size=3, max_size=3))
def test_breg2_matches_entropy_in_log_chart(a, b):
    # with u = ln x, psi is the entropy sum(u ln u), whose Bregman divergence
    # is the generalized Kullback-Leibler divergence
    u, w = np.array(a), np.array(b)
    kl = np.sum(u * np.log(u / w) - u + w)
    assert make_breg2(3).distance(np.exp(u), np.exp(w)) == pytest.approx(kl, rel=1e-9, abs=1e-12)


def test_bregman_distance_function():
    phi = INSTANCES["breg1"]
    assert bregman_distance(phi, [2, 3, 4.0], [1, 1, 1.0]) == phi.distance([2, 3, 4.0], [1, 1, 1.0])


# ---------------------------------------------------------------------------
# probes

@pytest.mark.parametrize("alpha", [0.5, 2.0, 8.0])
def test_level_set_org_radius(alpha):
    phi = INSTANCES["org"]
    radii = np.linspace(0.05, 6.0, 120)
    rep = check_level_set_bounded(phi, np.array([2.0, 3.0, 4.0]), alpha, radii)
    assert rep.bounded
    assert rep.largest_radius_in_set == pytest.approx(np.sqrt(2 * alpha), abs=0.06)


def test_level_set_alpha_zero():
    rep = check_level_set_bounded(INSTANCES["org"], np.ones(3), 0.0, [0.1, 1.0, 5.0])
    assert rep.bounded and rep.largest_radius_in_set == 0.0


def test_level_set_breg2():
    rep = check_level_set_bounded(INSTANCES["breg2"], np.full(3, E), 1.0,
                                  np.geomspace(0.01, 20, 40))
    assert rep.bounded
    assert 0 < rep.largest_radius_in_set < 20


def test_b2_constant_sequence():
    phi = INSTANCES["breg1"]
    y = np.array([2.0, 3.0, 1.5])
    rep = check_b2_b3(phi, [y] * 5, y)
    assert rep.b2_values == [0.0] * 5 and rep.b2_settled_index == 0 and rep.b2_holds


def test_b2_org_closed_form():
    phi = INSTANCES["org"]
    seq = [(1 + 1 / n) * np.ones(3) for n in range(1, 2001)]
    rep = check_b2_b3(phi, seq, np.ones(3), tol=1e-6)
    expected = [1.5 * np.log1p(1 / n) ** 2 for n in range(1, 2001)]
    assert np.allclose(rep.b2_values, expected, rtol=1e-10)
    assert rep.b2_holds and rep.b2_settled_index > 0


def test_b2_b3_breg1():
    phi = INSTANCES["breg1"]
    limit = np.full(3, 2.0)
    seq = [limit * np.exp(2.0 ** -k) for k in range(40)]
    companion = [limit * np.exp(-(2.0 ** -k)) for k in range(40)]
    rep = check_b2_b3(phi, seq, limit, companion=companion)
    assert rep.b2_holds
    assert rep.b3_holds
    assert all(np.diff(rep.b2_values[:20]) < 0)
