import cmath
import math

import numpy as np
import pytest

from kleinlab.moebius import MoebiusMap, classify, mobius_apply, spherical_conformal_factor
from kleinlab.sphere import (
    INF,
    as_point,
    chordal_distance,
    complex_to_vectors,
    from_vector,
    vectors_to_complex,
)


def to_vector(p):
    return as_point(p).to_vector()


# -- sphere model ------------------------------------------------------------


def test_chordal_distance_known_values():
    assert chordal_distance(0, 0) == 0.0
    assert math.isclose(chordal_distance(0, 1), math.sqrt(2.0), rel_tol=1e-12)
    assert math.isclose(chordal_distance(0, INF), 2.0, rel_tol=1e-12)
    assert math.isclose(chordal_distance(1, -1), 2.0, rel_tol=1e-12)
    assert math.isclose(chordal_distance(INF, 1j), math.sqrt(2.0), rel_tol=1e-12)


def test_chordal_distance_symmetry_and_bound():
    pts = [0, 1, -1, 1j, 2 + 3j, 1e8, INF]
    for p in pts:
        for q in pts:
            d = chordal_distance(p, q)
            assert d == pytest.approx(chordal_distance(q, p))
            assert 0.0 <= d <= 2.0 + 1e-15


def test_vector_round_trip():
    for z in [0, 1, -1j, 3 + 4j, 100 - 7j]:
        v = to_vector(z)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        back = from_vector(v)
        assert back.value == pytest.approx(z, rel=1e-9, abs=1e-9)
    # near the pole the chart loses precision but stays proportionally small
    big = from_vector(to_vector(1e6 + 1e6j))
    assert big.value == pytest.approx(1e6 + 1e6j, rel=1e-3)
    assert from_vector(to_vector(INF)) == INF
    assert np.allclose(to_vector(INF), [0.0, 0.0, 1.0])


def test_vectorised_conversions_match_scalar():
    zs = np.array([0.5 + 0.5j, -2j, 10.0, 0.0])
    vecs = complex_to_vectors(zs)
    for z, v in zip(zs, vecs):
        assert np.allclose(v, to_vector(z))
    back, inf_mask = vectors_to_complex(vecs)
    assert not inf_mask.any()
    assert np.allclose(back, zs)


def test_chordal_distance_large_coordinates_stable():
    # both points near the north pole; naive formulas overflow or cancel
    d = chordal_distance(1e12, 2e12)
    assert 0.0 < d < 1e-11
    assert chordal_distance(1e300, INF) < 1e-15


# -- Moebius maps ------------------------------------------------------------


def test_normalization_det_one_and_sign():
    m = MoebiusMap(4, 0, 0, 1).normalize()
    assert m.a * m.d - m.b * m.c == pytest.approx(1.0)
    assert m.a == pytest.approx(2.0)
    # overall scalar does not change the map but normalization is canonical
    m2 = MoebiusMap(-4, 0, 0, -1).normalize()
    assert m == m2 or (m.a, m.b, m.c, m.d) == (m2.a, m2.b, m2.c, m2.d)


def test_compose_frozen_matrix():
    # (z -> 2z) after (z -> (z+1)/(z-1)); matrix product normalized by hand
    m = MoebiusMap(2, 0, 0, 1) @ MoebiusMap(1, 1, 1, -1)
    assert m.a == pytest.approx(1j)
    assert m.b == pytest.approx(1j)
    assert m.c == pytest.approx(0.5j)
    assert m.d == pytest.approx(-0.5j)


def test_apply_matches_formula():
    m = MoebiusMap(2, 1, 1, -3j)
    for z in [0, 1, -2 + 1j, 0.5j]:
        expected = (2 * z + 1) / (z - 3j)
        assert m.apply(z).value == pytest.approx(expected)


def test_apply_infinity_and_pole():
    m = MoebiusMap(2, 1, 1, -3)  # pole at z = 3, m(inf) = 2
    assert m.apply(INF).value == pytest.approx(2.0)
    assert m.apply(3) == INF
    t = MoebiusMap(1, 5, 0, 1)  # translation fixes infinity
    assert t.apply(INF) == INF


def test_apply_array_matches_scalar():
    m = MoebiusMap(1, 1j, 2, 1).normalize()
    zs = np.array([0.0, 1.0, -1j, 3 + 3j])
    out = m.apply_array(zs)
    for z, w in zip(zs, out):
        assert w == pytest.approx(m.apply(z).value)


def test_inverse_round_trip():
    m = MoebiusMap(3, 1, 1, 1).normalize()
    ident = m @ m.inverse()
    assert ident.apply(0.7 + 0.2j).value == pytest.approx(0.7 + 0.2j)
    assert abs(ident.a - 1) < 1e-12 and abs(ident.d - 1) < 1e-12
    assert abs(ident.b) < 1e-12 and abs(ident.c) < 1e-12


def test_conformal_factor_scaling_map():
    # z -> 2z at the origin scales the spherical metric by exactly 2
    m = MoebiusMap(2, 0, 0, 1)
    assert spherical_conformal_factor(m, 0) == pytest.approx(2.0)
    # and by 1/2 at infinity
    assert spherical_conformal_factor(m, INF) == pytest.approx(0.5)


def test_conformal_factor_inversion_symmetric_point():
    # |z| = 1 is where inversion is a spherical isometry
    m = MoebiusMap(0, 1, 1, 0)
    assert spherical_conformal_factor(m, 1) == pytest.approx(1.0)
    assert spherical_conformal_factor(m, 2) == pytest.approx(1.0)  # equator-symmetric pair
    assert spherical_conformal_factor(m, 1j) == pytest.approx(1.0)


def test_conformal_factor_frozen_value():
    # lambda = |m'(z)| (1+|z|^2) / (1+|m(z)|^2), computed separately
    m = MoebiusMap(2, 1, 1, -3j)
    assert spherical_conformal_factor(m, 1 + 1j) == pytest.approx(1.013793755049703)


def test_conformal_factor_finite_difference():
    m = MoebiusMap(1, 2, 3, 1).normalize()
    z = 0.3 - 0.7j
    h = 1e-6
    num = chordal_distance(m.apply(z), m.apply(z + h)) / chordal_distance(z, z + h)
    assert num == pytest.approx(spherical_conformal_factor(m, z), rel=1e-4)


def test_conformal_factor_chain_rule():
    m1 = MoebiusMap(2, 1, 0, 1).normalize()
    m2 = MoebiusMap(1, 0, 1, 1).normalize()
    z = 0.4 + 0.9j
    lhs = spherical_conformal_factor(m1 @ m2, z)
    rhs = spherical_conformal_factor(m1, m2.apply(z)) * spherical_conformal_factor(m2, z)
    assert lhs == pytest.approx(rhs)


def test_classify_basic_types():
    assert classify(MoebiusMap(1, 0, 0, 1)) == "identity"
    assert classify(MoebiusMap(1, 1, 0, 1)) == "parabolic"
    assert classify(MoebiusMap(2, 0, 0, 1)) == "loxodromic"
    theta = 0.8
    rot = MoebiusMap(cmath.exp(1j * theta / 2), 0, 0, cmath.exp(-1j * theta / 2))
    assert classify(rot) == "elliptic"
    # complex trace off the real axis is loxodromic
    assert classify(MoebiusMap(2j, 0, 0, 1)) == "loxodromic"


def test_fixed_points_loxodromic():
    m = MoebiusMap(2, 1, 1, 1)
    fps = sorted(m.fixed_points(), key=lambda p: p.value.real)
    golden = (1 + math.sqrt(5)) / 2
    assert fps[0].value == pytest.approx(1 - golden)
    assert fps[1].value == pytest.approx(golden)
    for p in fps:
        assert m.apply(p.value).value == pytest.approx(p.value)


def test_fixed_points_with_infinity():
    fps = MoebiusMap(2, 0, 0, 1).fixed_points()
    vals = {p if p == INF else p.value for p in fps}
    assert INF in fps
    assert any(p != INF and abs(p.value) < 1e-12 for p in fps)


def test_parabolic_single_fixed_point():
    fps = MoebiusMap(1, 1, 0, 1).fixed_points()
    assert len(set(fps)) == 1
    assert fps[0] == INF


def test_mobius_apply_helper():
    assert mobius_apply(MoebiusMap(1, 1, 0, 1), 0).value == pytest.approx(1.0)
