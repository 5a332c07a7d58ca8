import json
import math

import numpy as np
import pytest

from kleinlab.errors import CirclesOverlap, ReductionDepthExceeded, WordBudgetExceeded
from kleinlab.moebius import MoebiusMap
from kleinlab.schottky import (
    Circle,
    GroupWord,
    SchottkyGroup,
    free_group_word_count,
    map_circle,
    standard_rank1_group,
    standard_rank2_group,
)
from kleinlab.sphere import INF, chordal_distance


@pytest.fixture(scope="module")
def group():
    return standard_rank2_group()


# -- circles and exact circle images -----------------------------------------


def test_circle_contains_open_disk():
    c = Circle(1 + 1j, 2.0)
    assert c.contains(1 + 1j)
    assert c.contains(2.5 + 1j)
    assert not c.contains(3 + 1j)  # boundary point is outside the open disk
    assert not c.contains(10)


def test_map_circle_translation_and_scaling():
    c = Circle(0, 1.0)
    t = map_circle(MoebiusMap(1, 3 - 1j, 0, 1), c)
    assert t.center == pytest.approx(3 - 1j)
    assert t.radius == pytest.approx(1.0)
    s = map_circle(MoebiusMap(2, 0, 0, 1), c)
    assert s.center == pytest.approx(0.0)
    assert s.radius == pytest.approx(2.0)


def test_map_circle_inversion():
    # 1/z maps |z - 3| = 1 to the circle through 1/2 and 1/4 on the real axis
    img = map_circle(MoebiusMap(0, 1, 1, 0), Circle(3, 1.0))
    assert img.center == pytest.approx(3 / 8)
    assert img.radius == pytest.approx(1 / 8)


def test_map_circle_frozen_oracle(group):
    # image of |z - 2i| = 1 under the first generator, checked against a
    # circumcenter fit through mapped boundary points
    img = map_circle(group.map_for_letter(1), Circle(2j, 1.0))
    assert img.center == pytest.approx(-16 / 7 - 2j / 7)
    assert img.radius == pytest.approx(1 / 7)


def test_map_circle_boundary_points_land_on_image(group):
    m = group.map_for_letter(-2)
    c = Circle(0.5 + 0.5j, 0.25)
    img = map_circle(m, c)
    for z in c.boundary_points(17):
        w = m.apply(z).value
        assert abs(w - img.center) == pytest.approx(img.radius, rel=1e-10)


# -- group words --------------------------------------------------------------


def test_group_word_rejects_unreduced():
    with pytest.raises(ValueError):
        GroupWord((1, 2, -2, 1))
    with pytest.raises(ValueError):
        GroupWord((1, 0))


def test_group_word_inverse_and_prefix():
    w = GroupWord((1, 2, -1))
    assert w.inverse().letters == (1, -2, -1)
    assert w.prefix(2).letters == (1, 2)
    assert len(w) == 3
    assert GroupWord().letters == ()


def test_group_word_string_round_trip():
    w = GroupWord((1, 2, -1))
    s = w.to_string()
    assert s == "g1.g2.g1inv"
    assert GroupWord.from_string(s) == w
    assert GroupWord.from_string("").letters == ()


def test_free_group_word_count_is_ball_size():
    # counts all reduced words of length <= n, identity included
    assert free_group_word_count(2, 1) == 5
    assert free_group_word_count(2, 2) == 17
    assert free_group_word_count(2, 3) == 53
    assert free_group_word_count(1, 4) == 9  # 1 + 2 + 2 + 2 + 2


def test_word_map_matches_explicit_product(group):
    w = GroupWord((1, -2, 1))
    m = group.word_map(w)
    explicit = (
        group.map_for_letter(1) @ group.map_for_letter(-2) @ group.map_for_letter(1)
    ).normalize()
    z = 0.1 + 0.2j
    assert m.apply(z).value == pytest.approx(explicit.apply(z).value)


# -- group construction -------------------------------------------------------


def test_standard_group_is_valid(group):
    centers = sorted((c.center.real, c.center.imag) for c in group.all_circles())
    assert centers == [(-2.0, 0.0), (0.0, -2.0), (0.0, 2.0), (2.0, 0.0)]
    assert group.rank == 2


def test_generator_pairs_circle_exteriors(group):
    # each generator sends the exterior of its source circle into the
    # interior of the paired circle
    for k in (1, 2):
        m = group.map_for_letter(k)
        target = group.circle_for_letter(k)
        for z in [INF, 0, 10 + 10j, 0.5 - 0.5j]:
            w = m.apply(z)
            assert w != INF
            assert abs(w.value - target.center) < target.radius + 1e-12


def test_generator_frozen_value(group):
    assert group.map_for_letter(1).apply(3).value == pytest.approx(-1.0)


def test_overlapping_circles_rejected():
    with pytest.raises(CirclesOverlap):
        SchottkyGroup([(Circle(0, 1.0), Circle(1.5, 1.0))])


def test_generators_are_loxodromic(group):
    for k in (1, 2):
        assert group.map_for_letter(k).classify() == "loxodromic"


# -- word enumeration and limit disks -----------------------------------------


def test_enumerate_words_counts(group):
    for d, n in ((1, 4), (2, 12), (3, 36)):
        assert len(group.words_of_length(d)) == n
    all_up_to_3 = group.enumerate_words(3)
    assert len(all_up_to_3) == free_group_word_count(2, 3)  # empty word included


def test_enumerate_words_budget(group):
    with pytest.raises(WordBudgetExceeded):
        group.enumerate_words(10, cap=100)


def test_limit_disks_nested_and_shrinking(group):
    parents = {w.letters: c for w, c in group.limit_disks(2)}
    for w, c in group.limit_disks(3):
        p = parents[w.prefix(2).letters]
        # child disk sits inside its parent
        assert abs(c.center - p.center) + c.radius <= p.radius + 1e-12
    diams = [group.max_disk_diameter(d) for d in range(1, 7)]
    assert diams == sorted(diams, reverse=True)
    assert diams[0] == pytest.approx(2.0)
    assert diams[1] == pytest.approx(2 / 7)


def test_depth_for_epsilon(group):
    assert group.depth_for_epsilon(1e-2) == 5
    assert group.depth_for_epsilon(1.0) <= group.depth_for_epsilon(1e-3)


def test_limit_set_sample_counts_and_location(group):
    s = group.sample_limit_set(3)
    assert len(s.points) == 36
    disks = {w.letters: c for w, c in group.limit_disks(3)}
    for p, w in zip(s.points, s.addresses):
        c = disks[w.letters]
        assert abs(p.value - c.center) <= c.radius + 1e-9


def test_rank1_limit_set_is_two_points():
    g = standard_rank1_group()
    s = g.sample_limit_set(6)
    vals = {round(p.value.real, 7) + 1j * round(p.value.imag, 7) for p in s.points}
    root10 = round(math.sqrt(10), 7)
    assert vals == {complex(root10), complex(-root10)}


def test_deeper_samples_approach_shallow_ones(group):
    s3 = group.sample_limit_set(3)
    s5 = group.sample_limit_set(5)
    tol = group.max_disk_diameter(3)
    for p in s3.points:
        d = min(chordal_distance(p.value, q.value) for q in s5.points)
        assert d <= tol


# -- fundamental domain reduction ---------------------------------------------


def test_reduce_point_already_outside(group):
    p, w = group.reduce_to_fundamental_domain(0)
    assert p.value == 0
    assert w.letters == ()


def test_reduce_inverts_group_action(group):
    for word in [GroupWord((1,)), GroupWord((2, -1)), GroupWord((1, 1, 2))]:
        z = group.word_map(word).apply(0.3 + 0.1j)
        p, w = group.reduce_to_fundamental_domain(z)
        # reduced point is in no open pairing disk
        assert not any(c.contains(p.value) for c in group.all_circles())
        # and the recorded word carries it back
        back = group.word_map(w).apply(p)
        assert chordal_distance(back, z) < 1e-7


def test_reduce_depth_guard(group):
    # a point three disks deep cannot escape in two steps
    z = group.word_map(GroupWord((1, 1, 1))).apply(0).value
    with pytest.raises(ReductionDepthExceeded):
        group.reduce_to_fundamental_domain(z, max_steps=2)
    p, w = group.reduce_to_fundamental_domain(z, max_steps=3)
    assert len(w) == 3


# -- orbits and serialization -------------------------------------------------


def test_orbit_cloud_counts(group):
    cloud = group.orbit_cloud(INF, 2)
    assert len(cloud.points) == 1 + 4 + 12
    assert cloud.vectors.shape == (17, 3)
    assert np.allclose(np.linalg.norm(cloud.vectors, axis=1), 1.0)


def test_json_round_trip(group):
    blob = json.dumps(group.to_json_dict())
    g2 = SchottkyGroup.from_json(blob)
    assert [c.center for c in g2.all_circles()] == [c.center for c in group.all_circles()]
    assert json.loads(blob)["pairs"]


def test_sample_limit_set_rejects_bad_depth(group):
    with pytest.raises(ValueError):
        group.sample_limit_set(0)
