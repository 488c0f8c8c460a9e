import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import Polygon

from omegaturn.chain import (ChainGeometry, FeasibilitySpec, forward_kinematics, is_feasible, link_corners,
                             link_frames, material_points, point_jacobian, rectangles_overlap, self_collides,
                             self_collides_batch)

GEOM = ChainGeometry()


def fk_oracle(theta, L):
    """Walk the chain link by link, then move to the centroid / mean-heading frame."""
    heading, p = 0.0, np.zeros(2)
    centers, headings = [], []
    for k in range(len(theta) + 1):
        if k > 0:
            heading += theta[k - 1]
        d = L * np.array([np.cos(heading), np.sin(heading)])
        centers.append(p + 0.5 * d)
        headings.append(heading)
        p = p + d
    centers, headings = np.array(centers), np.array(headings)
    mean = headings.mean()
    c, s = np.cos(-mean), np.sin(-mean)
    rel = centers - centers.mean(axis=0)
    return rel @ np.array([[c, s], [-s, c]]), headings - mean


def rect_polys(theta, geom, margin=0.0):
    return [Polygon(c) for c in link_corners(np.asarray(theta), geom, margin)]


def collide_oracle(theta, geom, margin=0.0):
    polys = rect_polys(theta, geom, margin)
    return any(polys[i].intersects(polys[j]) for i in range(len(polys)) for j in range(i + 2, len(polys)))


angles = st.lists(st.floats(-np.pi, np.pi), min_size=8, max_size=8)


@given(angles)
def test_forward_kinematics_matches_chaining(theta):
    centers, headings = link_frames(np.array(theta), GEOM)
    c0, h0 = fk_oracle(theta, GEOM.link_length)
    assert np.allclose(centers, c0, atol=1e-12)
    assert np.allclose(headings, h0, atol=1e-12)


@given(angles)
def test_body_frame_is_centroid_and_mean_heading(theta):
    centers, headings = link_frames(np.array(theta), GEOM)
    assert np.allclose(centers.mean(axis=0), 0.0, atol=1e-12)
    assert abs(headings.mean()) < 1e-12


def test_straight_chain_is_centered_on_x_axis():
    poses = forward_kinematics(np.zeros(8), GEOM)
    xs = [p.center[0] for p in poses]
    assert np.allclose(np.diff(xs), GEOM.link_length)
    assert all(abs(p.center[1]) < 1e-15 and abs(p.heading) < 1e-15 for p in poses)


def test_forward_kinematics_rejects_bad_shapes():
    with pytest.raises(ValueError):
        forward_kinematics(np.zeros(7), GEOM)
    with pytest.raises(ValueError):
        forward_kinematics(np.full(8, 4.0), GEOM)


def test_straight_shape_has_no_collision():
    assert not self_collides(np.zeros(8), GEOM)


def test_adjacent_links_are_not_counted():
    theta = np.zeros(8)
    theta[3] = np.pi / 2
    assert not self_collides(theta, GEOM)
    # adjacent rectangles do overlap at a right-angle joint
    corners = link_corners(theta, GEOM)
    assert rectangles_overlap(corners[3], corners[4])


def test_uniform_fifty_degrees_matches_polygon_oracle():
    theta = np.full(8, np.radians(50.0))
    assert self_collides(theta, GEOM) == collide_oracle(theta, GEOM)


def test_random_shapes_match_polygon_oracle(rng):
    theta = rng.uniform(-np.pi / 2, np.pi / 2, size=(400, 8))
    got = self_collides_batch(theta, GEOM)
    want = np.array([collide_oracle(t, GEOM) for t in theta])
    assert np.array_equal(got, want)
    assert 0 < want.sum() < len(want)


def test_margin_inflates_rectangles(rng):
    theta = rng.uniform(-2.0, 2.0, size=(200, 8))
    got = self_collides_batch(theta, GEOM, margin=0.005)
    want = np.array([collide_oracle(t, GEOM, 0.005) for t in theta])
    assert np.array_equal(got, want)
    assert np.all(got >= self_collides_batch(theta, GEOM))


@given(st.floats(0, 2 * np.pi), st.floats(-1, 1), st.floats(-1, 1))
def test_overlap_test_agrees_with_shapely(angle, dx, dy):
    base = np.array([[-0.5, -0.2], [0.5, -0.2], [0.5, 0.2], [-0.5, 0.2]])
    c, s = np.cos(angle), np.sin(angle)
    other = base @ np.array([[c, s], [-s, c]]) + np.array([dx, dy])
    got = bool(rectangles_overlap(base, other))
    a, b = Polygon(base), Polygon(other)
    if a.distance(b) > 1e-9 or a.intersection(b).area > 1e-9:
        assert got == a.intersects(b)


def test_feasibility_uses_joint_limit_and_collisions():
    spec = FeasibilitySpec(np.radians(60))
    assert is_feasible(np.zeros(8), spec, GEOM)
    assert not is_feasible(np.r_[np.radians(61), np.zeros(7)], spec, GEOM)
    curled = np.full(8, np.radians(55))
    assert is_feasible(curled, spec, GEOM) == (not self_collides(curled, GEOM))


@given(angles)
def test_link_corners_span_link_rectangles(theta):
    corners = link_corners(np.array(theta), GEOM)
    areas = [Polygon(c).area for c in corners]
    assert np.allclose(areas, GEOM.link_length * GEOM.link_width)


def test_point_jacobian_matches_finite_differences(rng):
    theta = rng.uniform(-1, 1, 8)
    links = np.array([0, 3, 8, 5])
    local = rng.uniform(-0.03, 0.03, size=(4, 2))
    jac = point_jacobian(theta, GEOM, links, local)
    h = 1e-6
    fd = np.empty_like(jac)
    for j in range(8):
        e = np.zeros(8)
        e[j] = h
        p1, _ = material_points(theta + e, np.zeros(8), GEOM, links, local)
        p0, _ = material_points(theta - e, np.zeros(8), GEOM, links, local)
        fd[:, :, j] = (p1 - p0) / (2 * h)
    assert np.allclose(jac, fd, atol=1e-8)


def test_material_points_follow_link_frames(rng):
    theta = rng.uniform(-1, 1, 8)
    links = np.arange(9)
    pts, _ = material_points(theta, np.zeros(8), GEOM, links, np.zeros((9, 2)))
    centers, _ = link_frames(theta, GEOM)
    assert np.allclose(pts, centers, atol=1e-14)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ChainGeometry(num_joints=1)
    with pytest.raises(ValueError):
        ChainGeometry(link_length=0)
    with pytest.raises(ValueError):
        FeasibilitySpec(theta_max=0)
    assert np.isclose(GEOM.body_length, 9 * 0.07)
