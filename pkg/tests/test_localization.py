import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stratpers.localization import magnification_bundle, magnify, tangent_cone_estimate
from stratpers.sample_spaces import PointCloud

coord = st.floats(-2, 2, allow_nan=False, allow_infinity=False)


def cloud(rows, dim=2):
    return PointCloud(np.array(rows, dtype=float).reshape(-1, dim), dim)


def _sorted(a):
    return a[np.lexsort(a.T[::-1])] if len(a) else a


def test_magnify_examples():
    X = cloud([[0, 0], [0.5, 0], [2, 0]])
    L = magnify(X, [0, 0], 2.0)
    assert _sorted(L.points).tolist() == [[0.0, 0.0], [1.0, 0.0]]
    # the closed ball keeps the boundary point
    assert len(magnify(X, [0, 0], 2.0 - 1e-12)) == 2
    assert len(magnify(X, [0, 0], 2.0 + 1e-6)) == 1
    assert len(magnify(PointCloud.empty(2), [0, 0], 3.0)) == 0


def test_magnify_rejects_bad_input():
    X = cloud([[0, 0]])
    for z in (0.0, -1.0):
        with pytest.raises(ValueError):
            magnify(X, [0, 0], z)
    with pytest.raises(ValueError):
        magnify(X, [0, 0, 0], 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(coord, min_size=2, max_size=2), max_size=15),
       st.lists(coord, min_size=2, max_size=2), st.floats(0.1, 10))
def test_magnify_matches_direct_definition(P, x, zeta):
    got = magnify(cloud(P), x, zeta).points
    expected = [[zeta * (p[0] - x[0]), zeta * (p[1] - x[1])] for p in P
                if zeta * oracles.dist(p, x) <= 1.0 - 1e-9]
    border = [p for p in P if abs(zeta * oracles.dist(p, x) - 1.0) <= 1e-9]
    assert len(expected) <= len(got) <= len(expected) + len(border)
    assert np.all(np.linalg.norm(got, axis=1) <= 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(coord, min_size=2, max_size=2), min_size=1, max_size=12),
       st.integers(0, 11), st.floats(0.2, 5), st.lists(coord, min_size=2, max_size=2))
def test_magnify_translation_equivariant(P, i, zeta, t):
    X = cloud(P)
    x = X.points[i % len(P)]
    a = magnify(X, x, zeta).points
    b = magnify(X.translate(t), x + np.asarray(t), zeta).points
    # sets agree up to round-off at the ball boundary
    if len(a) == len(b):
        assert np.allclose(_sorted(a), _sorted(b), atol=1e-9)
    else:
        assert abs(len(a) - len(b)) <= sum(abs(np.linalg.norm(zeta * (np.asarray(P) - x), axis=1) - 1) < 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(coord, min_size=2, max_size=2), min_size=1, max_size=12),
       st.integers(0, 11), st.floats(0.2, 5), st.floats(0.25, 4))
def test_magnify_scale_equivariant(P, i, zeta, lam):
    # magnifying lam*X at lam*x by zeta/lam gives the same local sample
    lam = 2.0 ** round(math.log2(lam))  # powers of two keep the arithmetic exact
    X = cloud(P)
    x = X.points[i % len(P)]
    a = magnify(X, x, zeta).points
    b = magnify(PointCloud(lam * X.points, 2), lam * x, zeta / lam).points
    assert np.allclose(_sorted(a), _sorted(b), atol=1e-12)


def test_bundle_has_one_fiber_per_point():
    X = cloud(np.random.default_rng(0).uniform(-1, 1, (30, 2)))
    B = magnification_bundle(X, 3.0)
    assert len(B.fibers) == 30
    for x, F in zip(X.points, B.fibers):
        assert np.array_equal(_sorted(F.points), _sorted(magnify(X, x, 3.0).points))
        # the center itself is always present
        assert np.any(np.all(F.points == 0.0, axis=1))


def test_tangent_cone_estimate_of_a_line():
    t = np.linspace(-1, 1, 2001)
    X = cloud(np.c_[t, 0.5 * t])
    est = tangent_cone_estimate(X, [0, 0], [2, 5, 10])
    assert len(est) == 3
    for L in est:
        # every magnification of a line through the center is a segment on the same line
        assert np.allclose(L.points[:, 1], 0.5 * L.points[:, 0])
        assert np.max(np.linalg.norm(L.points, axis=1)) == pytest.approx(1.0, abs=0.02)


def test_tangent_cone_schedule_checked():
    X = cloud([[0, 0]])
    for bad in ([], [2, 2], [3, 1]):
        with pytest.raises(ValueError):
            tangent_cone_estimate(X, [0, 0], bad)
