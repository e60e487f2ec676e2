import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stratpers.persistence import Barcode
from stratpers.phi import strong_str
from stratpers.sample_spaces import (
    DiagramSample,
    PointCloud,
    StratifiedSample,
    StronglyStratifiedSample,
    diagram_distance,
)
from stratpers.strat_persistence import (
    FLAGS,
    DiagramParams,
    StratifiedBarcode,
    diagification,
    diagram_barcode_distance,
    diagram_nested,
    epers,
    epers_grid,
    long_bars,
    plot_barcodes,
    stratified_barcodes,
    stratified_cech,
)


def strong(rows, s):
    return StronglyStratifiedSample(PointCloud(np.array(rows, dtype=float).reshape(-1, 2), 2), s)


def test_params_validation_and_order():
    for lo, hi in ((0.0, 0.5), (0.5, 0.5), (0.6, 0.5), (0.2, 1.0)):
        with pytest.raises(ValueError):
            DiagramParams(lo, hi)
    assert DiagramParams(0.3, 0.4) <= DiagramParams(0.2, 0.5)
    assert not DiagramParams(0.2, 0.5) <= DiagramParams(0.3, 0.4)


def test_diagification_uses_closed_inequalities():
    T = strong([[0, 0], [1, 0], [2, 0], [3, 0], [4, 0]], [0.0, 0.2, 0.25, 0.3, 0.9])
    D = diagification(T, DiagramParams(0.2, 0.3))
    c = D.components()
    assert c["p"].points[:, 0].tolist() == [0, 1, 2, 3]
    assert c["pq"].points[:, 0].tolist() == [1, 2, 3]
    assert c["q"].points[:, 0].tolist() == [1, 2, 3, 4]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), max_size=12), st.floats(0.01, 0.98), st.floats(0.001, 0.5))
def test_diagification_matches_level_sets(s, lo, width):
    hi = min(lo + width, 0.99)
    rows = [[i, 0] for i in range(len(s))]
    D = diagification(strong(rows, s), DiagramParams(lo, hi))
    c = D.components()
    assert c["p"].points[:, 0].tolist() == [i for i, v in enumerate(s) if v <= hi]
    assert c["pq"].points[:, 0].tolist() == [i for i, v in enumerate(s) if lo <= v <= hi]
    assert c["q"].points[:, 0].tolist() == [i for i, v in enumerate(s) if v >= lo]


def _sample(draw, n):
    pts = draw(st.lists(st.lists(st.integers(-20, 20), min_size=2, max_size=2), min_size=n, max_size=n, unique_by=tuple))
    mask = draw(st.lists(st.booleans(), min_size=len(pts), max_size=len(pts)))
    return StratifiedSample(PointCloud(np.array(pts, dtype=float).reshape(-1, 2) / 20, 2), mask)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.data())
def test_grid_is_nested(n, data):
    S = _sample(data.draw, n)
    grid = [DiagramParams(0.3, 0.4), DiagramParams(0.2, 0.5), DiagramParams(0.1, 0.6), DiagramParams(0.35, 0.8)]
    fil = epers_grid(S, grid, max_dim=1, max_radius=0.5)
    T = strong_str(S)
    for i, v in enumerate(grid):
        for j, w in enumerate(grid):
            if v <= w:
                assert diagram_nested(diagification(T, v), diagification(T, w))
                # bigger samples have at least as many vertices in every entry
                for f in FLAGS:
                    assert fil[i].complexes()[f].n_vertices <= fil[j].complexes()[f].n_vertices


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.data())
def test_epers_is_distance_to_singular_part(n, data):
    # composing the strong stratification with diagification thresholds the
    # distance to the singular part
    S = _sample(data.draw, n)
    v = DiagramParams(0.15, 0.4)
    SF = epers(S, v, max_dim=1)
    P = S.cloud.points.tolist()
    sing = [p for p, m in zip(P, S.singular_mask) if m]
    d = [min([oracles.dist(p, q) for q in sing] + [1.0]) if sing else 1.0 for p in P]
    assert SF.p.n_vertices == sum(x <= 0.4 for x in d)
    assert SF.pq.n_vertices == sum(0.15 <= x <= 0.4 for x in d)
    assert SF.q.n_vertices == sum(x >= 0.15 for x in d)
    SF.pq_to_p.check()
    SF.pq_to_q.check()


def test_empty_input():
    S = StratifiedSample(PointCloud.empty(2), [])
    SB = stratified_barcodes(epers(S, DiagramParams(0.2, 0.3)))
    for f in FLAGS:
        assert len(SB[f]) == 0


def _two_junctions():
    # two singular points, a short arm of link points next to each, regular points further out
    rows, s = [], []
    for cx in (-1.0, 1.0):
        rows.append([cx, 0.0]); s.append(0.0)
        for k in range(1, 8):
            rows.append([cx, 0.05 * k]); s.append(0.05 * k)
    return strong(rows, s)


def test_h0_maps_of_two_junctions():
    D = diagification(_two_junctions(), DiagramParams(0.12, 0.22))
    SB = stratified_barcodes(stratified_cech(D, 1, 0.5), h0_scales=[0.03, 0.5])
    to_p, to_q = SB.h0_maps[0.03]
    assert to_p.matrix.shape[0] == 2 and to_q.matrix.shape[0] == 2
    # each link component lands in its own singular and regular component
    for M in (to_p.matrix, to_q.matrix):
        assert np.array_equal(M.sum(axis=0), [1, 1]) and np.array_equal(M.sum(axis=1), [1, 1])
    assert SB.live_counts(0, 0.03) == (2, 2, 2)
    # at the largest scale the arms are still 2 apart, so nothing merges
    assert SB.live_counts(0, 0.49) == (2, 2, 2)


def test_json_round_trip():
    D = diagification(_two_junctions(), DiagramParams(0.12, 0.22))
    SB = stratified_barcodes(stratified_cech(D, 1, 0.5), h0_scales=[0.03])
    data = SB.to_json()
    assert data["h0_maps"][0]["alpha"] == 0.03
    back = StratifiedBarcode.from_json(data, 0.5)
    for f in FLAGS:
        assert back[f] == SB[f]
    assert '"pq"' in SB.dumps()


def test_long_bars():
    B = Barcode({0: np.array([[0.0, math.inf], [0.0, 0.1], [0.3, 0.45]])}, cap=0.5)
    assert long_bars(B, 0, 0.2, 0.5).tolist() == [[0.0, math.inf]]
    assert len(long_bars(B, 0, 0.1, 0.5)) == 3
    assert len(long_bars(B, 0, 0.1, 0.2)) == 2


def test_plot_writes_svg(tmp_path):
    D = diagification(_two_junctions(), DiagramParams(0.12, 0.22))
    SB = stratified_barcodes(stratified_cech(D, 1, 0.5))
    plot_barcodes(SB, tmp_path / "b.svg", k=1, reproducible=True)
    text = (tmp_path / "b.svg").read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    plot_barcodes(SB, tmp_path / "c.svg", k=1, reproducible=True)
    assert (tmp_path / "c.svg").read_text() == text
    with pytest.raises(ValueError):
        plot_barcodes(SB, tmp_path / "d.svg", k=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.data())
def test_barcodes_are_one_lipschitz_in_the_diagram(n, data):
    # perturb the points of a strongly stratified sample and keep its values:
    # every flag's barcode moves by at most the diagram distance
    pts = np.array(data.draw(st.lists(st.lists(st.floats(-1, 1), min_size=2, max_size=2), min_size=n, max_size=n)))
    s = data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    eps = np.array(data.draw(st.lists(st.lists(st.floats(-0.1, 0.1), min_size=2, max_size=2), min_size=n, max_size=n)))
    v = DiagramParams(0.3, 0.6)
    D = diagification(strong(pts, s), v)
    E = diagification(strong(pts + eps, s), v)
    delta = max(oracles.hausdorff(D.components()[f].points.tolist(), E.components()[f].points.tolist()) for f in FLAGS)
    assert diagram_distance(D, E) == pytest.approx(delta, abs=1e-12)
    A = stratified_barcodes(stratified_cech(D, 2, 3.0))
    B = stratified_barcodes(stratified_cech(E, 2, 3.0))
    for deg in (0, 1):
        assert diagram_barcode_distance(A, B, deg) <= delta + 1e-9
