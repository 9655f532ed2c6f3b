import math

import numpy as np
import pytest

from chainspec.errors import DomainError
from chainspec.geometry import (FiniteSet, MetricDescriptor, Point, ball_query, canonical_coords, distance,
                                hausdorff_distance, min_pairwise_gap, nearest_index, pairwise, rowwise)

LINE = MetricDescriptor(kind="euclidean-on-interval")
CIRCLE = MetricDescriptor(kind="arc-length-on-circle")
PLANE = MetricDescriptor(kind="euclidean-in-plane")


def test_circle_coordinates_wrap_into_unit_interval():
    arr = canonical_coords(np.array([1.25, -0.25, 1.0]), "circle")
    assert arr[:, 0].tolist() == [0.25, 0.75, 0.0]


def test_coordinates_must_fit_the_space():
    with pytest.raises(DomainError):
        canonical_coords(np.zeros((3, 2)), "interval")
    with pytest.raises(DomainError):
        canonical_coords(np.zeros((3, 1)), "torus")


def test_arc_length_takes_the_short_way_round():
    d = distance(Point.of(0.05, "circle"), Point.of(0.95, "circle"), CIRCLE)
    assert d == pytest.approx(0.1)


def test_distance_refuses_mixed_spaces():
    with pytest.raises(DomainError):
        distance(Point.of(0.1, "interval"), Point.of(0.1, "circle"), LINE)


def test_metric_refuses_foreign_space():
    with pytest.raises(DomainError):
        CIRCLE.require("interval")


def test_hausdorff_distance_is_symmetric_and_exact():
    A = FiniteSet([0.0, 1.0], "interval")
    B = FiniteSet([0.0, 0.5], "interval")
    assert hausdorff_distance(A, B, LINE) == pytest.approx(0.5)
    assert hausdorff_distance(B, A, LINE) == pytest.approx(0.5)
    assert hausdorff_distance(A, A, LINE) == 0.0


def test_hausdorff_distance_of_empty_set_is_undefined():
    with pytest.raises(DomainError):
        hausdorff_distance(np.empty((0, 1)), FiniteSet([0.0], "interval"), LINE)


def test_ball_query_open_and_closed():
    S = FiniteSet([0.0, 0.1, 0.2, 0.3], "interval")
    c = Point.of(0.0)
    assert len(ball_query(S, c, 0.2, LINE)) == 2
    assert len(ball_query(S, c, 0.2, LINE, closed=True)) == 3
    with pytest.raises(DomainError):
        ball_query(S, c, 0.0, LINE)


def test_rowwise_matches_pairwise_diagonal(rng):
    A = rng.random((20, 2))
    B = rng.random((20, 2))
    assert np.allclose(rowwise(A, B, PLANE), np.diag(pairwise(A, B, PLANE)))


def test_scaled_and_warped_metrics_stay_equivalent(rng):
    warped = MetricDescriptor(kind="euclidean-on-interval", scale=2.0, warp=0.3)
    A = rng.random((30, 1))
    B = rng.random((30, 1))
    base = rowwise(A, B, LINE)
    other = rowwise(A, B, warped)
    ratio = other[base > 1e-6] / base[base > 1e-6]
    assert ratio.min() >= 2.0 * (1 - 0.3) - 1e-9
    assert ratio.max() <= warped.diameter_factor() + 1e-9


def test_nearest_index_prefers_smallest_index_on_ties():
    coords = np.array([[0.0], [1.0]])
    assert nearest_index(coords, np.array([[0.5]]), LINE).tolist() == [0]


def test_min_pairwise_gap_ignores_duplicates():
    coords = np.array([[0.0], [0.0], [0.3], [0.5]])
    assert min_pairwise_gap(coords, LINE) == pytest.approx(0.2)
    assert math.isinf(min_pairwise_gap(coords[:1], LINE))


def test_finite_set_flags_duplicates_and_compares_as_a_set():
    S = FiniteSet([0.1, 0.2, 0.1], "interval")
    assert S.has_duplicates
    assert S == FiniteSet([0.2, 0.1], "interval")


def test_ball_query_on_a_regular_grid():
    S = FiniteSet(np.linspace(0.0, 1.0, 101), "interval")
    ball = ball_query(S, Point.of(0.5), 0.015, LINE)
    assert sorted(ball.coords[:, 0]) == pytest.approx([0.49, 0.5, 0.51])


# ── Hausdorff distance properties ─────────────────────────────────
def _random_sets(rng, count):
    return [FiniteSet(rng.random(int(rng.integers(1, 12))), "interval") for _ in range(count)]


def test_hausdorff_triangle_inequality(rng):
    for _ in range(200):
        A, B, C = _random_sets(rng, 3)
        ab = hausdorff_distance(A, B, LINE)
        bc = hausdorff_distance(B, C, LINE)
        assert hausdorff_distance(A, C, LINE) <= ab + bc + 1e-12


def test_hausdorff_distance_bounds_every_point(rng):
    for _ in range(200):
        A, B = _random_sets(rng, 2)
        d = hausdorff_distance(A, B, LINE)
        if d == 0.0:
            assert A == B
            continue
        for a in A.coords[:, 0]:
            assert len(ball_query(B, Point.of(float(a)), d, LINE, closed=True)) > 0
        for b in B.coords[:, 0]:
            assert len(ball_query(A, Point.of(float(b)), d, LINE, closed=True)) > 0


def test_growing_sets_move_monotonically_towards_their_union(rng):
    for _ in range(100):
        pts = rng.random(20)
        cuts = np.sort(rng.choice(np.arange(1, 20), size=3, replace=False))
        nested = [FiniteSet(pts[:c], "interval") for c in cuts] + [FiniteSet(pts, "interval")]
        top = nested[-1]
        d = [hausdorff_distance(S, top, LINE) for S in nested]
        assert all(b <= a for a, b in zip(d, d[1:]))
        assert d[-1] == 0.0
