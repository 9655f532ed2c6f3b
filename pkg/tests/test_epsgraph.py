import numpy as np
import pytest

from chainspec.epsgraph import (Chain, EpsilonGraph, GraphLadder, RefinementSchedule, build_graph, chain_components,
                                chain_related, conley_order, find_chain, is_chain, remove_cycles, scc, schedule_for)
from chainspec.errors import DomainError
from chainspec.systems import SystemDef, sample


# ── Schedules ─────────────────────────────────────────────────────
def test_default_schedule_halves_from_twice_the_diameter():
    sched = RefinementSchedule.default(1.0, depth=4)
    assert sched.epsilons == (2.0, 1.0, 0.5, 0.25)
    assert sched.finest == 0.25


def test_user_schedules_must_strictly_decrease():
    with pytest.raises(DomainError):
        RefinementSchedule.user([0.5, 0.5])
    with pytest.raises(DomainError):
        RefinementSchedule.user([0.5, -0.1])
    with pytest.raises(DomainError):
        RefinementSchedule.user([])


def test_grid_schedule_stops_above_the_resolution(cascade_grid):
    sched = schedule_for(cascade_grid, depth=14)
    assert sched.finest > cascade_grid.resolution
    assert sched.finest <= 2 * cascade_grid.resolution


# ── Chains ────────────────────────────────────────────────────────
def test_is_chain_reports_slacks(halving):
    check = is_chain(halving, [1.0, 0.5, 0.3], 0.1)
    assert check.ok
    assert check.slacks == pytest.approx((0.0, 0.05))
    assert not is_chain(halving, [1.0, 0.75], 0.25).ok
    assert is_chain(halving, [1.0, 0.75], 0.25, closed=True).ok


def test_chain_needs_two_points(halving):
    with pytest.raises(DomainError):
        Chain(halving, 0.1, [0.5])


def test_remove_cycles_cuts_repeated_segments(identity):
    c = Chain(identity, 0.2, [0.0, 0.1, 0.2, 0.1, 0.2, 0.3])
    out = remove_cycles(c)
    assert out.keys() == [(0.0,), (0.1,), (0.2,), (0.3,)]
    assert out.is_acyclic()
    assert out.check().ok


def test_remove_cycles_keeps_a_closing_loop(identity):
    c = Chain(identity, 0.2, [0.0, 0.1, 0.0])
    assert remove_cycles(c) is c


# ── Graphs ────────────────────────────────────────────────────────
def test_graph_edges_follow_the_image(halving_grid):
    g = build_graph(halving_grid, 0.015)
    # f(1) = 0.5 sits on the grid, so 1.0 only reaches 0.49, 0.5 and 0.51
    assert g.successors(100).tolist() == [49, 50, 51]
    assert g.has_edge(100, 50)
    assert not g.has_edge(100, 100)


def test_closed_graph_includes_the_boundary(halving_grid):
    open_g = EpsilonGraph(halving_grid, 0.01)
    closed_g = EpsilonGraph(halving_grid, 0.01, closed=True)
    assert closed_g.edge_count > open_g.edge_count


def test_find_chain_is_shortest_and_valid(halving_grid):
    g = build_graph(halving_grid, 0.05)
    c = find_chain(g, 100, 0)
    assert c is not None
    assert c.x == (1.0,) and c.y == (0.0,)
    assert c.check().ok
    assert c.indices[0] == 100 and c.indices[-1] == 0


def test_loop_chain_needs_a_real_step(halving_grid):
    g = build_graph(halving_grid, 0.05)
    assert find_chain(g, 100, 100) is None
    loop = find_chain(g, 0, 0)
    assert loop is not None and loop.m >= 1


def test_cross_pairs_of_disjoint_identities_are_not_related(two_identities):
    grid = sample(two_identities, 0.05)
    ladder = GraphLadder(grid, RefinementSchedule.default(two_identities.diam, depth=5))
    x, _ = grid.snap(np.array([0.5]))
    y, _ = grid.snap(np.array([2.5]))
    rel = chain_related(ladder, x, y)
    assert not rel.verdict
    assert ladder.sched[rel.first_failure] < 1.0
    assert chain_related(ladder, x, grid.snap(np.array([0.9]))[0]).verdict


def test_halving_pairs_relate_downwards_only(halving_grid, small_sched):
    ladder = GraphLadder(halving_grid, small_sched)
    assert chain_related(ladder, 100, 0).verdict
    assert not chain_related(ladder, 0, 100).verdict


# ── Components and Conley order ───────────────────────────────────
def test_cascade_components_are_totally_ordered(cascade_grid, cascade_ladder):
    cc = chain_components(cascade_ladder)
    assert len(cc) >= 4
    top = cc.member_of[len(cascade_grid) - 1]
    bottom = cc.member_of[0]
    assert top >= 0 and bottom >= 0
    cd = conley_order(cc, cascade_ladder)
    assert cd.is_total_on(cd.nodes)
    assert all(cd.leq(k, top) for k in cd.nodes)
    assert all(cd.leq(bottom, k) for k in cd.nodes)
    for (a, b), cert in cd.certificates.items():
        assert cert.check().ok
        assert cc.member_of[cert.indices[-1]] == a


def test_rotation_is_one_component(eighth):
    grid = sample(eighth, 1 / 64)
    cc = scc(build_graph(grid, 0.02))
    assert len(cc) == 1
    assert (cc.member_of == 0).all()


# ── Exhaustive oracle on toy systems ──────────────────────────────
def _closure(adj: np.ndarray) -> np.ndarray:
    reach = adj.copy()
    for _ in range(len(adj)):
        step = reach | ((reach.astype(int) @ adj.astype(int)) > 0)
        if np.array_equal(step, reach):
            break
        reach = step
    return reach


def _toy(rng, n):
    pts = np.sort(rng.choice(np.arange(40), size=n, replace=False)).astype(float) / 4.0
    images = pts[rng.integers(0, n, size=n)]
    return SystemDef.from_table("toy", pts, images)


def test_chain_relation_and_components_match_exhaustive_search(rng):
    sched = RefinementSchedule.user([2.0, 0.6, 0.3])
    for _ in range(100):
        sys = _toy(rng, int(rng.integers(3, 13)))
        grid = sample(sys, 0.25)
        ladder = GraphLadder(grid, sched)
        coords = grid.coords[:, 0]
        reach = np.ones((len(grid),) * 2, dtype=bool)
        for eps in sched.epsilons:
            adj = np.abs(grid.images[:, 0][:, None] - coords[None, :]) < eps
            reach &= _closure(adj)
        for x in range(len(grid)):
            for y in range(len(grid)):
                assert chain_related(ladder, x, y).verdict == reach[x, y]
        cc = chain_components(ladder)
        for i in range(len(grid)):
            for j in range(len(grid)):
                same = reach[i, j] and reach[j, i]
                expected = same if i != j else reach[i, i]
                got = cc.member_of[i] >= 0 and cc.member_of[i] == cc.member_of[j]
                assert got == expected
