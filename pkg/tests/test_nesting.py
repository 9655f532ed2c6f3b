import numpy as np
import pytest

from chainspec.epsgraph import Chain, GraphLadder, RefinementSchedule, chain_related
from chainspec.errors import DomainError, ScheduleExhaustedError
from chainspec.geometry import MetricDescriptor
from chainspec.nesting import (NestedFamily, first_occurrence_order, hausdorff_project, limit_support_check,
                               prune_loop, stabilized_order, uniform_modulus, verify_ordinately_nested)
from chainspec.spectrum import recipes
from chainspec.systems import Domain, SystemDef, make_system, sample


def _family(sys, eps, rows):
    return NestedFamily.from_chains([Chain(sys, eps, r) for r in rows])


# ── Families and orders ───────────────────────────────────────────
def test_family_flags_nesting_and_interior_sizes(identity):
    nf = _family(identity, 0.5, [[0.0, 0.5, 1.0], [0.0, 0.25, 0.5, 1.0], [0.0, 0.25, 0.5, 0.75, 1.0]])
    assert nf.nesting_ok == [True, True]
    assert all(nf.acyclic_ok)
    assert nf.interior_sizes() == [1, 2, 3]
    assert (nf.x, nf.y) == ((0.0,), (1.0,))


def test_family_chains_must_share_endpoints(identity):
    with pytest.raises(DomainError):
        _family(identity, 0.5, [[0.0, 1.0], [0.0, 0.5]])
    with pytest.raises(DomainError):
        NestedFamily.from_chains([])


def test_first_occurrence_ignores_revisits(identity):
    order = first_occurrence_order(Chain(identity, 0.5, [0.0, 0.25, 0.5, 0.25, 1.0]))
    assert order.rank == {(0.25,): 1, (0.5,): 2}
    assert order.sequence == [(0.25,), (0.5,)]
    assert order.before((0.25,), (0.5,))


def test_stabilized_order_on_a_growing_family(identity):
    nf = _family(identity, 0.5, [[0.0, 0.5, 1.0], [0.0, 0.25, 0.5, 1.0], [0.0, 0.25, 0.5, 0.75, 1.0]])
    so = stabilized_order(nf, window=3)
    assert so.pair((0.25,), (0.5,)) == "before"
    assert so.pair((0.75,), (0.5,)) == "after"
    assert so.fully_decided
    assert so.decided_sequence() == [(0.25,), (0.5,), (0.75,)]


def test_flipping_pair_is_unstable(identity):
    nf = _family(identity, 0.5, [[0.0, 0.25, 0.5, 1.0], [0.0, 0.5, 0.25, 1.0], [0.0, 0.25, 0.5, 1.0]])
    so = stabilized_order(nf, window=3)
    assert so.unstable_pairs() == [((0.25,), (0.5,))]
    assert so.decided_sequence() == []
    cert = verify_ordinately_nested(nf, window=3)
    assert not cert.order_compatible
    assert set(cert.flipping_pair) == {(0.25,), (0.5,)}
    assert not cert.passed


def test_stabilized_order_needs_a_full_window(identity):
    nf = _family(identity, 0.5, [[0.0, 0.5, 1.0], [0.0, 0.5, 1.0]])
    with pytest.raises(DomainError):
        stabilized_order(nf, window=3)
    with pytest.raises(DomainError):
        stabilized_order(nf, window=1)


def test_certificate_points_at_the_first_non_nested_level(identity):
    nf = _family(identity, 0.5, [[0.0, 0.25, 1.0], [0.0, 0.5, 1.0], [0.0, 0.25, 0.5, 1.0]])
    cert = verify_ordinately_nested(nf, window=2)
    assert cert.nested == [False, True]
    assert cert.violating_level == 1


# ── Continuity modulus ────────────────────────────────────────────
def test_modulus_uses_the_lipschitz_constant(halving):
    assert uniform_modulus(halving, np.array([[0.5]]), 0.1) == pytest.approx(0.2)


def test_modulus_on_a_finite_domain_is_half_the_gap():
    sys = SystemDef.from_table("toy", [0.0, 1.0, 3.0], [1.0, 3.0, 0.0])
    assert uniform_modulus(sys, sys.domain.points, 0.1) == pytest.approx(0.5)


def test_modulus_probes_when_no_constant_is_known():
    square = SystemDef(name="square", domain=Domain("interval", ((0.0, 1.0),)),
                       metric=MetricDescriptor(kind="euclidean-on-interval"),
                       map_eval=lambda x: x * x, diam=1.0)
    assert uniform_modulus(square, np.array([[0.5]]), 0.1) == pytest.approx(0.025)


# ── Projection and pruning ────────────────────────────────────────
@pytest.fixture
def halving_prefix(halving):
    return recipes.orbit_prefix(halving, RefinementSchedule.default(1.0, depth=8), 1.0, 0.0)


def test_projection_of_orbit_prefixes_is_nested(halving_prefix):
    nf, limit = hausdorff_project(halving_prefix.chains)
    assert len(nf) == len(halving_prefix) - 2
    assert all(nf.nesting_ok)
    assert all(c.check().ok for c in nf.chains)
    assert all(b <= a for a, b in zip(nf.limit_distances, nf.limit_distances[1:]))
    assert nf.chains[-1].support_keys() <= limit.key_set()
    assert {(1.0,), (0.0,)} <= limit.key_set()


def test_prune_loop_converges_at_once_on_acyclic_input(halving_prefix):
    result = prune_loop(halving_prefix.chains)
    assert result.converged
    assert result.rounds == 1
    assert result.nested is not None and all(result.nested.acyclic_ok)


def test_limit_of_halving_prefixes_is_almost_invariant(halving, halving_prefix):
    _, limit = hausdorff_project(halving_prefix.chains)
    check = limit_support_check(limit, halving, [1.0], [0.0], tol=0.01)
    # f(L) gains 1/128, whose nearest limit points are 1/64 and 0
    assert check.distance == pytest.approx(1 / 128)
    assert check.passed


def test_projection_rejects_foreign_chains(halving, halving_prefix):
    stray = Chain(halving, 0.5, [0.5, 0.0])
    with pytest.raises(DomainError):
        hausdorff_project(list(halving_prefix.chains) + [stray])
    with pytest.raises(DomainError):
        hausdorff_project([])


def test_prune_loop_validates_its_budget(halving_prefix):
    with pytest.raises(DomainError):
        prune_loop(halving_prefix.chains, budget=0)


# ── Non-compact comb ──────────────────────────────────────────────
@pytest.fixture(scope="module")
def comb_chains():
    comb = make_system("comb")
    grid = sample(comb, 0.02)
    ladder = GraphLadder(grid, RefinementSchedule.user([1.5, 0.6, 0.3, 0.2, 0.15, 0.11, 0.09]))
    x, _ = grid.snap(np.array([[0.0, 0.0]]))
    y, _ = grid.snap(np.array([[0.0, 1.0]]))
    rel = chain_related(ladder, x, y)
    assert rel.verdict
    return rel.chains


def test_comb_family_has_no_hausdorff_limit(comb_chains):
    with pytest.raises(ScheduleExhaustedError) as info:
        hausdorff_project(comb_chains)
    assert "no Hausdorff limit" in str(info.value)


def test_prune_loop_reports_the_comb_as_not_converged(comb_chains):
    result = prune_loop(comb_chains)
    assert not result.converged
    assert result.nested is None
    assert "no Hausdorff limit" in result.message


# ── Randomized family corpus ──────────────────────────────────────
def _corpus(rng):
    """Orbit-prefix families from random start points on three systems."""
    halving, cascade = make_system("halving"), make_system("cascade")
    periodic = make_system("attracting-periodic-K1")
    starts = [
        (halving, rng.uniform(0.2, 1.0, size=17), 0.0),
        (cascade, rng.uniform(0.55, 0.99, size=17), 0.5),
        (periodic, rng.uniform(0.05, 0.45, size=16), 0.5),
    ]
    for sys, xs, y in starts:
        sched = RefinementSchedule.default(sys.diam, depth=8)
        for x in xs:
            yield sys, x, y, recipes.orbit_prefix(sys, sched, x, y)


@pytest.fixture(scope="module")
def corpus():
    return list(_corpus(np.random.default_rng(20240611)))


@pytest.mark.slow
def test_corpus_projections_are_nested_valid_and_approach_the_limit(corpus):
    assert len(corpus) == 50
    for _, _, _, fam in corpus:
        nf, limit = hausdorff_project(fam.chains)
        assert all(nf.nesting_ok)
        assert all(c.check().ok for c in nf.chains)
        assert all(b <= a + 1e-12 for a, b in zip(nf.limit_distances, nf.limit_distances[1:]))
        assert nf.chains[-1].support_keys() <= limit.key_set()


@pytest.mark.slow
def test_corpus_prunes_to_acyclic_order_compatible_families(corpus):
    for sys, x, y, fam in corpus:
        result = prune_loop(fam.chains, budget=16, tol=0.005)
        assert result.converged
        assert result.rounds <= 16
        assert all(result.nested.acyclic_ok)
        assert verify_ordinately_nested(result.nested, window=3).order_compatible
        assert limit_support_check(result.limit, sys, [x], [y], tol=0.02).passed


# ── Exhaustive stabilized order ───────────────────────────────────
def _growing_family(rng, line, levels):
    """Insert fresh points level by level; maybe swap two neighbours at one late level."""
    pool = list(rng.permutation(np.arange(1, 16) / 16.0)[:int(rng.integers(3, 11))])
    interior, rows = [], []
    for _ in range(levels):
        for _ in range(int(rng.integers(0, 3))):
            if pool:
                interior.insert(int(rng.integers(0, len(interior) + 1)), pool.pop())
        rows.append(list(interior))
    row = rows[int(rng.integers(levels - 3, levels))]
    if len(row) > 1 and rng.random() < 0.5:
        i = int(rng.integers(0, len(row) - 1))
        row[i], row[i + 1] = row[i + 1], row[i]
    return NestedFamily.from_chains([Chain(line, 2.0 + levels - n, [0.0] + r + [1.0]) for n, r in enumerate(rows)])


def _exhaustive_pair(fam, a, b, window):
    signs = set()
    for c in fam.chains[-window:]:
        seq = c.keys()[1:-1]
        if a in seq and b in seq:
            signs.add(seq.index(a) < seq.index(b))
    if signs == {True}:
        return "before"
    if signs == {False}:
        return "after"
    return "unstable"


def test_stabilized_order_matches_exhaustive_comparison(identity, rng):
    for _ in range(100):
        fam = _growing_family(rng, identity, int(rng.integers(3, 7)))
        so = stabilized_order(fam, window=3)
        for a in so.keys:
            for b in so.keys:
                if a != b:
                    assert so.pair(a, b) == _exhaustive_pair(fam, a, b, 3)
