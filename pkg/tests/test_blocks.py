import numpy as np
import pytest

from chainspec.epsgraph import GraphLadder, RefinementSchedule, chain_components, conley_order
from chainspec.errors import BlockTheoremError, DomainError
from chainspec.nesting import PruneResult, StabilizedOrder
from chainspec.spectrum import SpectrumEngine, conley_blocks
from chainspec.systems import SystemDef, sample


def _order(keys):
    """Fully decided order listing ``keys`` first to last."""
    n = len(keys)
    i, j = np.indices((n, n))
    relation = np.where(i < j, 1, np.where(i > j, -1, 0)).astype(np.int8)
    return StabilizedOrder([(float(k),) for k in keys], None, relation, 3)


@pytest.fixture(scope="module")
def table_setup():
    # 0 and 0.1 form one component, 1.0 another; 2.0 falls onto 0 and is transient
    sys = SystemDef.from_table("toy", [0.0, 0.1, 1.0, 2.0], [0.0, 0.1, 1.0, 0.0])
    grid = sample(sys, 0.1)
    ladder = GraphLadder(grid, RefinementSchedule.user([0.5, 0.3]))
    cc = chain_components(ladder)
    return grid, cc, conley_order(cc, ladder)


def test_blocks_group_components_and_transit_points(table_setup):
    grid, cc, cd = table_setup
    dec = conley_blocks(_order([2.0, 0.1, 0.0]), cc, cd, grid)
    assert [b.component for b in dec.blocks] == [None, cc.member_of[0]]
    assert [b.size for b in dec.blocks] == [1, 2]
    assert dec.induced_order == [cc.member_of[0]]


def test_split_component_is_not_convex(table_setup):
    grid, cc, cd = table_setup
    with pytest.raises(BlockTheoremError):
        conley_blocks(_order([0.0, 1.0, 0.1]), cc, cd, grid)


def test_incomparable_components_break_the_induced_order(table_setup):
    grid, cc, cd = table_setup
    with pytest.raises(BlockTheoremError) as info:
        conley_blocks(_order([1.0, 0.0]), cc, cd, grid)
    assert info.value.pair == (cc.member_of[2], cc.member_of[0])


def test_unstable_orders_are_refused(table_setup):
    grid, cc, cd = table_setup
    so = _order([0.0, 1.0])
    so.relation[:] = 0
    with pytest.raises(DomainError):
        conley_blocks(so, cc, cd, grid)


def test_cascade_blocks_descend_the_conley_order(cascade_grid, cascade_sched):
    engine = SpectrumEngine(cascade_grid, cascade_sched)
    cc = chain_components(engine.ladder)
    cd = conley_order(cc, engine.ladder)
    failed = PruneResult(None, None, 0, False, [], "forced ladder family")
    dec = engine.blocks(1.0, 0.125, cc, cd, failed)
    assert len(dec.induced_order) >= 3
    assert dec.induced_order[0] == cc.member_of[len(cascade_grid) - 1]
    for a, b in zip(dec.induced_order, dec.induced_order[1:]):
        assert cd.leq(b, a)
    ends = [b.end for b in dec.blocks]
    assert [b.start for b in dec.blocks] == [0] + ends[:-1]
