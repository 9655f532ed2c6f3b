import numpy as np
import pytest

from chainspec.epsgraph import schedule_for
from chainspec.errors import DomainError
from chainspec.spectrum import ProlongationLadder, prolongation
from chainspec.systems import make_system, sample


def _index(grid, value):
    return int(np.argmin(np.abs(grid.coords[:, 0] - value)))


def test_first_prolongation_of_the_top_of_the_cascade(cascade, cascade_grid, cascade_sched):
    table = prolongation(cascade, cascade_grid, cascade_sched, 1.0, alpha_max=1)
    j1 = cascade_grid.coords[table.levels[1], 0]
    assert table.x == (1.0,)
    assert j1.min() >= 0.45
    assert _index(cascade_grid, 0.5) in table.levels[1]


def test_zero_enters_the_cascade_prolongation_at_level_two(cascade, cascade_grid, cascade_sched):
    table = prolongation(cascade, cascade_grid, cascade_sched, 1.0, alpha_max=2)
    zero = _index(cascade_grid, 0.0)
    assert zero not in table.levels[1]
    assert zero in table.levels[2]
    assert table.first_entry()[zero] == 2
    assert set(table.levels[1]) <= set(table.levels[2])


def test_a_shared_ladder_gives_the_same_table(cascade, cascade_grid, cascade_sched):
    ladder = ProlongationLadder(cascade_grid, cascade_sched)
    a = prolongation(cascade, cascade_grid, cascade_sched, 0.8, alpha_max=2, ladder=ladder)
    b = prolongation(cascade, cascade_grid, cascade_sched, 0.8, alpha_max=2)
    assert a.levels == b.levels


def test_prolongation_rejects_bad_arguments(cascade, cascade_grid, cascade_sched, halving):
    with pytest.raises(DomainError):
        prolongation(cascade, cascade_grid, cascade_sched, 1.0, alpha_max=0)
    with pytest.raises(DomainError):
        prolongation(halving, cascade_grid, cascade_sched, 1.0)


@pytest.mark.slow
def test_negative_branch_enters_the_two_interval_prolongation_at_level_three():
    sys = make_system("two-interval")
    grid = sample(sys, 1e-3)
    sched = schedule_for(grid, depth=10)
    table = prolongation(sys, grid, sched, 1.0, alpha_max=3)
    first = table.first_entry()
    assert first[_index(grid, 0.0)] == 2
    for y in (-1.0, -0.402):
        i = _index(grid, y)
        assert i not in table.levels[2]
        assert first[i] == 3
