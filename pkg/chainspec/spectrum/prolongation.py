"""
Prolongational sets J_α(x) for finite α on a sample grid.

J_1 collects the points that orbits starting ε-close to x come ε-close
to. J_{α+1} composes the J_α relation up to n times from B_ε(x), with
n the level index, and closes the result by ε-thickening. Every level
is intersected over the schedule. Boolean relations are multiplied as
float32 matrices.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..epsgraph import RefinementSchedule
from ..errors import DomainError
from ..geometry import pairwise
from ..systems import SampleGrid, SystemDef, orbit_array
from .models import ProlongationTable

logger = logging.getLogger("chainspec.spectrum")

ORBIT_BUDGET = 512


def _bool_mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.float32) @ b.astype(np.float32)) > 0


def orbit_distances(grid: SampleGrid, budget: int = ORBIT_BUDGET) -> np.ndarray:
    """D[z, w] = min over 1 <= k <= budget of d(f^k(z), w)."""
    sys = grid.system
    walks = orbit_array(sys, grid.coords, budget)[1:]
    n = len(grid)
    out = np.empty((n, n))
    metric = sys.metric
    line = grid.coords.shape[1] == 1 and metric.warp == 0.0
    g = grid.coords[:, 0] if line else None
    for i in range(n):
        if line:
            o = np.unique(walks[:, i, 0])
            if sys.space_tag == "circle":
                o = np.concatenate([o - 1.0, o, o + 1.0])
            pos = np.searchsorted(o, g)
            left = o[np.clip(pos - 1, 0, len(o) - 1)]
            right = o[np.clip(pos, 0, len(o) - 1)]
            out[i] = np.minimum(np.abs(g - left), np.abs(right - g)) * metric.scale
        else:
            o = np.unique(walks[:, i, :], axis=0)
            out[i] = pairwise(o, grid.coords, metric).min(axis=0)
    return out


class ProlongationLadder:
    """Per-level balls and orbit-visit relations shared by every α."""

    def __init__(self, grid: SampleGrid, sched: RefinementSchedule, orbit_budget: int = ORBIT_BUDGET):
        self.grid = grid
        self.sched = sched
        self.orbit_budget = orbit_budget
        self._load_resources()

    def _load_resources(self):
        coords = self.grid.coords
        dist = pairwise(coords, coords, self.grid.metric)
        visits = orbit_distances(self.grid, self.orbit_budget)
        self.balls: List[np.ndarray] = [dist < eps for eps in self.sched.epsilons]
        self.visits: List[np.ndarray] = [visits < eps for eps in self.sched.epsilons]
        logger.debug("prolongation ladder: %d points, %d levels", len(self.grid), len(self.sched))

    def __len__(self) -> int:
        return len(self.sched)

    def first_relation(self) -> np.ndarray:
        rel = np.ones((len(self.grid),) * 2, dtype=bool)
        for ball, visit in zip(self.balls, self.visits):
            rel &= _bool_mm(ball, visit)
        return rel

    def compose(self, start: np.ndarray, rel: np.ndarray, level: int) -> Tuple[np.ndarray, bool]:
        """Thickened union of start·rel^m for m = 1..level+1; flag when the last power still grew."""
        ball = self.balls[level]
        total = np.zeros_like(start, dtype=bool)
        cur = start
        grew = False
        for _ in range(level + 1):
            cur = _bool_mm(cur, rel)
            new = cur & ~total
            grew = bool(new.any())
            if not grew:
                break
            total |= cur
        return _bool_mm(total, ball), grew

    def next_relation(self, rel: np.ndarray) -> Tuple[np.ndarray, bool]:
        out = np.ones_like(rel, dtype=bool)
        partial = False
        for level, ball in enumerate(self.balls):
            step, grew = self.compose(ball, rel, level)
            out &= step
            partial |= grew
        return out, partial

    def next_row(self, x: int, rel: np.ndarray) -> Tuple[np.ndarray, bool]:
        out = np.ones(len(self.grid), dtype=bool)
        partial = False
        for level, ball in enumerate(self.balls):
            step, grew = self.compose(ball[x:x + 1], rel, level)
            out &= step[0]
            partial |= grew
        return out, partial


def prolongation(sys: SystemDef, grid: SampleGrid, sched: RefinementSchedule, x, alpha_max: int = 4,
                 orbit_budget: int = ORBIT_BUDGET, ladder: Optional[ProlongationLadder] = None) -> ProlongationTable:
    if alpha_max < 1:
        raise DomainError("alpha_max must be at least 1")
    if grid.system is not sys:
        raise DomainError("grid was sampled from a different system")
    ix, _ = grid.snap(np.asarray(x, dtype=np.float64).reshape(1, -1))
    ladder = ladder or ProlongationLadder(grid, sched, orbit_budget)

    rows: Dict[int, np.ndarray] = {}
    lower: Dict[int, bool] = {}
    rel = ladder.first_relation()
    rows[1] = rel[ix].copy()
    lower[1] = False
    for alpha in range(2, alpha_max + 1):
        if alpha < alpha_max:
            rel, lower[alpha] = ladder.next_relation(rel)
            rows[alpha] = rel[ix].copy()
        else:
            rows[alpha], lower[alpha] = ladder.next_row(ix, rel)
        if (rows[alpha - 1] & ~rows[alpha]).any():
            raise AssertionError(f"J_{alpha - 1} is not contained in J_{alpha}")
        logger.debug("J_%d(x): %d points%s", alpha, int(rows[alpha].sum()), " (lower bound)" if lower[alpha] else "")

    return ProlongationTable(
        x=tuple(float(v) for v in grid.coords[ix]),
        x_index=int(ix),
        epsilons=list(sched.epsilons),
        levels={a: np.flatnonzero(r).tolist() for a, r in rows.items()},
        lower_bound=lower,
        orbit_budget=orbit_budget,
    )
