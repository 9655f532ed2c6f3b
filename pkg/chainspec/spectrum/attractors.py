"""
Attractor / repeller pairs on an ε-graph and the split of a limit order
into its repeller, connecting and attractor parts.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from ..epsgraph import EpsilonGraph, scc
from ..errors import DecompositionError, HypothesisError
from ..geometry import canonical_coords, pairwise, rowwise
from ..nesting import NestedFamily, StabilizedOrder
from ..ordertypes import OmegaStar, Zeta, birth_levels, classify_sequence, format_term
from ..systems import SampleGrid, SystemDef, evaluate_many
from .detectors import collapsed_hit
from .models import ArDecomposition, AttractorRepellerPair

logger = logging.getLogger("chainspec.spectrum")

ORBIT_BUDGET = 512
IMAGE_ITERATIONS = 10_000
ORBIT_TOL = 1e-9


def _enters(grid: SampleGrid, coords: np.ndarray, inside: np.ndarray, budget: int) -> np.ndarray:
    """Which start points have an exact orbit snapping into the marked grid set within the budget."""
    sys = grid.system
    z = canonical_coords(coords, sys.space_tag)
    hit = inside[grid.snap_many(z)]
    for _ in range(budget):
        if hit.all():
            break
        z = evaluate_many(sys, z)
        hit |= inside[grid.snap_many(z)]
    return hit


def _image_limit(grid: SampleGrid, members: np.ndarray) -> np.ndarray:
    v = members
    for _ in range(IMAGE_ITERATIONS):
        nxt = np.unique(grid.snap_many(grid.images[v]))
        if np.array_equal(nxt, v):
            break
        v = nxt
    return v


def find_attractors(grid: SampleGrid, sys: SystemDef, epsilon: float,
                    orbit_budget: int = ORBIT_BUDGET) -> List[AttractorRepellerPair]:
    """Forward-closed reachability sets of recurrent ε-components, with attractor, basin and repeller.

    Pairs are listed by increasing attractor size.
    """
    g = EpsilonGraph(grid, epsilon)
    comps = scc(g)
    seen = set()
    pairs: List[AttractorRepellerPair] = []
    for k in range(len(comps)):
        U = np.flatnonzero(g.reachable_from(comps.representative(k)))
        key = U.tobytes()
        if len(U) == len(grid) or key in seen:
            continue
        seen.add(key)
        inside = np.zeros(len(grid), dtype=bool)
        inside[U] = True
        leaks = g.adjacency[U].indices
        inward = bool(inside[leaks].all())
        A = _image_limit(grid, U)
        basin = _enters(grid, grid.coords, inside, orbit_budget)
        pairs.append(AttractorRepellerPair(
            epsilon=epsilon,
            attractor=A.tolist(),
            repeller=np.flatnonzero(~basin).tolist(),
            basin=np.flatnonzero(basin).tolist(),
            inward_set=U.tolist(),
            inward_certificate=inward,
        ))
    pairs.sort(key=lambda p: (len(p.attractor), len(p.inward_set)))
    logger.debug("%d proper attractor(s) at eps=%g", len(pairs), epsilon)
    return pairs


def select_pair(pairs: Sequence[AttractorRepellerPair], grid: SampleGrid, x, y) -> Optional[AttractorRepellerPair]:
    """First pair with x in the repeller and y in the basin."""
    ix, _ = grid.snap(np.asarray(x, dtype=np.float64).reshape(1, -1))
    iy, _ = grid.snap(np.asarray(y, dtype=np.float64).reshape(1, -1))
    for p in pairs:
        if ix in set(p.repeller) and iy in set(p.basin):
            return p
    return None


def ar_decompose(nf: NestedFamily, so: StabilizedOrder, pair: AttractorRepellerPair,
                 grid: SampleGrid, orbit_budget: int = ORBIT_BUDGET) -> ArDecomposition:
    """Split the decided order into the repeller part, one connecting orbit and the attractor part.

    The middle is read off the birth levels of its points: ζ when it keeps
    growing at both ends. Otherwise it is ω* when its last point lands exactly
    on y and ζ when the forward end only stalled on the attractor.
    """
    sys = nf.system
    ix, _ = grid.snap(np.asarray(nf.x).reshape(1, -1))
    iy, _ = grid.snap(np.asarray(nf.y).reshape(1, -1))
    if ix in set(pair.attractor):
        raise HypothesisError("x lies in the attractor")
    if ix not in set(pair.repeller):
        raise HypothesisError("x is not in the dual repeller")
    if iy in set(pair.repeller):
        raise HypothesisError("y is not in the basin of the attractor")

    seq = so.decided_sequence()
    if not seq:
        raise DecompositionError("decided order is empty")
    pts = np.asarray(seq, dtype=np.float64)
    in_u = np.zeros(len(grid), dtype=bool)
    in_u[pair.inward_set] = True
    in_basin = _enters(grid, pts, in_u, orbit_budget)
    attractor = grid.coords[pair.attractor]
    on_a = pairwise(pts, attractor, sys.metric).min(axis=1) <= ORBIT_TOL
    part = np.where(~in_basin, 0, np.where(on_a, 2, 1))
    if (np.diff(part) < 0).any():
        pos = int(np.flatnonzero(np.diff(part) < 0)[0])
        raise DecompositionError(f"parts interleave at position {pos}: repeller, orbit and attractor must follow in turn")

    mid = pts[part == 1]
    if not len(mid):
        raise DecompositionError("no connecting orbit between repeller and attractor parts")
    if len(mid) > 1:
        step = rowwise(evaluate_many(sys, mid[:-1]), mid[1:], sys.metric)
        bad = np.flatnonzero(step > ORBIT_TOL)
        if bad.size:
            raise DecompositionError(
                f"middle part is not one orbit: f(s_{bad[0]}) misses s_{bad[0] + 1} by {step[bad[0]]:.3g}")

    birth = birth_levels(nf)
    newest = len(nf) - 1

    def births(which: int) -> List[int]:
        return [birth[k] for k, p in zip(seq, part) if p == which and k in birth]

    middle = classify_sequence(births(1), newest)
    if not isinstance(middle, Zeta):
        # A forward end that stops growing is either an orbit that really
        # lands on y or one that collapsed onto the attractor in floating point.
        ya = np.asarray(nf.y).reshape(1, -1)
        lands = float(pairwise(evaluate_many(sys, mid[-1:]), ya, sys.metric)[0, 0]) <= ORBIT_TOL
        ends_at_y = lands and not collapsed_hit(sys, mid[-1], ya[0], 1000)
        middle = OmegaStar() if ends_at_y else Zeta()
    beta = classify_sequence(births(0), newest)
    beta_prime = classify_sequence(births(2), newest)
    sizes = tuple(int((part == i).sum()) for i in range(3))
    logger.debug("decomposition sizes %s, middle %s", sizes, format_term(middle))
    return ArDecomposition(beta=format_term(beta), middle=format_term(middle),
                           beta_prime=format_term(beta_prime), sizes=sizes)
