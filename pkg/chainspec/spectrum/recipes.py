"""
Witness nested families.

Each recipe builds, level by level, the explicit chains used to show
that one order type occurs between two points: constant orbits for
finite types, orbit prefixes for ω, prefixes with a periodic tail for
ω+j, splicing of a dense orbit or gap enrichment for η, and blocks of
full orbits for monotone interval maps with a ladder of fixed points.
Chains are built from exact map values, not from the sample grid.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from ..epsgraph import Chain, RefinementSchedule
from ..errors import HypothesisError
from ..geometry import canonical_coords, pairwise
from ..nesting import NestedFamily
from ..systems import SystemDef, evaluate_many, inverse_many, orbit_array

logger = logging.getLogger("chainspec.spectrum")

MAX_SPLICE_LEVELS = 5
MAX_ENRICH_LEVELS = 8
SEARCH_CHUNK = 1024


def _row(sys: SystemDef, p) -> np.ndarray:
    return canonical_coords(np.asarray(p, dtype=np.float64).reshape(1, -1), sys.space_tag)


def _family(sys: SystemDef, sched: RefinementSchedule, rows: Sequence[np.ndarray]) -> NestedFamily:
    chains = [Chain(sys, sched[n], r) for n, r in enumerate(rows)]
    for n, c in enumerate(chains):
        check = c.check()
        if not check.ok:
            raise HypothesisError(f"recipe chain at level {n} breaks at step(s) {check.offending[:5]}")
    return NestedFamily.from_chains(chains)


def constant_orbit(sys: SystemDef, sched: RefinementSchedule, x, k: int) -> NestedFamily:
    """x, f(x), ..., f^{k+1}(x) at every level."""
    walk = orbit_array(sys, _row(sys, x), k + 1)[:, 0, :]
    return _family(sys, sched, [walk] * len(sched))


def orbit_prefix(sys: SystemDef, sched: RefinementSchedule, x, y, budget: int = 10_000) -> NestedFamily:
    """x, f(x), ..., f^{k_n}(x), y with k_n the first index whose image lands in B_{ε_n}(y)."""
    ya = _row(sys, y)
    walk = orbit_array(sys, _row(sys, x), budget)[:, 0, :]
    d_next = pairwise(walk[1:], ya, sys.metric)[:, 0]
    exact = np.flatnonzero(d_next == 0.0)
    # points past an exact (float) hit would repeat y
    limit = int(exact[0]) + 1 if exact.size else budget
    rows, k = [], 0
    for eps in sched.epsilons:
        hits = np.flatnonzero(d_next[k:limit] < eps)
        if not hits.size:
            break
        k = k + int(hits[0])
        rows.append(np.vstack([walk[:k + 1], ya]))
    if not rows:
        raise HypothesisError("orbit of x never approaches y")
    return _family(sys, sched, rows)


def prefix_periodic_tail(sys: SystemDef, sched: RefinementSchedule, x, y, cycle: Sequence[float], j: int,
                         budget: int = 10_000) -> NestedFamily:
    """x, f(x), ..., f^{k_n}(x), z, f(z), ..., f^{j-1}(z), y with f^j(z) = y on the cycle."""
    pts = canonical_coords(np.asarray(cycle, dtype=np.float64).reshape(-1, 1), sys.space_tag)
    ya = _row(sys, y)
    iy = int(np.argmin(pairwise(pts, ya, sys.metric)[:, 0]))
    K = len(pts)
    tail = pts[[(iy - j + t) % K for t in range(j)]].reshape(-1, pts.shape[1])
    target = tail[:1] if j else ya
    walk = orbit_array(sys, _row(sys, x), budget)[:, 0, :]
    on_cycle = (pairwise(walk, pts, sys.metric) == 0.0).any(axis=1)
    limit = int(np.argmax(on_cycle)) if on_cycle.any() else budget
    d_next = pairwise(walk[1:], target, sys.metric)[:, 0]
    rows, k = [], 0
    for eps in sched.epsilons:
        hits = np.flatnonzero(d_next[k:max(k, limit)] < eps)
        if not hits.size:
            break
        k = k + int(hits[0])
        rows.append(np.vstack([walk[:k + 1], tail, ya]))
    if not rows:
        raise HypothesisError("orbit of x never approaches the cycle")
    return _family(sys, sched, rows)


def _search(walk: np.ndarray, start: int, target: np.ndarray, eps: float, metric) -> int:
    pos = start
    while pos < len(walk):
        seg = walk[pos:pos + SEARCH_CHUNK]
        hit = np.flatnonzero(pairwise(seg, target, metric)[:, 0] < eps)
        if hit.size:
            return pos + int(hit[0])
        pos += SEARCH_CHUNK
    return -1


def transitive_splice(sys: SystemDef, sched: RefinementSchedule, x, y, z,
                      budget: int = 200_000, levels: int = MAX_SPLICE_LEVELS) -> Optional[NestedFamily]:
    """Splice segments f^i(z)..f^j(z) of a dense orbit into every step, indices always increasing."""
    walk = orbit_array(sys, _row(sys, z), budget)[:, 0, :]
    current = np.vstack([_row(sys, x), _row(sys, y)])
    rows = [current]
    cursor = 1
    for eps in sched.epsilons[1:levels]:
        images = evaluate_many(sys, current[:-1])
        pieces: List[np.ndarray] = [current[:1]]
        for a_img, b in zip(images, current[1:]):
            i0 = _search(walk, cursor, a_img[None, :], eps, sys.metric)
            if i0 < 0:
                logger.debug("splice search ran past the witness budget")
                return None
            j0 = _search(walk[1:], i0, b[None, :], eps, sys.metric)
            if j0 < 0:
                return None
            pieces.append(walk[i0:j0 + 1])
            pieces.append(b[None, :])
            cursor = j0 + 2
        current = np.vstack(pieces)
        rows.append(current)
    return _family(sys, sched, rows)


def identity_enrichment(sys: SystemDef, sched: RefinementSchedule, x, y, seed: int = 0,
                        levels: int = MAX_ENRICH_LEVELS) -> NestedFamily:
    """Fresh jittered points in every gap at every level (identity map on a line)."""
    rng = np.random.default_rng(seed)
    current = np.vstack([_row(sys, x), _row(sys, y)])[:, 0]
    rows = [current.reshape(-1, 1)]
    for eps in sched.epsilons[1:levels]:
        out = [current[:1]]
        for a, b in zip(current[:-1], current[1:]):
            g = b - a
            if g == 0.0:
                step = eps / 4.0
                p = a + step if sys.domain.contains(np.array([[a + step]]))[0] else a - step
                out.append(np.array([p]))
            else:
                m = max(1, math.ceil(abs(g) / (0.6 * eps)) - 1)
                base = (np.arange(1, m + 1) + rng.uniform(-0.2, 0.2, m)) / (m + 1)
                out.append(a + g * base)
            out.append(np.array([b]))
        current = np.concatenate(out)
        rows.append(current.reshape(-1, 1))
    return _family(sys, sched, rows)


def _arm(sys: SystemDef, p: np.ndarray, n: int, lo: float, hi: float, backward: bool) -> np.ndarray:
    pts = []
    cur = p
    for _ in range(n):
        cur = inverse_many(sys, cur) if backward else evaluate_many(sys, cur)
        t = float(cur[0, 0])
        if not lo < t < hi:
            break
        pts.append(t)
    return np.asarray(pts, dtype=np.float64)


def ladder_family(sys: SystemDef, sched: RefinementSchedule, x, y) -> NestedFamily:
    """Full-orbit blocks in every gap of the fixed-point ladder between x and y.

    Gaps of length at least ε_n/8 take part at level n; a block is n
    backward and n forward iterates of the gap midpoint.
    """
    if not sys.metadata.ladder or sys.inverse_eval is None:
        raise HypothesisError(f"{sys.name} has no fixed-point ladder")
    fixed = sorted(set(sys.metadata.ladder), reverse=True)
    xv, yv = float(np.ravel(x)[0]), float(np.ravel(y)[0])
    if not xv > yv:
        raise HypothesisError("ladder chains run downward: need x > y")
    gaps = [(lo, hi) for hi, lo in zip(fixed, fixed[1:]) if yv <= lo and hi <= xv]
    x_gap = next(((lo, hi) for hi, lo in zip(fixed, fixed[1:]) if lo < xv < hi), None)
    y_gap = next(((lo, hi) for hi, lo in zip(fixed, fixed[1:]) if lo < yv < hi), None)

    rows = []
    for level, eps in enumerate(sched.epsilons):
        n = level + 1
        parts = [np.array([xv])]
        if x_gap is not None:
            parts.append(_arm(sys, np.array([[xv]]), n, *x_gap, backward=False))
        for lo, hi in gaps:
            if hi - lo < eps / 8.0:
                continue
            mid = np.array([[0.5 * (lo + hi)]])
            back = _arm(sys, mid, n, lo, hi, backward=True)
            fwd = _arm(sys, mid, n, lo, hi, backward=False)
            parts.extend([back[::-1], mid[0], fwd])
        if y_gap is not None:
            parts.append(_arm(sys, np.array([[yv]]), n, *y_gap, backward=True)[::-1])
        parts.append(np.array([yv]))
        rows.append(np.concatenate(parts).reshape(-1, 1))
    return _family(sys, sched, rows)
