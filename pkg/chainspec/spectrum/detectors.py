"""
Theorem-backed detectors for single spectrum entries.

Each detector checks the hypotheses of one characterization on the
exact map (not the grid) and either returns the order types it certifies
or says nothing. Orbit checks run in float arithmetic; see
``collapsed_hit`` for how float convergence onto a periodic point is read.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..epsgraph import RefinementSchedule
from ..errors import HypothesisError
from ..geometry import canonical_coords, pairwise, rowwise
from ..nesting import NestedFamily
from ..ordertypes import Eta, Fin, Omega, Sum, Term
from ..systems import PeriodicOrbit, SampleGrid, SystemDef, evaluate_many, orbit_array

logger = logging.getLogger("chainspec.spectrum")

OMEGA_EXTRA_HALVINGS = 6
ORBIT_CHUNK = 4096
PERIODIC_TOL = 1e-12


def _row(sys: SystemDef, p) -> np.ndarray:
    return canonical_coords(np.asarray(p, dtype=np.float64).reshape(1, -1), sys.space_tag)


def float_period(sys: SystemDef, p, kmax: int) -> Optional[int]:
    """Smallest k <= kmax with f^k(p) == p exactly in float arithmetic."""
    start = _row(sys, p)
    walk = orbit_array(sys, start, kmax)[1:, 0, :]
    hits = np.flatnonzero((walk == start[0]).all(axis=1))
    return int(hits[0]) + 1 if hits.size else None


def collapsed_hit(sys: SystemDef, x, y, kmax: int) -> bool:
    """An exact hit that only float convergence can explain.

    Injective maps cannot send a non-periodic point onto a periodic one,
    so when y is periodic and x is not, an exact hit is an approach.
    """
    if not sys.injective:
        return False
    return float_period(sys, y, kmax) is not None and float_period(sys, x, kmax) is None


def detect_finite(sys: SystemDef, x, y, kmax: int = 1000, tol: float = 0.0) -> Optional[Fin]:
    """Fin(k) for the smallest k <= kmax with f^{k+1}(x) = y."""
    if kmax < 1:
        raise HypothesisError("kmax must be at least 1")
    xa, ya = _row(sys, x), _row(sys, y)
    walk = orbit_array(sys, xa, kmax + 1)[1:, 0, :]
    d = pairwise(walk, ya, sys.metric)[:, 0]
    hits = np.flatnonzero(d <= tol)
    if not hits.size:
        return None
    if collapsed_hit(sys, xa[0], ya[0], kmax):
        logger.debug("exact hit of %s from %s after %d steps is a float collapse", ya[0], xa[0], hits[0] + 1)
        return None
    return Fin(int(hits[0]))


@dataclass
class OmegaResult:
    term: Optional[Omega]
    inconclusive: bool = False
    visits: int = 0
    steps: int = 0
    note: str = ""


def omega_radius(sched: RefinementSchedule) -> float:
    return sched.finest / 2.0 ** OMEGA_EXTRA_HALVINGS


def detect_omega(sys: SystemDef, grid: Optional[SampleGrid], sched: RefinementSchedule, x, y,
                 budget: int = 100_000, kmax: int = 1000, tol: float = 0.0) -> OmegaResult:
    """Omega when the orbit of x returns to every schedule ball around y and never hits y.

    A return to the smallest ball at two distinct times implies returns to
    every coarser ball, so only the smallest radius is tracked.
    """
    xa, ya = _row(sys, x), _row(sys, y)
    radius = omega_radius(sched)
    collapse = None
    visits, steps, closest = 0, 0, np.inf
    z = xa
    while steps < budget:
        n = min(ORBIT_CHUNK, budget - steps)
        walk = orbit_array(sys, z, n)[1:, 0, :]
        d = pairwise(walk, ya, sys.metric)[:, 0]
        exact = np.flatnonzero(d <= tol)
        if exact.size:
            if collapse is None:
                collapse = collapsed_hit(sys, xa[0], ya[0], kmax)
            if not collapse:
                return OmegaResult(None, False, visits, steps + int(exact[0]) + 1, "exact orbit hit")
        visits += int((d < radius).sum())
        closest = min(closest, float(d.min()))
        steps += n
        z = walk[-1:]
        if visits >= 2:
            return OmegaResult(Omega(), False, visits, steps)
    if closest < sched.finest:
        return OmegaResult(None, True, visits, steps,
                           f"orbit within {closest:.3g} of y but fewer than two returns in {budget} steps")
    return OmegaResult(None, False, visits, steps)


def _attracting_orbit_of(sys: SystemDef, y) -> Optional[PeriodicOrbit]:
    ya = _row(sys, y)
    for orb in sys.metadata.periodic_orbits:
        pts = canonical_coords(np.array(orb.points).reshape(-1, 1), sys.space_tag)
        if orb.attracting and (pairwise(pts, ya, sys.metric)[:, 0] <= PERIODIC_TOL).any():
            return orb
    return None


def detect_periodic_attractor_spectrum(sys: SystemDef, grid: Optional[SampleGrid], sched: RefinementSchedule,
                                       x, y, K: Optional[int] = None, budget: int = 10_000,
                                       kmax: int = 1000) -> List[Term]:
    """{ω+j : j < K} for y on an attracting K-periodic orbit and x in its basin."""
    orb = _attracting_orbit_of(sys, y)
    if orb is None:
        raise HypothesisError(f"{tuple(np.ravel(y))} is not on a certified attracting periodic orbit")
    period = orb.period
    if K is not None and K != period:
        raise HypothesisError(f"y lies on an orbit of period {period}, not {K}")
    ya = _row(sys, y)
    walk = orbit_array(sys, ya, period)[1:, 0, :]
    d = pairwise(walk, ya, sys.metric)[:, 0]
    if d[-1] > PERIODIC_TOL or (period > 1 and (d[:-1] <= PERIODIC_TOL).any()):
        raise HypothesisError(f"orbit of y does not have period {period}")
    if detect_finite(sys, x, y, kmax) is not None:
        raise HypothesisError("x O y: y lies on the forward orbit of x")

    cycle = canonical_coords(np.array(orb.points).reshape(-1, 1), sys.space_tag)
    xa = _row(sys, x)
    probes = np.vstack([xa, xa + sched.finest / 4.0, xa - sched.finest / 4.0])
    probes = canonical_coords(probes, sys.space_tag)
    probes = probes[sys.domain.contains(probes)]
    ends = orbit_array(sys, probes, budget)[-1]
    gap = pairwise(ends, cycle, sys.metric).min(axis=1)
    if (gap > omega_radius(sched)).any():
        raise HypothesisError(f"x is not in the basin: orbit ends {gap.max():.3g} away from the cycle")
    return [Omega() if j == 0 else Sum((Omega(), Fin(j))) for j in range(period)]


@dataclass
class EtaResult:
    term: Optional[Eta]
    confidence: str = "heuristic"
    oracle: str = ""
    family: Optional[NestedFamily] = None
    note: str = ""


def witness_density(sys: SystemDef, grid: SampleGrid, z, delta: float, budget: int) -> int:
    """Steps until the orbit of z is δ-dense in the grid, or -1."""
    uncovered = np.ones(len(grid), dtype=bool)
    cur = _row(sys, z)
    steps = 0
    while steps < budget:
        n = min(ORBIT_CHUNK, budget - steps)
        walk = orbit_array(sys, cur, n)[:, 0, :]
        idx = grid.snap_many(walk)
        near = rowwise(grid.coords[idx], walk, sys.metric) < delta
        uncovered[idx[near]] = False
        if uncovered.any():
            rest = np.flatnonzero(uncovered)
            d = pairwise(grid.coords[rest], walk, sys.metric).min(axis=1)
            uncovered[rest[d < delta]] = False
        steps += n
        cur = walk[-1:]
        if not uncovered.any():
            return steps
    return -1


def same_component(sys: SystemDef, x, y) -> bool:
    if sys.domain.kind in ("interval", "circle"):
        return True
    if sys.domain.kind == "union":
        def which(p):
            t = float(np.ravel(p)[0])
            return next(i for i, (lo, hi) in enumerate(sys.domain.intervals) if lo - 1e-12 <= t <= hi + 1e-12)
        return which(x) == which(y)
    return False


def detect_eta(sys: SystemDef, grid: SampleGrid, sched: RefinementSchedule, x, y,
               transitivity_witness: Optional[Sequence[float]] = None, budget: int = 100_000,
               seed: int = 0) -> EtaResult:
    """Eta from a dense witness orbit or from the identity theorem; otherwise nothing."""
    from . import recipes

    if sys.metadata.identity and sys.domain.kind != "plane":
        if not same_component(sys, x, y):
            return EtaResult(None, note="x and y lie in different components")
        fam = recipes.identity_enrichment(sys, sched, x, y, seed=seed)
        return EtaResult(Eta(), "oracle-grade", "identity", fam)

    if transitivity_witness is not None:
        steps = witness_density(sys, grid, transitivity_witness, sched.finest, budget)
        if steps < 0:
            return EtaResult(None, note=f"witness orbit not {sched.finest:.3g}-dense within {budget} steps")
        fam = recipes.transitive_splice(sys, sched, x, y, transitivity_witness)
        note = "" if fam is not None else "splicing recipe did not close at every level"
        return EtaResult(Eta(), "oracle-grade", "transitive-witness", fam, note)
    return EtaResult(None)


@dataclass
class NonwanderingReport:
    levels: List[bool] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.levels) and all(self.levels)


def zeta_nonwandering_check(sys: SystemDef, grid: SampleGrid, sched: RefinementSchedule, x, y,
                            budget: int = 2048) -> NonwanderingReport:
    """∃ z ∈ B_ε(x), k >= 1 with f^k(z) ∈ B_ε(y), at every schedule level."""
    xa, ya = _row(sys, x), _row(sys, y)
    report = NonwanderingReport()
    for eps in sched.epsilons:
        ball = grid.coords[pairwise(grid.coords, xa, sys.metric)[:, 0] < eps]
        z = np.vstack([xa, ball])
        found = -1
        for k in range(1, budget + 1):
            z = evaluate_many(sys, z)
            if (pairwise(z, ya, sys.metric)[:, 0] < eps).any():
                found = k
                break
        report.levels.append(found > 0)
        report.steps.append(found)
        if found < 0:
            break
    return report


def omega_limit(sys: SystemDef, x, epsilon: float, budget: int = 20_000) -> np.ndarray:
    """Tail clustering of the orbit of x: one representative per ε-cell of the last half."""
    walk = orbit_array(sys, _row(sys, x), budget)[budget // 2:, 0, :]
    cells = np.floor(walk / epsilon)
    _, first = np.unique(cells, axis=0, return_index=True)
    return walk[np.sort(first)]


def in_omega_limit(sys: SystemDef, x, y, epsilon: float, budget: int = 20_000) -> bool:
    tail = omega_limit(sys, x, epsilon, budget)
    return bool((pairwise(tail, _row(sys, y), sys.metric)[:, 0] < 2.0 * epsilon).any())
