"""
Nested chain families.

Hausdorff projection of a chain family onto its (approximate) limit,
the cycle-removal / re-projection pruning loop, first-occurrence orders
and the stabilized limit order with its certificate.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .epsgraph import Chain, RefinementSchedule, remove_cycles
from .errors import DomainError, ProjectionError, ScheduleExhaustedError
from .geometry import FiniteSet, hausdorff_distance, min_pairwise_gap, nearest_index, pairwise, rowwise
from .systems import SystemDef, evaluate_many

logger = logging.getLogger("chainspec.nesting")

Key = Tuple[float, ...]

SAFETY = 0.9
MODULUS_HALVINGS = 60
STALL_DELTA = 1e-15


# ── Types ─────────────────────────────────────────────────────────
@dataclass
class NestedFamily:
    chains: List[Chain]
    nesting_ok: List[bool]
    acyclic_ok: List[bool]
    collapses: List[int] = field(default_factory=list)
    limit_distances: List[float] = field(default_factory=list)

    @classmethod
    def from_chains(cls, chains: Sequence[Chain]) -> "NestedFamily":
        """Wrap an arbitrary chain sequence, recomputing the nesting and acyclicity flags."""
        chains = list(chains)
        if not chains:
            raise DomainError("a nested family needs at least one chain")
        x, y = chains[0].x, chains[0].y
        if any(c.x != x or c.y != y for c in chains):
            raise DomainError("chains of a family must share their endpoints")
        supports = [c.support_keys() for c in chains]
        nesting = [a <= b for a, b in zip(supports, supports[1:])]
        return cls(chains, nesting, [c.is_acyclic() for c in chains], [0] * len(chains))

    def __len__(self) -> int:
        return len(self.chains)

    @property
    def x(self) -> Key:
        return self.chains[0].x

    @property
    def y(self) -> Key:
        return self.chains[0].y

    @property
    def system(self) -> SystemDef:
        return self.chains[0].system

    @property
    def epsilons(self) -> List[float]:
        return [c.epsilon for c in self.chains]

    def interior_sizes(self) -> List[int]:
        ends = {self.x, self.y}
        return [len(c.support_keys() - ends) for c in self.chains]


@dataclass
class LimitSupport:
    points: FiniteSet
    hausdorff_residual: float

    def key_set(self) -> set:
        return self.points.key_set()


@dataclass
class FirstOccurrenceOrder:
    chain: Chain
    rank: Dict[Key, int]

    @property
    def sequence(self) -> List[Key]:
        return sorted(self.rank, key=self.rank.__getitem__)

    def before(self, a: Key, b: Key) -> bool:
        return self.rank[a] < self.rank[b]


@dataclass
class StabilizedOrder:
    keys: List[Key]
    support: Optional[FiniteSet]
    relation: np.ndarray  # +1: row before column, -1: after, 0: unstable
    window: int

    def __len__(self) -> int:
        return len(self.keys)

    def pair(self, a: Key, b: Key) -> str:
        i, j = self.keys.index(a), self.keys.index(b)
        return {1: "before", -1: "after", 0: "unstable"}[int(self.relation[i, j])]

    def unstable_pairs(self) -> List[Tuple[Key, Key]]:
        n = len(self.keys)
        iu, ju = np.triu_indices(n, k=1)
        bad = self.relation[iu, ju] == 0
        return [(self.keys[i], self.keys[j]) for i, j in zip(iu[bad], ju[bad])]

    @property
    def fully_decided(self) -> bool:
        return not self.unstable_pairs()

    def decided_sequence(self) -> List[Key]:
        """Points with no unstable pair, in their decided order."""
        n = len(self.keys)
        off = ~np.eye(n, dtype=bool)
        clean = ~((self.relation == 0) & off).any(axis=1)
        idx = np.flatnonzero(clean)
        sub = self.relation[np.ix_(idx, idx)]
        position = (sub == -1).sum(axis=1)
        return [self.keys[i] for i in idx[np.argsort(position, kind="stable")]]


@dataclass
class OrderingCertificate:
    nested: List[bool]
    acyclic: List[bool]
    order_compatible: bool
    violating_level: Optional[int] = None
    flipping_pair: Optional[Tuple[Key, Key]] = None

    @property
    def passed(self) -> bool:
        return all(self.nested) and all(self.acyclic) and self.order_compatible


@dataclass
class LimitCheck:
    distance: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.distance <= self.tol


@dataclass
class PruneResult:
    nested: Optional[NestedFamily]
    limit: Optional[LimitSupport]
    rounds: int
    converged: bool
    residuals: List[float]
    message: str = ""


# ── Continuity modulus ────────────────────────────────────────────
def uniform_modulus(sys: SystemDef, probe: np.ndarray, target: float) -> float:
    """Largest δ = target/2^j with d(u,v) < δ ⇒ d(f(u), f(v)) < target, up to a safety factor 2.

    Uses the analytic Lipschitz constant when the system ships one and
    otherwise probes pairs at distance δ around ``probe``.
    """
    if sys.lipschitz is not None:
        return target / max(sys.lipschitz, 1e-300)
    if sys.domain.kind in ("finite", "plane"):
        return 0.5 * min_pairwise_gap(sys.domain.points, sys.metric)
    fp = evaluate_many(sys, probe)
    delta = target
    for _ in range(MODULUS_HALVINGS):
        shifted = probe + 0.999 * delta
        if sys.domain.kind != "circle":
            shifted = np.where(sys.domain.contains(shifted)[:, None], shifted, probe - 0.999 * delta)
        ok = sys.domain.contains(shifted)
        disp = rowwise(fp[ok], evaluate_many(sys, shifted[ok]), sys.metric)
        if not disp.size or 2.0 * disp.max() < target:
            return delta
        delta /= 2.0
    return delta


# ── Projection ────────────────────────────────────────────────────
def _isolated(limit: np.ndarray, radius: float, metric) -> np.ndarray:
    if len(limit) < 2:
        return limit
    d = pairwise(limit, limit, metric)
    np.fill_diagonal(d, np.inf)
    return limit[d.min(axis=1) >= radius]


def _pick(family: Sequence[Chain], limit: np.ndarray, eps: float, delta: float, pick: str, metric) -> Optional[Chain]:
    order = range(len(family)) if pick == "coarsest" else range(len(family) - 1, -1, -1)
    for k in order:
        c = family[k]
        if c.max_slack() >= eps / 6.0:
            continue
        if hausdorff_distance(c.coords, limit, metric) < delta / 2.0:
            return c
    return None


def _project_step(S: np.ndarray, C: Chain, limit: np.ndarray, metric, level: int) -> Tuple[np.ndarray, int]:
    m_k = C.m
    slots = np.zeros(len(S), dtype=np.int64)
    slots[-1] = m_k
    if len(S) > 2:
        slots[1:-1] = nearest_index(C.coords, S[1:-1], metric)
    _, first, counts = np.unique(slots, return_index=True, return_counts=True)
    if (counts > 1).any():
        clash = np.flatnonzero(slots == slots[first[np.argmax(counts > 1)]])[:2]
        raise ProjectionError(
            f"level {level}: points {tuple(S[clash[0]])} and {tuple(S[clash[1]])} match the same chain point",
            level=level, pair=(int(clash[0]), int(clash[1])),
        )
    spliced = limit[nearest_index(limit, C.coords, metric)].copy()
    spliced[slots] = S
    # consecutive duplicates collapse; the remaining steps are unchanged
    keep = np.ones(len(spliced), dtype=bool)
    keep[1:] = (spliced[1:] != spliced[:-1]).any(axis=1)
    if keep.sum() < 2:
        keep[-1] = True
    return spliced[keep], int((~keep).sum())


def family_schedule(family: Sequence[Chain]) -> RefinementSchedule:
    """Output levels for a family: its own levels without the two deepest.

    Families whose levels do not strictly decrease (e.g. a constant family)
    get ε_1/2ⁿ from their first level.
    """
    eps = [c.epsilon for c in family]
    depth = max(1, len(family) - 2)
    if all(b < a for a, b in zip(eps, eps[1:])):
        return RefinementSchedule.user(eps).head(depth)
    return RefinementSchedule.user([eps[0] / 2.0 ** n for n in range(depth)])


def hausdorff_project(family: Sequence[Chain], sched: Optional[RefinementSchedule] = None,
                      pick: str = "coarsest") -> Tuple[NestedFamily, LimitSupport]:
    """Project a chain family onto the support of its deepest chain.

    Output chain n lives at level ``sched[n]``; by default the family's
    own levels minus the two deepest ones, which serve as projection
    targets for the last steps.
    """
    family = list(family)
    if not family:
        raise DomainError("cannot project an empty family")
    sys = family[0].system
    metric = sys.metric
    x, y = family[0].x, family[0].y
    for k, c in enumerate(family):
        if c.x != x or c.y != y:
            raise DomainError(f"chain {k} does not run from {x} to {y}")
        if not c.check().ok:
            raise DomainError(f"chain {k} is not an ε-chain at its level {c.epsilon:g}")
    if sched is None:
        sched = family_schedule(family)

    deepest = family[-1]
    limit = np.unique(deepest.coords, axis=0)
    residual = hausdorff_distance(deepest.coords, family[-2].coords, metric) if len(family) > 1 else 0.0
    if not sys.compact and residual >= sched.finest:
        # non-compact: the deepest chain is a limit only if the family approaches it
        d = pairwise(family[-2].coords, limit, metric).min(axis=1)
        stray = np.unique(family[-2].coords[d >= sched.finest], axis=0)
        raise ScheduleExhaustedError(
            f"family has no Hausdorff limit: the two deepest chains stay {residual:g} apart; "
            f"{len(stray)} chain point(s) are isolated away from the deepest chain",
            level=len(sched) - 1, epsilon=sched.finest, isolated=stray,
        )

    S = np.array([x, y], dtype=np.float64)
    first = Chain(sys, sched[0], S)
    if not first.check().ok:
        raise ProjectionError(f"(x, y) is not an ε-chain at the first level {sched[0]:g}", level=0)
    chains, collapses = [first], [0]

    for n in range(len(sched) - 1):
        eps = sched[n]
        delta = SAFETY * min(eps / 6.0, 0.5 * min_pairwise_gap(S, metric),
                             uniform_modulus(sys, limit, eps / 6.0))
        if delta < STALL_DELTA:
            raise ProjectionError(f"level {n}: δ collapsed to {delta:g} on near-duplicate points", level=n)
        C = _pick(family, limit, eps, delta, pick, metric)
        if C is None:
            raise ScheduleExhaustedError(
                f"no chain of the family qualifies at level {n} (ε={eps:g})",
                level=n, epsilon=eps, isolated=_isolated(limit, eps / 6.0, metric),
            )
        S, collapsed = _project_step(S, C, limit, metric, n)
        built = Chain(sys, sched[n + 1], S)
        check = built.check()
        if not check.ok:
            raise ProjectionError(f"level {n + 1}: projected chain breaks at step(s) {check.offending}", level=n + 1)
        if max(check.slacks) >= eps / 2.0:
            raise ProjectionError(f"level {n + 1}: projected chain exceeds ε_n/2", level=n + 1)
        chains.append(built)
        collapses.append(collapsed)

    nf = NestedFamily.from_chains(chains)
    nf.collapses = collapses
    nf.limit_distances = [hausdorff_distance(c.coords, limit, metric) for c in chains]
    if not all(nf.nesting_ok):
        raise AssertionError("projected supports are not nested")
    if any(b > a + 1e-12 for a, b in zip(nf.limit_distances, nf.limit_distances[1:])):
        raise AssertionError("projected supports moved away from the limit")
    logger.debug("projected %d chains into %d nested levels", len(family), len(chains))
    return nf, LimitSupport(FiniteSet(limit, sys.space_tag), residual)


def prune_loop(family: Sequence[Chain], sched: Optional[RefinementSchedule] = None, budget: int = 16,
               tol: float = 1e-9, overshoot: int = 3) -> PruneResult:
    """Alternate cycle removal and re-projection until the limit support stabilizes."""
    if budget < 1 or tol <= 0:
        raise DomainError("prune_loop needs budget >= 1 and tol > 0")
    family = list(family)
    if sched is None:
        sched = family_schedule(family)
    tail = family[-overshoot:]
    inputs = family
    nested, limit, residuals = None, None, []
    for r in range(budget):
        try:
            nf, ls = hausdorff_project(inputs, sched, pick="coarsest" if r == 0 else "finest")
        except ScheduleExhaustedError as exc:
            logger.warning("prune loop stopped in round %d: %s", r + 1, exc)
            return PruneResult(nested, limit, r, False, residuals, str(exc))

        clean_inputs = all(c.is_acyclic() for c in inputs)
        inside = all(c.support_keys() <= ls.key_set() for c in inputs)
        if r > 0 and clean_inputs and inside and not all(nf.acyclic_ok):
            raise AssertionError("projection onto a containing limit introduced a cycle")

        if limit is not None:
            residuals.append(hausdorff_distance(ls.points, limit.points, nf.system.metric))
        nested, limit = nf, ls
        if residuals and residuals[-1] < tol and all(nf.acyclic_ok):
            logger.info("prune loop converged after %d rounds", r + 1)
            return PruneResult(nested, limit, r + 1, True, residuals)
        if r == 0 and all(nf.acyclic_ok) and clean_inputs:
            return PruneResult(nested, limit, 1, True, residuals)
        inputs = [remove_cycles(c) for c in nf.chains] + [remove_cycles(c) for c in tail]
        tail = inputs[-overshoot:]
    return PruneResult(nested, limit, budget, False, residuals, "budget exhausted")


# ── Orders ────────────────────────────────────────────────────────
def first_occurrence_order(c: Chain) -> FirstOccurrenceOrder:
    rank: Dict[Key, int] = {}
    for i, k in enumerate(c.keys()[1:-1], start=1):
        rank.setdefault(k, i)
    return FirstOccurrenceOrder(c, rank)


def _support_keys(nf: NestedFamily) -> List[Key]:
    ends = {nf.x, nf.y}
    seen: Dict[Key, None] = {}
    for c in reversed(nf.chains):
        for k in first_occurrence_order(c).sequence:
            if k not in ends:
                seen.setdefault(k, None)
    return list(seen)


def _row_signs(ranks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    present = ~np.isnan(ranks)
    both = present[:, None] & present[None, :]
    filled = np.where(present, ranks, 0.0)
    signs = np.sign(filled[None, :] - filled[:, None]).astype(np.int8)  # [i, j] > 0: i before j
    signs[~both] = 0
    return signs, both


def stabilized_order(nf: NestedFamily, window: int = 3) -> StabilizedOrder:
    if window < 2:
        raise DomainError("the stabilization window must be at least 2")
    if len(nf) < window:
        raise DomainError(f"need at least {window} chains, have {len(nf)}")
    keys = _support_keys(nf)
    n = len(keys)
    index = {k: i for i, k in enumerate(keys)}
    ranks = np.full((len(nf), n), np.nan)
    for row, c in enumerate(nf.chains):
        for k, r in first_occurrence_order(c).rank.items():
            if k in index:
                ranks[row, index[k]] = r

    up = np.zeros((n, n), dtype=bool)
    down = np.zeros((n, n), dtype=bool)
    seen = np.zeros((n, n), dtype=bool)
    for row in range(len(nf) - window, len(nf)):
        signs, both = _row_signs(ranks[row])
        up |= signs > 0
        down |= signs < 0
        seen |= both
    relation = np.zeros((n, n), dtype=np.int8)
    relation[up & ~down] = 1
    relation[down & ~up] = -1

    # pairs never together in the window take their latest co-occurrence
    unseen = ~seen
    np.fill_diagonal(unseen, False)
    for row in range(len(nf) - window - 1, -1, -1):
        if not unseen.any():
            break
        signs, both = _row_signs(ranks[row])
        hit = unseen & both
        relation[hit] = signs[hit]
        unseen &= ~hit
    np.fill_diagonal(relation, 0)

    if n:
        _, labels = connected_components(csr_matrix(relation == 1), directed=True, connection="strong")
        cyclic = labels[:, None] == labels[None, :]
        sizes = np.bincount(labels)
        cyclic &= (sizes[labels] > 1)[:, None]
        relation[cyclic] = 0
    return StabilizedOrder(keys, FiniteSet(np.array(keys), nf.system.space_tag) if n else None, relation, window)


def verify_ordinately_nested(nf: NestedFamily, window: int = 3) -> OrderingCertificate:
    supports = [c.support_keys() for c in nf.chains]
    nested = [a <= b for a, b in zip(supports, supports[1:])]
    acyclic = [c.is_acyclic() for c in nf.chains]
    violating = next((i + 1 for i, ok in enumerate(nested) if not ok), None)
    if violating is None:
        violating = next((i for i, ok in enumerate(acyclic) if not ok), None)
    w = min(window, len(nf))
    if w < 2:
        return OrderingCertificate(nested, acyclic, True, violating)
    so = stabilized_order(NestedFamily.from_chains(nf.chains[-w:]), w)
    unstable = so.unstable_pairs()
    return OrderingCertificate(nested, acyclic, not unstable, violating, unstable[0] if unstable else None)


def limit_support_check(ls: LimitSupport, sys: SystemDef, x, y, tol: float) -> LimitCheck:
    """Measure d_H(f(L) ∪ {x}, L ∪ {f(y)})."""
    pts = ls.points.coords
    xa = np.asarray(x, dtype=np.float64).reshape(1, -1)
    ya = np.asarray(y, dtype=np.float64).reshape(1, -1)
    left = np.vstack([evaluate_many(sys, pts), xa])
    right = np.vstack([pts, evaluate_many(sys, ya)])
    return LimitCheck(hausdorff_distance(left, right, sys.metric) if len(left) else math.inf, tol)
