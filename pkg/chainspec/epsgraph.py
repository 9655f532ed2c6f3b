"""
ε-transition graphs over a sample grid.

Edge i -> j iff d(f(p_i), p_j) < ε. Graphs are scipy CSR matrices; chain
search is a layered breadth-first search, components come from scipy's
strong-connectivity labelling and the Conley order is reachability
between components at every schedule level.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import ConleyOrderError, DomainError
from .geometry import FiniteSet, canonical_coords, pairwise, rowwise
from .systems import SampleGrid, SystemDef, evaluate_many

logger = logging.getLogger("chainspec.epsgraph")

ROW_BLOCK = 2048


# ── Schedules ─────────────────────────────────────────────────────
@dataclass(frozen=True)
class RefinementSchedule:
    epsilons: Tuple[float, ...]
    origin: str = "default"

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise DomainError("a refinement schedule needs at least one level")
        if any(e <= 0 for e in eps):
            raise DomainError("schedule levels must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("schedule levels must strictly decrease")
        object.__setattr__(self, "epsilons", eps)

    @classmethod
    def default(cls, diam: float, depth: int = 14) -> "RefinementSchedule":
        """ε_n = 4·diam/2ⁿ for n = 1..depth."""
        return cls(tuple(4.0 * diam / 2.0 ** n for n in range(1, depth + 1)), "default")

    @classmethod
    def user(cls, epsilons: Sequence[float]) -> "RefinementSchedule":
        return cls(tuple(epsilons), "user")

    def clamped(self, floor: float) -> "RefinementSchedule":
        """Keep only levels strictly above ``floor`` (at least the first level)."""
        kept = tuple(e for e in self.epsilons if e > floor) or self.epsilons[:1]
        return RefinementSchedule(kept, self.origin)

    def head(self, n: int) -> "RefinementSchedule":
        return RefinementSchedule(self.epsilons[:max(1, n)], self.origin)

    def __len__(self) -> int:
        return len(self.epsilons)

    def __getitem__(self, i: int) -> float:
        return self.epsilons[i]

    @property
    def finest(self) -> float:
        return self.epsilons[-1]


def schedule_for(grid: SampleGrid, depth: int = 14, explicit: Optional[Sequence[float]] = None) -> RefinementSchedule:
    """Schedule used for grid analyses: levels below the grid resolution are dropped."""
    sched = RefinementSchedule.user(explicit) if explicit else RefinementSchedule.default(grid.system.diam, depth)
    if not grid.system.compact:
        return sched
    return sched.clamped(grid.resolution * grid.metric.diameter_factor())


# ── Chains ────────────────────────────────────────────────────────
@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    slacks: Tuple[float, ...]
    offending: Tuple[int, ...]


class Chain:
    """Finite point sequence x_0..x_m (m >= 1) treated as an ε-chain of a system."""

    def __init__(self, system: SystemDef, epsilon: float, coords, indices: Optional[Sequence[int]] = None):
        arr = canonical_coords(coords, system.space_tag)
        if len(arr) < 2:
            raise DomainError("a chain needs at least two points")
        arr.setflags(write=False)
        self.system = system
        self.epsilon = float(epsilon)
        self.coords = arr
        self.indices = None if indices is None else tuple(int(i) for i in indices)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def m(self) -> int:
        return len(self.coords) - 1

    @property
    def x(self) -> Tuple[float, ...]:
        return tuple(self.coords[0])

    @property
    def y(self) -> Tuple[float, ...]:
        return tuple(self.coords[-1])

    def keys(self) -> List[Tuple[float, ...]]:
        return [tuple(row) for row in self.coords]

    def support(self) -> FiniteSet:
        return FiniteSet(np.unique(self.coords, axis=0), self.system.space_tag)

    def support_keys(self) -> set:
        return set(self.keys())

    def check(self, epsilon: Optional[float] = None, closed: bool = False) -> ChainCheck:
        return is_chain(self.system, self.coords, self.epsilon if epsilon is None else epsilon, closed)

    def max_slack(self) -> float:
        return max(self.check().slacks)

    def is_acyclic(self) -> bool:
        keys = self.keys()
        interior = keys[1:-1]
        ends = {keys[0], keys[-1]}
        return len(set(interior)) == len(interior) and not ends.intersection(interior)

    def __repr__(self) -> str:
        return f"Chain(m={self.m}, eps={self.epsilon:g})"


def is_chain(sys: SystemDef, seq, epsilon: float, closed: bool = False) -> ChainCheck:
    """Check d(f(x_i), x_{i+1}) < ε at every step and report each step's slack."""
    arr = canonical_coords(seq, sys.space_tag)
    if len(arr) < 2:
        raise DomainError("a chain needs at least two points")
    slacks = rowwise(evaluate_many(sys, arr[:-1]), arr[1:], sys.metric)
    good = slacks <= epsilon if closed else slacks < epsilon
    bad = tuple(int(i) for i in np.flatnonzero(~good))
    return ChainCheck(ok=not bad, slacks=tuple(float(s) for s in slacks), offending=bad)


def remove_cycles(c: Chain) -> Chain:
    """Cut the segment between the first repeated occurrence pair until none is left."""
    keys = c.keys()
    rows = list(range(len(keys)))
    while True:
        seen: Dict[Tuple[float, ...], int] = {}
        cut = None
        for pos, r in enumerate(rows):
            k = keys[r]
            if k in seen:
                first = seen[k]
                # a loop chain from x back to x keeps its closing endpoint
                if first == 0 and pos == len(rows) - 1:
                    continue
                cut = (first, pos)
                break
            seen[k] = pos
        if cut is None:
            break
        rows = rows[:cut[0] + 1] + rows[cut[1] + 1:]
    if len(rows) == len(keys):
        return c
    indices = None if c.indices is None else [c.indices[r] for r in rows]
    out = Chain(c.system, c.epsilon, c.coords[rows], indices)
    check = out.check()
    if not check.ok:
        raise AssertionError(f"cycle removal broke step(s) {check.offending}")
    return out


# ── Graphs ────────────────────────────────────────────────────────
class EpsilonGraph:
    def __init__(self, grid: SampleGrid, epsilon: float, closed: bool = False):
        if epsilon <= 0:
            raise DomainError("epsilon must be positive")
        self.grid = grid
        self.epsilon = float(epsilon)
        self.closed = closed
        self.adjacency = self._build()

    def _build(self) -> sparse.csr_matrix:
        n = len(self.grid)
        blocks = []
        for start in range(0, n, ROW_BLOCK):
            d = pairwise(self.grid.images[start:start + ROW_BLOCK], self.grid.coords, self.grid.metric)
            mask = d <= self.epsilon if self.closed else d < self.epsilon
            blocks.append(sparse.csr_matrix(mask))
        adj = sparse.vstack(blocks, format="csr") if len(blocks) > 1 else blocks[0]
        adj.sort_indices()
        return adj

    def __len__(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz)

    def successors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def edges(self) -> List[Tuple[int, int]]:
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k])) for k in order]

    def reachable_from(self, i: int) -> np.ndarray:
        """Boolean mask of vertices reachable in zero or more steps."""
        nodes = breadth_first_order(self.adjacency, i, directed=True, return_predecessors=False)
        mask = np.zeros(len(self), dtype=bool)
        mask[nodes] = True
        return mask


def build_graph(grid: SampleGrid, epsilon: float, closed: bool = False) -> EpsilonGraph:
    return EpsilonGraph(grid, epsilon, closed)


def _layered_bfs(adj: sparse.csr_matrix, source: int, targets: np.ndarray,
                 revisit_source: bool) -> Tuple[np.ndarray, int]:
    """Breadth-first search that prefers the smallest-index parent in each layer.

    Returns the predecessor array and the first target reached (-1 if none).
    The source is entered with distance 0 but is only counted as reached
    when a path of length >= 1 comes back to it and ``revisit_source`` is set.
    """
    n = adj.shape[0]
    pred = np.full(n, -1, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    if not revisit_source:
        visited[source] = True
    frontier = np.array([source], dtype=np.int64)
    while frontier.size:
        sub = adj[frontier].tocoo()
        rows = frontier[sub.row]
        cols = sub.col.astype(np.int64)
        fresh = ~visited[cols]
        rows, cols = rows[fresh], cols[fresh]
        if not cols.size:
            break
        order = np.lexsort((rows, cols))
        cols, rows = cols[order], rows[order]
        new, first = np.unique(cols, return_index=True)
        pred[new] = rows[first]
        visited[new] = True
        hit = new[targets[new]]
        if hit.size:
            return pred, int(hit[0])
        frontier = new
    return pred, -1


def _walk_back(pred: np.ndarray, source: int, target: int) -> List[int]:
    path = [target]
    cur = int(pred[target])
    while cur != source:
        path.append(cur)
        cur = int(pred[cur])
    path.append(source)
    return path[::-1]


def find_chain(g: EpsilonGraph, x: int, y: int) -> Optional[Chain]:
    """Shortest ε-chain from x to y with at least one step, or None."""
    targets = np.zeros(len(g), dtype=bool)
    targets[y] = True
    pred, hit = _layered_bfs(g.adjacency, x, targets, revisit_source=(x == y))
    if hit < 0:
        return None
    path = _walk_back(pred, x, y)
    return Chain(g.grid.system, g.epsilon, g.grid.coords[path], path)


def find_chain_to_set(g: EpsilonGraph, x: int, members: Sequence[int]) -> Optional[Chain]:
    targets = np.zeros(len(g), dtype=bool)
    targets[list(members)] = True
    pred, hit = _layered_bfs(g.adjacency, x, targets, revisit_source=True)
    if hit < 0:
        return None
    path = _walk_back(pred, x, hit)
    return Chain(g.grid.system, g.epsilon, g.grid.coords[path], path)


class GraphLadder:
    """Lazily built ε-graphs for every level of a schedule over one grid."""

    def __init__(self, grid: SampleGrid, sched: RefinementSchedule, closed: bool = False):
        self.grid = grid
        self.sched = sched
        self.closed = closed
        self._graphs: Dict[int, EpsilonGraph] = {}

    def __len__(self) -> int:
        return len(self.sched)

    def graph(self, level: int) -> EpsilonGraph:
        if level not in self._graphs:
            self._graphs[level] = EpsilonGraph(self.grid, self.sched[level], self.closed)
            logger.debug("built graph level %d (eps=%g, %d edges)", level,
                         self.sched[level], self._graphs[level].edge_count)
        return self._graphs[level]

    def graphs(self):
        for level in range(len(self.sched)):
            yield self.graph(level)


# ── Chain relation ────────────────────────────────────────────────
@dataclass
class ChainRelation:
    x: int
    y: int
    levels: List[bool]
    chains: List[Optional[Chain]]

    @property
    def verdict(self) -> bool:
        return all(self.levels)

    @property
    def first_failure(self) -> Optional[int]:
        for i, ok in enumerate(self.levels):
            if not ok:
                return i
        return None


def chain_related(ladder: GraphLadder, x: int, y: int, stop_early: bool = True) -> ChainRelation:
    levels, chains = [], []
    for g in ladder.graphs():
        c = find_chain(g, x, y)
        levels.append(c is not None)
        chains.append(c)
        if c is None and stop_early:
            break
    return ChainRelation(x, y, levels, chains)


# ── Components ────────────────────────────────────────────────────
@dataclass
class ChainComponentSet:
    components: List[np.ndarray]
    member_of: np.ndarray  # -1 for points outside every component

    def __len__(self) -> int:
        return len(self.components)

    def representative(self, k: int) -> int:
        return int(self.components[k][0])


def _labelled(labels: np.ndarray, recurrent: np.ndarray) -> ChainComponentSet:
    n = len(labels)
    member = np.full(n, -1, dtype=np.int64)
    comps: List[np.ndarray] = []
    if recurrent.any():
        idx = np.flatnonzero(recurrent)
        _, inverse = np.unique(labels[idx], axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        groups: Dict[int, List[int]] = {}
        for i, g in zip(idx, inverse):
            groups.setdefault(int(g), []).append(int(i))
        # components are labelled by their smallest member index
        for members in sorted(groups.values(), key=lambda m: m[0]):
            member[members] = len(comps)
            comps.append(np.asarray(members, dtype=np.int64))
    return ChainComponentSet(comps, member)


def _scc_labels(g: EpsilonGraph) -> Tuple[np.ndarray, np.ndarray]:
    _, labels = connected_components(g.adjacency, directed=True, connection="strong")
    sizes = np.bincount(labels)
    self_loop = g.adjacency.diagonal().astype(bool)
    recurrent = (sizes[labels] > 1) | self_loop
    return labels, recurrent


def scc(g: EpsilonGraph) -> ChainComponentSet:
    labels, recurrent = _scc_labels(g)
    return _labelled(labels.reshape(-1, 1), recurrent)


def chain_components(ladder: GraphLadder) -> ChainComponentSet:
    """Intersection of the per-level strong-component equivalences."""
    all_labels, recurrent = [], np.ones(len(ladder.grid), dtype=bool)
    for g in ladder.graphs():
        labels, rec = _scc_labels(g)
        all_labels.append(labels)
        recurrent &= rec
    return _labelled(np.column_stack(all_labels), recurrent)


# ── Conley order ──────────────────────────────────────────────────
@dataclass
class ConleyDiagram:
    nodes: List[int]
    order_pairs: set  # (K, K') means K <= K'
    certificates: Dict[Tuple[int, int], Chain] = field(default_factory=dict)
    representatives: Dict[int, Tuple[float, ...]] = field(default_factory=dict)

    def leq(self, k: int, k2: int) -> bool:
        return (k, k2) in self.order_pairs

    def is_total_on(self, nodes: Sequence[int]) -> bool:
        return all(self.leq(a, b) or self.leq(b, a) for a in nodes for b in nodes)


def conley_order(cc: ChainComponentSet, ladder: GraphLadder) -> ConleyDiagram:
    """K <= K' iff some point of K' chain-reaches some point of K at every level."""
    k = len(cc)
    rel = np.ones((k, k), dtype=bool)
    for g in ladder.graphs():
        for kp in range(k):
            reached = g.reachable_from(cc.representative(kp))
            hits = np.zeros(k, dtype=bool)
            owners = cc.member_of[reached]
            hits[np.unique(owners[owners >= 0])] = True
            rel[:, kp] &= hits
    np.fill_diagonal(rel, True)

    for a in range(k):
        for b in range(a + 1, k):
            if rel[a, b] and rel[b, a]:
                raise ConleyOrderError(
                    f"components {a} and {b} reach each other at every level; refine the schedule or grid",
                    (a, b),
                )
    closure = rel.copy()
    for m in range(k):
        closure |= closure[:, [m]] & closure[[m], :]
    if not np.array_equal(closure, rel):
        raise ConleyOrderError("approximate Conley order is not transitive", tuple(np.argwhere(closure & ~rel)[0]))

    finest = ladder.graph(len(ladder) - 1)
    pairs = {(int(a), int(b)) for a, b in zip(*np.nonzero(rel))}
    certs = {}
    for a, b in sorted(pairs):
        if a == b:
            continue
        cert = find_chain_to_set(finest, cc.representative(b), cc.components[a])
        if cert is None:
            raise AssertionError(f"no certificate chain from component {b} down to {a}")
        certs[(a, b)] = cert
    reps = {i: tuple(ladder.grid.coords[cc.representative(i)]) for i in range(k)}
    logger.info("Conley order: %d components, %d strict relations", k, len(certs))
    return ConleyDiagram(list(range(k)), pairs, certs, reps)
