"""
Dynamical systems (X, f) and their finite samples.

A system carries a vectorized evaluator working on (n, dim) coordinate
arrays, its metric and diameter, and metadata the detectors rely on
(fixed points, periodic orbits, transitivity witnesses, fixed-point
ladders). The builtin zoo is a registry of factories so configs can
rebuild a zoo system with different numeric parameters.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .errors import CapacityError, ConfigError, DomainError
from .geometry import FiniteSet, MetricDescriptor, Point, canonical_coords, nearest_index, pairwise, rowwise

logger = logging.getLogger("chainspec.systems")

DOMAIN_TOL = 1e-12
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

MapFn = Callable[[np.ndarray], np.ndarray]


# ── Descriptors ───────────────────────────────────────────────────
@dataclass(frozen=True, eq=False)
class Domain:
    kind: str  # interval | union | circle | plane | finite
    intervals: Tuple[Tuple[float, float], ...] = ()
    points: Optional[np.ndarray] = None

    @property
    def space_tag(self) -> str:
        if self.kind == "finite":
            return "interval"
        return self.kind

    def contains(self, coords: np.ndarray) -> np.ndarray:
        x = np.asarray(coords, dtype=np.float64)
        if self.kind == "circle":
            return np.ones(len(x), dtype=bool)
        if self.kind in ("interval", "union"):
            inside = np.zeros(len(x), dtype=bool)
            for lo, hi in self.intervals:
                inside |= (x[:, 0] >= lo - DOMAIN_TOL) & (x[:, 0] <= hi + DOMAIN_TOL)
            return inside
        d = pairwise(x, self.points, MetricDescriptor(kind="max-product"))
        return d.min(axis=1) <= DOMAIN_TOL

    def describe(self) -> str:
        if self.kind in ("interval", "union"):
            return " ∪ ".join(f"[{lo:g},{hi:g}]" for lo, hi in self.intervals)
        if self.kind == "circle":
            return "circle R/Z"
        return f"{self.kind} ({len(self.points)} points)"


@dataclass(frozen=True)
class PeriodicOrbit:
    points: Tuple[float, ...]
    attracting: bool

    @property
    def period(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SystemMetadata:
    fixed_points: Tuple[float, ...] = ()
    periodic_orbits: Tuple[PeriodicOrbit, ...] = ()
    transitivity_witness: Optional[Tuple[float, ...]] = None
    identity: bool = False
    # descending fixed points of a monotone interval map, accumulation point last
    ladder: Tuple[float, ...] = ()
    wandering_intervals: Tuple[Tuple[float, float], ...] = ()
    remainder_points: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class SystemDef:
    name: str
    domain: Domain
    metric: MetricDescriptor
    map_eval: MapFn
    diam: float
    lipschitz: Optional[float] = None
    compact: bool = True
    injective: bool = True
    inverse_eval: Optional[MapFn] = None
    metadata: SystemMetadata = field(default_factory=SystemMetadata)
    params: Dict[str, float] = field(default_factory=dict)
    checks: Tuple[Callable[["SystemDef"], List[str]], ...] = ()
    description: str = ""

    @property
    def space_tag(self) -> str:
        return self.domain.space_tag

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        return evaluate_many(self, coords)

    @classmethod
    def from_table(cls, name: str, points: Sequence[float], images: Sequence[float]) -> "SystemDef":
        """Finite toy system given by an explicit lookup table on the line."""
        pts = np.asarray(points, dtype=np.float64)
        imgs = np.asarray(images, dtype=np.float64)
        if pts.shape != imgs.shape:
            raise DomainError("table points and images differ in length")
        order = np.argsort(pts)
        keys, values = pts[order], imgs[order]

        def lookup(x: np.ndarray) -> np.ndarray:
            pos = np.clip(np.searchsorted(keys, x[:, 0]), 0, len(keys) - 1)
            if not np.array_equal(keys[pos], x[:, 0]):
                raise DomainError("point outside the finite table")
            return values[pos].reshape(-1, 1)

        span = float(pts.max() - pts.min()) if len(pts) > 1 else 1.0
        return cls(
            name=name,
            domain=Domain("finite", points=pts.reshape(-1, 1)),
            metric=MetricDescriptor(kind="euclidean-on-interval"),
            map_eval=lookup,
            diam=span if span > 0 else 1.0,
            injective=len(set(imgs.tolist())) == len(imgs),
            description="finite lookup table",
        )

    def with_metric(self, metric: MetricDescriptor) -> "SystemDef":
        """Same map under an equivalent metric; the diameter bound is rescaled."""
        metric.require(self.space_tag)
        lip = self.lipschitz
        if lip is not None and metric.warp > 0:
            lip = lip * (1 + metric.warp) / (1 - metric.warp)
        return SystemDef(
            name=self.name, domain=self.domain, metric=metric, map_eval=self.map_eval,
            diam=self.diam * metric.diameter_factor(), lipschitz=lip, compact=self.compact,
            injective=self.injective, inverse_eval=self.inverse_eval, metadata=self.metadata,
            params=dict(self.params), checks=self.checks, description=self.description,
        )


@dataclass(frozen=True)
class OrbitSegment:
    start: Point
    length: int
    points: Tuple[Point, ...]


def _line_dist(a: np.ndarray, b: np.ndarray, metric: MetricDescriptor) -> np.ndarray:
    """Elementwise distance between two arrays of 1-D coordinates."""
    return rowwise(np.asarray(a, dtype=np.float64).reshape(-1, 1),
                   np.asarray(b, dtype=np.float64).reshape(-1, 1), metric)


class SampleGrid:
    """Finite sample of a system with precomputed images."""

    def __init__(self, system: SystemDef, coords: np.ndarray, resolution: float,
                 component: Optional[np.ndarray] = None):
        self.system = system
        self.points = FiniteSet(coords, system.space_tag)
        images = canonical_coords(system.map_eval(self.points.coords), system.space_tag)
        images.setflags(write=False)
        self.images = images
        self.resolution = float(resolution)
        comp = np.zeros(len(self.points), dtype=np.int64) if component is None else np.asarray(component)
        comp.setflags(write=False)
        self.component = comp
        self._line: Optional[bool] = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def coords(self) -> np.ndarray:
        return self.points.coords

    @property
    def metric(self) -> MetricDescriptor:
        return self.system.metric

    def snap(self, p) -> Tuple[int, float]:
        """Nearest grid index to a point and the snap distance."""
        q = p.array if isinstance(p, Point) else canonical_coords(p, self.system.space_tag)[0]
        q = canonical_coords(q, self.system.space_tag)
        idx = int(nearest_index(self.coords, q, self.metric)[0])
        dist = float(pairwise(self.coords[idx:idx + 1], q, self.metric)[0, 0])
        return idx, dist

    def snap_many(self, coords: np.ndarray) -> np.ndarray:
        q = canonical_coords(coords, self.system.space_tag)
        if not self._sorted_line:
            return nearest_index(self.coords, q, self.metric)
        grid = self.coords[:, 0]
        t = q[:, 0]
        hi = np.clip(np.searchsorted(grid, t), 0, len(grid) - 1)
        lo = np.clip(hi - 1, 0, len(grid) - 1)
        d_lo = _line_dist(grid[lo], t, self.metric)
        d_hi = _line_dist(grid[hi], t, self.metric)
        best = np.where(d_hi < d_lo, hi, lo)
        if self.system.space_tag == "circle":
            # the point just below 1 may sit closest to grid point 0
            d_best = np.minimum(d_lo, d_hi)
            d_zero = _line_dist(np.full_like(t, grid[0]), t, self.metric)
            best = np.where(d_zero <= d_best, 0, best)
        return best

    @property
    def _sorted_line(self) -> bool:
        if self._line is None:
            self._line = (self.coords.shape[1] == 1 and self.metric.warp == 0.0 and len(self) > 1
                          and bool((np.diff(self.coords[:, 0]) > 0).all()))
        return self._line

    def point(self, i: int) -> Point:
        return Point(tuple(self.coords[i]), self.system.space_tag)

    def restrict(self, indices: Sequence[int]) -> "SampleGrid":
        """Subsystem grid on a subset of sample points, e.g. one chain component."""
        idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.int64)
        if idx.size == 0:
            raise DomainError("cannot restrict a grid to an empty index set")
        return SampleGrid(self.system, self.coords[idx], self.resolution, self.component[idx])


def restrict_grid(grid: SampleGrid, indices: Sequence[int]) -> SampleGrid:
    return grid.restrict(indices)


# ── Evaluation ────────────────────────────────────────────────────
def evaluate_many(sys: SystemDef, coords) -> np.ndarray:
    x = canonical_coords(coords, sys.space_tag)
    inside = sys.domain.contains(x)
    if not inside.all():
        bad = x[~inside][0]
        raise DomainError(f"{sys.name}: point {tuple(bad)} lies outside {sys.domain.describe()}")
    return canonical_coords(sys.map_eval(x), sys.space_tag)


def evaluate(sys: SystemDef, p: Point) -> Point:
    if p.space_tag != sys.space_tag:
        raise DomainError(f"{sys.name} lives on {sys.space_tag}, got a {p.space_tag} point")
    return Point(tuple(evaluate_many(sys, p.array[None, :])[0]), sys.space_tag)


def orbit_array(sys: SystemDef, coords, n: int) -> np.ndarray:
    """Array of shape (n+1, m, dim): f^k applied to every start row."""
    if n < 0:
        raise DomainError("orbit length must be non-negative")
    x = canonical_coords(coords, sys.space_tag)
    out = np.empty((n + 1,) + x.shape)
    out[0] = x
    for k in range(n):
        out[k + 1] = evaluate_many(sys, out[k])
    return out


def orbit(sys: SystemDef, p: Point, n: int) -> OrbitSegment:
    arr = orbit_array(sys, p.array[None, :], n)[:, 0, :]
    pts = tuple(Point(tuple(row), sys.space_tag) for row in arr)
    return OrbitSegment(start=pts[0], length=n, points=pts)


def inverse_many(sys: SystemDef, coords) -> np.ndarray:
    if sys.inverse_eval is None:
        raise DomainError(f"{sys.name} has no inverse evaluator")
    return canonical_coords(sys.inverse_eval(canonical_coords(coords, sys.space_tag)), sys.space_tag)


# ── Sampling ──────────────────────────────────────────────────────
def _interval_grid(lo: float, hi: float, resolution: float) -> np.ndarray:
    n = max(1, int(math.ceil((hi - lo) / resolution - 1e-9)))
    return lo + (hi - lo) * (np.arange(n + 1) / n)


def sample(sys: SystemDef, target_resolution: float, point_budget: int = 200_000) -> SampleGrid:
    if not target_resolution > 0:
        raise DomainError("target resolution must be positive")
    kind = sys.domain.kind
    if kind in ("interval", "union"):
        pieces = [_interval_grid(lo, hi, target_resolution) for lo, hi in sys.domain.intervals]
        count = sum(len(p) for p in pieces)
        if count > point_budget:
            raise CapacityError(f"{count} sample points exceed the budget of {point_budget}")
        coords = np.concatenate(pieces).reshape(-1, 1)
        component = np.concatenate([np.full(len(p), i) for i, p in enumerate(pieces)])
        resolution = max((hi - lo) / (len(p) - 1) for (lo, hi), p in zip(sys.domain.intervals, pieces))
    elif kind == "circle":
        n = max(1, int(math.ceil(1.0 / target_resolution - 1e-9)))
        if n > point_budget:
            raise CapacityError(f"{n} sample points exceed the budget of {point_budget}")
        coords = (np.arange(n) / n).reshape(-1, 1)
        component = None
        resolution = 1.0 / n
    else:
        coords = sys.domain.points
        if len(coords) > point_budget:
            raise CapacityError(f"{len(coords)} sample points exceed the budget of {point_budget}")
        component = None
        resolution = target_resolution
    grid = SampleGrid(sys, coords, resolution, component)
    logger.debug("sampled %s: %d points at resolution %g", sys.name, len(grid), grid.resolution)
    return grid


# ── Zoo maps ──────────────────────────────────────────────────────
def _floor_power(x: np.ndarray) -> np.ndarray:
    """2^floor(log2 x) computed exactly through frexp; 0 maps to 0."""
    mant, expo = np.frexp(x)
    return np.where(x > 0, np.ldexp(0.5, expo), 0.0)


def _cascade(x: np.ndarray) -> np.ndarray:
    p = _floor_power(x)
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, (x - p) ** 2 / safe + p, 0.0)


def _cascade_inverse(v: np.ndarray) -> np.ndarray:
    p = _floor_power(v)
    return np.where(p > 0, p + np.sqrt(np.maximum(p * (v - p), 0.0)), 0.0)


def _check_fixed_points(sys: SystemDef) -> List[str]:
    pts = np.asarray(sys.metadata.fixed_points, dtype=np.float64).reshape(-1, 1)
    if not len(pts):
        return []
    moved = np.abs(sys.map_eval(pts) - pts)[:, 0]
    return [f"claimed fixed point {p[0]!r} moves by {m:g}" for p, m in zip(pts, moved) if m > 1e-12]


def _check_periodic_orbits(sys: SystemDef) -> List[str]:
    failures = []
    for orb in sys.metadata.periodic_orbits:
        start = np.array([[orb.points[0]]])
        walk = orbit_array(sys, start, orb.period)[:, 0, :]
        d = pairwise(walk[1:], start, sys.metric)[:, 0]
        if d[-1] > 1e-12:
            failures.append(f"orbit through {orb.points[0]!r} does not close after {orb.period} steps")
        if orb.period > 1 and (d[:-1] <= 1e-12).any():
            failures.append(f"orbit through {orb.points[0]!r} has a shorter period")
    return failures


def _check_maps_into_domain(sys: SystemDef) -> List[str]:
    if sys.domain.kind == "finite" or sys.domain.kind == "plane":
        probe = sys.domain.points
    else:
        probe = sample(sys, 0.01).coords
    images = sys.map_eval(probe)
    if not sys.domain.contains(canonical_coords(images, sys.space_tag)).all():
        return ["evaluator leaves the domain"]
    if not np.array_equal(images, sys.map_eval(probe)):
        return ["evaluator is not deterministic"]
    return []


def _check_cascade_descent(sys: SystemDef) -> List[str]:
    # cascade half only; the left branch of two-interval is a single arc
    x = np.linspace(0.0, 1.0, 4097)[1:].reshape(-1, 1)
    fx = _cascade(x)
    fixed = _floor_power(x) == x
    if (fx[~fixed] >= x[~fixed]).any():
        return ["cascade branch fails to descend"]
    return []


def identity_interval() -> SystemDef:
    return SystemDef(
        name="identity-interval",
        domain=Domain("interval", ((0.0, 1.0),)),
        metric=MetricDescriptor(kind="euclidean-on-interval"),
        map_eval=lambda x: x.copy(),
        inverse_eval=lambda x: x.copy(),
        diam=1.0,
        lipschitz=1.0,
        metadata=SystemMetadata(identity=True),
        description="f(x) = x on [0,1]",
    )


def identity_two_intervals(gap_start: float = 2.0) -> SystemDef:
    return SystemDef(
        name="identity-two-intervals",
        domain=Domain("union", ((0.0, 1.0), (gap_start, gap_start + 1.0))),
        metric=MetricDescriptor(kind="euclidean-on-interval"),
        map_eval=lambda x: x.copy(),
        inverse_eval=lambda x: x.copy(),
        diam=gap_start + 1.0,
        lipschitz=1.0,
        metadata=SystemMetadata(identity=True),
        params={"gap_start": gap_start},
        description="f(x) = x on two disjoint intervals",
    )


def cascade(depth: int = 20) -> SystemDef:
    ladder = tuple(2.0 ** -n for n in range(depth + 1)) + (0.0,)
    return SystemDef(
        name="cascade",
        domain=Domain("interval", ((0.0, 1.0),)),
        metric=MetricDescriptor(kind="euclidean-on-interval"),
        map_eval=_cascade,
        inverse_eval=_cascade_inverse,
        diam=1.0,
        lipschitz=2.0,
        metadata=SystemMetadata(fixed_points=ladder, ladder=ladder),
        params={"depth": depth},
        checks=(_check_cascade_descent,),
        description="f(x) = (x-p)^2/p + p with p = 2^floor(log2 x), f(0) = 0",
    )


def two_interval(depth: int = 20) -> SystemDef:
    def step(x):
        return np.where(x >= 0, _cascade(np.abs(x)), (x + 1.0) ** 2 - 1.0)

    def back(v):
        return np.where(v >= 0, _cascade_inverse(np.abs(v)), np.sqrt(np.maximum(v + 1.0, 0.0)) - 1.0)

    ladder = tuple(2.0 ** -n for n in range(depth + 1)) + (0.0, -1.0)
    return SystemDef(
        name="two-interval",
        domain=Domain("interval", ((-1.0, 1.0),)),
        metric=MetricDescriptor(kind="euclidean-on-interval"),
        map_eval=step,
        inverse_eval=back,
        diam=2.0,
        lipschitz=2.0,
        metadata=SystemMetadata(fixed_points=ladder, ladder=ladder),
        params={"depth": depth},
        checks=(_check_cascade_descent,),
        description="cascade on [0,1], (x+1)^2 - 1 on [-1,0]",
    )


def halving() -> SystemDef:
    return SystemDef(
        name="halving",
        domain=Domain("interval", ((0.0, 1.0),)),
        metric=MetricDescriptor(kind="euclidean-on-interval"),
        map_eval=lambda x: x / 2.0,
        diam=1.0,
        lipschitz=0.5,
        metadata=SystemMetadata(fixed_points=(0.0,)),
        description="f(x) = x/2",
    )


def bistable_interval(a: float = 0.5) -> SystemDef:
    if not 0 < a < 1:
        raise ConfigError("bistable-interval needs 0 < a < 1")
    return SystemDef(
        name="bistable-interval",
        domain=Domain("interval", ((0.0, 1.0),)),
        metric=MetricDescriptor(kind="euclidean-on-interval"),
        map_eval=lambda x: x - a / (2 * np.pi) * np.sin(2 * np.pi * x),
        diam=1.0,
        lipschitz=1.0 + a,
        metadata=SystemMetadata(fixed_points=(0.0, 0.5, 1.0)),
        params={"a": a},
        description="attracting fixed points 0 and 1 separated by a repeller at 1/2",
    )


def rotation(name: str, alpha: float, witness: bool) -> SystemDef:
    return SystemDef(
        name=name,
        domain=Domain("circle"),
        metric=MetricDescriptor(kind="arc-length-on-circle"),
        map_eval=lambda x: np.mod(x + alpha, 1.0),
        inverse_eval=lambda x: np.mod(x - alpha, 1.0),
        diam=0.5,
        lipschitz=1.0,
        metadata=SystemMetadata(transitivity_witness=(0.0,) if witness else None),
        params={"alpha": alpha},
        checks=(_check_no_periodic_sample,) if witness else (),
        description=f"rigid rotation by {alpha:g}",
    )


def _check_no_periodic_sample(sys: SystemDef, steps: int = 10_000) -> List[str]:
    start = sample(sys, 0.01).coords
    x = start.copy()
    for _ in range(steps):
        x = np.mod(sys.map_eval(x), 1.0)
        if (x == start).any():
            return ["a sample point returned exactly to itself"]
    return []


def _circle_warp(b: float):
    def h(t):
        return np.mod(t + b / (2 * np.pi) * np.sin(2 * np.pi * t), 1.0)

    def h_inv(v):
        if v.size == 0:
            return v.copy()
        t = optimize.newton(lambda s: s + b / (2 * np.pi) * np.sin(2 * np.pi * s) - v, v.copy(),
                            fprime=lambda s: 1.0 + b * np.cos(2 * np.pi * s), tol=1e-14, maxiter=60)
        return np.mod(t, 1.0)

    return h, h_inv


def conjugate(sys: SystemDef, name: str, h: MapFn, h_inv: MapFn, distortion: float) -> SystemDef:
    """The system h∘f∘h⁻¹ for a homeomorphism h of the same space."""
    meta = sys.metadata
    witness = meta.transitivity_witness
    if witness is not None:
        witness = tuple(h(np.array([witness]))[0])
    inverse = None
    if sys.inverse_eval is not None:
        inverse = lambda v: h(sys.inverse_eval(h_inv(v)))  # noqa: E731
    return SystemDef(
        name=name,
        domain=sys.domain,
        metric=sys.metric,
        map_eval=lambda v: h(sys.map_eval(h_inv(v))),
        inverse_eval=inverse,
        diam=sys.diam,
        lipschitz=None if sys.lipschitz is None else sys.lipschitz * distortion,
        compact=sys.compact,
        metadata=SystemMetadata(
            fixed_points=tuple(float(v) for v in h(np.array(meta.fixed_points).reshape(-1, 1)).ravel()),
            transitivity_witness=witness,
        ),
        params=dict(sys.params),
        description=f"conjugate of {sys.name}",
    )


def rotation_golden_conjugate(b: float = 0.3) -> SystemDef:
    h, h_inv = _circle_warp(b)
    return conjugate(rotation("rotation-golden", GOLDEN, True), "rotation-golden-conjugate",
                     h, h_inv, (1 + b) / (1 - b))


def attracting_periodic(K: int, a: float = 0.5) -> SystemDef:
    if not 0 < a < 1:
        raise ConfigError("attracting-periodic needs 0 < a < 1")

    c = a / (2 * np.pi * K)

    def step(x):
        return np.mod(x + c * np.sin(2 * np.pi * K * x) + 1.0 / K, 1.0)

    def back(v):
        w = v - 1.0 / K
        t = w.copy()
        for _ in range(60):
            t = t - (t + c * np.sin(2 * np.pi * K * t) - w) / (1.0 + a * np.cos(2 * np.pi * K * t))
        return np.mod(t, 1.0)

    attracting = tuple((2 * j + 1) / (2 * K) for j in range(K))
    repelling = tuple(j / K for j in range(K))
    # attracting orbit listed in dynamical order, starting at 1/(2K)
    return SystemDef(
        name=f"attracting-periodic-K{K}",
        domain=Domain("circle"),
        metric=MetricDescriptor(kind="arc-length-on-circle"),
        map_eval=step,
        inverse_eval=back,
        diam=0.5,
        lipschitz=1.0 + a,
        metadata=SystemMetadata(
            fixed_points=attracting + repelling if K == 1 else (),
            periodic_orbits=(PeriodicOrbit(attracting, True), PeriodicOrbit(repelling, False)),
        ),
        params={"K": K, "a": a},
        description=f"circle map with an attracting and a repelling orbit of period {K}",
    )


class DenjoyBlowup:
    """Golden rotation with the orbit points |n| <= N blown up into intervals."""

    def __init__(self, truncation: int = 8, blown_length: float = 0.5, alpha: float = GOLDEN):
        if truncation < 1 or not 0 < blown_length < 1:
            raise ConfigError("denjoy needs truncation >= 1 and 0 < blown_length < 1")
        self.N = truncation
        self.s = blown_length
        self.alpha = alpha
        ns = np.arange(-truncation, truncation + 1)
        weights = 1.0 / (1.0 + ns.astype(np.float64) ** 2)
        self.n = ns
        self.lengths = blown_length * weights / weights.sum()
        self.orbit = np.mod(ns * alpha, 1.0)
        order = np.argsort(self.orbit)
        self._sorted_orbit = self.orbit[order]
        self._sorted_lengths = self.lengths[order]
        self._cum = np.concatenate([[0.0], np.cumsum(self._sorted_lengths)])
        self.starts = self.h(self.orbit)
        self._sorted_starts = self.starts[order]
        self._sorted_n = ns[order]

    def h(self, phi: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self._sorted_orbit, phi, side="left")
        return (1.0 - self.s) * phi + self._cum[k]

    def interval(self, n: int) -> Tuple[float, float]:
        i = n + self.N
        return float(self.starts[i]), float(self.starts[i] + self.lengths[i])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        t = x[:, 0]
        pos = np.searchsorted(self._sorted_starts, t, side="right") - 1
        safe = np.clip(pos, 0, len(self._sorted_starts) - 1)
        inside = (pos >= 0) & (t <= self._sorted_starts[safe] + self._sorted_lengths[safe])
        out = np.empty_like(t)

        if inside.any():
            n = self._sorted_n[safe[inside]]
            i = n + self.N
            frac = (t[inside] - self.starts[i]) / self.lengths[i]
            nxt = np.minimum(i + 1, len(self.starts) - 1)
            mapped = self.starts[nxt] + frac * self.lengths[nxt]
            collapsed = self.h(np.array([np.mod((self.N + 1) * self.alpha, 1.0)]))[0]
            out[inside] = np.where(n < self.N, mapped, collapsed)

        rest = ~inside
        if rest.any():
            before = np.where(pos[rest] >= 0, self._cum[pos[rest] + 1], 0.0)
            phi = (t[rest] - before) / (1.0 - self.s)
            out[rest] = self.h(np.mod(phi + self.alpha, 1.0))
        return np.mod(out, 1.0).reshape(-1, 1)

    def self_test(self, sys: SystemDef) -> List[str]:
        failures = []
        ends = self._sorted_starts + self._sorted_lengths
        if (ends[:-1] > self._sorted_starts[1:]).any() or ends[-1] > 1.0:
            failures.append("blown-up intervals overlap")
        for n in range(-self.N, self.N):
            lo, hi = self.interval(n)
            nlo, nhi = self.interval(n + 1)
            img = self(np.array([[lo], [hi]]))[:, 0]
            if abs(img[0] - nlo) > 1e-12 or abs(img[1] - nhi) > 1e-12:
                failures.append(f"I_{n} is not mapped onto I_{n + 1}")
        return failures


def denjoy(truncation: int = 8, blown_length: float = 0.5) -> SystemDef:
    blow = DenjoyBlowup(truncation, blown_length)
    remainder = tuple(float(v) for v in blow.h(np.array([0.3, 0.6, 0.9])))
    return SystemDef(
        name="denjoy",
        domain=Domain("circle"),
        metric=MetricDescriptor(kind="arc-length-on-circle"),
        map_eval=blow,
        diam=0.5,
        lipschitz=None,
        metadata=SystemMetadata(
            wandering_intervals=tuple(blow.interval(n) for n in range(-truncation, truncation + 1)),
            remainder_points=remainder,
        ),
        params={"truncation": truncation, "blown_length": blown_length},
        checks=(blow.self_test,),
        description="Denjoy blow-up of the golden rotation with wandering intervals",
    )


def comb(k_max: int = 12, line_steps: int = 50) -> SystemDef:
    """Two half-lines joined by columns z^k_h = (k, h/(k+1)), truncated at k_max."""
    t = np.arange(k_max * line_steps + 1) / line_steps
    lower = np.column_stack([t, np.zeros_like(t)])
    upper = np.column_stack([t, np.ones_like(t)])
    columns = np.array([(k, h / (k + 1)) for k in range(1, k_max + 1) for h in range(1, k + 1)])
    pts = np.vstack([lower, upper, columns])
    return SystemDef(
        name="comb",
        domain=Domain("plane", points=pts),
        metric=MetricDescriptor(kind="euclidean-in-plane"),
        map_eval=lambda x: x.copy(),
        diam=float(math.hypot(k_max, 1.0)),
        lipschitz=1.0,
        compact=False,
        metadata=SystemMetadata(identity=True),
        params={"k_max": k_max, "line_steps": line_steps},
        description="non-compact comb with the identity map",
    )


ZOO: Dict[str, Callable[..., SystemDef]] = {
    "identity-interval": identity_interval,
    "identity-two-intervals": identity_two_intervals,
    "cascade": cascade,
    "two-interval": two_interval,
    "halving": halving,
    "bistable-interval": bistable_interval,
    "rotation-quarter": lambda: rotation("rotation-quarter", 0.25, False),
    "rotation-eighth": lambda: rotation("rotation-eighth", 0.125, False),
    "rotation-golden": lambda: rotation("rotation-golden", GOLDEN, True),
    "rotation-golden-conjugate": rotation_golden_conjugate,
    "attracting-periodic-K1": lambda a=0.5: attracting_periodic(1, a),
    "attracting-periodic-K2": lambda a=0.5: attracting_periodic(2, a),
    "attracting-periodic-K3": lambda a=0.5: attracting_periodic(3, a),
    "denjoy": denjoy,
    "comb": comb,
}


def make_system(name: str, **params) -> SystemDef:
    """Build a zoo system by name, optionally with numeric parameter overrides."""
    try:
        factory = ZOO[name]
    except KeyError:
        raise ConfigError(f"unknown system {name!r}; known: {', '.join(sorted(ZOO))}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None


def self_test(sys: SystemDef) -> List[str]:
    """Run the generic and system-specific checks; an empty list means pass."""
    failures = _check_maps_into_domain(sys) + _check_fixed_points(sys) + _check_periodic_orbits(sys)
    for check in sys.checks:
        failures.extend(check(sys))
    return failures


def builtin_zoo() -> List[SystemDef]:
    systems = [factory() for factory in ZOO.values()]
    for sys in systems:
        failures = self_test(sys)
        if failures:
            raise AssertionError(f"zoo system {sys.name} fails its self-test: {failures}")
    return systems
