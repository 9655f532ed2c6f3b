"""
Points, metrics and Hausdorff distance between finite sets.

Everything here works on numpy coordinate arrays of shape (n, dim); the
Point and FiniteSet wrappers only add the space tag and canonical form.
"""

import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial.distance import cdist

from .errors import DomainError

# ── Spaces ────────────────────────────────────────────────────────
SPACE_DIMS = {
    "interval": 1,
    "circle": 1,
    "union": 1,
    "plane": 2,
    "product": 2,
}

METRIC_SPACES = {
    "euclidean-on-interval": ("interval", "union"),
    "arc-length-on-circle": ("circle",),
    "euclidean-in-plane": ("plane",),
    "max-product": ("product", "plane"),
}


def canonical_coords(coords: np.ndarray, space_tag: str) -> np.ndarray:
    """Return a float64 (n, dim) copy in canonical form for the space."""
    if space_tag not in SPACE_DIMS:
        raise DomainError(f"unknown space tag {space_tag!r}")
    arr = np.array(coords, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, SPACE_DIMS[space_tag])
    if arr.ndim != 2 or arr.shape[1] != SPACE_DIMS[space_tag]:
        raise DomainError(
            f"coordinates of shape {arr.shape} do not fit space {space_tag!r}"
        )
    if space_tag == "circle":
        arr = np.mod(arr, 1.0)
        # mod can round tiny negatives up to exactly 1.0
        arr[arr >= 1.0] = 0.0
    return arr


@dataclass(frozen=True)
class Point:
    coords: Tuple[float, ...]
    space_tag: str

    def __post_init__(self):
        canon = canonical_coords(np.asarray(self.coords, dtype=np.float64), self.space_tag)
        object.__setattr__(self, "coords", tuple(float(c) for c in canon[0]))

    @classmethod
    def of(cls, value, space_tag: str = "interval") -> "Point":
        if isinstance(value, (int, float)):
            value = (float(value),)
        return cls(tuple(value), space_tag)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)

    def __str__(self) -> str:
        return ";".join(repr(c) for c in self.coords) if len(self.coords) > 1 else repr(self.coords[0])


class FiniteSet:
    """Immutable finite point set; duplicates are allowed but flagged."""

    def __init__(self, coords, space_tag: str):
        arr = canonical_coords(coords, space_tag)
        arr.setflags(write=False)
        self.coords = arr
        self.space_tag = space_tag

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __iter__(self):
        return iter(self.points)

    @property
    def points(self) -> List[Point]:
        return [Point(tuple(row), self.space_tag) for row in self.coords]

    @property
    def has_duplicates(self) -> bool:
        if len(self) < 2:
            return False
        return len(np.unique(self.coords, axis=0)) < len(self)

    def key_set(self) -> set:
        return {tuple(row) for row in self.coords}

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteSet):
            return NotImplemented
        return self.space_tag == other.space_tag and self.key_set() == other.key_set()

    def __repr__(self) -> str:
        return f"FiniteSet({len(self)} points, {self.space_tag})"


# ── Metrics ───────────────────────────────────────────────────────
class MetricDescriptor(BaseModel):
    """A metric on one space kind.

    ``scale`` multiplies every distance and ``warp`` reparametrizes each
    coordinate by t + warp*sin(t) (a turn of the circle for arc length),
    so any two descriptors of the same kind are bi-Lipschitz equivalent.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal[
        "euclidean-on-interval",
        "arc-length-on-circle",
        "euclidean-in-plane",
        "max-product",
    ]
    scale: float = Field(1.0, gt=0, description="Multiplicative scale")
    warp: float = Field(0.0, ge=0, lt=1, description="Coordinate warp strength")

    @model_validator(mode="after")
    def _check(self):
        if not math.isfinite(self.scale):
            raise ValueError("scale must be finite")
        return self

    def accepts(self, space_tag: str) -> bool:
        return space_tag in METRIC_SPACES[self.kind]

    def require(self, space_tag: str) -> None:
        if not self.accepts(space_tag):
            raise DomainError(f"metric {self.kind} does not apply to space {space_tag!r}")

    def warped(self, arr: np.ndarray) -> np.ndarray:
        if self.warp == 0.0:
            return arr
        if self.kind == "arc-length-on-circle":
            return np.mod(arr + self.warp / (2 * np.pi) * np.sin(2 * np.pi * arr), 1.0)
        return arr + self.warp * np.sin(arr)

    def diameter_factor(self) -> float:
        """Upper bound on how much the warp can stretch a distance."""
        return self.scale * (1.0 + self.warp)


def pairwise(A: np.ndarray, B: np.ndarray, metric: MetricDescriptor) -> np.ndarray:
    """Distance matrix between the rows of A and B (already canonical)."""
    A = metric.warped(np.asarray(A, dtype=np.float64))
    B = metric.warped(np.asarray(B, dtype=np.float64))
    if metric.kind == "arc-length-on-circle":
        d = np.abs(A[:, None, 0] - B[None, :, 0])
        d = np.minimum(d, 1.0 - d)
    elif metric.kind == "euclidean-on-interval":
        d = cdist(A, B, metric="cityblock")
    elif metric.kind == "euclidean-in-plane":
        d = cdist(A, B, metric="euclidean")
    else:
        d = cdist(A, B, metric="chebyshev")
    if metric.scale != 1.0:
        d = d * metric.scale
    return d


def rowwise(A: np.ndarray, B: np.ndarray, metric: MetricDescriptor) -> np.ndarray:
    """Distances between matching rows, d(A[i], B[i])."""
    A = metric.warped(np.asarray(A, dtype=np.float64))
    B = metric.warped(np.asarray(B, dtype=np.float64))
    diff = np.abs(A - B)
    if metric.kind == "arc-length-on-circle":
        d = np.minimum(diff[:, 0], 1.0 - diff[:, 0])
    elif metric.kind == "euclidean-on-interval":
        d = diff[:, 0]
    elif metric.kind == "euclidean-in-plane":
        d = np.sqrt((diff ** 2).sum(axis=1))
    else:
        d = diff.max(axis=1)
    return d * metric.scale if metric.scale != 1.0 else d


def distance(a: Point, b: Point, metric: MetricDescriptor) -> float:
    if a.space_tag != b.space_tag:
        raise DomainError(f"cannot measure {a.space_tag} against {b.space_tag}")
    metric.require(a.space_tag)
    return float(pairwise(a.array[None, :], b.array[None, :], metric)[0, 0])


def _as_coords(S) -> Tuple[np.ndarray, Optional[str]]:
    if isinstance(S, FiniteSet):
        return S.coords, S.space_tag
    if isinstance(S, Point):
        return S.array[None, :], S.space_tag
    arr = np.asarray(S, dtype=np.float64)
    return (arr.reshape(-1, 1) if arr.ndim == 1 else arr), None


def hausdorff_distance(A, B, metric: MetricDescriptor) -> float:
    """Hausdorff distance as the max of both directed sup-inf distances."""
    a, tag_a = _as_coords(A)
    b, tag_b = _as_coords(B)
    if len(a) == 0 or len(b) == 0:
        raise DomainError("Hausdorff distance of an empty set is undefined")
    if tag_a and tag_b and tag_a != tag_b:
        raise DomainError(f"cannot compare sets in {tag_a} and {tag_b}")
    d = pairwise(a, b, metric)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def ball_query(S: FiniteSet, c: Point, r: float, metric: MetricDescriptor,
               closed: bool = False) -> FiniteSet:
    """Points of S in the open (or closed) ball of radius r around c."""
    if r <= 0:
        raise DomainError("ball radius must be positive")
    if S.space_tag != c.space_tag:
        raise DomainError(f"cannot query {S.space_tag} with a {c.space_tag} center")
    d = pairwise(S.coords, c.array[None, :], metric)[:, 0]
    mask = d <= r if closed else d < r
    return FiniteSet(S.coords[mask].reshape(-1, S.coords.shape[1]), S.space_tag)


def nearest_index(coords: np.ndarray, queries: np.ndarray, metric: MetricDescriptor) -> np.ndarray:
    """Index of the nearest row of coords for each query; smallest index on ties."""
    return np.argmin(pairwise(queries, coords, metric), axis=1)


def min_pairwise_gap(coords: np.ndarray, metric: MetricDescriptor) -> float:
    """Smallest positive distance between distinct rows (inf if none)."""
    if len(coords) < 2:
        return math.inf
    d = pairwise(coords, coords, metric)
    positive = d[d > 0]
    return float(positive.min()) if positive.size else math.inf
