"""Pydantic models for analysis configuration and the JSON report bundle."""

from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator

from . import __version__
from .spectrum.models import BlockDecomposition, ProlongationTable, SpectrumOptions, SpectrumReport

SCHEMA_VERSION = 1

Coords = Tuple[float, ...]


def parse_point(text: str) -> Coords:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if not parts:
        raise ValueError(f"empty point in {text!r}")
    return tuple(float(p) for p in parts)


def parse_pair(text: str) -> Tuple[Coords, Coords]:
    """'x;y' with comma-separated coordinates for plane points."""
    if text.count(";") != 1:
        raise ValueError(f"pair {text!r} must look like 'x;y'")
    left, right = text.split(";")
    return parse_point(left), parse_point(right)


# ── Configuration ─────────────────────────────────────────────────
class AnalysisConfig(BaseModel):
    system: str = Field("cascade", min_length=1, description="Zoo system name")
    system_params: Dict[str, float] = Field(default_factory=dict, description="Numeric overrides for the zoo factory")
    resolution: float = Field(0.01, gt=0, description="Target covering radius of the sample grid")
    schedule: Union[str, List[float]] = Field("default", description="'default' or an explicit decreasing list")
    schedule_depth: int = Field(14, gt=0, description="Levels of the default schedule")
    prune_budget: int = Field(16, gt=0)
    stabilization_window: int = Field(3, ge=2)
    seeds: int = Field(0, ge=0, description="Seed for randomized witness constructions")
    output_dir: str = Field("chainspec-out", min_length=1)
    point_budget: int = Field(200_000, gt=0)
    closed_balls: bool = False
    exact_tolerance: float = Field(0.0, ge=0)
    kmax: int = Field(1000, ge=1)
    iteration_budget: int = Field(100_000, gt=0)
    alpha_max: int = Field(4, ge=1)
    evidence: str = Field("oracle", pattern="^(oracle|all)$")
    metric_scale: float = Field(1.0, gt=0)
    metric_warp: float = Field(0.0, ge=0, lt=1)
    pairs: List[str] = Field(default_factory=list, description="Point pairs as 'x;y'")
    prolong_x: Optional[List[float]] = None
    transitivity_witness: Optional[List[float]] = None
    threads: Optional[int] = Field(None, gt=0)

    @field_validator("schedule")
    @classmethod
    def _schedule(cls, v):
        if isinstance(v, str):
            if v != "default":
                raise ValueError("schedule must be 'default' or a list of epsilons")
            return v
        if not v or any(e <= 0 for e in v):
            raise ValueError("explicit schedule needs positive epsilons")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("explicit schedule must be strictly decreasing")
        return v

    @field_validator("pairs")
    @classmethod
    def _pairs(cls, v):
        for p in v:
            parse_pair(p)
        return v

    def parsed_pairs(self) -> List[Tuple[Coords, Coords]]:
        return [parse_pair(p) for p in self.pairs]

    def spectrum_options(self) -> SpectrumOptions:
        return SpectrumOptions(
            kmax=self.kmax,
            exact_tolerance=self.exact_tolerance,
            iteration_budget=self.iteration_budget,
            prune_budget=self.prune_budget,
            stabilization_window=self.stabilization_window,
            seed=self.seeds,
            transitivity_witness=tuple(self.transitivity_witness) if self.transitivity_witness else None,
            evidence=self.evidence,
            threads=self.threads,
            closed_balls=self.closed_balls,
        )


# ── Report bundle ─────────────────────────────────────────────────
class FamilyLevel(BaseModel):
    epsilon: float
    points: List[Coords]
    acyclic: bool
    max_slack: float


class FamilyDump(BaseModel):
    x: Coords
    y: Coords
    levels: List[FamilyLevel] = Field(default_factory=list)
    certificate: Dict[str, bool] = Field(default_factory=dict)
    converged: bool = False
    rounds: int = 0
    residuals: List[float] = Field(default_factory=list)
    limit_residual: Optional[float] = None
    message: str = ""


class ComponentDump(BaseModel):
    id: int
    size: int
    representative: Coords


class ConleyDump(BaseModel):
    components: List[ComponentDump]
    order: List[Tuple[int, int]] = Field(default_factory=list, description="Strict pairs (K, K') with K <= K'")
    total: bool = False
    error: Optional[str] = None


class PairReport(BaseModel):
    pair: str
    spectrum: SpectrumReport
    blocks: Optional[BlockDecomposition] = None
    block_error: Optional[str] = None


class GridSummary(BaseModel):
    points: int
    resolution: float


class ReportBundle(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    config: AnalysisConfig
    system: str
    grid: GridSummary
    schedule: List[float]
    pairs: List[PairReport] = Field(default_factory=list)
    conley: Optional[ConleyDump] = None
    prolongations: List[ProlongationTable] = Field(default_factory=list)
    families: List[FamilyDump] = Field(default_factory=list)

    @property
    def has_conflict(self) -> bool:
        return any(p.spectrum.has_conflict for p in self.pairs)

    @property
    def converged(self) -> bool:
        return all(p.spectrum.converged for p in self.pairs) and all(f.converged for f in self.families)
