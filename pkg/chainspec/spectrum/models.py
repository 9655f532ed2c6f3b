"""Pydantic models for spectrum reports, decompositions and prolongation tables."""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class Evidence(BaseModel):
    kind: str = Field(..., description="theorem-oracle | empirical | witness")
    name: str
    confidence: str = Field("heuristic", description="oracle-grade | heuristic")
    signature: Optional[dict] = None
    certificate: Optional[Dict[str, bool]] = None
    note: Optional[str] = None


class SpectrumEntry(BaseModel):
    term: str
    label: str
    confidence: str
    evidence: List[Evidence] = Field(default_factory=list)


class SpectrumOptions(BaseModel):
    kmax: int = Field(1000, ge=1, description="Longest orbit searched for exact hits")
    exact_tolerance: float = Field(0.0, ge=0, description="Distance counted as an exact orbit hit")
    iteration_budget: int = Field(100_000, gt=0, description="Orbit steps for recurrence and density checks")
    prune_budget: int = Field(16, gt=0)
    stabilization_window: int = Field(3, ge=2)
    seed: int = 0
    transitivity_witness: Optional[Tuple[float, ...]] = None
    evidence: str = Field("oracle", pattern="^(oracle|all)$", description="Entries counted by xi_class")
    threads: Optional[int] = Field(None, gt=0)
    closed_balls: bool = False
    witness_families: bool = Field(True, description="Build and certify a witness family per oracle entry")


class SpectrumReport(BaseModel):
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    snap_distance: Tuple[float, float] = (0.0, 0.0)
    chain_related: bool
    first_failing_level: Optional[int] = None
    entries: List[SpectrumEntry] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    conflicts: List[str] = Field(default_factory=list)
    periodic_hint: bool = False
    converged: bool = Field(True, description="False when the grid pruning loop did not converge")
    decomposition: Optional["ArDecomposition"] = None

    def terms(self, confidence: Optional[str] = None) -> List[str]:
        return sorted(e.term for e in self.entries if confidence is None or e.confidence == confidence)

    def oracle_terms(self) -> List[str]:
        return self.terms("oracle-grade")

    @property
    def has_conflict(self) -> bool:
        return bool(self.conflicts)


class BlockSpan(BaseModel):
    component: Optional[int] = Field(None, description="Chain component id; None for transit points")
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0, description="Exclusive end position in the decided order")

    @property
    def size(self) -> int:
        return self.end - self.start


class BlockDecomposition(BaseModel):
    blocks: List[BlockSpan]
    induced_order: List[int]


class AttractorRepellerPair(BaseModel):
    epsilon: float = Field(..., gt=0)
    attractor: List[int]
    repeller: List[int]
    basin: List[int]
    inward_set: List[int]
    inward_certificate: bool = Field(..., description="Every ε-graph successor of U lies in U")


class ArDecomposition(BaseModel):
    beta: str
    middle: str
    beta_prime: str
    sizes: Tuple[int, int, int]


class ProlongationTable(BaseModel):
    x: Tuple[float, ...]
    x_index: int
    epsilons: List[float]
    levels: Dict[int, List[int]]
    lower_bound: Dict[int, bool] = Field(default_factory=dict)
    orbit_budget: int

    def first_entry(self) -> Dict[int, int]:
        """Grid index -> smallest α with the index in J_α(x)."""
        out: Dict[int, int] = {}
        for alpha in sorted(self.levels):
            for i in self.levels[alpha]:
                out.setdefault(i, alpha)
        return out


SpectrumReport.model_rebuild()
