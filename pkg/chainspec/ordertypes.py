"""
Countable order-type terms and signature detection.

Terms are immutable dataclasses over Fin(k), ω, ω*, ζ, η with sums and
products. ``normalize`` applies a small sound rewrite system; it is not a
decision procedure for order isomorphism. ``detect_signature`` reads how
a nested family grows from level to level and proposes candidate types.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import DomainError
from .nesting import NestedFamily, StabilizedOrder

logger = logging.getLogger("chainspec.ordertypes")


# ── Terms ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class Fin:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise DomainError("Fin needs a non-negative size")


@dataclass(frozen=True)
class Omega:
    pass


@dataclass(frozen=True)
class OmegaStar:
    pass


@dataclass(frozen=True)
class Zeta:
    pass


@dataclass(frozen=True)
class Eta:
    pass


@dataclass(frozen=True)
class Sum:
    terms: Tuple["Term", ...]


@dataclass(frozen=True)
class Prod:
    """left·right: right-many copies of left, in the order of right."""

    left: "Term"
    right: "Term"


Term = Union[Fin, Omega, OmegaStar, Zeta, Eta, Sum, Prod]

ATOMS = {"w": Omega(), "w*": OmegaStar(), "z": Zeta(), "e": Eta()}
SYMBOLS = {Omega(): "ω", OmegaStar(): "ω*", Zeta(): "ζ", Eta(): "η"}


# ── Syntax ────────────────────────────────────────────────────────
class _Parser:
    def __init__(self, text: str):
        self.text = text.replace(" ", "")
        self.pos = 0

    def error(self, what: str) -> DomainError:
        return DomainError(f"bad order-type term {self.text!r} at {self.pos}: {what}")

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> Term:
        t = self.sum()
        if self.pos != len(self.text):
            raise self.error("trailing input")
        return t

    def sum(self) -> Term:
        terms = [self.prod()]
        while self.peek() == "+":
            self.pos += 1
            terms.append(self.prod())
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def prod(self) -> Term:
        t = self.atom()
        while self.peek() == ".":
            self.pos += 1
            t = Prod(t, self.atom())
        return t

    def atom(self) -> Term:
        rest = self.text[self.pos:]
        if rest.startswith("("):
            self.pos += 1
            t = self.sum()
            if self.peek() != ")":
                raise self.error("missing ')'")
            self.pos += 1
            return t
        if rest.startswith("fin:"):
            self.pos += 4
            start = self.pos
            while self.peek().isdigit():
                self.pos += 1
            if start == self.pos:
                raise self.error("fin: needs a count")
            return Fin(int(self.text[start:self.pos]))
        for word in ("w*", "w", "z", "e"):
            if rest.startswith(word):
                self.pos += len(word)
                return ATOMS[word]
        raise self.error("expected fin:k, w, w*, z, e or '('")


def parse(text: str) -> Term:
    """Parse the report syntax, e.g. ``z.w+z`` for ζ·ω+ζ."""
    return _Parser(text).parse()


def format_term(t: Term) -> str:
    if isinstance(t, Fin):
        return f"fin:{t.k}"
    if isinstance(t, Sum):
        return "+".join(format_term(s) for s in t.terms)
    if isinstance(t, Prod):
        left = format_term(t.left)
        right = format_term(t.right)
        if isinstance(t.left, Sum):
            left = f"({left})"
        if isinstance(t.right, (Sum, Prod)):
            right = f"({right})"
        return f"{left}.{right}"
    return {v: k for k, v in ATOMS.items()}[t]


def label(t: Term) -> str:
    """Human-readable form with Greek letters."""
    if isinstance(t, Fin):
        return str(t.k) if t.k else "∅"
    if isinstance(t, Sum):
        return "+".join(label(s) for s in t.terms)
    if isinstance(t, Prod):
        left, right = label(t.left), label(t.right)
        if isinstance(t.left, Sum):
            left = f"({left})"
        if isinstance(t.right, (Sum, Prod)):
            right = f"({right})"
        return f"{left}·{right}"
    return SYMBOLS[t]


# ── Normalization ─────────────────────────────────────────────────
def _rewrite_once(items: List[Term]) -> Optional[List[Term]]:
    for i, t in enumerate(items):
        if t == Fin(0):
            return items[:i] + items[i + 1:]
    for i in range(len(items) - 1):
        a, b = items[i], items[i + 1]
        if isinstance(a, Fin) and isinstance(b, Fin):
            return items[:i] + [Fin(a.k + b.k)] + items[i + 2:]
        if isinstance(a, Fin) and b == Omega():
            return items[:i] + [b] + items[i + 2:]
        if a == OmegaStar() and isinstance(b, Fin):
            return items[:i] + [a] + items[i + 2:]
        if a == Eta() and b == Eta():
            return items[:i] + [a] + items[i + 2:]
    for i in range(len(items) - 2):
        if items[i] == Eta() and items[i + 1] == Fin(1) and items[i + 2] == Eta():
            return items[:i] + [Eta()] + items[i + 3:]
    return None


def _normalize_sum(children: List[Term]) -> Term:
    items: List[Term] = []
    for c in children:
        if isinstance(c, Sum):
            items.extend(c.terms)
        elif c == Zeta():
            items.extend([OmegaStar(), Omega()])
        else:
            items.append(c)
    while True:
        nxt = _rewrite_once(items)
        if nxt is None:
            break
        items = nxt
    out: List[Term] = []
    for t in items:
        if t == Omega() and out and out[-1] == OmegaStar():
            out[-1] = Zeta()
        else:
            out.append(t)
    if not out:
        return Fin(0)
    return out[0] if len(out) == 1 else Sum(tuple(out))


def normalize(t: Term) -> Term:
    if isinstance(t, Sum):
        return _normalize_sum([normalize(s) for s in t.terms])
    if isinstance(t, Prod):
        left, right = normalize(t.left), normalize(t.right)
        if left == Fin(0) or right == Fin(0):
            return Fin(0)
        if isinstance(right, Fin):
            return _normalize_sum([left] * right.k)
        return Prod(left, right)
    return t


def equal_normalized(a: Term, b: Term) -> bool:
    """True only when the rule set proves the two terms isomorphic."""
    return normalize(a) == normalize(b)


# ── Model invariants ──────────────────────────────────────────────
@dataclass(frozen=True)
class OrderInvariants:
    size: Optional[int]  # None when infinite
    has_min: bool
    has_max: bool
    scattered: bool
    well_ordered: bool
    reverse_well_ordered: bool

    @property
    def empty(self) -> bool:
        return self.size == 0


_ATOM_INVARIANTS = {
    Omega(): OrderInvariants(None, True, False, True, True, False),
    OmegaStar(): OrderInvariants(None, False, True, True, False, True),
    Zeta(): OrderInvariants(None, False, False, True, False, False),
    Eta(): OrderInvariants(None, False, False, False, False, False),
}


def invariants(t: Term) -> OrderInvariants:
    """Isomorphism invariants computed from the term's concrete model."""
    if isinstance(t, Fin):
        return OrderInvariants(t.k, t.k > 0, t.k > 0, True, True, True)
    if isinstance(t, Sum):
        parts = [p for p in (invariants(s) for s in t.terms) if not p.empty]
        if not parts:
            return invariants(Fin(0))
        sizes = [p.size for p in parts]
        return OrderInvariants(
            None if None in sizes else sum(sizes),
            parts[0].has_min, parts[-1].has_max,
            all(p.scattered for p in parts),
            all(p.well_ordered for p in parts),
            all(p.reverse_well_ordered for p in parts),
        )
    if isinstance(t, Prod):
        a, b = invariants(t.left), invariants(t.right)
        if a.empty or b.empty:
            return invariants(Fin(0))
        return OrderInvariants(
            None if a.size is None or b.size is None else a.size * b.size,
            a.has_min and b.has_min, a.has_max and b.has_max,
            a.scattered and b.scattered,
            a.well_ordered and b.well_ordered,
            a.reverse_well_ordered and b.reverse_well_ordered,
        )
    return _ATOM_INVARIANTS[t]


def realize(t: Term) -> List[Tuple[int, ...]]:
    """Explicit lexicographically ordered model of a finite term."""
    if isinstance(t, Fin):
        return [(i,) for i in range(t.k)]
    if isinstance(t, Sum):
        return [(i,) + e for i, s in enumerate(t.terms) for e in realize(s)]
    if isinstance(t, Prod):
        inner = realize(t.left)
        return [r + e for r in realize(t.right) for e in inner]
    raise DomainError(f"{label(t)} has no finite model")


# ── Signatures ────────────────────────────────────────────────────
@dataclass
class Verdict:
    term: Term
    confidence: str  # oracle-grade | heuristic
    evidence: str

    def to_dict(self) -> Dict[str, str]:
        return {"term": format_term(self.term), "label": label(self.term),
                "confidence": self.confidence, "evidence": self.evidence}


@dataclass
class SignatureReport:
    left_growth: str = "none"
    right_growth: str = "none"
    interior_densification: str = "none"
    decided_size_trend: List[int] = field(default_factory=list)
    verdict: List[Verdict] = field(default_factory=list)
    inconclusive: bool = False
    blocks: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "left_growth": self.left_growth,
            "right_growth": self.right_growth,
            "interior_densification": self.interior_densification,
            "decided_size_trend": list(self.decided_size_trend),
            "verdict": [v.to_dict() for v in self.verdict],
            "inconclusive": self.inconclusive,
            "blocks": list(self.blocks),
        }

    @property
    def terms(self) -> List[Term]:
        return [v.term for v in self.verdict]


MIN_LEVELS = 4
RECENT = 3


def birth_levels(nf: NestedFamily) -> Dict[tuple, int]:
    """Index of the first chain containing each interior point."""
    ends = {nf.x, nf.y}
    birth: Dict[tuple, int] = {}
    for level, c in enumerate(nf.chains):
        for k in c.keys():
            if k not in ends:
                birth.setdefault(k, level)
    return birth


def _transitions(order: List[tuple], birth: Dict[tuple, int], levels: int):
    """For each level step, which end or interior gaps received new points."""
    born = np.array([birth[k] for k in order], dtype=np.int64)
    out = []
    for n in range(1, levels):
        old = born < n
        new = born == n
        if not new.any():
            out.append((False, False, set(), int(old.sum())))
            continue
        before = np.cumsum(old) - old  # old points strictly left of each position
        gaps = set(before[new].tolist())
        out.append((0 in gaps, int(old.sum()) in gaps, gaps, int(old.sum())))
    return out


def _split_blocks(births: List[int]) -> List[List[int]]:
    blocks, current, rising = [], [], False
    for b in births:
        if current and rising and b < current[-1]:
            blocks.append(current)
            current, rising = [], False
        if current and b > current[-1]:
            rising = True
        current.append(b)
    if current:
        blocks.append(current)
    return blocks


def _classify(block: List[int], newest: int) -> Tuple[Term, int]:
    core = min(block)
    lo = block.index(core)
    hi = len(block) - 1 - block[::-1].index(core)
    left, right = block[:lo], block[hi + 1:]
    grows_left = bool(left) and max(left) >= newest - 1
    grows_right = bool(right) and max(right) >= newest - 1
    if grows_left and grows_right:
        return Zeta(), core
    if grows_right:
        return Omega(), core
    if grows_left:
        return OmegaStar(), core
    return Fin(len(block)), core


def _composite(blocks: List[Tuple[Term, int]]) -> Optional[Term]:
    cores = [c for _, c in blocks]
    best = None
    start = 0
    for i in range(1, len(cores) + 1):
        if i == len(cores) or cores[i] < cores[i - 1]:
            if i - start >= 3 and cores[i - 1] > cores[start]:
                if best is None or i - start > best[1] - best[0]:
                    best = (start, i)
            start = i
    if best is None:
        return None
    run = blocks[best[0]:best[1]]
    newest = max(cores)
    mature = [t for t, c in run if c < newest - 1] or [t for t, _ in run]
    kinds: Dict[Term, int] = {}
    for t in mature:
        kinds[t] = kinds.get(t, 0) + 1
    body = max(kinds, key=kinds.get)
    pieces = [t for t, _ in blocks[:best[0]]] + [Prod(body, Omega())] + [t for t, _ in blocks[best[1]:]]
    return normalize(Sum(tuple(pieces)))


def detect_signature(nf: NestedFamily, so: StabilizedOrder) -> SignatureReport:
    """Classify where new points appear between consecutive levels."""
    sizes = nf.interior_sizes()
    report = SignatureReport(decided_size_trend=sizes)
    if len(nf) < MIN_LEVELS:
        report.inconclusive = True
        logger.debug("signature inconclusive: %d levels", len(nf))
        return report

    birth = birth_levels(nf)
    order = so.decided_sequence() if so.fully_decided else [k for k in so.keys]
    order = [k for k in order if k in birth]
    steps = _transitions(order, birth, len(nf))[-RECENT:]

    report.left_growth = "unbounded-prefix" if steps and all(s[0] for s in steps) else "none"
    report.right_growth = "unbounded-prefix" if steps and all(s[1] for s in steps) else "none"
    everywhere = [s[3] > 0 and len(s[2]) == s[3] + 1 for s in steps]
    interior = [any(0 < g < s[3] for g in s[2]) for s in steps]
    if steps and all(everywhere):
        report.interior_densification = "everywhere"
    elif any(interior):
        report.interior_densification = "partial"

    if report.interior_densification == "everywhere":
        report.verdict.append(Verdict(Eta(), "heuristic", "every gap received new points at each recent level"))
        return report
    if len(set(sizes[-RECENT:])) == 1:
        report.verdict.append(Verdict(Fin(sizes[-1]), "heuristic", f"interior support constant at {sizes[-1]} points"))
        return report

    term, blocks, composite = _sequence_term([birth[k] for k in order], len(nf) - 1)
    report.blocks = [f"{label(t)}@{c}" for t, c in blocks]
    how = "blocks, repeated at increasing levels" if composite else "birth-level block(s)"
    report.verdict.append(Verdict(term, "heuristic", f"{len(blocks)} {how}"))
    return report


def _sequence_term(births: List[int], newest: int) -> Tuple[Term, List[Tuple[Term, int]], bool]:
    if not births:
        return Fin(0), [], False
    blocks = [_classify(b, newest) for b in _split_blocks(births)]
    composite = _composite(blocks)
    if composite is not None:
        return composite, blocks, True
    return normalize(Sum(tuple(t for t, _ in blocks))), blocks, False


def classify_sequence(births: List[int], newest: int) -> Term:
    """Order type read off a run of birth levels listed in limit order."""
    return _sequence_term(list(births), newest)[0]
