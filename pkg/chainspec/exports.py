"""
Exports
DOT files for Conley diagrams, CSV for prolongation tables and plain
line-oriented dumps for nested families and ε-graph adjacency.
"""

import csv
import io
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

import networkx as nx

from .epsgraph import ChainComponentSet, ConleyDiagram, EpsilonGraph
from .models import ComponentDump, ConleyDump, FamilyDump, FamilyLevel
from .nesting import PruneResult, verify_ordinately_nested
from .spectrum.models import ProlongationTable

logger = logging.getLogger("chainspec.exports")

PathLike = Union[str, Path]


def _fmt(coords) -> str:
    return ",".join(f"{v:.12g}" for v in coords)


# ── Conley diagram ────────────────────────────────────────────────
def conley_graph(cd: ConleyDiagram, cc: Optional[ChainComponentSet] = None) -> nx.DiGraph:
    """Hasse diagram: an edge K' -> K for each covering relation K < K'."""
    g = nx.DiGraph()
    for k in sorted(cd.nodes):
        size = len(cc.components[k]) if cc is not None else None
        rep = _fmt(cd.representatives.get(k, ()))
        g.add_node(k, label=f'"K{k} @ {rep}' + (f" ({size} pts)" if size is not None else "") + '"')
    for a, b in sorted(cd.order_pairs):
        if a != b:
            g.add_edge(b, a)
    reduced = nx.transitive_reduction(g)
    reduced.add_nodes_from(g.nodes(data=True))
    return reduced


def conley_dot(cd: ConleyDiagram, cc: Optional[ChainComponentSet] = None) -> str:
    g = conley_graph(cd, cc)
    ordered = nx.DiGraph()
    ordered.add_nodes_from(sorted(g.nodes(data=True)))
    ordered.add_edges_from(sorted(g.edges()))
    dot = nx.nx_pydot.to_pydot(ordered)
    dot.set_name("conley")
    dot.set("rankdir", "TB")
    return dot.to_string()


def conley_dump(cd: ConleyDiagram, cc: ChainComponentSet) -> ConleyDump:
    comps = [ComponentDump(id=k, size=len(cc.components[k]), representative=tuple(cd.representatives[k]))
             for k in sorted(cd.nodes)]
    strict = sorted((a, b) for a, b in cd.order_pairs if a != b)
    return ConleyDump(components=comps, order=strict, total=cd.is_total_on(cd.nodes))


# ── Prolongation ──────────────────────────────────────────────────
def prolongation_csv(table: ProlongationTable, coords) -> str:
    """One row per grid point that enters some J_α(x), with per-level membership flags."""
    alphas = sorted(table.levels)
    members = {a: set(table.levels[a]) for a in alphas}
    first = table.first_entry()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "coords", "first_alpha"] + [f"J{a}" for a in alphas])
    for i in sorted(first):
        writer.writerow([i, _fmt(coords[i]), first[i]] + [int(i in members[a]) for a in alphas])
    return buf.getvalue()


# ── Nested families ───────────────────────────────────────────────
def family_dump(x, y, result: PruneResult, window: int = 3) -> FamilyDump:
    dump = FamilyDump(x=tuple(x), y=tuple(y), converged=result.converged, rounds=result.rounds,
                      residuals=list(result.residuals), message=result.message)
    nf = result.nested
    if nf is None:
        return dump
    dump.levels = [FamilyLevel(epsilon=c.epsilon, points=[tuple(p) for p in c.coords],
                               acyclic=c.is_acyclic(), max_slack=c.max_slack()) for c in nf.chains]
    cert = verify_ordinately_nested(nf, window)
    dump.certificate = {"nested": all(cert.nested), "acyclic": all(cert.acyclic),
                        "order_compatible": cert.order_compatible}
    if result.limit is not None:
        dump.limit_residual = result.limit.hausdorff_residual
    return dump


def family_text(dump: FamilyDump) -> str:
    lines = [f"# family {_fmt(dump.x)} -> {_fmt(dump.y)} converged={dump.converged} rounds={dump.rounds}"]
    if dump.message:
        lines.append(f"# {dump.message}")
    for n, level in enumerate(dump.levels):
        lines.append(f"level {n} eps={level.epsilon:.12g} points={len(level.points)} acyclic={level.acyclic}")
        lines.extend(_fmt(p) for p in level.points)
    return "\n".join(lines) + "\n"


# ── ε-graph ───────────────────────────────────────────────────────
def adjacency_lines(g: EpsilonGraph) -> Iterable[str]:
    for i, j in g.edges():
        yield f"{i} {j}"


def write_text(path: PathLike, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    logger.info("wrote %s", p)
    return p
