"""
Spectrum Engine
Assembles Ω(x, y) approximations from the theorem-backed detectors, the
grid chain pipeline and witness nested families, and answers [ξ](x)
queries over a whole grid.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..epsgraph import (ChainComponentSet, ChainRelation, ConleyDiagram, GraphLadder, RefinementSchedule,
                        chain_related)
from ..errors import DecompositionError, DomainError, HypothesisError, ProjectionError
from ..geometry import canonical_coords, pairwise, rowwise
from ..nesting import NestedFamily, PruneResult, prune_loop, stabilized_order, verify_ordinately_nested
from ..ordertypes import (Eta, Fin, Omega, Sum, Term, Zeta, detect_signature, format_term, label,
                          normalize, parse)
from ..systems import SampleGrid, orbit_array
from . import recipes
from .attractors import ar_decompose, find_attractors, select_pair
from .blocks import conley_blocks
from .detectors import (collapsed_hit, detect_eta, detect_finite, detect_omega,
                        detect_periodic_attractor_spectrum, in_omega_limit, omega_radius, same_component,
                        witness_density, zeta_nonwandering_check)
from .models import BlockDecomposition, Evidence, SpectrumEntry, SpectrumOptions, SpectrumReport

logger = logging.getLogger("chainspec.spectrum")

ORACLE = "oracle-grade"
HEURISTIC = "heuristic"


def _contains(t: Term, atom: Term) -> bool:
    if t == atom:
        return True
    if isinstance(t, Sum):
        return any(_contains(s, atom) for s in t.terms)
    left = getattr(t, "left", None)
    return left is not None and (_contains(left, atom) or _contains(t.right, atom))


class SpectrumEngine:
    def __init__(self, grid: SampleGrid, sched: RefinementSchedule, options: Optional[SpectrumOptions] = None):
        self.grid = grid
        self.sys = grid.system
        self.sched = sched
        self.options = options or SpectrumOptions()
        self.ladder: Optional[GraphLadder] = None
        self._attractors = None
        self._load_resources()

    def _load_resources(self):
        """Build the graph ladder; graphs themselves are created on first use."""
        self.ladder = GraphLadder(self.grid, self.sched, self.options.closed_balls)
        logger.info("Spectrum engine ready: %s, %d points, %d levels (finest eps %g)",
                    self.sys.name, len(self.grid), len(self.sched), self.sched.finest)

    # ── Helpers ────────────────────────────────────────────────────
    @property
    def witness(self) -> Optional[Sequence[float]]:
        return self.options.transitivity_witness or self.sys.metadata.transitivity_witness

    def attractors(self):
        if self._attractors is None:
            self._attractors = find_attractors(self.grid, self.sys, self.sched.finest)
        return self._attractors

    def _snap(self, p):
        """Grid index, snap distance, grid point and the canonical input point."""
        raw = canonical_coords(np.asarray(p, dtype=np.float64).reshape(1, -1), self.sys.space_tag)
        idx, dist = self.grid.snap(raw)
        return idx, dist, self.grid.coords[idx], raw[0]

    def _certify(self, fam: NestedFamily, name: str, confidence: str) -> Evidence:
        w = self.options.stabilization_window
        cert = verify_ordinately_nested(fam, w)
        signature = None
        if len(fam) >= w:
            signature = detect_signature(fam, stabilized_order(fam, w)).to_dict()
        return Evidence(
            kind="witness", name=name, confidence=confidence, signature=signature,
            certificate={"nested": all(cert.nested), "acyclic": all(cert.acyclic),
                         "order_compatible": cert.order_compatible},
        )

    def _witness(self, build: Callable[[], Optional[NestedFamily]], name: str,
                 confidence: str, notes: List[str]) -> List[Evidence]:
        if not self.options.witness_families:
            return []
        try:
            fam = build()
        except (HypothesisError, ProjectionError, DomainError) as exc:
            notes.append(f"{name} witness: {exc}")
            return []
        if fam is None:
            notes.append(f"{name} witness could not be built")
            return []
        return [self._certify(fam, name, confidence)]

    @staticmethod
    def _add(entries: Dict[Term, SpectrumEntry], term: Term, confidence: str, evidence: List[Evidence]):
        key = normalize(term)
        entry = entries.get(key)
        if entry is None:
            entries[key] = SpectrumEntry(term=format_term(key), label=label(key), confidence=confidence,
                                         evidence=list(evidence))
            return
        entry.evidence.extend(evidence)
        if confidence == ORACLE:
            entry.confidence = ORACLE

    # ── Spectrum ───────────────────────────────────────────────────
    def spectrum(self, x, y) -> SpectrumReport:
        opts = self.options
        sys, sched = self.sys, self.sched
        # orbit oracles see the points as given; the grid pipeline sees their snaps
        ix, dx, xs, xo = self._snap(x)
        iy, dy, ys, yo = self._snap(y)
        rel = chain_related(self.ladder, ix, iy)
        report = SpectrumReport(x=tuple(map(float, xs)), y=tuple(map(float, ys)), snap_distance=(dx, dy),
                                chain_related=rel.verdict, first_failing_level=rel.first_failure)
        fin = detect_finite(sys, xo, yo, opts.kmax, opts.exact_tolerance)
        if not rel.verdict:
            level = rel.first_failure
            report.notes.append(f"no chain at level {level} (eps={sched[level]:g})")
            if fin is not None:
                report.conflicts.append(f"exact orbit gives {format_term(fin)} but no chain exists at level {level}")
            return report

        entries: Dict[Term, SpectrumEntry] = {}
        notes = report.notes

        # finite ordinals
        if fin is not None:
            ev = [Evidence(kind="theorem-oracle", name="finite-orbit", confidence=ORACLE,
                           note=f"f^{fin.k + 1}(x) = y")]
            ev += self._witness(lambda: recipes.constant_orbit(sys, sched, xo, fin.k), "constant-orbit", ORACLE, notes)
            self._add(entries, fin, ORACLE, ev)

        # ω and ω+j
        periodic: List[Term] = []
        if sys.metadata.periodic_orbits:
            try:
                periodic = detect_periodic_attractor_spectrum(sys, self.grid, sched, xo, yo, None,
                                                              kmax=opts.kmax)
            except HypothesisError as exc:
                notes.append(f"periodic-attractor: {exc}")
        for j, term in enumerate(periodic):
            orb = next(o for o in sys.metadata.periodic_orbits if o.attracting)
            ev = [Evidence(kind="theorem-oracle", name="periodic-attractor", confidence=ORACLE)]
            ev += self._witness(lambda: recipes.prefix_periodic_tail(sys, sched, xo, yo, orb.points, j),
                                "prefix-periodic-tail", ORACLE, notes)
            self._add(entries, term, ORACLE, ev)

        omega = detect_omega(sys, self.grid, sched, xo, yo, opts.iteration_budget, opts.kmax, opts.exact_tolerance)
        if omega.inconclusive:
            notes.append(f"omega: inconclusive, {omega.note}")
        if omega.term is not None:
            ev = [Evidence(kind="theorem-oracle", name="recurrence", confidence=ORACLE,
                           note=f"{omega.visits} returns in {omega.steps} steps")]
            if Omega() not in entries:
                ev += self._witness(lambda: recipes.orbit_prefix(sys, sched, xo, yo), "orbit-prefix", ORACLE, notes)
            self._add(entries, Omega(), ORACLE, ev)
        elif periodic and not omega.inconclusive:
            report.conflicts.append("periodic-attractor detector gives ω but the recurrence check finds none")

        # η
        eta = detect_eta(sys, self.grid, sched, xo, yo, self.witness, opts.iteration_budget, opts.seed)
        if eta.note:
            notes.append(f"eta: {eta.note}")
        if eta.term is not None:
            ev = [Evidence(kind="theorem-oracle", name=eta.oracle, confidence=eta.confidence)]
            name = "splice" if eta.oracle != "identity" else "enrichment"
            if eta.family is not None and opts.witness_families:
                ev.append(self._certify(eta.family, name, eta.confidence))
            elif opts.witness_families:
                ev.append(Evidence(kind="witness", name=name, confidence=HEURISTIC,
                                   certificate={"nested": False, "acyclic": False, "order_compatible": False},
                                   note=eta.note or "no witness family"))
            self._add(entries, Eta(), eta.confidence, ev)

        # grid chain pipeline
        self._grid_signature(report, rel.chains, entries)

        # ζ·ω ladders and the attractor/repeller split
        if sys.metadata.ladder and sys.inverse_eval is not None:
            self._ladder_signature(report, xo, yo, entries)

        # ζ implies the nonwandering relation
        if any(_contains(k, Zeta()) for k in entries):
            check = zeta_nonwandering_check(sys, self.grid, sched, xo, yo)
            notes.append(f"nonwandering check {'passed' if check.passed else 'failed'} "
                         f"over {len(check.levels)} level(s)")
            zeta_oracle = any(_contains(k, Zeta()) and e.confidence == ORACLE for k, e in entries.items())
            if not check.passed and zeta_oracle:
                report.conflicts.append("ζ asserted but (x, y) fails the nonwandering check")

        # limit-set cross-check
        fin_back = detect_finite(sys, yo, xo, opts.kmax, opts.exact_tolerance)
        report.periodic_hint = fin is not None and fin_back is not None
        if not omega.inconclusive:
            in_limit = in_omega_limit(sys, xo, yo, sched.finest)
            predicted = (Omega() in entries and entries[Omega()].confidence == ORACLE) or report.periodic_hint
            if in_limit != predicted:
                report.conflicts.append(
                    f"limit-set cross-check: y {'is' if in_limit else 'is not'} in the ω-limit of x "
                    f"but the spectrum {'does not' if in_limit else 'does'} say so")

        report.entries = sorted(entries.values(), key=lambda e: (e.confidence != ORACLE, e.term))
        for c in report.conflicts:
            logger.warning("conflict for %s -> %s: %s", report.x, report.y, c)
        return report

    def _grid_signature(self, report: SpectrumReport, chains, entries: Dict[Term, SpectrumEntry]):
        opts = self.options
        try:
            result = prune_loop([c for c in chains if c is not None], budget=opts.prune_budget,
                                tol=self.grid.resolution / 2.0)
        except ProjectionError as exc:
            report.converged = False
            report.notes.append(f"prune loop: {exc}")
            return
        if not result.converged:
            report.converged = False
            report.notes.append(f"prune loop did not converge: {result.message}")
            return
        nf = result.nested
        if len(nf) < opts.stabilization_window:
            report.notes.append(f"only {len(nf)} nested level(s); no signature")
            return
        so = stabilized_order(nf, opts.stabilization_window)
        sig = detect_signature(nf, so)
        if sig.inconclusive:
            report.notes.append("grid signature inconclusive")
        for v in sig.verdict:
            ev = Evidence(kind="empirical", name="grid-signature", confidence=HEURISTIC,
                          signature=sig.to_dict(), note=v.evidence)
            self._add(entries, v.term, HEURISTIC, [ev])

    def _ladder_signature(self, report: SpectrumReport, xs, ys, entries: Dict[Term, SpectrumEntry]):
        sys, sched, w = self.sys, self.sched, self.options.stabilization_window
        try:
            fam = recipes.ladder_family(sys, sched, xs, ys)
        except HypothesisError as exc:
            report.notes.append(f"ladder: {exc}")
            return
        if len(fam) < max(w, 4):
            return
        so = stabilized_order(fam, w)
        sig = detect_signature(fam, so)
        for v in sig.verdict:
            ev = self._certify(fam, "ladder-blocks", HEURISTIC)
            ev.note = v.evidence
            self._add(entries, v.term, HEURISTIC, [ev])
        pair = select_pair(self.attractors(), self.grid, xs, ys)
        if pair is None:
            report.notes.append("no attractor with x in its dual repeller and y in its basin")
            return
        try:
            report.decomposition = ar_decompose(fam, so, pair, self.grid)
        except (HypothesisError, DecompositionError) as exc:
            report.notes.append(f"attractor/repeller split: {exc}")

    # ── Families and blocks ────────────────────────────────────────
    def family(self, x, y) -> Tuple[ChainRelation, Optional[PruneResult]]:
        """Pruned grid family from x to y; no result when the pair is not chain related."""
        ix = self._snap(x)[0]
        iy = self._snap(y)[0]
        rel = chain_related(self.ladder, ix, iy)
        if not rel.verdict:
            return rel, None
        try:
            result = prune_loop(rel.chains, budget=self.options.prune_budget, tol=self.grid.resolution / 2.0)
        except ProjectionError as exc:
            result = PruneResult(None, None, 0, False, [], str(exc))
        return rel, result

    def blocks(self, x, y, cc: ChainComponentSet, cd: ConleyDiagram,
               result: Optional[PruneResult] = None) -> BlockDecomposition:
        """Component blocks of the pair's grid family, or of its ladder family when the grid one fails."""
        w = self.options.stabilization_window
        if result is None:
            _, result = self.family(x, y)
        fam = result.nested if result is not None and result.converged else None
        if (fam is None or len(fam) < w) and self.sys.metadata.ladder and self.sys.inverse_eval is not None:
            fam = recipes.ladder_family(self.sys, self.sched, self._snap(x)[3], self._snap(y)[3])
        if fam is None or len(fam) < w:
            raise DomainError("no converged nested family to split into blocks")
        return conley_blocks(stabilized_order(fam, w), cc, cd, self.grid)

    # ── [ξ](x) ─────────────────────────────────────────────────────
    def reachable_mask(self, ix: int) -> np.ndarray:
        mask = np.ones(len(self.grid), dtype=bool)
        for g in self.ladder.graphs():
            hit = np.zeros(len(self.grid), dtype=bool)
            hit[g.reachable_from(ix)] = True
            # reachable_from includes the start; x C x needs a real loop
            preds = g.adjacency[:, ix].nonzero()[0]
            if not hit[preds].any():
                hit[ix] = False
            mask &= hit
        return mask

    def _finite_class(self, xs: np.ndarray, k: int) -> np.ndarray:
        target = orbit_array(self.sys, xs[None, :], k + 1)[-1]
        d = pairwise(self.grid.coords, target, self.sys.metric)[:, 0]
        hits = np.flatnonzero(d <= self.options.exact_tolerance)
        return np.array([i for i in hits if not collapsed_hit(self.sys, xs, self.grid.coords[i], self.options.kmax)],
                        dtype=np.int64)

    def _omega_class(self, xs: np.ndarray) -> np.ndarray:
        n = len(self.grid)
        visits = np.zeros(n, dtype=np.int64)
        exact = np.zeros(n, dtype=bool)
        radius = omega_radius(self.sched)
        cur, steps, chunk = xs[None, :], 0, 4096
        budget = self.options.iteration_budget
        while steps < budget:
            walk = orbit_array(self.sys, cur, min(chunk, budget - steps))[1:, 0, :]
            idx = self.grid.snap_many(walk)
            d = rowwise(self.grid.coords[idx], walk, self.sys.metric)
            visits += np.bincount(idx[d < radius], minlength=n)
            exact[idx[d <= self.options.exact_tolerance]] = True
            steps += len(walk)
            cur = walk[-1:]
        ok = visits >= 2
        for i in np.flatnonzero(ok & exact):
            ok[i] = collapsed_hit(self.sys, xs, self.grid.coords[i], self.options.kmax)
        return np.flatnonzero(ok)

    def xi_class(self, xi, x) -> List[int]:
        """Grid indices y with ξ in the spectrum of (x, y)."""
        term = normalize(parse(xi) if isinstance(xi, str) else xi)
        ix, _, _, xs = self._snap(x)
        related = self.reachable_mask(ix)
        sys = self.sys

        if isinstance(term, Fin):
            out = self._finite_class(xs, term.k)
        elif term == Omega():
            out = self._omega_class(xs)
        elif term == Eta() and sys.metadata.identity and sys.domain.kind != "plane":
            out = np.array([i for i in range(len(self.grid)) if same_component(sys, xs, self.grid.coords[i])])
        elif term == Eta() and self.witness is not None and \
                witness_density(sys, self.grid, self.witness, self.sched.finest, self.options.iteration_budget) >= 0:
            out = np.flatnonzero(related)
        else:
            out = self._generic_class(term, xs, np.flatnonzero(related))
        if len(out):
            out = np.asarray(out, dtype=np.int64)
            out = out[related[out]]
        logger.info("[%s](x) has %d grid point(s)", format_term(term), len(out))
        return sorted(int(i) for i in out)

    def _generic_class(self, term: Term, xs: np.ndarray, candidates: np.ndarray) -> np.ndarray:
        want = format_term(term)
        confidence = None if self.options.evidence == "all" else ORACLE

        def check(i: int) -> bool:
            report = self.spectrum(xs, self.grid.coords[i])
            return want in report.terms(confidence)

        with ThreadPoolExecutor(max_workers=self.options.threads) as pool:
            hits = list(pool.map(check, candidates.tolist()))
        return candidates[np.asarray(hits, dtype=bool)] if len(candidates) else candidates


# ── Module-level API ──────────────────────────────────────────────
def spectrum(sys, grid: SampleGrid, sched: RefinementSchedule, x, y,
             options: Optional[SpectrumOptions] = None) -> SpectrumReport:
    if grid.system is not sys:
        raise DomainError("grid was sampled from a different system")
    return SpectrumEngine(grid, sched, options).spectrum(x, y)


def xi_class(sys, grid: SampleGrid, sched: RefinementSchedule, xi, x,
             options: Optional[SpectrumOptions] = None) -> List[int]:
    if grid.system is not sys:
        raise DomainError("grid was sampled from a different system")
    return SpectrumEngine(grid, sched, options).xi_class(xi, x)
