"""
chainspec command line.

Standard output carries only the requested report; diagnostics go to
standard error and the log file. Exit codes: 0 ok, 1 detector conflict,
2 configuration or usage error, 3 non-convergence.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__
from .config import (build_grid, build_schedule, build_system, chainspec_home, load_config, logger,
                     setup_logging)
from .epsgraph import chain_components, conley_order
from .errors import ChainspecError, ConfigError, ConleyOrderError, DomainError
from .exports import (adjacency_lines, conley_dot, conley_dump, family_dump, family_text, prolongation_csv,
                      write_text)
from .models import AnalysisConfig, ConleyDump, GridSummary, PairReport, ReportBundle, parse_point
from .spectrum import SpectrumEngine, prolongation
from .store import RunStore
from .systems import ZOO, make_system, self_test

EXIT_OK = 0
EXIT_CONFLICT = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


class Timer:
    def __init__(self):
        self.timings: Dict[str, float] = {}
        self._start = time.perf_counter()

    def lap(self, name: str):
        now = time.perf_counter()
        self.timings[name] = round(now - self._start, 6)
        self._start = now


def _json(model) -> str:
    """Byte-stable JSON: sorted keys, fixed separators."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def _emit(text: str):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


# ── Context ───────────────────────────────────────────────────────
class Analysis:
    """System, grid, schedule and engine built once per command."""

    def __init__(self, cfg: AnalysisConfig):
        self.cfg = cfg
        self.timer = Timer()
        self._load_resources()

    def _load_resources(self):
        self.system = build_system(self.cfg)
        self.grid = build_grid(self.cfg, self.system)
        self.timer.lap("sample")
        self.schedule = build_schedule(self.cfg, self.grid)
        self.engine = SpectrumEngine(self.grid, self.schedule, self.cfg.spectrum_options())
        logger.info("%s: %d grid points, schedule %s", self.system.name, len(self.grid),
                    ", ".join(f"{e:g}" for e in self.schedule.epsilons))

    def components(self):
        cc = chain_components(self.engine.ladder)
        self.timer.lap("components")
        return cc

    def bundle(self, **parts) -> ReportBundle:
        return ReportBundle(
            config=self.cfg,
            system=self.system.name,
            grid=GridSummary(points=len(self.grid), resolution=self.grid.resolution),
            schedule=list(self.schedule.epsilons),
            **parts,
        )


def _overrides(args: argparse.Namespace) -> Dict:
    out = {
        "system": getattr(args, "system", None),
        "resolution": getattr(args, "resolution", None),
        "schedule_depth": getattr(args, "depth", None),
        "output_dir": getattr(args, "out", None),
        "alpha_max": getattr(args, "alpha_max", None),
    }
    if getattr(args, "pair", None):
        out["pairs"] = list(args.pair)
    if getattr(args, "x", None):
        out["prolong_x"] = list(parse_point(args.x))
    return out


def _config(args: argparse.Namespace) -> AnalysisConfig:
    try:
        return load_config(args.config, _overrides(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _spectrum_exit(reports) -> int:
    if any(r.has_conflict for r in reports):
        return EXIT_CONFLICT
    if not all(r.converged for r in reports):
        return EXIT_NONCONVERGENCE
    return EXIT_OK


# ── Commands ──────────────────────────────────────────────────────
def cmd_systems(args: argparse.Namespace) -> int:
    rows = []
    for name in sorted(ZOO):
        s = make_system(name)
        failures = self_test(s)
        rows.append({
            "name": name,
            "domain": s.domain.describe(),
            "metric": s.metric.kind,
            "params": dict(sorted(s.params.items())),
            "self_test": "pass" if not failures else "; ".join(failures),
            "description": s.description,
        })
    if args.json:
        _emit(json.dumps(rows, sort_keys=True, indent=2))
        return EXIT_OK
    width = max(len(r["name"]) for r in rows)
    lines = [f"{'system':<{width}}  self-test  domain / params"]
    for r in rows:
        params = " ".join(f"{k}={v:g}" for k, v in r["params"].items())
        status = "pass" if r["self_test"] == "pass" else "FAIL"
        lines.append(f"{r['name']:<{width}}  {status:<9}  {r['domain']} {params}".rstrip())
    _emit("\n".join(lines))
    return EXIT_OK


def _conley(run: Analysis, cc):
    try:
        cd = conley_order(cc, run.engine.ladder)
    except ConleyOrderError as exc:
        logger.warning("Conley order: %s", exc)
        return None, ConleyDump(components=[], error=str(exc))
    finally:
        run.timer.lap("conley")
    return cd, conley_dump(cd, cc)


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _config(args)
    run = Analysis(cfg)
    out = Path(cfg.output_dir)
    cc = run.components()
    cd, dump = _conley(run, cc)

    pairs: List[PairReport] = []
    families = []
    for text, (x, y) in zip(cfg.pairs, cfg.parsed_pairs()):
        report = run.engine.spectrum(x, y)
        pr = PairReport(pair=text, spectrum=report)
        _, result = run.engine.family(x, y)
        if report.chain_related and cd is not None:
            try:
                pr.blocks = run.engine.blocks(x, y, cc, cd, result)
            except ChainspecError as exc:
                pr.block_error = str(exc)
        if result is not None:
            families.append(family_dump(report.x, report.y, result, cfg.stabilization_window))
        pairs.append(pr)
        logger.info("pair %s: %s", text, ", ".join(report.terms()) or "no entries")
    run.timer.lap("spectra")

    tables = []
    if cfg.prolong_x is not None:
        table = prolongation(run.system, run.grid, run.schedule, cfg.prolong_x, cfg.alpha_max)
        tables.append(table)
        write_text(out / "prolongation.csv", prolongation_csv(table, run.grid.coords))
        run.timer.lap("prolongation")

    bundle = run.bundle(pairs=pairs, conley=dump, prolongations=tables, families=families)
    write_text(out / "report.json", _json(bundle))
    if cd is not None:
        write_text(out / "conley.dot", conley_dot(cd, cc))
    write_text(out / "timings.json", json.dumps(run.timer.timings, sort_keys=True, indent=2) + "\n")

    code = EXIT_CONFLICT if bundle.has_conflict else EXIT_OK if bundle.converged else EXIT_NONCONVERGENCE
    RunStore(str(chainspec_home() / "runs.db")).record_run(
        "analyze", run.system.name, cfg.model_dump_json(), code, str(out.resolve()), run.timer.timings)
    _emit(str(out / "report.json"))
    return code


def cmd_chains(args: argparse.Namespace) -> int:
    cfg = _config(args)
    run = Analysis(cfg)
    if args.adjacency is not None:
        level = args.adjacency
        if not 0 <= level < len(run.schedule):
            raise ConfigError(f"adjacency level must lie in 0..{len(run.schedule) - 1}")
        _emit("\n".join(adjacency_lines(run.engine.ladder.graph(level))))
        return EXIT_OK
    if not cfg.pairs:
        raise ConfigError("chains needs a --pair")
    code = EXIT_OK
    chunks = []
    for x, y in cfg.parsed_pairs():
        rel, result = run.engine.family(x, y)
        if result is None:
            level = rel.first_failure
            chunks.append(f"# not chain related: absent at first failing level {level} "
                          f"(eps={run.schedule[level]:g})\n")
            continue
        dump = family_dump(run.grid.coords[rel.x], run.grid.coords[rel.y], result, cfg.stabilization_window)
        if not dump.converged:
            code = EXIT_NONCONVERGENCE
            logger.error("no converged family for %s -> %s: %s", dump.x, dump.y, dump.message)
        chunks.append(_json(dump) if args.json else family_text(dump))
    _emit("".join(chunks))
    return code


def cmd_spectrum(args: argparse.Namespace) -> int:
    cfg = _config(args)
    run = Analysis(cfg)
    if args.xi is not None:
        if cfg.prolong_x is None:
            raise ConfigError("--xi needs --x")
        members = run.engine.xi_class(args.xi, cfg.prolong_x)
        rows = [list(map(float, run.grid.coords[i])) for i in members]
        _emit(json.dumps({"xi": args.xi, "x": cfg.prolong_x, "members": rows}, sort_keys=True))
        return EXIT_OK
    if not cfg.pairs:
        raise ConfigError("spectrum needs a --pair")
    reports = [run.engine.spectrum(x, y) for x, y in cfg.parsed_pairs()]
    if args.json:
        _emit("".join(_json(r) for r in reports))
    else:
        lines = []
        for text, r in zip(cfg.pairs, reports):
            lines.append(f"{text}: chain_related={r.chain_related}")
            for e in r.entries:
                lines.append(f"  {e.term:<12} {e.confidence:<12} {', '.join(ev.name for ev in e.evidence)}")
            lines.extend(f"  conflict: {c}" for c in r.conflicts)
        _emit("\n".join(lines))
    return _spectrum_exit(reports)


def cmd_conley(args: argparse.Namespace) -> int:
    cfg = _config(args)
    run = Analysis(cfg)
    cc = run.components()
    cd, dump = _conley(run, cc)
    if cd is None:
        logger.error("%s", dump.error)
        return EXIT_NONCONVERGENCE
    dot = conley_dot(cd, cc)
    if args.out:
        write_text(Path(cfg.output_dir) / "conley.dot", dot)
    _emit(_json(dump) if args.json else dot)
    return EXIT_OK


def cmd_prolong(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if cfg.prolong_x is None:
        raise ConfigError("prolong needs --x or a [prolongation] section")
    run = Analysis(cfg)
    table = prolongation(run.system, run.grid, run.schedule, cfg.prolong_x, cfg.alpha_max)
    csv_text = prolongation_csv(table, run.grid.coords)
    if args.out:
        write_text(Path(cfg.output_dir) / "prolongation.csv", csv_text)
    _emit(_json(table) if args.json else csv_text)
    return EXIT_OK


def cmd_history(args: argparse.Namespace) -> int:
    runs = RunStore(str(chainspec_home() / "runs.db")).get_runs(args.limit)
    if args.json:
        _emit(json.dumps(runs, sort_keys=True, indent=2))
    else:
        _emit("\n".join(f"{r['id']:>4}  {r['created_at']}  {r['command']:<8} {r['system']:<24} "
                        f"exit={r['exit_code']}  {r['output'] or ''}" for r in runs))
    return EXIT_OK


# ── Parser ────────────────────────────────────────────────────────
def _common(p: argparse.ArgumentParser, pairs: bool = True):
    p.add_argument("--config", help="key = value or .json analysis config")
    p.add_argument("--system", help="zoo system name")
    p.add_argument("--resolution", type=float, help="target covering radius of the grid")
    p.add_argument("--depth", type=int, help="levels of the default schedule")
    p.add_argument("--out", help="output directory")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    if pairs:
        p.add_argument("--pair", action="append", metavar='"x;y"', help="point pair, repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainspec", description="Chain structure and emergent order spectra")
    parser.add_argument("--version", action="version", version=f"chainspec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("systems", help="list zoo systems and their self-test status")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_systems)

    p = sub.add_parser("analyze", help="full pipeline; writes report.json, conley.dot and CSV tables")
    _common(p)
    p.add_argument("--x", help="prolongation base point")
    p.add_argument("--alpha-max", type=int, dest="alpha_max")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("chains", help="nested chain family dump for a pair")
    _common(p)
    p.add_argument("--adjacency", type=int, metavar="LEVEL", help="dump the ε-graph edges of one level")
    p.set_defaults(func=cmd_chains)

    p = sub.add_parser("spectrum", help="emergent order spectrum of point pairs")
    _common(p)
    p.add_argument("--xi", help="order type whose class [ξ](x) to list")
    p.add_argument("--x", help="base point for --xi")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("conley", help="chain components and the Conley diagram as DOT")
    _common(p, pairs=False)
    p.set_defaults(func=cmd_conley)

    p = sub.add_parser("prolong", help="prolongational sets J_α(x)")
    _common(p, pairs=False)
    p.add_argument("--x", help="base point")
    p.add_argument("--alpha-max", type=int, dest="alpha_max")
    p.set_defaults(func=cmd_prolong)

    p = sub.add_parser("history", help="recent analyze runs")
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_history)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except ChainspecError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
