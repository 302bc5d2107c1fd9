"""Command-line front end: validate, analyze, check, simulate.

Exit codes: 0 success (all properties hold / weakly acyclic), 1 some
property fails, 2 not weakly acyclic, 3 exploration incomplete (state cap
or run bound), 64 usage error, 66 missing input file, 74 other I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
import time
from dataclasses import dataclass, field

from . import engine, statespace
from .checker import model_check
from .dsl import format_formula, has_errors, parse_properties, parse_spec
from .dsl.spec import CkabSpec
from .errors import CkabError
from .formula import MuFormula
from .kb import ecq_constants, is_consistent, tbox_in_context
from .statespace import BuildConfig, TransitionSystem

EXIT_OK = 0
EXIT_PROPERTY_FAILED = 1
EXIT_NOT_WEAKLY_ACYCLIC = 2
EXIT_INCOMPLETE = 3
EXIT_USAGE = 64
EXIT_NO_INPUT = 66
EXIT_IO = 74


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); remap to 64
        raise _UsageError(message)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _load_spec(path: str) -> CkabSpec | None:
    text = _read(path)
    spec, diagnostics = parse_spec(text, path)
    for diag in diagnostics:
        print(diag, file=sys.stderr)
    return spec


@dataclass
class PropertyVerdict:
    label: str
    formula: MuFormula
    verdict: str  # holds | fails | inconclusive
    witness: tuple[str, ...] | None
    seconds: float
    extents: dict[str, list[str]] | None = None  # closed subformula -> states


@dataclass
class RunReport:
    spec_path: str
    spec_digest: str
    config: dict
    stats: dict
    analyzer: dict | None = None
    verdicts: list[PropertyVerdict] = field(default_factory=list)
    incomplete: bool = False
    run_bound_violation: dict | None = None
    seconds: float = 0.0

    def to_json(self) -> str:
        payload = {
            "spec": self.spec_path,
            "spec_digest": self.spec_digest,
            "config": self.config,
            "transition_system": self.stats,
            "analyzer": self.analyzer,
            "incomplete": self.incomplete,
            "run_bound_violation": self.run_bound_violation,
            "properties": [
                {"label": v.label, "formula": format_formula(v.formula),
                 "verdict": v.verdict,
                 "witness": list(v.witness) if v.witness else None,
                 "extents": v.extents,
                 "seconds": round(v.seconds, 4)}
                for v in self.verdicts
            ],
            "seconds": round(self.seconds, 4),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        out = io.StringIO()
        print(f"specification: {self.spec_path} (digest {self.spec_digest})",
              file=out)
        print("config: " + " ".join(f"{k}={v}" for k, v in self.config.items()),
              file=out)
        s = self.stats
        print(f"transition system: {s['states']} states "
              f"({s['stable']} stable, {s['intermediate']} intermediate), "
              f"{s['transitions']} transitions"
              + (" [INCOMPLETE: state cap reached]" if self.incomplete else ""),
              file=out)
        if self.analyzer is not None:
            if self.analyzer["weakly_acyclic"]:
                print("analyzer: weakly acyclic", file=out)
            else:
                print("analyzer: NOT weakly acyclic (cycle "
                      f"{self.analyzer['cycle']}); the finite-value "
                      "abstraction may be unsound here", file=out)
        if s["dropped_inconsistent"] or s["dropped_branches"]:
            print(f"dropped: {s['dropped_inconsistent']} inconsistent context "
                  f"successors, {s['dropped_branches']} action branches with "
                  "no consistent outcome", file=out)
        if self.run_bound_violation:
            v = self.run_bound_violation
            print(f"run bound {v['bound']} reached: {v['count']} distinct "
                  "constants along " + " -> ".join(v["path"]), file=out)
        for v in self.verdicts:
            line = f"property {v.label}: {v.verdict} ({v.seconds:.2f}s)"
            print(line, file=out)
            if v.witness:
                print("  witness path: " + " -> ".join(v.witness), file=out)
        print(f"total time: {self.seconds:.2f}s", file=out)
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["label", "verdict", "states", "transitions",
                         "incomplete", "seconds"])
        for v in self.verdicts:
            writer.writerow([v.label, v.verdict, self.stats["states"],
                             self.stats["transitions"],
                             str(self.incomplete).lower(),
                             f"{v.seconds:.4f}"])
        return out.getvalue()


def cmd_validate(args) -> int:
    spec = _load_spec(args.spec)
    if spec is None:
        return EXIT_PROPERTY_FAILED
    print(f"{args.spec}: ok")
    return EXIT_OK


def cmd_analyze(args) -> int:
    spec = _load_spec(args.spec)
    if spec is None:
        return EXIT_PROPERTY_FAILED
    report = statespace.check_weak_acyclicity(spec)
    payload = {
        "weakly_acyclic": report.weakly_acyclic,
        "cycle": report.describe_cycle() or None,
        "normal_edges": len(report.graph.normal_edges),
        "special_edges": len(report.graph.special_edges),
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif report.weakly_acyclic:
        print("weakly acyclic: yes (every run meets boundedly many "
              "distinct values)")
    else:
        print("weakly acyclic: NO")
        print("cycle through a service-call edge: " + report.describe_cycle())
    return EXIT_OK if report.weakly_acyclic else EXIT_NOT_WEAKLY_ACYCLIC


def _build_config(spec: CkabSpec, args, formulas) -> BuildConfig:
    extra = set()
    for formula in formulas:
        extra |= _formula_constants(formula)
    return BuildConfig(
        k=args.k,
        state_cap=args.state_cap,
        run_bound=args.bound,
        extra_constants=frozenset(extra),
    )


def _formula_constants(phi: MuFormula) -> set[str]:
    out = set()
    query = getattr(phi, "query", None)
    if query is not None:
        out |= ecq_constants(query)
    for attr in ("operand", "left", "right", "body"):
        child = getattr(phi, attr, None)
        if isinstance(child, MuFormula):
            out |= _formula_constants(child)
    return out


def cmd_check(args) -> int:
    started = time.perf_counter()
    spec = _load_spec(args.spec)
    if spec is None:
        return EXIT_PROPERTY_FAILED
    formulas: list[tuple[str, MuFormula]] = []
    bad = False
    for path in args.properties:
        text = _read(path)
        parsed, diagnostics = parse_properties(text, path, spec=spec)
        for diag in diagnostics:
            print(diag, file=sys.stderr)
        if has_errors(diagnostics):
            bad = True
            continue
        for i, formula in enumerate(parsed, start=1):
            formulas.append((f"{os.path.basename(path)}#{i}", formula))
    if bad:
        return EXIT_PROPERTY_FAILED
    config = _build_config(spec, args, [f for _, f in formulas])
    ts = statespace.build(spec, config)
    incomplete = ts.stats.incomplete or ts.run_bound_violation is not None
    analysis = statespace.check_weak_acyclicity(spec)

    verdicts = []
    for label, formula in formulas:
        t0 = time.perf_counter()
        if incomplete:
            verdicts.append(PropertyVerdict(label, formula, "inconclusive",
                                            None, time.perf_counter() - t0))
            continue
        result = model_check(ts, formula)
        extents = {format_formula(sub): sorted(states)
                   for sub, states in result.subformula_extents.items()}
        verdicts.append(PropertyVerdict(
            label, formula, result.verdict, result.witness,
            time.perf_counter() - t0, extents))

    report = RunReport(
        spec_path=args.spec,
        spec_digest=ts.spec_digest(),
        config={
            "k": ts.k,
            "state-cap": args.state_cap,
            "bound": args.bound if args.bound is not None else "-",
            "threads": os.environ.get("CKAB_THREADS", "1"),
            "mode": "verify",
        },
        stats={
            "states": ts.stats.state_count,
            "stable": ts.stats.stable_count,
            "intermediate": ts.stats.intermediate_count,
            "transitions": ts.stats.edge_count,
            "dropped_inconsistent": ts.stats.dropped_inconsistent,
            "dropped_branches": ts.stats.dropped_branches,
        },
        analyzer={
            "weakly_acyclic": analysis.weakly_acyclic,
            "cycle": analysis.describe_cycle() or None,
        },
        verdicts=verdicts,
        incomplete=incomplete,
        run_bound_violation=(
            {"bound": ts.run_bound_violation.bound,
             "count": ts.run_bound_violation.count,
             "path": list(ts.run_bound_violation.path)}
            if ts.run_bound_violation else None),
        seconds=time.perf_counter() - started,
    )
    _write_exports(ts, report, args)
    if args.json:
        print(report.to_json())
    else:
        print(report.to_text(), end="")
    if incomplete:
        return EXIT_INCOMPLETE
    if any(v.verdict == "fails" for v in verdicts):
        return EXIT_PROPERTY_FAILED
    return EXIT_OK


def _write_exports(ts: TransitionSystem, report: RunReport, args) -> None:
    if not args.export:
        return
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    for fmt in dict.fromkeys(args.export):
        if fmt in ("dot", "json"):
            path = os.path.join(out_dir, f"ts.{fmt}")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(statespace.export(ts, fmt))
        elif fmt == "png":
            from .viz import render_transition_system
            render_transition_system(ts, os.path.join(out_dir, "ts.png"))
        elif fmt == "csv":
            with open(os.path.join(out_dir, "report.csv"), "w",
                      encoding="utf-8", newline="") as handle:
                handle.write(report.to_csv())


def _make_backend(args) -> engine.ServiceBackend:
    if args.services == "hash":
        return engine.HashServiceBackend(args.seed)
    table: dict = {}
    default = None
    if args.table:
        payload = json.loads(_read(args.table))
        default = payload.get("default")
        for entry in payload.get("entries", []):
            table[(entry["function"], tuple(entry["args"]))] = entry["value"]
    return engine.TableServiceBackend(table, default)


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    if spec is None:
        return EXIT_PROPERTY_FAILED
    backend = _make_backend(args)
    rng = random.Random(args.seed)
    theory = spec.theory()
    actions = {a.name: a for a in spec.actions}
    abox, scmap, ctx = spec.initial_abox, engine.EMPTY_SCMAP, spec.initial_context

    def show_state(step: int) -> None:
        print(f"state {step}: context {ctx}")
        for fact in sorted(abox.facts, key=str):
            print(f"  {fact}")

    show_state(0)
    for step in range(1, args.steps + 1):
        tbox = tbox_in_context(spec.ctbox, ctx, theory)
        candidates = []
        for rule in spec.process:
            action = actions[rule.action]
            for sigma in engine.executable_substitutions(
                    rule, action, abox, ctx, theory, tbox):
                pair = (action.name, tuple(sigma[p] for p in action.params))
                if pair not in candidates:
                    candidates.append(pair)
        if not candidates:
            print(f"step {step}: no executable action; run ends")
            break
        name, values = rng.choice(sorted(candidates))
        action = actions[name]
        sigma = dict(zip(action.params, values))
        new_abox, new_scmap = engine.concrete_step(
            abox, scmap, tbox, action, sigma, backend)
        fired = engine.context_step(new_abox, new_scmap, ctx,
                                    spec.context_rules, theory, tbox)
        if not fired:
            print(f"step {step}: {name}({', '.join(values)}) applied, but no "
                  "context rule fires; run ends")
            break
        new_ctx = rng.choice(fired)
        consistent_tbox = tbox_in_context(spec.ctbox, new_ctx, theory)
        if not is_consistent(consistent_tbox, new_abox):
            print(f"step {step}: {name}({', '.join(values)}) leads to an "
                  f"inconsistent state in context {new_ctx}; run ends")
            break
        abox, scmap, ctx = new_abox, new_scmap, new_ctx
        print(f"step {step}: {name}({', '.join(values)}) -> context {ctx}")
        for fact in sorted(abox.facts, key=str):
            print(f"  {fact}")
        if scmap.entries:
            print("  calls: " + str(scmap))
    return EXIT_OK


def make_parser() -> _Parser:
    parser = _Parser(prog="ckab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and validate a "
                                "specification")
    p_validate.add_argument("spec")
    p_validate.set_defaults(func=cmd_validate)

    p_analyze = sub.add_parser("analyze", help="weak-acyclicity analysis")
    p_analyze.add_argument("spec")
    p_analyze.add_argument("--json", action="store_true")
    p_analyze.set_defaults(func=cmd_analyze)

    p_check = sub.add_parser("check", help="build the transition system and "
                             "model-check properties")
    p_check.add_argument("spec")
    p_check.add_argument("properties", nargs="+",
                         help="property files (';'-separated formulas)")
    p_check.add_argument("--k", type=int, default=None,
                         help="abstract service-value pool size "
                         "(default: derived from the actions)")
    p_check.add_argument("--state-cap", type=int, default=100_000)
    p_check.add_argument("--bound", type=int, default=None,
                         help="run-bound monitor threshold")
    p_check.add_argument("--export", action="append", default=[],
                         choices=["dot", "json", "png", "csv"],
                         help="write ts.dot/ts.json/ts.png/report.csv")
    p_check.add_argument("--out-dir", default=".")
    p_check.add_argument("--json", action="store_true",
                         help="machine-readable report on stdout")
    p_check.set_defaults(func=cmd_check)

    p_sim = sub.add_parser("simulate", help="concrete run with a service "
                           "backend")
    p_sim.add_argument("spec")
    p_sim.add_argument("--steps", type=int, default=5)
    p_sim.add_argument("--services", choices=["hash", "table"], default="hash")
    p_sim.add_argument("--table", default=None,
                       help="JSON file with service results")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"ckab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"ckab: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_NO_INPUT
    except IsADirectoryError as exc:
        print(f"ckab: {exc.filename}: is a directory", file=sys.stderr)
        return EXIT_NO_INPUT
    except OSError as exc:
        print(f"ckab: {exc}", file=sys.stderr)
        return EXIT_IO
    except CkabError as exc:
        print(f"ckab: {exc}", file=sys.stderr)
        return EXIT_PROPERTY_FAILED


if __name__ == "__main__":
    sys.exit(main())
