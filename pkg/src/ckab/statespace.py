"""Construction of the alternating action/context transition system.

States carry (data, service-call map, context, phase).  From a stable state
every executable action produces candidate data successors; each candidate
then takes every context transition that fires.  When at least one combined
successor is consistent with the axioms active in its new context, an
intermediate state (tagged by the reserved marker fact) is inserted between
the action and the context change; inconsistent combinations are dropped.
States are deduplicated by content, so the result is finite whenever the
reachable content space is.

The module also hosts two analyses: a syntactic weak-acyclicity check over
the position dependency graph of the effects (no cycle through an edge
mediated by a service call), and a monitor that bounds the cumulative
number of distinct constants met along runs.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from . import engine
from .context import ContextState, ContextTheory, build_theory
from .dsl.spec import CkabSpec
from .engine import CallTerm, EMPTY_SCMAP, GroundCall, HeadVar, ServiceCallMap
from .errors import BuildError, SpecificationError
from .kb import (ABox, Fact, MARKER_CONCEPT, MARKER_CONSTANT,
                 RESERVED_CONSTANTS, TBoxAssertion, Var, is_consistent,
                 tbox_in_context)

MARKER_FACT = Fact(MARKER_CONCEPT, (MARKER_CONSTANT,))


class Phase(Enum):
    STABLE = "stable"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class SystemState:
    abox: ABox
    scmap: ServiceCallMap
    ctx: ContextState
    phase: Phase

    def canonical_id(self) -> str:
        lines = [self.phase.value, str(self.ctx)]
        lines.extend(sorted(str(f) for f in self.abox.facts))
        lines.extend(f"{c}={v}" for c, v in self.scmap.entries)
        digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
        return digest[:16]


@dataclass
class RunBoundViolation:
    bound: int
    count: int
    path: tuple[str, ...]  # state ids from the initial state to the violation


@dataclass
class BuildStats:
    state_count: int = 0
    edge_count: int = 0
    stable_count: int = 0
    intermediate_count: int = 0
    dropped_inconsistent: int = 0
    dropped_branches: int = 0
    incomplete: bool = False


@dataclass(frozen=True)
class BuildConfig:
    """Knobs of the construction.

    ``k`` sizes the pool of abstract constants standing in for fresh
    service results; when None it defaults to the largest number of
    distinct call templates any single action can issue.  The abstraction
    is sound for verification only on run-bounded systems.  ``run_bound``
    activates the cumulative-constants monitor.  ``mode`` is echoed into
    reports; exploration itself is always exhaustive.
    """

    k: int | None = None
    state_cap: int = 100_000
    run_bound: int | None = None
    mode: str = "verify"
    extra_constants: frozenset[str] = frozenset()


@dataclass
class TransitionSystem:
    spec: CkabSpec
    theory: ContextTheory
    states: dict[str, SystemState]
    initial: str
    edges: set[tuple[str, str]]
    value_domain: tuple[str, ...]
    k: int
    stats: BuildStats = field(default_factory=BuildStats)
    run_bound_violation: RunBoundViolation | None = None

    def successors(self, state_id: str) -> list[str]:
        return sorted(t for s, t in self.edges if s == state_id)

    def stable_states(self) -> list[str]:
        return [i for i, s in self.states.items() if s.phase is Phase.STABLE]

    def spec_digest(self) -> str:
        from .dsl.printer import format_spec
        return hashlib.sha256(format_spec(self.spec).encode()).hexdigest()[:16]


def auto_k(spec: CkabSpec) -> int:
    """Largest number of distinct service-call templates in one action."""
    return max((len(a.call_templates()) for a in spec.actions), default=0)


def value_domain(spec: CkabSpec, config: BuildConfig) -> tuple[tuple[str, ...], int]:
    k = config.k if config.k is not None else auto_k(spec)
    if k < 0:
        raise SpecificationError("k must be nonnegative")
    pool = set(spec.initial_abox.adom()) | set(spec.constants) | set(config.extra_constants)
    pool |= {f"$v{i + 1}" for i in range(k)}
    return tuple(sorted(pool)), k


def _threads() -> int:
    raw = os.environ.get("CKAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def build(spec: CkabSpec, config: BuildConfig | None = None) -> TransitionSystem:
    """Explore the alternating transition system from the initial state.

    Stops early when the state cap is reached (the result is flagged
    incomplete) or when the run-bound monitor trips (the violating path
    prefix is reported).  Identical inputs produce an identical system,
    regardless of the CKAB_THREADS worker count.
    """
    config = config or BuildConfig()
    theory = build_theory(spec.dimensions)
    domain, k = value_domain(spec, config)
    actions = {a.name: a for a in spec.actions}

    projections: dict[ContextState, frozenset[TBoxAssertion]] = {}

    def project(ctx: ContextState) -> frozenset[TBoxAssertion]:
        got = projections.get(ctx)
        if got is None:
            got = tbox_in_context(spec.ctbox, ctx, theory)
            projections[ctx] = got
        return got

    consistency_cache: dict[tuple[frozenset[TBoxAssertion], ABox], bool] = {}

    def consistent(tbox: frozenset[TBoxAssertion], abox: ABox) -> bool:
        key = (tbox, abox)
        got = consistency_cache.get(key)
        if got is None:
            got = is_consistent(tbox, abox)
            consistency_cache[key] = got
        return got

    # many states share (context, data) and differ only in the call map;
    # query-driven work is keyed on what it actually depends on
    exec_cache: dict = {}

    def substitutions(rule_idx, rule, action, abox, ctx, tbox):
        key = (rule_idx, ctx, abox)
        got = exec_cache.get(key)
        if got is None:
            got = engine.executable_substitutions(
                rule, action, abox, ctx, theory, tbox)
            exec_cache[key] = got
        return got

    pending_cache: dict = {}

    def pending_for(action, sigma_items, ctx, abox, tbox):
        key = (action.name, sigma_items, ctx, abox)
        got = pending_cache.get(key)
        if got is None:
            got = engine.do(tbox, abox, action, dict(sigma_items))
            pending_cache[key] = got
        return got

    context_cache: dict = {}

    def context_successors(abox, ctx, tbox):
        key = (ctx, abox)
        got = context_cache.get(key)
        if got is None:
            got = engine.context_step(abox, EMPTY_SCMAP, ctx,
                                      spec.context_rules, theory, tbox)
            context_cache[key] = got
        return got

    init_tbox = project(spec.initial_context)
    if not consistent(init_tbox, spec.initial_abox):
        raise BuildError("initial data is inconsistent with the axioms "
                         "active in the initial context")

    ts = TransitionSystem(spec, theory, {}, "", set(), domain, k)
    initial = SystemState(spec.initial_abox, EMPTY_SCMAP,
                          spec.initial_context, Phase.STABLE)
    init_id = initial.canonical_id()
    ts.states[init_id] = initial
    ts.initial = init_id

    parents: dict[str, str] = {}
    envelopes: dict[str, frozenset[str]] = {}

    def counted_adom(abox: ABox) -> frozenset[str]:
        return abox.adom() - RESERVED_CONSTANTS

    def path_to(state_id: str) -> tuple[str, ...]:
        path = [state_id]
        while path[-1] in parents:
            path.append(parents[path[-1]])
        return tuple(reversed(path))

    bound = config.run_bound
    envelopes[init_id] = counted_adom(spec.initial_abox)
    if bound is not None and len(envelopes[init_id]) >= bound:
        ts.run_bound_violation = RunBoundViolation(
            bound, len(envelopes[init_id]), (init_id,))
        _finish(ts)
        return ts

    def expand(state: SystemState) -> tuple[
            list[tuple[SystemState, list[SystemState]]], int, int]:
        """Candidate (intermediate, consistent stable successors) groups,
        plus counts of dropped successors/branches.

        Does not touch shared build state, so frontier entries can be
        expanded in parallel.
        """
        tbox = project(state.ctx)
        groups: list[tuple[SystemState, list[SystemState]]] = []
        dropped_inconsistent = 0
        dropped_branches = 0
        seen_pairs: set[tuple[ABox, ServiceCallMap]] = set()
        fired: dict[tuple[str, tuple[str, ...]], None] = {}
        for rule_idx, rule in enumerate(spec.process):
            action = actions[rule.action]
            for sigma in substitutions(rule_idx, rule, action, state.abox,
                                       state.ctx, tbox):
                fired.setdefault(
                    (action.name, tuple(sigma[p] for p in action.params)), None)
        for action_name, values in sorted(fired):
            action = actions[action_name]
            sigma_items = tuple(zip(action.params, values))
            pending = pending_for(action, sigma_items, state.ctx, state.abox,
                                  tbox)
            for facts, new_scmap, _ in engine.resolve_calls(
                    pending, state.scmap, domain):
                new_abox = ABox(facts)
                if (new_abox, new_scmap) in seen_pairs:
                    continue
                seen_pairs.add((new_abox, new_scmap))
                contexts = context_successors(new_abox, state.ctx, tbox)
                kept = [c for c in contexts if consistent(project(c), new_abox)]
                dropped_inconsistent += len(contexts) - len(kept)
                if not kept:
                    dropped_branches += 1
                    continue
                inter = SystemState(
                    ABox(new_abox.facts | {MARKER_FACT}), new_scmap,
                    state.ctx, Phase.INTERMEDIATE)
                targets = [SystemState(new_abox, new_scmap, c, Phase.STABLE)
                           for c in kept]
                groups.append((inter, targets))
        return groups, dropped_inconsistent, dropped_branches

    frontier = [init_id]
    workers = _threads()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier:
            if pool is not None:
                expanded = list(pool.map(lambda i: expand(ts.states[i]), frontier))
            else:
                expanded = [expand(ts.states[i]) for i in frontier]
            next_frontier: list[str] = []
            for source_id, (groups, dropped_inc, dropped_br) in zip(frontier, expanded):
                ts.stats.dropped_inconsistent += dropped_inc
                ts.stats.dropped_branches += dropped_br
                for inter, targets in groups:
                    inter_id = inter.canonical_id()
                    if inter_id not in ts.states:
                        if len(ts.states) >= config.state_cap:
                            ts.stats.incomplete = True
                            _finish(ts)
                            return ts
                        ts.states[inter_id] = inter
                        parents[inter_id] = source_id
                        envelopes[inter_id] = envelopes[source_id] | counted_adom(inter.abox)
                    else:
                        envelopes[inter_id] = envelopes[inter_id] | envelopes[source_id]
                    ts.edges.add((source_id, inter_id))
                    if bound is not None and len(envelopes[inter_id]) >= bound:
                        ts.run_bound_violation = RunBoundViolation(
                            bound, len(envelopes[inter_id]), path_to(inter_id))
                        _finish(ts)
                        return ts
                    for target in targets:
                        target_id = target.canonical_id()
                        if target_id not in ts.states:
                            if len(ts.states) >= config.state_cap:
                                ts.stats.incomplete = True
                                _finish(ts)
                                return ts
                            ts.states[target_id] = target
                            parents[target_id] = inter_id
                            envelopes[target_id] = (envelopes[inter_id]
                                                    | counted_adom(target.abox))
                            next_frontier.append(target_id)
                        else:
                            envelopes[target_id] = envelopes[target_id] | envelopes[inter_id]
                        ts.edges.add((inter_id, target_id))
                        if bound is not None and len(envelopes[target_id]) >= bound:
                            ts.run_bound_violation = RunBoundViolation(
                                bound, len(envelopes[target_id]), path_to(target_id))
                            _finish(ts)
                            return ts
            frontier = next_frontier
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    _finish(ts)
    return ts


def _finish(ts: TransitionSystem) -> None:
    ts.stats.state_count = len(ts.states)
    ts.stats.edge_count = len(ts.edges)
    ts.stats.stable_count = sum(
        1 for s in ts.states.values() if s.phase is Phase.STABLE)
    ts.stats.intermediate_count = ts.stats.state_count - ts.stats.stable_count


# ---------------------------------------------------------------------------
# Weak acyclicity of the effect dependency graph.

Position = tuple[str, int]


@dataclass
class DependencyGraph:
    nodes: tuple[Position, ...]
    normal_edges: frozenset[tuple[Position, Position]]
    special_edges: frozenset[tuple[Position, Position]]

    def all_edges(self) -> frozenset[tuple[Position, Position]]:
        return self.normal_edges | self.special_edges


@dataclass
class WeakAcyclicityReport:
    weakly_acyclic: bool
    graph: DependencyGraph
    cycle: tuple[Position, ...] | None = None  # closed walk, first edge special

    def describe_cycle(self) -> str:
        if not self.cycle:
            return ""
        return " -> ".join(f"{p}.{i}" for p, i in self.cycle)


def _positions(spec: CkabSpec) -> tuple[Position, ...]:
    out: list[Position] = []
    for name in sorted(spec.concepts):
        out.append((name, 1))
    for name in sorted(spec.roles):
        out.append((name, 1))
        out.append((name, 2))
    return tuple(out)


def _call_variables(term) -> set[str]:
    if isinstance(term, HeadVar):
        return {term.name}
    if isinstance(term, CallTerm):
        out: set[str] = set()
        for a in term.args:
            out |= _call_variables(a)
        return out
    return set()


def dependency_graph(spec: CkabSpec) -> DependencyGraph:
    """Positions of the declared vocabulary, with an edge wherever an effect
    moves a selected value from a body position into a head position; edges
    into positions filled by a service call over that value are special."""
    normal: set[tuple[Position, Position]] = set()
    special: set[tuple[Position, Position]] = set()
    for action in spec.actions:
        params = set(action.params)
        for effect in action.effects:
            for cq in effect.body.disjuncts:
                body_positions: dict[str, set[Position]] = {}
                for atom in cq.atoms:
                    for i, term in enumerate(atom.args):
                        if isinstance(term, Var) and term.name not in params:
                            body_positions.setdefault(term.name, set()).add(
                                (atom.predicate, i + 1))
                propagated = {t.name for t in cq.head if isinstance(t, Var)}
                for template in effect.head:
                    for i, term in enumerate(template.args):
                        head_pos = (template.predicate, i + 1)
                        if isinstance(term, HeadVar) and term.name in propagated:
                            for src in body_positions.get(term.name, ()):
                                normal.add((src, head_pos))
                        elif isinstance(term, CallTerm):
                            for var in _call_variables(term) & propagated:
                                for src in body_positions.get(var, ()):
                                    special.add((src, head_pos))
    return DependencyGraph(_positions(spec), frozenset(normal), frozenset(special))


def analyze_dependency_graph(graph: DependencyGraph) -> WeakAcyclicityReport:
    succ: dict[Position, list[Position]] = {}
    for u, v in sorted(graph.all_edges()):
        succ.setdefault(u, []).append(v)
    for u, v in sorted(graph.special_edges):
        path = _find_path(succ, v, u)
        if path is not None:
            return WeakAcyclicityReport(False, graph, (u, v) + tuple(path[1:]))
    return WeakAcyclicityReport(True, graph)


def check_weak_acyclicity(spec: CkabSpec) -> WeakAcyclicityReport:
    """Weakly acyclic iff no cycle of the dependency graph contains a
    special edge; such a cycle witnesses unbounded fresh-value generation."""
    return analyze_dependency_graph(dependency_graph(spec))


def _find_path(succ: Mapping[Position, list[Position]], start: Position,
               goal: Position) -> list[Position] | None:
    if start == goal:
        return [start]
    prev: dict[Position, Position] = {}
    queue = [start]
    seen = {start}
    while queue:
        node = queue.pop(0)
        for nxt in succ.get(node, ()):
            if nxt in seen:
                continue
            prev[nxt] = node
            if nxt == goal:
                path = [nxt]
                while path[-1] != start:
                    path.append(prev[path[-1]])
                return list(reversed(path))
            seen.add(nxt)
            queue.append(nxt)
    return None


# ---------------------------------------------------------------------------
# Exports.

def export(ts: TransitionSystem, fmt: str) -> str:
    if fmt == "dot":
        return _export_dot(ts)
    if fmt == "json":
        return _export_json(ts)
    raise SpecificationError(f"unknown export format {fmt!r} (expected dot or json)")


def _export_dot(ts: TransitionSystem) -> str:
    lines = ["digraph transition_system {", "  rankdir=LR;"]
    for state_id, state in ts.states.items():
        style = "solid" if state.phase is Phase.STABLE else "dashed"
        label = f"{state.ctx}\\n|A|={len(state.abox)}"
        extra = ", shape=doublecircle" if state_id == ts.initial else ""
        lines.append(f'  "{state_id}" [style={style}, label="{label}"{extra}];')
    for src, dst in sorted(ts.edges):
        lines.append(f'  "{src}" -> "{dst}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _call_to_json(call: GroundCall) -> dict:
    return {
        "function": call.function,
        "args": [a if isinstance(a, str) else _call_to_json(a) for a in call.args],
    }


def _call_from_json(data: dict) -> GroundCall:
    return GroundCall(data["function"],
                      tuple(a if isinstance(a, str) else _call_from_json(a)
                            for a in data["args"]))


def _export_json(ts: TransitionSystem) -> str:
    states = []
    for state_id, state in ts.states.items():
        states.append({
            "id": state_id,
            "phase": state.phase.value,
            "context": state.ctx.as_dict(),
            "abox": sorted(
                [{"predicate": f.predicate, "args": list(f.args)} for f in state.abox],
                key=lambda d: (d["predicate"], d["args"])),
            "scmap": [{"call": _call_to_json(c), "value": v}
                      for c, v in state.scmap.entries],
        })
    payload = {
        "format_version": 1,
        "spec_digest": ts.spec_digest(),
        "initial": ts.initial,
        "value_domain": list(ts.value_domain),
        "k": ts.k,
        "incomplete": ts.stats.incomplete,
        "states": states,
        "transitions": sorted([list(e) for e in ts.edges]),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def states_from_json(text: str) -> tuple[dict[str, SystemState], str, set[tuple[str, str]]]:
    """Reload the state graph of a JSON export (states, initial, edges)."""
    payload = json.loads(text)
    states: dict[str, SystemState] = {}
    for item in payload["states"]:
        abox = ABox(frozenset(Fact(f["predicate"], tuple(f["args"]))
                              for f in item["abox"]))
        scmap = ServiceCallMap.of({
            _call_from_json(e["call"]): e["value"] for e in item["scmap"]})
        states[item["id"]] = SystemState(
            abox, scmap, ContextState.of(item["context"]),
            Phase(item["phase"]))
    edges = {(src, dst) for src, dst in payload["transitions"]}
    return states, payload["initial"], edges
