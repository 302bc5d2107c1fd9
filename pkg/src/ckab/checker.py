"""Fixpoint model checking of temporal properties over the alternating
transition system.

Formulas combine closed/open data queries, context expressions, boolean
connectives, first-order quantification over the current active domain, and
step modalities that always span an action transition followed by a context
transition (hence the two-symbol pairs).  Least fixpoints are computed by
Kleene iteration from the empty set, greatest fixpoints from the full state
set; both converge within one pass per state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from .context import entails
from .errors import SpecificationError
from .formula import (MuAnd, MuContext, MuExists, MuFalse, MuForall,
                      MuFormula, MuGreatest, MuImplies, MuLeast, MuModality,
                      MuNot, MuOr, MuQuery, MuTrue, MuVar, Step,
                      check_monotone, free_individual_vars,
                      free_predicate_vars, is_closed)
from .kb import (ECQ, RESERVED_CONSTANTS, ecq_free_vars, holds_ecq,
                 substitute_ecq, tbox_in_context)
from .statespace import TransitionSystem

# ---------------------------------------------------------------------------
# The extension function.

def _state_adom(ts: TransitionSystem, state_id: str) -> frozenset[str]:
    return ts.states[state_id].abox.adom() - RESERVED_CONSTANTS


class _Evaluator:
    """Shared caches for one checking run: axiom projections per context,
    and extents per (subformula, relevant valuation, fixpoint environment)."""

    def __init__(self, ts: TransitionSystem):
        self.ts = ts
        self.all_states = frozenset(ts.states)
        self.succ = {src: tuple(sorted(t for s, t in ts.edges if s == src))
                     for src in ts.states}
        self._projections: dict = {}
        self._cache: dict = {}
        self._atom_cache: dict = {}

    def project(self, ctx):
        got = self._projections.get(ctx)
        if got is None:
            got = tbox_in_context(self.ts.spec.ctbox, ctx, self.ts.theory)
            self._projections[ctx] = got
        return got

    def pre_exists(self, target: frozenset[str]) -> frozenset[str]:
        return frozenset(s for s in self.all_states
                         if any(t in target for t in self.succ[s]))

    def pre_all(self, target: frozenset[str]) -> frozenset[str]:
        return frozenset(s for s in self.all_states
                         if all(t in target for t in self.succ[s]))

    def query_holds(self, query: ECQ, state_id: str) -> bool:
        key = (query, state_id)
        got = self._atom_cache.get(key)
        if got is None:
            state = self.ts.states[state_id]
            got = holds_ecq(query, self.project(state.ctx), state.abox)
            self._atom_cache[key] = got
        return got

    def extension(self, phi: MuFormula, v: Mapping[str, str],
                  V: Mapping[str, frozenset[str]]) -> frozenset[str]:
        key = (phi,
               tuple(sorted((x, v[x]) for x in free_individual_vars(phi) if x in v)),
               tuple(sorted((z, V[z]) for z in free_predicate_vars(phi) if z in V)))
        got = self._cache.get(key)
        if got is None:
            got = self._extension(phi, v, V)
            self._cache[key] = got
        return got

    def _extension(self, phi: MuFormula, v, V) -> frozenset[str]:
        ts = self.ts
        if isinstance(phi, MuTrue):
            return self.all_states
        if isinstance(phi, MuFalse):
            return frozenset()
        if isinstance(phi, MuQuery):
            missing = ecq_free_vars(phi.query) - set(v)
            if missing:
                raise SpecificationError(
                    f"unbound individual variables {sorted(missing)} in query")
            closed = substitute_ecq(phi.query, dict(v))
            return frozenset(s for s in self.all_states
                             if self.query_holds(closed, s))
        if isinstance(phi, MuContext):
            return frozenset(
                s for s in self.all_states
                if entails(ts.states[s].ctx, ts.theory, phi.expr))
        if isinstance(phi, MuVar):
            try:
                return V[phi.name]
            except KeyError:
                raise SpecificationError(f"unbound fixpoint variable {phi.name}")
        if isinstance(phi, MuNot):
            return self.all_states - self.extension(phi.operand, v, V)
        if isinstance(phi, MuAnd):
            return self.extension(phi.left, v, V) & self.extension(phi.right, v, V)
        if isinstance(phi, MuOr):
            return self.extension(phi.left, v, V) | self.extension(phi.right, v, V)
        if isinstance(phi, MuImplies):
            return ((self.all_states - self.extension(phi.left, v, V))
                    | self.extension(phi.right, v, V))
        if isinstance(phi, (MuExists, MuForall)):
            candidates = sorted(set().union(
                *(_state_adom(ts, s) for s in self.all_states)) if ts.states else set())
            per_value = {d: self.extension(phi.body, {**v, phi.var: d}, V)
                         for d in candidates}
            out = set()
            for s in self.all_states:
                adom = _state_adom(ts, s)
                if isinstance(phi, MuExists):
                    if any(s in per_value[d] for d in adom):
                        out.add(s)
                else:
                    if all(s in per_value[d] for d in adom):
                        out.add(s)
            return frozenset(out)
        if isinstance(phi, MuModality):
            inner = self.extension(phi.body, v, V)
            second = self.pre_exists(inner) if phi.second is Step.DIAMOND \
                else self.pre_all(inner)
            return self.pre_exists(second) if phi.first is Step.DIAMOND \
                else self.pre_all(second)
        if isinstance(phi, MuLeast):
            check_monotone(phi)
            current: frozenset[str] = frozenset()
            while True:
                step = self.extension(phi.body, v, {**V, phi.var: current})
                if step == current:
                    return current
                if not current <= step:
                    raise SpecificationError(
                        "fixpoint iteration is not increasing; body not monotone")
                current = step
        if isinstance(phi, MuGreatest):
            check_monotone(phi)
            current = self.all_states
            while True:
                step = self.extension(phi.body, v, {**V, phi.var: current})
                if step == current:
                    return current
                if not step <= current:
                    raise SpecificationError(
                        "fixpoint iteration is not decreasing; body not monotone")
                current = step
        raise TypeError(f"not a formula: {phi!r}")


def extension(ts: TransitionSystem, phi: MuFormula,
              v: Mapping[str, str] | None = None,
              V: Mapping[str, frozenset[str]] | None = None) -> frozenset[str]:
    """States where the formula holds, under the given valuations."""
    return _Evaluator(ts).extension(phi, dict(v or {}), dict(V or {}))


# ---------------------------------------------------------------------------
# Verdicts and witnesses.

@dataclass
class CheckResult:
    holds: bool
    extent: frozenset[str]
    subformula_extents: dict[MuFormula, frozenset[str]] = field(default_factory=dict)
    witness: tuple[str, ...] | None = None

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "fails"


def _closed_subformulas(phi: MuFormula) -> list[MuFormula]:
    out = []

    def walk(f: MuFormula) -> None:
        if is_closed(f):
            out.append(f)
        for attr in ("operand", "left", "right", "body"):
            child = getattr(f, attr, None)
            if isinstance(child, MuFormula):
                walk(child)

    walk(phi)
    return out


def model_check(ts: TransitionSystem, phi: MuFormula) -> CheckResult:
    """Does the formula hold in the initial state?"""
    if not is_closed(phi):
        raise SpecificationError("model checking requires a closed formula")
    check_monotone(phi)
    evaluator = _Evaluator(ts)
    extent = evaluator.extension(phi, {}, {})
    holds = ts.initial in extent
    extents = {sub: evaluator.extension(sub, {}, {})
               for sub in _closed_subformulas(phi)}
    witness = _two_step_trace(evaluator, phi, holds)
    return CheckResult(holds, extent, extents, witness)


def _mentions_modality(f: MuFormula) -> bool:
    if isinstance(f, MuModality):
        return True
    for attr in ("operand", "left", "right", "body"):
        child = getattr(f, attr, None)
        if isinstance(child, MuFormula) and _mentions_modality(child):
            return True
    return False


def _two_step_trace(ev: _Evaluator, phi: MuFormula,
                    holds: bool) -> tuple[str, ...] | None:
    """A path from the initial state recording one two-step edge pair per
    unfolding of the outermost recursion, clipped at a revisit or depth cap.

    For a failing verdict the walk follows successors that stay outside the
    extent of the box/diamond body; for a holding top-level diamond it
    follows members.  Purely diagnostic.
    """
    ts = ev.ts
    path = [ts.initial]
    cur = ts.initial
    f = phi
    v: dict[str, str] = {}
    V: dict[str, frozenset[str]] = {}
    want = holds  # walk inside the extent when the verdict holds
    seen = set()
    for _ in range(64):
        marker = (cur, f, tuple(sorted(v.items())), want)
        if marker in seen:
            break
        seen.add(marker)
        if isinstance(f, (MuLeast, MuGreatest)):
            V = {**V, f.var: ev.extension(f, v, V)}
            f = f.body
            continue
        if isinstance(f, MuNot):
            f, want = f.operand, not want
            continue
        if isinstance(f, MuImplies):
            f = MuOr(MuNot(f.left), f.right)
            continue
        if isinstance(f, (MuAnd, MuOr)):
            left_in = cur in ev.extension(f.left, v, V)
            if isinstance(f, MuAnd):
                if want:
                    # both conjuncts hold: keep walking where steps remain
                    f = f.left if _mentions_modality(f.left) else f.right
                else:
                    f = f.left if not left_in else f.right
            else:
                if want:
                    f = f.left if left_in else f.right
                else:
                    f = f.left if _mentions_modality(f.left) else f.right
            continue
        if isinstance(f, (MuExists, MuForall)):
            adom = sorted(_state_adom(ts, cur))
            chosen = None
            for d in adom:
                ext = ev.extension(f.body, {**v, f.var: d}, V)
                inside = cur in ext
                if isinstance(f, MuForall) and not want and not inside:
                    chosen = d
                    break
                if isinstance(f, MuExists) and want and inside:
                    chosen = d
                    break
            if chosen is None:
                break
            v = {**v, f.var: chosen}
            f = f.body
            continue
        if isinstance(f, MuModality):
            body_ext = ev.extension(f.body, v, V)
            second = ev.pre_exists(body_ext) if f.second is Step.DIAMOND \
                else ev.pre_all(body_ext)
            hop = None
            for mid in ev.succ[cur]:
                mid_ok = mid in second
                if want and f.first is Step.DIAMOND and mid_ok:
                    hop = mid
                elif not want and f.first is Step.BOX and not mid_ok:
                    hop = mid
                if hop is not None:
                    break
            if hop is None:
                break
            nxt = None
            for target in ev.succ[hop]:
                inside = target in body_ext
                if want and f.second is Step.DIAMOND and inside:
                    nxt = target
                elif not want and f.second is Step.BOX and not inside:
                    nxt = target
                if nxt is not None:
                    break
            if nxt is None:
                break
            path.extend([hop, nxt])
            cur = nxt
            f = f.body
            continue
        break
    return tuple(path) if len(path) > 1 else None


# ---------------------------------------------------------------------------
# Brute-force oracle (test support).

def brute_force_extension(ts: TransitionSystem, phi: MuFormula,
                          v: Mapping[str, str] | None = None,
                          V: Mapping[str, frozenset[str]] | None = None,
                          size_cap: int = 500) -> frozenset[str]:
    """Same contract as :func:`extension`, by naive recursion.

    Fixpoints are taken literally: with at most 12 states the least
    fixpoint is the intersection of all prefixpoints over the full subset
    lattice (dually for the greatest); beyond that, Kleene iterations from
    both lattice bounds are compared and must agree with the duality.
    """
    if len(ts.states) > size_cap:
        raise SpecificationError(
            f"brute-force oracle capped at {size_cap} states")
    all_states = frozenset(ts.states)
    succ = {s: tuple(sorted(t for a, t in ts.edges if a == s)) for s in ts.states}
    projections: dict = {}
    atom_memo: dict = {}

    def project(ctx):
        got = projections.get(ctx)
        if got is None:
            got = tbox_in_context(ts.spec.ctbox, ctx, ts.theory)
            projections[ctx] = got
        return got

    def atom(query: ECQ, state_id: str) -> bool:
        key = (query, state_id)
        got = atom_memo.get(key)
        if got is None:
            state = ts.states[state_id]
            got = holds_ecq(query, project(state.ctx), state.abox)
            atom_memo[key] = got
        return got

    def ev(f: MuFormula, v: dict, V: dict) -> frozenset[str]:
        if isinstance(f, MuTrue):
            return all_states
        if isinstance(f, MuFalse):
            return frozenset()
        if isinstance(f, MuQuery):
            closed = substitute_ecq(f.query, v)
            return frozenset(s for s in all_states if atom(closed, s))
        if isinstance(f, MuContext):
            return frozenset(s for s in all_states
                             if entails(ts.states[s].ctx, ts.theory, f.expr))
        if isinstance(f, MuVar):
            return V[f.name]
        if isinstance(f, MuNot):
            return all_states - ev(f.operand, v, V)
        if isinstance(f, MuAnd):
            return ev(f.left, v, V) & ev(f.right, v, V)
        if isinstance(f, MuOr):
            return ev(f.left, v, V) | ev(f.right, v, V)
        if isinstance(f, MuImplies):
            return (all_states - ev(f.left, v, V)) | ev(f.right, v, V)
        if isinstance(f, MuExists):
            return frozenset(
                s for s in all_states
                if any(s in ev(f.body, {**v, f.var: d}, V)
                       for d in sorted(_state_adom(ts, s))))
        if isinstance(f, MuForall):
            return frozenset(
                s for s in all_states
                if all(s in ev(f.body, {**v, f.var: d}, V)
                       for d in sorted(_state_adom(ts, s))))
        if isinstance(f, MuModality):
            inner = ev(f.body, v, V)
            if f.second is Step.DIAMOND:
                second = frozenset(s for s in all_states
                                   if any(t in inner for t in succ[s]))
            else:
                second = frozenset(s for s in all_states
                                   if all(t in inner for t in succ[s]))
            if f.first is Step.DIAMOND:
                return frozenset(s for s in all_states
                                 if any(t in second for t in succ[s]))
            return frozenset(s for s in all_states
                             if all(t in second for t in succ[s]))
        if isinstance(f, (MuLeast, MuGreatest)):
            least = isinstance(f, MuLeast)
            if len(all_states) <= 12:
                ordered = sorted(all_states)
                chosen = all_states if least else frozenset()
                for size in range(len(ordered) + 1):
                    for combo in itertools.combinations(ordered, size):
                        candidate = frozenset(combo)
                        image = ev(f.body, v, {**V, f.var: candidate})
                        if least and image <= candidate:
                            chosen = chosen & candidate
                        elif not least and candidate <= image:
                            chosen = chosen | candidate
                return chosen
            bottom_up: frozenset[str] = frozenset()
            while True:
                step = ev(f.body, v, {**V, f.var: bottom_up})
                if step == bottom_up:
                    break
                bottom_up = step
            top_down = all_states
            while True:
                step = ev(f.body, v, {**V, f.var: top_down})
                if step == top_down:
                    break
                top_down = step
            if least and bottom_up != top_down and not bottom_up <= top_down:
                raise SpecificationError("fixpoint cross-check failed")
            return bottom_up if least else top_down
        raise TypeError(f"not a formula: {f!r}")

    return ev(phi, dict(v or {}), dict(V or {}))
