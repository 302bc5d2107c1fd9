"""Single-step execution semantics.

An action application selects bindings with its positive body (filtered by
an optional negative condition), instantiates the head templates, and may
mention service calls whose results inject external values.  Within one run
a service call is deterministic: the first result is remembered in a call
map and reused forever after.  Context evolution is a separate step that
rewrites the dimension assignment and leaves data untouched.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .context import (ContextExpr, ContextState, ContextTheory,
                      PartialAssignment, apply_evolution, entails)
from .errors import SpecificationError
from .kb import (ABox, ECQ, ECQ_TRUE, EcqAnd, EcqTrue, Fact, TBoxAssertion,
                 UCQ, UcqAtom, answer_ecq, holds_ecq, substitute_ecq,
                 substitute_ucq)


# ---------------------------------------------------------------------------
# Terms appearing in effect heads and pending fact sets.

@dataclass(frozen=True)
class CallTerm:
    """A service-call term; arguments are constants, parameter/variable
    names (in templates), or nested call terms."""

    function: str
    args: tuple["HeadTerm", ...]

    def __str__(self) -> str:
        return f"{self.function}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class HeadVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class HeadConst:
    name: str

    def __str__(self) -> str:
        return self.name


HeadTerm = Union[HeadVar, HeadConst, CallTerm]


@dataclass(frozen=True)
class GroundCall:
    """A service call whose arguments are constants or other ground calls."""

    function: str
    args: tuple[Union[str, "GroundCall"], ...]

    def __str__(self) -> str:
        return f"{self.function}({', '.join(str(a) for a in self.args)})"

    def is_flat(self) -> bool:
        return all(isinstance(a, str) for a in self.args)


@dataclass(frozen=True)
class PendingFact:
    """A fact whose arguments may still contain ground service calls."""

    predicate: str
    args: tuple[Union[str, GroundCall], ...]

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(str(a) for a in self.args)})"

    def ground(self) -> Fact:
        if any(isinstance(a, GroundCall) for a in self.args):
            raise SpecificationError(f"unresolved service call in {self}")
        return Fact(self.predicate, self.args)  # type: ignore[arg-type]


@dataclass(frozen=True)
class FactTemplate:
    predicate: str
    args: tuple[HeadTerm, ...]

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class EffectSpec:
    """body selects bindings, filter prunes them, head lists the produced
    fact templates.  Filter-free effects carry the trivial filter."""

    body: UCQ
    head: tuple[FactTemplate, ...]
    filter: ECQ = ECQ_TRUE


@dataclass(frozen=True)
class ActionSpec:
    name: str
    params: tuple[str, ...]
    effects: tuple[EffectSpec, ...]

    def call_templates(self) -> tuple[CallTerm, ...]:
        """Distinct service-call templates mentioned by the heads."""
        out: dict[CallTerm, None] = {}

        def visit(term: HeadTerm) -> None:
            if isinstance(term, CallTerm):
                out.setdefault(term, None)
                for a in term.args:
                    visit(a)

        for effect in self.effects:
            for template in effect.head:
                for a in template.args:
                    visit(a)
        return tuple(out)


@dataclass(frozen=True)
class CondActionRule:
    """Fires an action when the query answers the parameters and the guard
    holds in the current context."""

    query: ECQ
    guard: ContextExpr
    action: str


@dataclass(frozen=True)
class ContextEvolutionRule:
    query: ECQ  # boolean
    guard: ContextExpr
    head: PartialAssignment


# ---------------------------------------------------------------------------
# Service call maps.

@dataclass(frozen=True)
class ServiceCallMap:
    """Partial map from ground service calls to constants.

    Extension returns a new map; existing entries are never rewritten, which
    realizes the per-run determinism of services.
    """

    entries: tuple[tuple[GroundCall, str], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[GroundCall, str]) -> "ServiceCallMap":
        return cls(tuple(sorted(mapping.items(), key=lambda kv: str(kv[0]))))

    def get(self, call: GroundCall) -> str | None:
        for c, v in self.entries:
            if c == call:
                return v
        return None

    def extend(self, theta: Mapping[GroundCall, str]) -> "ServiceCallMap":
        merged = dict(self.entries)
        for call, value in theta.items():
            existing = merged.get(call)
            if existing is not None and existing != value:
                raise SpecificationError(
                    f"service call {call} already pinned to {existing!r}")
            merged[call] = value
        return ServiceCallMap.of(merged)

    def as_dict(self) -> dict[GroundCall, str]:
        return dict(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{c}={v}" for c, v in self.entries) + "}"


EMPTY_SCMAP = ServiceCallMap()


# ---------------------------------------------------------------------------
# Executability and effect application.

def executable_substitutions(rule: CondActionRule, action: ActionSpec,
                             abox: ABox, ctx: ContextState,
                             theory: ContextTheory,
                             tbox: Iterable[TBoxAssertion]) -> list[dict[str, str]]:
    """All parameter substitutions under which the rule fires the action."""
    if not entails(ctx, theory, rule.guard):
        return []
    rows = answer_ecq(rule.query, tbox, abox, free_order=action.params)
    return [dict(zip(action.params, row)) for row in sorted(rows)]


def executable(abox: ABox, ctx: ContextState, theory: ContextTheory,
               tbox: Iterable[TBoxAssertion], rule: CondActionRule,
               action: ActionSpec, sigma: Mapping[str, str]) -> bool:
    """Does the rule fire the action under this parameter substitution?"""
    if rule.action != action.name:
        return False
    if not entails(ctx, theory, rule.guard):
        return False
    rows = answer_ecq(rule.query, tuple(tbox), abox, free_order=action.params)
    return tuple(sigma[p] for p in action.params) in rows


def _instantiate(term: HeadTerm, binding: Mapping[str, str]) -> Union[str, GroundCall]:
    if isinstance(term, HeadConst):
        return term.name
    if isinstance(term, HeadVar):
        try:
            return binding[term.name]
        except KeyError:
            raise SpecificationError(f"unbound head variable {term.name!r}")
    return GroundCall(term.function,
                      tuple(_instantiate(a, binding) for a in term.args))


def do(tbox: Iterable[TBoxAssertion], abox: ABox, action: ActionSpec,
       sigma: Mapping[str, str]) -> frozenset[PendingFact]:
    """Union over effects of head instantiations, one per binding answering
    the effect's body-and-filter under the given parameter substitution."""
    tbox = tuple(tbox)
    pending: set[PendingFact] = set()
    for effect in action.effects:
        body = substitute_ucq(effect.body, sigma)
        filt = substitute_ecq(effect.filter, sigma)
        combined = UcqAtom(body) if isinstance(filt, EcqTrue) \
            else EcqAnd(UcqAtom(body), filt)
        own_free = body.free
        rows = answer_ecq(combined, tbox, abox, free_order=own_free)
        for row in sorted(rows):
            binding = dict(sigma)
            binding.update(zip(own_free, row))
            for template in effect.head:
                pending.add(PendingFact(
                    template.predicate,
                    tuple(_instantiate(t, binding) for t in template.args)))
    return frozenset(pending)


def calls(pending: Iterable[PendingFact]) -> tuple[GroundCall, ...]:
    """Every ground service call occurring in the facts, innermost first."""
    out: dict[GroundCall, None] = {}

    def visit(arg: Union[str, GroundCall]) -> None:
        if isinstance(arg, GroundCall):
            for a in arg.args:
                visit(a)
            out.setdefault(arg, None)

    for fact in sorted(pending, key=str):
        for arg in fact.args:
            visit(arg)
    return tuple(out)


def _innermost(pending: Iterable[PendingFact]) -> list[GroundCall]:
    flat = {c for c in calls(pending) if c.is_flat()}
    return sorted(flat, key=str)


def _substitute_calls(pending: frozenset[PendingFact],
                      theta: Mapping[GroundCall, str]) -> frozenset[PendingFact]:
    def sub(arg: Union[str, GroundCall]) -> Union[str, GroundCall]:
        if isinstance(arg, GroundCall):
            resolved = GroundCall(arg.function, tuple(sub(a) for a in arg.args))
            value = theta.get(resolved)
            return value if value is not None else resolved
        return arg

    return frozenset(PendingFact(f.predicate, tuple(sub(a) for a in f.args))
                     for f in pending)


def resolve_calls(pending: frozenset[PendingFact], scmap: ServiceCallMap,
                  domain: Sequence[str]) -> list[tuple[frozenset[Fact], ServiceCallMap,
                                                       dict[GroundCall, str]]]:
    """All ways of replacing service calls by values from the domain that
    agree with the call map.  Nested calls resolve inside out, so an outer
    call is evaluated on the values of its arguments.  Deterministic order:
    calls sorted textually, domain values in the order given."""
    results: list[tuple[frozenset[Fact], ServiceCallMap, dict[GroundCall, str]]] = []

    def stage(facts: frozenset[PendingFact], m: ServiceCallMap,
              theta: dict[GroundCall, str]) -> None:
        ready = _innermost(facts)
        if not ready:
            results.append((frozenset(f.ground() for f in facts), m, theta))
            return
        choices = []
        for call in ready:
            pinned = m.get(call)
            choices.append([pinned] if pinned is not None else list(domain))
        for combo in product(*choices):
            step = dict(zip(ready, combo))
            stage(_substitute_calls(facts, step), m.extend(step), {**theta, **step})

    stage(pending, scmap, {})
    return results


def evaluations(pending: frozenset[PendingFact], scmap: ServiceCallMap,
                domain: Sequence[str]) -> Iterator[dict[GroundCall, str]]:
    """The substitutions from ground calls to domain values compatible with
    the call map (each total on the calls it resolves)."""
    if not domain and _innermost(pending):
        raise SpecificationError("empty value domain with pending service calls")
    for _, _, theta in resolve_calls(pending, scmap, domain):
        yield theta


def action_step(abox: ABox, scmap: ServiceCallMap, tbox: Iterable[TBoxAssertion],
                action: ActionSpec, sigma: Mapping[str, str],
                domain: Sequence[str]) -> list[tuple[ABox, ServiceCallMap]]:
    """Successor data states of one action application: the instantiated
    head facts with every admissible service-call resolution, and the call
    map extended by the new results.  No consistency filtering here."""
    pending = do(tbox, abox, action, sigma)
    out: list[tuple[ABox, ServiceCallMap]] = []
    seen = set()
    for facts, m, _ in resolve_calls(pending, scmap, domain):
        new_abox = ABox(facts)
        key = (new_abox, m)
        if key not in seen:
            seen.add(key)
            out.append((new_abox, m))
    return out


def context_step(abox: ABox, scmap: ServiceCallMap, ctx: ContextState,
                 rules: Iterable[ContextEvolutionRule], theory: ContextTheory,
                 tbox: Iterable[TBoxAssertion]) -> list[ContextState]:
    """Successor contexts: one per firing evolution rule, with unmentioned
    dimensions persisting.  Data and call map are untouched by this step."""
    tbox = tuple(tbox)
    out: dict[ContextState, None] = {}
    for rule in rules:
        if not entails(ctx, theory, rule.guard):
            continue
        if not holds_ecq(rule.query, tbox, abox):
            continue
        out.setdefault(apply_evolution(ctx, rule.head), None)
    return sorted(out, key=lambda c: c.assignments)


# ---------------------------------------------------------------------------
# Concrete service backends for simulation.

class ServiceBackend:
    """Resolves one service call to one constant.

    Must be a pure function of (function name, argument values) for the
    duration of a run.
    """

    def resolve(self, function: str, args: tuple[str, ...]) -> str:
        raise NotImplementedError


class TableServiceBackend(ServiceBackend):
    def __init__(self, table: Mapping[tuple[str, tuple[str, ...]], str],
                 default: str | None = None):
        self._table = dict(table)
        self._default = default

    def resolve(self, function: str, args: tuple[str, ...]) -> str:
        value = self._table.get((function, args))
        if value is None:
            if self._default is None:
                raise SpecificationError(
                    f"service table has no entry for {function}({', '.join(args)})")
            return self._default
        return value


class HashServiceBackend(ServiceBackend):
    """Derives a fresh-looking constant from a digest of the call; the same
    call always yields the same constant, across invocations and runs."""

    def __init__(self, seed: int = 0):
        self._seed = seed

    def resolve(self, function: str, args: tuple[str, ...]) -> str:
        payload = f"{self._seed}|{function}|{'|'.join(args)}".encode()
        digest = hashlib.sha256(payload).hexdigest()[:6]
        return f"{function}_{digest}"


def concrete_step(abox: ABox, scmap: ServiceCallMap, tbox: Iterable[TBoxAssertion],
                  action: ActionSpec, sigma: Mapping[str, str],
                  backend: ServiceBackend) -> tuple[ABox, ServiceCallMap]:
    """Single successor: every unpinned call is answered by the backend."""
    pending = do(tbox, abox, action, sigma)
    facts = pending
    m = scmap
    while True:
        ready = _innermost(facts)
        if not ready:
            break
        step = {}
        for call in ready:
            pinned = m.get(call)
            if pinned is None:
                pinned = backend.resolve(call.function, call.args)  # type: ignore[arg-type]
            step[call] = pinned
        m = m.extend(step)
        facts = _substitute_calls(facts, step)
    return ABox(frozenset(f.ground() for f in facts)), m
