"""Seeded random generators shared by the differential test suites."""

from __future__ import annotations

import random

from ckab.context import (ContextState, CtxAnd, CtxAtom, CtxImplies, CtxNot,
                          CtxOr, DimensionDomain)
from ckab.dsl.spec import CkabSpec
from ckab.engine import EMPTY_SCMAP
from ckab.formula import (MU_FALSE, MU_TRUE, MuAnd, MuContext, MuExists,
                          MuForall, MuGreatest, MuImplies, MuLeast,
                          MuModality, MuNot, MuOr, MuQuery, MuVar, Step)
from ckab.kb import (ABox, ConceptInclusion, ConceptName, ConjunctiveQuery,
                     Const, ContextualizedTBox, ExistsRole, Fact,
                     Functionality, QueryAtom, Role, RoleInclusion, UCQ,
                     UcqAtom, Var)
from ckab.statespace import MARKER_FACT, Phase, SystemState, TransitionSystem

from oracles import ChaseOverflow, chase

# ---------------------------------------------------------------------------
# Context material.

def random_domain(rng: random.Random, name: str, max_values: int = 6) -> DimensionDomain:
    n = rng.randint(1, max_values)
    values = [f"{name}v{i}" for i in range(n)]
    edges = []
    for i in range(1, n):
        parent = values[rng.randrange(i)]
        edges.append((values[i], parent))
    return DimensionDomain(name, values[0], edges)


def random_domains(rng: random.Random, max_dims: int = 4,
                   max_values: int = 6) -> list[DimensionDomain]:
    return [random_domain(rng, f"d{i}", max_values)
            for i in range(rng.randint(1, max_dims))]


def random_context(rng: random.Random, domains) -> ContextState:
    return ContextState.of({d.name: rng.choice(sorted(d.values))
                            for d in domains})


def random_ctx_expr(rng: random.Random, domains, depth: int = 5):
    if depth == 0 or rng.random() < 0.35:
        dom = rng.choice(domains)
        return CtxAtom(dom.name, rng.choice(sorted(dom.values)))
    kind = rng.choice(("not", "and", "or", "implies"))
    if kind == "not":
        return CtxNot(random_ctx_expr(rng, domains, depth - 1))
    left = random_ctx_expr(rng, domains, depth - 1)
    right = random_ctx_expr(rng, domains, depth - 1)
    return {"and": CtxAnd, "or": CtxOr, "implies": CtxImplies}[kind](left, right)


# ---------------------------------------------------------------------------
# Knowledge bases and queries.

KB_CONCEPTS = ("A", "B", "C", "D")
KB_ROLES = ("P", "R")
KB_CONSTANTS = ("a", "b", "c", "d", "e")


def _random_basic_concept(rng: random.Random):
    if rng.random() < 0.6:
        return ConceptName(rng.choice(KB_CONCEPTS))
    return ExistsRole(Role(rng.choice(KB_ROLES), rng.random() < 0.5))


def random_tbox(rng: random.Random, max_assertions: int = 6):
    out = []
    for _ in range(rng.randint(0, max_assertions)):
        pick = rng.random()
        if pick < 0.45:
            out.append(ConceptInclusion(_random_basic_concept(rng),
                                        _random_basic_concept(rng),
                                        negated=rng.random() < 0.3))
        elif pick < 0.75:
            out.append(RoleInclusion(Role(rng.choice(KB_ROLES), rng.random() < 0.5),
                                     Role(rng.choice(KB_ROLES), rng.random() < 0.5),
                                     negated=rng.random() < 0.3))
        else:
            out.append(Functionality(Role(rng.choice(KB_ROLES),
                                          rng.random() < 0.5)))
    return tuple(out)


def random_abox(rng: random.Random, max_facts: int = 10) -> ABox:
    facts = set()
    for _ in range(rng.randint(1, max_facts)):
        if rng.random() < 0.5:
            facts.add(Fact(rng.choice(KB_CONCEPTS), (rng.choice(KB_CONSTANTS),)))
        else:
            facts.add(Fact(rng.choice(KB_ROLES),
                           (rng.choice(KB_CONSTANTS), rng.choice(KB_CONSTANTS))))
    return ABox(frozenset(facts))


def random_terminating_kb(rng: random.Random, cap: int = 400):
    """Rejection-sample a knowledge base whose chase stays under the cap."""
    while True:
        tbox = random_tbox(rng)
        abox = random_abox(rng)
        try:
            chase(tbox, abox, cap)
        except ChaseOverflow:
            continue
        return tbox, abox


def random_ucq(rng: random.Random, max_atoms: int = 3,
               max_free: int = 2) -> UCQ:
    free = tuple(("x", "y")[:rng.randint(0, max_free)])
    pool = list(free) + ["z", "w"]
    disjuncts = []
    for _ in range(rng.randint(1, 2)):
        atoms = []
        for _ in range(rng.randint(1, max_atoms)):
            if rng.random() < 0.5:
                atoms.append(QueryAtom(rng.choice(KB_CONCEPTS),
                                       (_random_term(rng, pool),)))
            else:
                atoms.append(QueryAtom(rng.choice(KB_ROLES),
                                       (_random_term(rng, pool),
                                        _random_term(rng, pool))))
        # every free variable must occur in the disjunct
        for i, x in enumerate(free):
            if not any(isinstance(t, Var) and t.name == x
                       for a in atoms for t in a.args):
                atom = atoms[i % len(atoms)]
                args = list(atom.args)
                args[rng.randrange(len(args))] = Var(x)
                atoms[i % len(atoms)] = QueryAtom(atom.predicate, tuple(args))
        disjuncts.append(ConjunctiveQuery(tuple(Var(x) for x in free),
                                          tuple(atoms)))
    return UCQ(free, tuple(disjuncts))


def _random_term(rng: random.Random, pool):
    if rng.random() < 0.15:
        return Const(rng.choice(KB_CONSTANTS))
    return Var(rng.choice(pool))


# ---------------------------------------------------------------------------
# Random alternating transition systems and temporal formulas.

TS_DOMAIN = DimensionDomain("d", "top", [("u", "top"), ("v", "top")])
TS_CONCEPTS = ("G", "H")
TS_CONSTANTS = ("a", "b")


def _ts_spec() -> CkabSpec:
    return CkabSpec(
        dimensions=(TS_DOMAIN,),
        concepts=frozenset(TS_CONCEPTS),
        roles=frozenset(),
        constants=frozenset(),
        services=frozenset(),
        ctbox=ContextualizedTBox(()),
        initial_abox=ABox(frozenset({Fact("G", ("a",))})),
        actions=(),
        process=(),
        initial_context=ContextState.of({"d": "top"}),
        context_rules=(),
    )


def random_ts(rng: random.Random, max_states: int = 8) -> TransitionSystem:
    """A strictly alternating system with random small fact sets and
    contexts attached to the states."""
    n_stable = rng.randint(1, max(1, max_states // 2))
    n_inter = rng.randint(1, max_states - n_stable) if max_states > n_stable else 1

    def random_facts():
        facts = set()
        for concept in TS_CONCEPTS:
            for constant in TS_CONSTANTS:
                if rng.random() < 0.4:
                    facts.add(Fact(concept, (constant,)))
        return facts

    spec = _ts_spec()
    theory = spec.theory()
    states: dict[str, SystemState] = {}
    stable_ids, inter_ids = [], []
    for i in range(n_stable):
        ctx = ContextState.of({"d": rng.choice(("top", "u", "v"))})
        state = SystemState(ABox(frozenset(random_facts())), EMPTY_SCMAP,
                            ctx, Phase.STABLE)
        sid = f"s{i}"
        states[sid] = state
        stable_ids.append(sid)
    for i in range(n_inter):
        ctx = ContextState.of({"d": rng.choice(("top", "u", "v"))})
        state = SystemState(ABox(frozenset(random_facts()) | {MARKER_FACT}),
                            EMPTY_SCMAP, ctx, Phase.INTERMEDIATE)
        iid = f"i{i}"
        states[iid] = state
        inter_ids.append(iid)
    edges = set()
    for sid in stable_ids:
        for iid in inter_ids:
            if rng.random() < 0.45:
                edges.add((sid, iid))
    for iid in inter_ids:
        for sid in stable_ids:
            if rng.random() < 0.45:
                edges.add((iid, sid))
    ts = TransitionSystem(spec, theory, states, stable_ids[0], edges,
                          tuple(TS_CONSTANTS), 0)
    ts.stats.state_count = len(states)
    ts.stats.edge_count = len(edges)
    return ts


def _closed_query(rng: random.Random) -> MuQuery:
    concept = rng.choice(TS_CONCEPTS)
    if rng.random() < 0.5:
        constant = rng.choice(TS_CONSTANTS)
        ucq = UCQ((), (ConjunctiveQuery(
            (), (QueryAtom(concept, (Const(constant),)),)),))
    else:
        ucq = UCQ((), (ConjunctiveQuery(
            (), (QueryAtom(concept, (Var("z"),)),)),))
    return MuQuery(UcqAtom(ucq))


def _open_query(rng: random.Random, var: str) -> MuQuery:
    concept = rng.choice(TS_CONCEPTS)
    ucq = UCQ((var,), (ConjunctiveQuery(
        (Var(var),), (QueryAtom(concept, (Var(var),)),)),))
    return MuQuery(UcqAtom(ucq))


def random_formula(rng: random.Random, depth: int = 4,
                   max_fixpoints: int = 2) -> "MuFormula":
    budget = [max_fixpoints]

    def atom(ind, fix):
        choices = ["query", "ctx", "true", "false"]
        if fix:
            choices.extend(["var"] * 2)
        if ind:
            choices.append("open")
        kind = rng.choice(choices)
        if kind == "var":
            return MuVar(rng.choice(fix))
        if kind == "open":
            return _open_query(rng, rng.choice(ind))
        if kind == "query":
            return _closed_query(rng)
        if kind == "ctx":
            return MuContext(CtxAtom("d", rng.choice(("top", "u", "v"))))
        return MU_TRUE if kind == "true" else MU_FALSE

    def gen(d, ind, fix):
        if d == 0:
            return atom(ind, fix)
        kinds = ["atom", "and", "or", "modal", "modal"]
        if budget[0] > 0:
            kinds.extend(["mu", "nu"])
        if len(ind) < 2:
            kinds.append("quant")
        kinds.append("not")
        kinds.append("implies")
        kind = rng.choice(kinds)
        if kind == "atom":
            return atom(ind, fix)
        if kind == "and":
            return MuAnd(gen(d - 1, ind, fix), gen(d - 1, ind, fix))
        if kind == "or":
            return MuOr(gen(d - 1, ind, fix), gen(d - 1, ind, fix))
        if kind == "modal":
            return MuModality(rng.choice((Step.DIAMOND, Step.BOX)),
                              rng.choice((Step.DIAMOND, Step.BOX)),
                              gen(d - 1, ind, fix))
        if kind == "not":
            # negation only over subformulas without fixpoint variables,
            # which keeps every fixpoint body monotone
            return MuNot(gen(d - 1, ind, ()))
        if kind == "implies":
            return MuImplies(gen(d - 1, ind, ()), gen(d - 1, ind, fix))
        if kind == "quant":
            var = f"x{len(ind)}"
            ctor = MuExists if rng.random() < 0.5 else MuForall
            return ctor(var, gen(d - 1, ind + (var,), fix))
        budget[0] -= 1
        var = f"Z{budget[0]}"
        ctor = MuLeast if kind == "mu" else MuGreatest
        return ctor(var, gen(d - 1, ind, fix + (var,)))

    return gen(depth, (), ())
