"""Independent reference implementations used only by the tests.

Everything here recomputes results from first principles, staying away
from the code paths under test: truth tables for context entailment, a
chase with labelled nulls for certain answers, and exhaustive cycle
enumeration for the dependency-graph analysis.
"""

from __future__ import annotations

import itertools

from ckab.context import (ContextState, CtxAnd, CtxAtom, CtxFalse,
                          CtxImplies, CtxNot, CtxOr, CtxTrue)
from ckab.kb import (ABox, ConceptInclusion, ConceptName, Const, ExistsRole,
                     Fact, Functionality, Role, RoleInclusion, UCQ)

NULL_PREFIX = "~n"


class ChaseOverflow(Exception):
    pass


# ---------------------------------------------------------------------------
# Context entailment via truth tables.

def oracle_eval(expr, true_atoms) -> bool:
    if isinstance(expr, CtxAtom):
        return (expr.dimension, expr.value) in true_atoms
    if isinstance(expr, CtxNot):
        return not oracle_eval(expr.operand, true_atoms)
    if isinstance(expr, CtxAnd):
        return oracle_eval(expr.left, true_atoms) and oracle_eval(expr.right, true_atoms)
    if isinstance(expr, CtxOr):
        return oracle_eval(expr.left, true_atoms) or oracle_eval(expr.right, true_atoms)
    if isinstance(expr, CtxImplies):
        return (not oracle_eval(expr.left, true_atoms)) or oracle_eval(expr.right, true_atoms)
    if isinstance(expr, CtxTrue):
        return True
    if isinstance(expr, CtxFalse):
        return False
    raise TypeError(expr)


def _theory_formulas(domains):
    """(implication pairs, disjointness pairs) derived straight from the
    trees, without consulting the theory builder under test."""
    implications = []
    disjointness = []
    for dom in domains:
        for child in sorted(dom.values):
            parent = dom.parent_of(child)
            if parent is not None:
                implications.append(((dom.name, child), (dom.name, parent)))
        by_parent: dict[str, list[str]] = {}
        for child in sorted(dom.values):
            parent = dom.parent_of(child)
            if parent is not None:
                by_parent.setdefault(parent, []).append(child)
        for siblings in by_parent.values():
            for v1 in siblings:
                for v2 in siblings:
                    if v1 != v2:
                        disjointness.append(((dom.name, v1), (dom.name, v2)))
    return implications, disjointness


def _satisfies_theory(true_atoms, implications, disjointness) -> bool:
    for lower, upper in implications:
        if lower in true_atoms and upper not in true_atoms:
            return False
    for a1, a2 in disjointness:
        if a1 in true_atoms and a2 in true_atoms:
            return False
    return True


def tt_models(domains, ctx: ContextState):
    """All models of context + theory by joint enumeration over every
    subset of the full atom set.  Exponential; keep total values small."""
    atoms = sorted((d.name, v) for d in domains for v in d.values)
    implications, disjointness = _theory_formulas(domains)
    ctx_atoms = set(ctx.assignments)
    models = []
    for bits in itertools.product((False, True), repeat=len(atoms)):
        true_atoms = frozenset(a for a, b in zip(atoms, bits) if b)
        if not ctx_atoms <= true_atoms:
            continue
        if _satisfies_theory(true_atoms, implications, disjointness):
            models.append(true_atoms)
    return models


def tt_entails(domains, ctx: ContextState, expr) -> bool:
    return all(oracle_eval(expr, m) for m in tt_models(domains, ctx))


def factored_models(domains, ctx: ContextState):
    """Same model set as tt_models, computed dimension by dimension: the
    theory and the context never connect two dimensions, so their models
    multiply."""
    per_dim = []
    for dom in sorted(domains, key=lambda d: d.name):
        implications, disjointness = _theory_formulas([dom])
        atoms = sorted((dom.name, v) for v in dom.values)
        assigned = (dom.name, ctx.value(dom.name))
        dim_models = []
        for bits in itertools.product((False, True), repeat=len(atoms)):
            true_atoms = frozenset(a for a, b in zip(atoms, bits) if b)
            if assigned not in true_atoms:
                continue
            if _satisfies_theory(true_atoms, implications, disjointness):
                dim_models.append(true_atoms)
        per_dim.append(dim_models)
    for combo in itertools.product(*per_dim):
        yield frozenset().union(*combo) if combo else frozenset()


def factored_entails(domains, ctx: ContextState, expr) -> bool:
    return all(oracle_eval(expr, m) for m in factored_models(domains, ctx))


# ---------------------------------------------------------------------------
# Chase with labelled nulls.

def _role_pairs(facts, role: Role):
    for fact in facts:
        if fact.predicate == role.name and len(fact.args) == 2:
            a, b = fact.args
            yield (b, a) if role.inverse else (a, b)


def _members(facts, concept):
    if isinstance(concept, ConceptName):
        for fact in facts:
            if fact.predicate == concept.name and len(fact.args) == 1:
                yield fact.args[0]
    else:
        for subject, _ in _role_pairs(facts, concept.role):
            yield subject


def _role_fact(role: Role, subject, obj) -> Fact:
    if role.inverse:
        return Fact(role.name, (obj, subject))
    return Fact(role.name, (subject, obj))


def chase(tbox, abox: ABox, cap: int = 1000) -> frozenset[Fact]:
    """Saturate the facts under the positive inclusions; existential
    consequences get fresh labelled nulls unless a witness already exists.
    Raises ChaseOverflow loudly when the fact count passes the cap."""
    facts = set(abox.facts)
    positives = [a for a in tbox
                 if isinstance(a, (ConceptInclusion, RoleInclusion))
                 and not a.negated]
    fresh = itertools.count()

    def apply_full() -> bool:
        added = False
        for a in positives:
            new = []
            if isinstance(a, RoleInclusion):
                for pair in list(_role_pairs(facts, a.sub)):
                    new.append(_role_fact(a.sup, *pair))
            elif isinstance(a.sup, ConceptName):
                for member in list(_members(facts, a.sub)):
                    new.append(Fact(a.sup.name, (member,)))
            for fact in new:
                if fact not in facts:
                    facts.add(fact)
                    added = True
        return added

    def apply_existential() -> bool:
        added = False
        for a in positives:
            if not isinstance(a, ConceptInclusion) or not isinstance(a.sup, ExistsRole):
                continue
            role = a.sup.role
            with_witness = {s for s, _ in _role_pairs(facts, role)}
            for member in sorted(set(_members(facts, a.sub))):
                if member in with_witness:
                    continue
                null = f"{NULL_PREFIX}{next(fresh)}"
                facts.add(_role_fact(role, member, null))
                with_witness.add(member)
                added = True
        return added

    while True:
        while apply_full():
            if len(facts) > cap:
                raise ChaseOverflow(f"chase exceeded {cap} facts")
        if not apply_existential():
            return frozenset(facts)
        if len(facts) > cap:
            raise ChaseOverflow(f"chase exceeded {cap} facts")


def is_null(value: str) -> bool:
    return value.startswith(NULL_PREFIX)


def _match_cq(cq, facts) -> set[tuple[str, ...]]:
    """Homomorphic evaluation over the chased facts, nulls included."""
    results: set[tuple[str, ...]] = set()
    facts = list(facts)

    def go(i, binding):
        if i == len(cq.atoms):
            row = []
            for term in cq.head:
                if isinstance(term, Const):
                    row.append(term.name)
                else:
                    if term.name not in binding:
                        return
                    row.append(binding[term.name])
            results.add(tuple(row))
            return
        atom = cq.atoms[i]
        for fact in facts:
            if fact.predicate != atom.predicate or len(fact.args) != len(atom.args):
                continue
            local = dict(binding)
            ok = True
            for term, value in zip(atom.args, fact.args):
                if isinstance(term, Const):
                    if term.name != value:
                        ok = False
                        break
                else:
                    if local.setdefault(term.name, value) != value:
                        ok = False
                        break
            if ok:
                go(i + 1, local)

    go(0, {})
    return results


def chase_certain_answers(q: UCQ, tbox, abox: ABox,
                          cap: int = 1000) -> set[tuple[str, ...]]:
    """Answers over the chase, discarding any row that touches a null or
    escapes the active domain of the original facts."""
    chased = chase(tbox, abox, cap)
    adom = abox.adom()
    out: set[tuple[str, ...]] = set()
    for cq in q.disjuncts:
        for row in _match_cq(cq, chased):
            if all(not is_null(v) and v in adom for v in row):
                out.add(row)
    return out


def chase_consistent(tbox, abox: ABox, cap: int = 1000) -> bool:
    """Satisfiable iff the chase triggers no negative inclusion and no
    functionality violation between two distinct named fillers."""
    try:
        chased = chase(tbox, abox, cap)
    except ChaseOverflow:
        raise
    for a in tbox:
        if isinstance(a, ConceptInclusion) and a.negated:
            if set(_members(chased, a.sub)) & set(_members(chased, a.sup)):
                return False
        elif isinstance(a, RoleInclusion) and a.negated:
            if set(_role_pairs(chased, a.sub)) & set(_role_pairs(chased, a.sup)):
                return False
        elif isinstance(a, Functionality):
            fillers: dict[str, set[str]] = {}
            for subject, obj in _role_pairs(chased, a.role):
                if is_null(obj):
                    continue  # an unnamed filler can collapse onto any other
                fillers.setdefault(subject, set()).add(obj)
                if len(fillers[subject]) > 1:
                    return False
    return True


# ---------------------------------------------------------------------------
# Exhaustive cycle search over dependency graphs.

def has_special_cycle(nodes, normal_edges, special_edges) -> bool:
    """Enumerate every simple cycle and look for a special edge on it."""
    edges = [(u, v, False) for u, v in sorted(normal_edges)]
    edges += [(u, v, True) for u, v in sorted(special_edges)]
    out: dict = {}
    for u, v, special in edges:
        out.setdefault(u, []).append((v, special))

    found = []

    def walk(start, node, visited, any_special):
        for nxt, special in out.get(node, ()):
            if nxt == start:
                if any_special or special:
                    found.append(True)
                    return True
            elif nxt not in visited:
                if walk(start, nxt, visited | {nxt}, any_special or special):
                    return True
        return False

    for node in sorted(nodes):
        if walk(node, node, {node}, False):
            return True
    return False
