"""Lightweight description-logic knowledge bases.

Concepts are either names or ``exists R`` over a (possibly inverse) role.
A TBox holds positive/negative inclusions between basic concepts or basic
roles plus role functionality.  Queries over a KB are answered under
certain-answer semantics by compiling the positive inclusions into the
query (backward rewriting with atom-replacement and unification steps) and
then evaluating the rewritten union of conjunctive queries directly over
the fact set.  First-order combinations of such queries are evaluated
classically with quantifiers ranging over the active domain.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .context import ContextExpr, ContextState, ContextTheory, entails
from .errors import SpecificationError

# Reserved vocabulary used to tag intermediate states of the transition
# system; the validator keeps these out of user specifications.
MARKER_CONCEPT = "State"
MARKER_CONSTANT = "inter"
RESERVED_CONSTANTS = frozenset({MARKER_CONSTANT})


# ---------------------------------------------------------------------------
# Vocabulary: roles, basic concepts, TBox assertions.

@dataclass(frozen=True)
class Role:
    name: str
    inverse: bool = False

    def inv(self) -> "Role":
        return Role(self.name, not self.inverse)

    def __str__(self) -> str:
        return self.name + ("^-" if self.inverse else "")


@dataclass(frozen=True)
class ConceptName:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ExistsRole:
    role: Role

    def __str__(self) -> str:
        return f"exists {self.role}"


BasicConcept = Union[ConceptName, ExistsRole]


@dataclass(frozen=True)
class ConceptInclusion:
    sub: BasicConcept
    sup: BasicConcept
    negated: bool = False  # negated=True reads: sub [= not sup

    def __str__(self) -> str:
        neg = "!" if self.negated else ""
        return f"{self.sub} [= {neg}{self.sup}"


@dataclass(frozen=True)
class RoleInclusion:
    sub: Role
    sup: Role
    negated: bool = False

    def __str__(self) -> str:
        neg = "!" if self.negated else ""
        return f"{self.sub} [= {neg}{self.sup}"


@dataclass(frozen=True)
class Functionality:
    role: Role

    def __str__(self) -> str:
        return f"funct({self.role})"


TBoxAssertion = Union[ConceptInclusion, RoleInclusion, Functionality]


def assertion_vocabulary(assertion: TBoxAssertion) -> tuple[set[str], set[str]]:
    """(concept names, role names) mentioned by one assertion."""
    concepts: set[str] = set()
    roles: set[str] = set()

    def basic(b: BasicConcept) -> None:
        if isinstance(b, ConceptName):
            concepts.add(b.name)
        else:
            roles.add(b.role.name)

    if isinstance(assertion, ConceptInclusion):
        basic(assertion.sub)
        basic(assertion.sup)
    elif isinstance(assertion, RoleInclusion):
        roles.add(assertion.sub.name)
        roles.add(assertion.sup.name)
    else:
        roles.add(assertion.role.name)
    return concepts, roles


@dataclass(frozen=True)
class ContextualizedTBox:
    """Finite set of TBox assertions, each guarded by a context expression."""

    assertions: tuple[tuple[TBoxAssertion, ContextExpr], ...]

    def vocabulary(self) -> tuple[frozenset[str], frozenset[str]]:
        """Concept and role names across all assertions, guard-independent."""
        concepts: set[str] = set()
        roles: set[str] = set()
        for assertion, _ in self.assertions:
            c, r = assertion_vocabulary(assertion)
            concepts |= c
            roles |= r
        return frozenset(concepts), frozenset(roles)


def tbox_in_context(ctbox: ContextualizedTBox, ctx: ContextState,
                    theory: ContextTheory) -> frozenset[TBoxAssertion]:
    """The assertions whose guards are entailed by the context."""
    return frozenset(
        assertion for assertion, guard in ctbox.assertions
        if entails(ctx, theory, guard)
    )


# ---------------------------------------------------------------------------
# Facts.

@dataclass(frozen=True)
class Fact:
    predicate: str
    args: tuple[str, ...]

    def __post_init__(self):
        if len(self.args) not in (1, 2):
            raise SpecificationError(
                f"fact {self.predicate} must have arity 1 or 2, got {len(self.args)}")

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(self.args)})"


@dataclass(frozen=True)
class ABox:
    facts: frozenset[Fact]

    @classmethod
    def of(cls, facts: Iterable[Fact]) -> "ABox":
        return cls(frozenset(facts))

    def adom(self) -> frozenset[str]:
        """All constants appearing in the facts."""
        return frozenset(c for f in self.facts for c in f.args)

    def __iter__(self) -> Iterator[Fact]:
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)

    def __str__(self) -> str:
        return "{" + ", ".join(sorted(str(f) for f in self.facts)) + "}"


EMPTY_ABOX = ABox(frozenset())


# ---------------------------------------------------------------------------
# Conjunctive queries and their unions.

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, Const]


@dataclass(frozen=True)
class QueryAtom:
    predicate: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class ConjunctiveQuery:
    """One disjunct: answer terms plus a conjunction of atoms.

    ``head`` has one term per answer position.  User-written queries have
    distinct variables there; rewriting may specialize positions to shared
    variables or constants.  Variables not in the head are existential.
    """

    head: tuple[Term, ...]
    atoms: tuple[QueryAtom, ...]

    def variables(self) -> set[str]:
        out = {t.name for t in self.head if isinstance(t, Var)}
        for atom in self.atoms:
            out.update(t.name for t in atom.args if isinstance(t, Var))
        return out

    def __str__(self) -> str:
        body = " & ".join(map(str, self.atoms)) if self.atoms else "true"
        return f"({', '.join(map(str, self.head))}) <- {body}"


@dataclass(frozen=True)
class UCQ:
    free: tuple[str, ...]
    disjuncts: tuple[ConjunctiveQuery, ...]

    def __post_init__(self):
        for cq in self.disjuncts:
            if len(cq.head) != len(self.free):
                raise SpecificationError(
                    "every disjunct must have one head term per free variable")

    def predicates(self) -> set[str]:
        return {a.predicate for cq in self.disjuncts for a in cq.atoms}

    @classmethod
    def single(cls, free: Sequence[str], atoms: Sequence[QueryAtom]) -> "UCQ":
        head = tuple(Var(x) for x in free)
        return cls(tuple(free), (ConjunctiveQuery(head, tuple(atoms)),))


def role_atom(role: Role, subject: Term, obj: Term) -> QueryAtom:
    """Atom for a role assertion, folding inverses into argument order."""
    if role.inverse:
        return QueryAtom(role.name, (obj, subject))
    return QueryAtom(role.name, (subject, obj))


def concept_atom(concept: BasicConcept, term: Term, fresh: "FreshVars") -> QueryAtom:
    if isinstance(concept, ConceptName):
        return QueryAtom(concept.name, (term,))
    return role_atom(concept.role, term, fresh.next())


class FreshVars:
    """Deterministic supply of variable names unused so far."""

    def __init__(self, used: Iterable[str] = ()):
        self._used = set(used)
        self._n = 0

    def next(self) -> Var:
        while True:
            name = f"_f{self._n}"
            self._n += 1
            if name not in self._used:
                self._used.add(name)
                return Var(name)


# ---------------------------------------------------------------------------
# First-order combinations of UCQ atoms.

class ECQ:
    __slots__ = ()


@dataclass(frozen=True)
class UcqAtom(ECQ):
    """An embedded UCQ, evaluated under certain-answer semantics."""
    query: UCQ


@dataclass(frozen=True)
class EcqNot(ECQ):
    operand: ECQ


@dataclass(frozen=True)
class EcqAnd(ECQ):
    left: ECQ
    right: ECQ


@dataclass(frozen=True)
class EcqOr(ECQ):
    left: ECQ
    right: ECQ


@dataclass(frozen=True)
class EcqExists(ECQ):
    var: str
    body: ECQ


@dataclass(frozen=True)
class EcqTrue(ECQ):
    pass


@dataclass(frozen=True)
class EcqFalse(ECQ):
    pass


ECQ_TRUE = EcqTrue()
ECQ_FALSE = EcqFalse()


def ecq_free_vars(q: ECQ) -> frozenset[str]:
    if isinstance(q, UcqAtom):
        return frozenset(q.query.free)
    if isinstance(q, EcqNot):
        return ecq_free_vars(q.operand)
    if isinstance(q, (EcqAnd, EcqOr)):
        return ecq_free_vars(q.left) | ecq_free_vars(q.right)
    if isinstance(q, EcqExists):
        return ecq_free_vars(q.body) - {q.var}
    return frozenset()


def ecq_predicates(q: ECQ) -> set[str]:
    if isinstance(q, UcqAtom):
        return q.query.predicates()
    if isinstance(q, EcqNot):
        return ecq_predicates(q.operand)
    if isinstance(q, (EcqAnd, EcqOr)):
        return ecq_predicates(q.left) | ecq_predicates(q.right)
    if isinstance(q, EcqExists):
        return ecq_predicates(q.body)
    return set()


def ecq_constants(q: ECQ) -> set[str]:
    if isinstance(q, UcqAtom):
        out = set()
        for cq in q.query.disjuncts:
            for t in cq.head:
                if isinstance(t, Const):
                    out.add(t.name)
            for atom in cq.atoms:
                out.update(t.name for t in atom.args if isinstance(t, Const))
        return out
    if isinstance(q, EcqNot):
        return ecq_constants(q.operand)
    if isinstance(q, (EcqAnd, EcqOr)):
        return ecq_constants(q.left) | ecq_constants(q.right)
    if isinstance(q, EcqExists):
        return ecq_constants(q.body)
    return set()


def substitute_ucq(q: UCQ, binding: Mapping[str, str]) -> UCQ:
    """Replace free variables by constants; bound positions drop from ``free``."""
    hit = [x for x in q.free if x in binding]
    if not hit:
        return q
    new_free = tuple(x for x in q.free if x not in binding)

    def sub_term(t: Term) -> Term:
        if isinstance(t, Var) and t.name in binding:
            return Const(binding[t.name])
        return t

    disjuncts = []
    for cq in q.disjuncts:
        head = tuple(sub_term(t) for i, t in enumerate(cq.head)
                     if q.free[i] not in binding)
        atoms = tuple(QueryAtom(a.predicate, tuple(sub_term(t) for t in a.args))
                      for a in cq.atoms)
        disjuncts.append(ConjunctiveQuery(head, atoms))
    return UCQ(new_free, tuple(disjuncts))


def substitute_ecq(q: ECQ, binding: Mapping[str, str]) -> ECQ:
    if isinstance(q, UcqAtom):
        return UcqAtom(substitute_ucq(q.query, binding))
    if isinstance(q, EcqNot):
        return EcqNot(substitute_ecq(q.operand, binding))
    if isinstance(q, EcqAnd):
        return EcqAnd(substitute_ecq(q.left, binding), substitute_ecq(q.right, binding))
    if isinstance(q, EcqOr):
        return EcqOr(substitute_ecq(q.left, binding), substitute_ecq(q.right, binding))
    if isinstance(q, EcqExists):
        inner = {k: v for k, v in binding.items() if k != q.var}
        return EcqExists(q.var, substitute_ecq(q.body, inner))
    return q


# ---------------------------------------------------------------------------
# Backward rewriting of a UCQ through the positive inclusions.

def positive_inclusions(tbox: Iterable[TBoxAssertion]) -> tuple[TBoxAssertion, ...]:
    out = []
    for a in tbox:
        if isinstance(a, (ConceptInclusion, RoleInclusion)) and not a.negated:
            out.append(a)
    return tuple(sorted(out, key=str))


def _occurrences(cq: ConjunctiveQuery) -> dict[str, int]:
    counts: dict[str, int] = {}
    for t in cq.head:
        if isinstance(t, Var):
            counts[t.name] = counts.get(t.name, 0) + 1
    for atom in cq.atoms:
        for t in atom.args:
            if isinstance(t, Var):
                counts[t.name] = counts.get(t.name, 0) + 1
    return counts


def _is_unbound(term: Term, counts: dict[str, int]) -> bool:
    # Unbound: a variable occurring exactly once and not in the head.
    return isinstance(term, Var) and counts.get(term.name, 0) == 1


def _applicable_rewrites(atom: QueryAtom, counts: dict[str, int],
                         inclusion: TBoxAssertion,
                         fresh: FreshVars) -> QueryAtom | None:
    """The atom obtained by resolving ``atom`` against one positive inclusion,
    or None when the inclusion does not apply."""
    if isinstance(inclusion, RoleInclusion):
        if len(atom.args) != 2 or inclusion.sup.name != atom.predicate:
            return None
        s, o = atom.args
        if inclusion.sup.inverse:
            s, o = o, s
        # now (s, o) is the pair in the orientation of the superrole
        return role_atom(inclusion.sub, s, o)
    if not isinstance(inclusion, ConceptInclusion):
        return None
    sup = inclusion.sup
    if isinstance(sup, ConceptName):
        if len(atom.args) != 1 or sup.name != atom.predicate:
            return None
        return concept_atom(inclusion.sub, atom.args[0], fresh)
    # sup = exists R with R over this predicate
    if len(atom.args) != 2 or sup.role.name != atom.predicate:
        return None
    subj, obj = atom.args
    if sup.role.inverse:
        subj, obj = obj, subj
    if not _is_unbound(obj, counts):
        return None
    return concept_atom(inclusion.sub, subj, fresh)


def _unify(a1: QueryAtom, a2: QueryAtom) -> dict[str, Term] | None:
    if a1.predicate != a2.predicate or len(a1.args) != len(a2.args):
        return None
    subst: dict[str, Term] = {}

    def walk(t: Term) -> Term:
        while isinstance(t, Var) and t.name in subst:
            t = subst[t.name]
        return t

    for t1, t2 in zip(a1.args, a2.args):
        t1, t2 = walk(t1), walk(t2)
        if t1 == t2:
            continue
        if isinstance(t1, Var):
            subst[t1.name] = t2
        elif isinstance(t2, Var):
            subst[t2.name] = t1
        else:
            return None

    def resolve(t: Term) -> Term:
        seen = set()
        while isinstance(t, Var) and t.name in subst:
            if t.name in seen:
                return t
            seen.add(t.name)
            t = subst[t.name]
        return t

    return {v: resolve(Var(v)) for v in subst}


def _apply_subst(cq: ConjunctiveQuery, subst: Mapping[str, Term]) -> ConjunctiveQuery:
    def sub(t: Term) -> Term:
        while isinstance(t, Var) and t.name in subst:
            nxt = subst[t.name]
            if nxt == t:
                break
            t = nxt
        return t

    head = tuple(sub(t) for t in cq.head)
    atoms = []
    for atom in cq.atoms:
        new = QueryAtom(atom.predicate, tuple(sub(t) for t in atom.args))
        if new not in atoms:
            atoms.append(new)
    return ConjunctiveQuery(head, tuple(atoms))


def _canonical(cq: ConjunctiveQuery) -> ConjunctiveQuery:
    """Rename variables positionally so equivalent disjuncts deduplicate."""
    for _ in range(3):
        renaming: dict[str, str] = {}

        def rename_term(t: Term) -> Term:
            if isinstance(t, Const):
                return t
            if t.name not in renaming:
                renaming[t.name] = f"_v{len(renaming)}"
            return Var(renaming[t.name])

        head = tuple(rename_term(t) for t in cq.head)
        atoms = tuple(QueryAtom(a.predicate, tuple(rename_term(t) for t in a.args))
                      for a in cq.atoms)
        ordered = tuple(sorted(set(atoms), key=str))
        new = ConjunctiveQuery(head, ordered)
        if new == cq:
            return new
        cq = new
    return cq


_rewrite_cache: dict[tuple, UCQ] = {}
_rewrite_lock = threading.Lock()


def rewrite_ucq(q: UCQ, tbox: Iterable[TBoxAssertion]) -> UCQ:
    """Compile the positive inclusions into the query.

    The result is a union of conjunctive queries whose plain evaluation over
    any consistent fact set coincides with the certain answers of ``q`` over
    the knowledge base.  Resolution steps replace an atom via an applicable
    inclusion; unification steps merge two atoms so that further inclusions
    become applicable.
    """
    pis = positive_inclusions(tbox)
    key = (q, pis)
    with _rewrite_lock:
        cached = _rewrite_cache.get(key)
    if cached is not None:
        return cached

    seen: dict[ConjunctiveQuery, None] = {}
    work = [_canonical(cq) for cq in q.disjuncts]
    for cq in work:
        seen.setdefault(cq, None)
    while work:
        cq = work.pop()
        counts = _occurrences(cq)
        fresh = FreshVars(cq.variables())
        for i, atom in enumerate(cq.atoms):
            for pi in pis:
                replacement = _applicable_rewrites(atom, counts, pi, fresh)
                if replacement is None:
                    continue
                atoms = list(cq.atoms)
                atoms[i] = replacement
                new = _canonical(ConjunctiveQuery(cq.head, tuple(dict.fromkeys(atoms))))
                if new not in seen:
                    seen[new] = None
                    work.append(new)
        for i, j in itertools.combinations(range(len(cq.atoms)), 2):
            subst = _unify(cq.atoms[i], cq.atoms[j])
            if subst is None:
                continue
            new = _canonical(_apply_subst(cq, subst))
            if new not in seen:
                seen[new] = None
                work.append(new)

    result = UCQ(q.free, tuple(seen))
    with _rewrite_lock:
        _rewrite_cache[key] = result
    return result


# ---------------------------------------------------------------------------
# Plain evaluation of a UCQ over a fact set.

def _eval_cq(cq: ConjunctiveQuery, by_pred: dict[str, list[Fact]],
             adom: frozenset[str]) -> set[tuple[str, ...]]:
    answers: set[tuple[str, ...]] = set()

    def extend(i: int, binding: dict[str, str]) -> None:
        if i == len(cq.atoms):
            row = []
            for t in cq.head:
                value = t.name if isinstance(t, Const) else binding.get(t.name)
                if value is None or value not in adom:
                    return
                row.append(value)
            answers.add(tuple(row))
            return
        atom = cq.atoms[i]
        for fact in by_pred.get(atom.predicate, ()):
            if len(fact.args) != len(atom.args):
                continue
            local = dict(binding)
            ok = True
            for t, c in zip(atom.args, fact.args):
                if isinstance(t, Const):
                    if t.name != c:
                        ok = False
                        break
                else:
                    bound = local.get(t.name)
                    if bound is None:
                        local[t.name] = c
                    elif bound != c:
                        ok = False
                        break
            if ok:
                extend(i + 1, local)

    extend(0, {})
    return answers


def evaluate_ucq(q: UCQ, abox: ABox) -> set[tuple[str, ...]]:
    """Evaluate over the facts only, ignoring any TBox."""
    by_pred: dict[str, list[Fact]] = {}
    for fact in abox.facts:
        by_pred.setdefault(fact.predicate, []).append(fact)
    for facts in by_pred.values():
        facts.sort(key=lambda f: f.args)
    adom = abox.adom()
    out: set[tuple[str, ...]] = set()
    for cq in q.disjuncts:
        out |= _eval_cq(cq, by_pred, adom)
    return out


def certain_answers_ucq(q: UCQ, tbox: Iterable[TBoxAssertion],
                        abox: ABox) -> set[tuple[str, ...]]:
    """Certain answers via rewriting; assumes the ABox is consistent with
    the TBox (callers establish that)."""
    return evaluate_ucq(rewrite_ucq(q, tbox), abox)


def ask_ucq(q: UCQ, tbox: Iterable[TBoxAssertion], abox: ABox) -> bool:
    if q.free:
        raise SpecificationError("ask expects a boolean query")
    return bool(certain_answers_ucq(q, tbox, abox))


# ---------------------------------------------------------------------------
# First-order evaluation of ECQs over the active domain.

def answer_ecq(q: ECQ, tbox: Iterable[TBoxAssertion], abox: ABox,
               free_order: Sequence[str] | None = None) -> set[tuple[str, ...]]:
    """Satisfying assignments of the free variables, drawn from the active
    domain of the fact set.  Closed queries answer {()} or the empty set."""
    adom = sorted(abox.adom())
    tbox = tuple(tbox)

    def rows(sub: ECQ) -> tuple[tuple[str, ...], set[tuple[str, ...]]]:
        # returns (variable order, satisfying rows over that order)
        if isinstance(sub, UcqAtom):
            return tuple(sub.query.free), certain_answers_ucq(sub.query, tbox, abox)
        if isinstance(sub, EcqTrue):
            return (), {()}
        if isinstance(sub, EcqFalse):
            return (), set()
        if isinstance(sub, EcqNot):
            variables, sat = rows(sub.operand)
            everything = set(itertools.product(adom, repeat=len(variables)))
            return variables, everything - sat
        if isinstance(sub, EcqExists):
            variables, sat = rows(sub.body)
            if sub.var not in variables:
                # vacuous quantifier still requires a witness in the domain
                return variables, (sat if adom else set())
            keep = tuple(i for i, v in enumerate(variables) if v != sub.var)
            return (tuple(variables[i] for i in keep),
                    {tuple(row[i] for i in keep) for row in sat})
        if isinstance(sub, (EcqAnd, EcqOr)):
            lv, ls = rows(sub.left)
            rv, rs = rows(sub.right)
            variables = tuple(dict.fromkeys(lv + rv))
            if isinstance(sub, EcqOr):
                ls = _expand(ls, lv, variables, adom)
                rs = _expand(rs, rv, variables, adom)
                return variables, ls | rs
            return variables, _join(ls, lv, rs, rv, variables)
        raise TypeError(f"not an ECQ: {sub!r}")

    variables, sat = rows(q)
    order = tuple(free_order) if free_order is not None else tuple(sorted(variables))
    if set(order) != set(variables):
        missing = set(order) - set(variables)
        if missing:
            # requested variables the query never constrains: range over adom
            base_vars = variables + tuple(sorted(missing))
            expanded = set()
            for row in sat:
                for extra in itertools.product(adom, repeat=len(missing)):
                    expanded.add(row + extra)
            variables, sat = base_vars, expanded
        extra_in_query = set(variables) - set(order)
        if extra_in_query:
            raise SpecificationError(
                f"query has free variables {sorted(extra_in_query)} outside "
                f"the requested order {list(order)}")
    index = [variables.index(v) for v in order]
    return {tuple(row[i] for i in index) for row in sat}


def _expand(sat: set[tuple[str, ...]], have: tuple[str, ...],
            want: tuple[str, ...], adom: list[str]) -> set[tuple[str, ...]]:
    missing = [v for v in want if v not in have]
    pos = {v: i for i, v in enumerate(have)}
    out = set()
    for row in sat:
        for extra in itertools.product(adom, repeat=len(missing)):
            filled = dict(zip(missing, extra))
            out.add(tuple(row[pos[v]] if v in pos else filled[v] for v in want))
    return out


def _join(ls, lv, rs, rv, variables):
    lpos = {v: i for i, v in enumerate(lv)}
    rpos = {v: i for i, v in enumerate(rv)}
    shared = [v for v in rv if v in lpos]
    by_key: dict[tuple, list] = {}
    for row in rs:
        by_key.setdefault(tuple(row[rpos[v]] for v in shared), []).append(row)
    out = set()
    for lrow in ls:
        key = tuple(lrow[lpos[v]] for v in shared)
        for rrow in by_key.get(key, ()):
            merged = {v: lrow[lpos[v]] for v in lv}
            merged.update({v: rrow[rpos[v]] for v in rv})
            out.add(tuple(merged[v] for v in variables))
    return out


def holds_ecq(q: ECQ, tbox: Iterable[TBoxAssertion], abox: ABox) -> bool:
    if ecq_free_vars(q):
        raise SpecificationError("holds expects a closed query")
    return bool(answer_ecq(q, tbox, abox, free_order=()))


# ---------------------------------------------------------------------------
# Consistency.

def _violation_query_concepts(a: ConceptInclusion) -> UCQ:
    fresh = FreshVars()
    x = Var("_x")
    atoms = (concept_atom(a.sub, x, fresh), concept_atom(a.sup, x, fresh))
    return UCQ((), (ConjunctiveQuery((), atoms),))


def _violation_query_roles(a: RoleInclusion) -> UCQ:
    x, y = Var("_x"), Var("_y")
    atoms = (role_atom(a.sub, x, y), role_atom(a.sup, x, y))
    return UCQ((), (ConjunctiveQuery((), atoms),))


def is_consistent(tbox: Iterable[TBoxAssertion], abox: ABox) -> bool:
    """Check every negative inclusion and functionality assertion.

    Negative inclusions are tested by a boolean join of both sides closed
    under the positive inclusions; functionality by looking for two distinct
    fillers in the positively-saturated extension of the role.
    """
    tbox = tuple(tbox)
    for a in tbox:
        if isinstance(a, ConceptInclusion) and a.negated:
            if ask_ucq(_violation_query_concepts(a), tbox, abox):
                return False
        elif isinstance(a, RoleInclusion) and a.negated:
            if ask_ucq(_violation_query_roles(a), tbox, abox):
                return False
        elif isinstance(a, Functionality):
            q = UCQ(("x", "y"),
                    (ConjunctiveQuery((Var("x"), Var("y")),
                                      (role_atom(a.role, Var("x"), Var("y")),)),))
            fillers: dict[str, set[str]] = {}
            for subject, obj in certain_answers_ucq(q, tbox, abox):
                fillers.setdefault(subject, set()).add(obj)
                if len(fillers[subject]) > 1:
                    return False
    return True
