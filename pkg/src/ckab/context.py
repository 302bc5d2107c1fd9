"""Context dimensions, tree-shaped value domains, and the propositional
language used to guard axioms and rules.

A context assigns one value per dimension.  Each dimension's values form a
tree whose root is the most general value: assigning a value implies every
ancestor and excludes every sibling subtree.  That reading is captured by a
propositional theory (one implication per tree edge, pairwise disjointness
of siblings), and entailment of guard expressions is decided against the
models of that theory.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping

from .errors import SpecificationError


class DimensionDomain:
    """A named dimension with a finite tree of values.

    ``edges`` lists (child, parent) pairs; every value other than the root
    must appear as a child exactly once, and every value must be reachable
    from the root.
    """

    __slots__ = ("name", "root", "edges", "_parent", "_children", "values", "_hash")

    def __init__(self, name: str, root: str, edges: Iterable[tuple[str, str]] = ()):
        self.name = name
        self.root = root
        self.edges = tuple(sorted(edges))
        parent: dict[str, str] = {}
        children: dict[str, list[str]] = {root: []}
        for child, par in self.edges:
            if child == root:
                raise SpecificationError(
                    f"dimension {name}: root value {root!r} cannot have a parent")
            if child in parent:
                raise SpecificationError(
                    f"dimension {name}: value {child!r} has two parents")
            parent[child] = par
            children.setdefault(par, []).append(child)
            children.setdefault(child, [])
        self._parent = parent
        self._children = {v: tuple(sorted(cs)) for v, cs in children.items()}
        self.values = frozenset(children)
        # reachability from the root doubles as the acyclicity check
        seen = set()
        stack = [root]
        while stack:
            v = stack.pop()
            seen.add(v)
            stack.extend(self._children[v])
        if seen != self.values:
            stray = sorted(self.values - seen)
            raise SpecificationError(
                f"dimension {name}: values not reachable from root {root!r}: "
                + ", ".join(stray))
        self._hash = hash((name, root, self.edges))

    def parent_of(self, value: str) -> str | None:
        return self._parent.get(value)

    def children_of(self, value: str) -> tuple[str, ...]:
        return self._children[value]

    def ancestors_or_self(self, value: str) -> tuple[str, ...]:
        """Chain from ``value`` up to the root, inclusive."""
        chain = [value]
        while chain[-1] in self._parent:
            chain.append(self._parent[chain[-1]])
        return tuple(chain)

    def subtree(self, value: str) -> tuple[str, ...]:
        out = []
        stack = [value]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(self._children[v])
        return tuple(sorted(out))

    def is_ancestor_or_self(self, upper: str, lower: str) -> bool:
        return upper in self.ancestors_or_self(lower)

    def __contains__(self, value: str) -> bool:
        return value in self.values

    def __eq__(self, other) -> bool:
        return (isinstance(other, DimensionDomain)
                and self.name == other.name
                and self.root == other.root
                and self.edges == other.edges)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"DimensionDomain({self.name!r}, root={self.root!r}, {len(self.values)} values)"


@dataclass(frozen=True)
class ContextState:
    """Total assignment of one value per declared dimension."""

    assignments: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, str]) -> "ContextState":
        return cls(tuple(sorted(mapping.items())))

    def value(self, dimension: str) -> str:
        for d, v in self.assignments:
            if d == dimension:
                return v
        raise SpecificationError(f"context has no dimension {dimension!r}")

    def as_dict(self) -> dict[str, str]:
        return dict(self.assignments)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{d}={v}" for d, v in self.assignments) + "}"


@dataclass(frozen=True)
class PartialAssignment:
    """At most one value per dimension; unmentioned dimensions persist."""

    assignments: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, str]) -> "PartialAssignment":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict[str, str]:
        return dict(self.assignments)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{d}={v}" for d, v in self.assignments) + "}"


# ---------------------------------------------------------------------------
# Guard expressions: propositional formulas over dimension:value atoms.

class ContextExpr:
    __slots__ = ()

    def atoms(self) -> Iterator["CtxAtom"]:
        if isinstance(self, CtxAtom):
            yield self
        elif isinstance(self, CtxNot):
            yield from self.operand.atoms()
        elif isinstance(self, (CtxAnd, CtxOr, CtxImplies)):
            yield from self.left.atoms()
            yield from self.right.atoms()


@dataclass(frozen=True)
class CtxAtom(ContextExpr):
    dimension: str
    value: str


@dataclass(frozen=True)
class CtxNot(ContextExpr):
    operand: ContextExpr


@dataclass(frozen=True)
class CtxAnd(ContextExpr):
    left: ContextExpr
    right: ContextExpr


@dataclass(frozen=True)
class CtxOr(ContextExpr):
    left: ContextExpr
    right: ContextExpr


@dataclass(frozen=True)
class CtxImplies(ContextExpr):
    left: ContextExpr
    right: ContextExpr


@dataclass(frozen=True)
class CtxTrue(ContextExpr):
    pass


@dataclass(frozen=True)
class CtxFalse(ContextExpr):
    pass


CTX_TRUE = CtxTrue()
CTX_FALSE = CtxFalse()


def eval_expr(expr: ContextExpr, true_atoms: frozenset[tuple[str, str]]) -> bool:
    if isinstance(expr, CtxAtom):
        return (expr.dimension, expr.value) in true_atoms
    if isinstance(expr, CtxNot):
        return not eval_expr(expr.operand, true_atoms)
    if isinstance(expr, CtxAnd):
        return eval_expr(expr.left, true_atoms) and eval_expr(expr.right, true_atoms)
    if isinstance(expr, CtxOr):
        return eval_expr(expr.left, true_atoms) or eval_expr(expr.right, true_atoms)
    if isinstance(expr, CtxImplies):
        return (not eval_expr(expr.left, true_atoms)) or eval_expr(expr.right, true_atoms)
    if isinstance(expr, CtxTrue):
        return True
    if isinstance(expr, CtxFalse):
        return False
    raise TypeError(f"not a context expression: {expr!r}")


# ---------------------------------------------------------------------------
# The dimension theory and entailment.

@dataclass(frozen=True)
class ContextTheory:
    """Propositional reading of the value trees.

    ``implications`` holds one (dimension, lower, upper) triple per tree
    edge; ``disjointness`` holds (dimension, v1, v2) for every ordered pair
    of distinct siblings.  The sets contain exactly those entries and
    nothing else.
    """

    domains: tuple[DimensionDomain, ...]
    implications: frozenset[tuple[str, str, str]]
    disjointness: frozenset[tuple[str, str, str]]

    def domain(self, name: str) -> DimensionDomain:
        for d in self.domains:
            if d.name == name:
                return d
        raise SpecificationError(f"undeclared dimension {name!r}")


def build_theory(domains: Iterable[DimensionDomain]) -> ContextTheory:
    """Derive the implication/disjointness theory from the value trees."""
    domains = tuple(sorted(domains, key=lambda d: d.name))
    names = [d.name for d in domains]
    if len(set(names)) != len(names):
        raise SpecificationError("duplicate dimension name")
    implications = set()
    disjointness = set()
    for dom in domains:
        for child, par in dom.edges:
            implications.add((dom.name, child, par))
        for value in dom.values:
            siblings = dom.children_of(value)
            for v1 in siblings:
                for v2 in siblings:
                    if v1 != v2:
                        disjointness.add((dom.name, v1, v2))
    return ContextTheory(domains, frozenset(implications), frozenset(disjointness))


def _check_context(ctx: ContextState, theory: ContextTheory) -> None:
    assigned = ctx.as_dict()
    declared = {d.name for d in theory.domains}
    if set(assigned) != declared:
        raise SpecificationError(
            f"context must assign every dimension exactly once; got {sorted(assigned)}, "
            f"declared {sorted(declared)}")
    for dim, value in assigned.items():
        if value not in theory.domain(dim):
            raise SpecificationError(f"value {value!r} not in dimension {dim!r}")


def validate_expr(expr: ContextExpr, theory: ContextTheory) -> None:
    for atom in expr.atoms():
        dom = theory.domain(atom.dimension)
        if atom.value not in dom:
            raise SpecificationError(
                f"value {atom.value!r} not in dimension {atom.dimension!r}")


def _dimension_models(dom: DimensionDomain, value: str) -> list[frozenset[tuple[str, str]]]:
    # One model per node of subtree(value): the chain of ancestors-or-self.
    return [
        frozenset((dom.name, a) for a in dom.ancestors_or_self(w))
        for w in dom.subtree(value)
    ]


def models_of(ctx: ContextState, theory: ContextTheory) -> list[frozenset[tuple[str, str]]]:
    """All truth assignments (as sets of true atoms) satisfying the context
    together with the tree theory.

    Per dimension the satisfying assignments are exactly the root-to-node
    chains through the assigned value, one per node of its subtree; models
    of independent dimensions combine freely.
    """
    _check_context(ctx, theory)
    per_dim = [_dimension_models(theory.domain(d), v) for d, v in ctx.assignments]
    out = []
    for combo in product(*per_dim):
        out.append(frozenset().union(*combo) if combo else frozenset())
    return out


def entails(ctx: ContextState, theory: ContextTheory, expr: ContextExpr) -> bool:
    """True iff ``expr`` holds in every model of the context and theory."""
    _check_context(ctx, theory)
    validate_expr(expr, theory)
    per_dim = [_dimension_models(theory.domain(d), v) for d, v in ctx.assignments]
    for combo in product(*per_dim):
        atoms = frozenset().union(*combo) if combo else frozenset()
        if not eval_expr(expr, atoms):
            return False
    return True


def apply_evolution(ctx: ContextState, new: PartialAssignment) -> ContextState:
    """Override the dimensions mentioned by ``new``; keep the rest."""
    merged = ctx.as_dict()
    merged.update(new.as_dict())
    return ContextState.of(merged)
