"""Canonical text rendering of specifications and properties.

Printing then reparsing yields a structurally identical object; the tests
rely on that round trip.
"""

from __future__ import annotations

from ..formula import (MuAnd, MuContext, MuExists, MuFalse, MuForall,
                       MuFormula, MuGreatest, MuImplies, MuLeast, MuModality,
                       MuNot, MuOr, MuQuery, MuTrue, MuVar)
from ..context import (ContextExpr, CtxAnd, CtxAtom, CtxFalse, CtxImplies,
                       CtxNot, CtxOr, CtxTrue, DimensionDomain)
from ..engine import CallTerm, EffectSpec, HeadConst, HeadVar
from ..kb import (ConceptInclusion, ConceptName, Const, ECQ, EcqAnd,
                  EcqExists, EcqFalse, EcqNot, EcqOr, EcqTrue, ExistsRole,
                  Functionality, Role, RoleInclusion, UCQ, UcqAtom, Var)
from .spec import CkabSpec

# precedence levels: quantifier < implication < or < and < unary
_Q, _IMP, _OR, _AND, _UNARY = 0, 1, 2, 3, 4


def format_ctx_expr(expr: ContextExpr, parent: int = _Q) -> str:
    if isinstance(expr, CtxAtom):
        return f"{expr.dimension}:{expr.value}"
    if isinstance(expr, CtxTrue):
        return "true"
    if isinstance(expr, CtxFalse):
        return "false"
    if isinstance(expr, CtxNot):
        return "!" + format_ctx_expr(expr.operand, _UNARY)
    if isinstance(expr, CtxAnd):
        text = (format_ctx_expr(expr.left, _AND) + " & "
                + format_ctx_expr(expr.right, _UNARY))
        return f"({text})" if parent > _AND else text
    if isinstance(expr, CtxOr):
        text = (format_ctx_expr(expr.left, _OR) + " | "
                + format_ctx_expr(expr.right, _AND))
        return f"({text})" if parent > _OR else text
    if isinstance(expr, CtxImplies):
        text = (format_ctx_expr(expr.left, _OR) + " -> "
                + format_ctx_expr(expr.right, _IMP))
        return f"({text})" if parent > _IMP else text
    raise TypeError(f"not a context expression: {expr!r}")


def _format_term(term) -> str:
    if isinstance(term, (Var, Const)):
        return term.name
    raise TypeError(f"not a term: {term!r}")


def format_ucq(q: UCQ) -> str:
    parts = []
    for cq in q.disjuncts:
        existential = sorted(cq.variables() - set(q.free))
        atoms = " & ".join(
            f"{a.predicate}({', '.join(_format_term(t) for t in a.args)})"
            for a in cq.atoms)
        if not cq.atoms:
            parts.append("true")
        elif existential:
            parts.append(f"ex {', '.join(existential)}. ({atoms})")
        else:
            parts.append(atoms)
    return " | ".join(parts)


def format_ecq(q: ECQ, parent: int = _Q) -> str:
    if isinstance(q, UcqAtom):
        return f"[{format_ucq(q.query)}]"
    if isinstance(q, EcqTrue):
        return "true"
    if isinstance(q, EcqFalse):
        return "false"
    if isinstance(q, EcqNot):
        return "not " + format_ecq(q.operand, _UNARY)
    if isinstance(q, EcqAnd):
        text = format_ecq(q.left, _AND) + " & " + format_ecq(q.right, _UNARY)
        return f"({text})" if parent > _AND else text
    if isinstance(q, EcqOr):
        text = format_ecq(q.left, _OR) + " | " + format_ecq(q.right, _AND)
        return f"({text})" if parent > _OR else text
    if isinstance(q, EcqExists):
        text = f"ex {q.var}. " + format_ecq(q.body, _Q)
        return f"({text})" if parent > _Q else text
    raise TypeError(f"not a query: {q!r}")


def _format_role(role: Role) -> str:
    return role.name + ("^-" if role.inverse else "")


def _format_concept(concept) -> str:
    if isinstance(concept, ConceptName):
        return concept.name
    if isinstance(concept, ExistsRole):
        return "exists " + _format_role(concept.role)
    raise TypeError(f"not a concept: {concept!r}")


def _format_assertion(assertion) -> str:
    if isinstance(assertion, ConceptInclusion):
        neg = "!" if assertion.negated else ""
        return (f"{_format_concept(assertion.sub)} [= "
                f"{neg}{_format_concept(assertion.sup)}")
    if isinstance(assertion, RoleInclusion):
        neg = "!" if assertion.negated else ""
        return (f"{_format_role(assertion.sub)} [= "
                f"{neg}{_format_role(assertion.sup)}")
    if isinstance(assertion, Functionality):
        return f"funct({_format_role(assertion.role)})"
    raise TypeError(f"not a TBox assertion: {assertion!r}")


def _format_head_term(term) -> str:
    if isinstance(term, (HeadVar, HeadConst)):
        return term.name
    if isinstance(term, CallTerm):
        return f"{term.function}({', '.join(_format_head_term(a) for a in term.args)})"
    raise TypeError(f"not a head term: {term!r}")


def _format_effect(effect: EffectSpec) -> str:
    body = format_ucq(effect.body)
    if not isinstance(effect.filter, EcqTrue):
        body += " & " + format_ecq(effect.filter, _AND)
    head = ", ".join(
        f"{t.predicate}({', '.join(_format_head_term(a) for a in t.args)})"
        for t in effect.head)
    return f"{body} ~> {{{head}}}"


def _format_dimension(dom: DimensionDomain) -> str:
    def subtree(value: str) -> str:
        children = dom.children_of(value)
        if not children:
            return value
        return f"{value} {{" + ", ".join(subtree(ch) for ch in children) + "}"

    return f"{dom.name} : {subtree(dom.root)}"


def format_spec(spec: CkabSpec) -> str:
    lines: list[str] = []
    lines.append("dimensions {")
    for dom in spec.dimensions:
        lines.append(f"  {_format_dimension(dom)} ;")
    lines.append("}")

    concepts = sorted(spec.concepts)
    roles = sorted(spec.roles)
    if concepts:
        lines.append("concepts { " + ", ".join(concepts) + " }")
    if roles:
        lines.append("roles { " + ", ".join(roles) + " }")
    if spec.constants:
        lines.append("constants { " + ", ".join(sorted(spec.constants)) + " }")
    if spec.services:
        lines.append("services { " + ", ".join(
            f"{name}/{arity}" for name, arity in sorted(spec.services)) + " }")

    lines.append("init-context { " + ", ".join(
        f"{d} = {v}" for d, v in spec.initial_context.assignments) + " }")

    if spec.ctbox.assertions:
        lines.append("tbox {")
        for assertion, guard in spec.ctbox.assertions:
            guard_text = "" if isinstance(guard, CtxTrue) \
                else f" @ {format_ctx_expr(guard)}"
            lines.append(f"  {_format_assertion(assertion)}{guard_text} ;")
        lines.append("}")

    lines.append("abox {")
    for fact in sorted(spec.initial_abox.facts, key=str):
        lines.append(f"  {fact.predicate}({', '.join(fact.args)}) ;")
    lines.append("}")

    if spec.actions:
        lines.append("actions {")
        for action in spec.actions:
            lines.append(f"  {action.name}({', '.join(action.params)}) {{")
            for effect in action.effects:
                lines.append(f"    {_format_effect(effect)} ;")
            lines.append("  }")
        lines.append("}")

    if spec.process:
        lines.append("process {")
        for rule in spec.process:
            action = next(a for a in spec.actions if a.name == rule.action)
            guard_text = "" if isinstance(rule.guard, CtxTrue) \
                else f" @ {format_ctx_expr(rule.guard)}"
            lines.append(
                f"  {format_ecq(rule.query)}{guard_text} |-> "
                f"{rule.action}({', '.join(action.params)}) ;")
        lines.append("}")

    if spec.context_rules:
        lines.append("context-rules {")
        for rule in spec.context_rules:
            guard_text = "" if isinstance(rule.guard, CtxTrue) \
                else f" @ {format_ctx_expr(rule.guard)}"
            head = ", ".join(f"{d} = {v}" for d, v in rule.head.assignments)
            lines.append(
                f"  {format_ecq(rule.query)}{guard_text} |-> {{{head}}} ;")
        lines.append("}")
    return "\n".join(lines) + "\n"


def format_formula(phi: MuFormula, parent: int = _Q) -> str:
    if isinstance(phi, MuTrue):
        return "true"
    if isinstance(phi, MuFalse):
        return "false"
    if isinstance(phi, MuQuery):
        return format_ecq(phi.query, _UNARY)
    if isinstance(phi, MuContext):
        return format_ctx_expr(phi.expr, _UNARY)
    if isinstance(phi, MuVar):
        return phi.name
    if isinstance(phi, MuNot):
        return "not " + format_formula(phi.operand, _UNARY)
    if isinstance(phi, MuAnd):
        text = format_formula(phi.left, _AND) + " & " + format_formula(phi.right, _UNARY)
        return f"({text})" if parent > _AND else text
    if isinstance(phi, MuOr):
        text = format_formula(phi.left, _OR) + " | " + format_formula(phi.right, _AND)
        return f"({text})" if parent > _OR else text
    if isinstance(phi, MuImplies):
        text = format_formula(phi.left, _OR) + " -> " + format_formula(phi.right, _IMP)
        return f"({text})" if parent > _IMP else text
    if isinstance(phi, MuModality):
        return (phi.first.value + phi.second.value + " "
                + format_formula(phi.body, _UNARY))
    if isinstance(phi, (MuExists, MuForall)):
        word = "ex" if isinstance(phi, MuExists) else "forall"
        text = f"{word} {phi.var}. " + format_formula(phi.body, _Q)
        return f"({text})" if parent > _Q else text
    if isinstance(phi, (MuLeast, MuGreatest)):
        word = "mu" if isinstance(phi, MuLeast) else "nu"
        text = f"{word} {phi.var}. " + format_formula(phi.body, _Q)
        return f"({text})" if parent > _Q else text
    raise TypeError(f"not a formula: {phi!r}")


def pretty_print(obj) -> str:
    """Render a specification or a property formula as parseable text."""
    if isinstance(obj, CkabSpec):
        return format_spec(obj)
    if isinstance(obj, MuFormula):
        return format_formula(obj)
    raise TypeError(f"cannot pretty-print {type(obj).__name__}")
