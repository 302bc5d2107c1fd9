"""Abstract syntax of the temporal property language.

Atoms are data queries and context expressions; the step modalities come
only in two-symbol pairs, spanning an action transition followed by a
context transition, so local atoms are never read off intermediate states.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .context import ContextExpr
from .errors import SpecificationError
from .kb import ECQ, ecq_free_vars


class MuFormula:
    __slots__ = ()


@dataclass(frozen=True)
class MuQuery(MuFormula):
    """A data query, true at the states where its certain answer is yes."""
    query: ECQ


@dataclass(frozen=True)
class MuContext(MuFormula):
    expr: ContextExpr


@dataclass(frozen=True)
class MuTrue(MuFormula):
    pass


@dataclass(frozen=True)
class MuFalse(MuFormula):
    pass


@dataclass(frozen=True)
class MuNot(MuFormula):
    operand: MuFormula


@dataclass(frozen=True)
class MuAnd(MuFormula):
    left: MuFormula
    right: MuFormula


@dataclass(frozen=True)
class MuOr(MuFormula):
    left: MuFormula
    right: MuFormula


@dataclass(frozen=True)
class MuImplies(MuFormula):
    left: MuFormula
    right: MuFormula


@dataclass(frozen=True)
class MuExists(MuFormula):
    var: str
    body: MuFormula


@dataclass(frozen=True)
class MuForall(MuFormula):
    var: str
    body: MuFormula


class Step(Enum):
    DIAMOND = "<->"
    BOX = "[-]"


@dataclass(frozen=True)
class MuModality(MuFormula):
    """Two chained single steps; the first crosses an action transition,
    the second the following context transition."""
    first: Step
    second: Step
    body: MuFormula


@dataclass(frozen=True)
class MuVar(MuFormula):
    name: str


@dataclass(frozen=True)
class MuLeast(MuFormula):
    var: str
    body: MuFormula


@dataclass(frozen=True)
class MuGreatest(MuFormula):
    var: str
    body: MuFormula


MU_TRUE = MuTrue()
MU_FALSE = MuFalse()


def free_individual_vars(phi: MuFormula) -> frozenset[str]:
    if isinstance(phi, MuQuery):
        return ecq_free_vars(phi.query)
    if isinstance(phi, MuNot):
        return free_individual_vars(phi.operand)
    if isinstance(phi, (MuAnd, MuOr, MuImplies)):
        return free_individual_vars(phi.left) | free_individual_vars(phi.right)
    if isinstance(phi, (MuExists, MuForall)):
        return free_individual_vars(phi.body) - {phi.var}
    if isinstance(phi, MuModality):
        return free_individual_vars(phi.body)
    if isinstance(phi, (MuLeast, MuGreatest)):
        return free_individual_vars(phi.body)
    return frozenset()


def free_predicate_vars(phi: MuFormula) -> frozenset[str]:
    if isinstance(phi, MuVar):
        return frozenset({phi.name})
    if isinstance(phi, MuNot):
        return free_predicate_vars(phi.operand)
    if isinstance(phi, (MuAnd, MuOr, MuImplies)):
        return free_predicate_vars(phi.left) | free_predicate_vars(phi.right)
    if isinstance(phi, (MuExists, MuForall)):
        return free_predicate_vars(phi.body)
    if isinstance(phi, MuModality):
        return free_predicate_vars(phi.body)
    if isinstance(phi, (MuLeast, MuGreatest)):
        return free_predicate_vars(phi.body) - {phi.var}
    return frozenset()


def is_closed(phi: MuFormula) -> bool:
    return not free_individual_vars(phi) and not free_predicate_vars(phi)


def check_monotone(phi: MuFormula) -> None:
    """Reject fixpoints whose variable occurs under an odd number of
    negations (counting the left of an implication as one)."""

    def walk(f: MuFormula, polarity: dict[str, bool]) -> None:
        if isinstance(f, MuVar):
            if f.name in polarity and not polarity[f.name]:
                raise SpecificationError(
                    f"fixpoint variable {f.name} occurs under negation")
            return
        if isinstance(f, MuNot):
            walk(f.operand, {z: not p for z, p in polarity.items()})
            return
        if isinstance(f, MuImplies):
            walk(f.left, {z: not p for z, p in polarity.items()})
            walk(f.right, polarity)
            return
        if isinstance(f, (MuAnd, MuOr)):
            walk(f.left, polarity)
            walk(f.right, polarity)
            return
        if isinstance(f, (MuExists, MuForall, MuModality)):
            walk(f.body, polarity)
            return
        if isinstance(f, (MuLeast, MuGreatest)):
            walk(f.body, {**polarity, f.var: True})
            return

    walk(phi, {})
