"""Reducts and complete left/right unfold sets of a goal at a chosen atom."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lang import (Atom, Entailment, Goal, Program, Rule, Session, Subst,
                   fresh_rename, stamp)
from .solver import is_unsat


@dataclass
class UnfoldResult:
    branches: list[Goal]
    branch_rules: list[int]  # clause index per branch
    pivot: Atom              # the unfolded atom, kill stamp set
    clock: int


def reduct(goal: Goal, pivot_index: int, rule: Rule, session: Session,
           gen_clock: int, prune: bool = True) -> Optional[Goal]:
    """Replace the pivot atom by the rule body; None when unsatisfiable.

    The rule is fresh-renamed here.  Parameter-binding equations are
    eliminated by substituting formal := actual (heads are plain variables).
    """
    pivot = goal.atoms[pivot_index]
    rule = fresh_rename(rule, session)
    theta = Subst()
    for formal, actual in zip(rule.params, pivot.args):
        theta.bind(formal, actual)
    body = theta.goal(rule.body)
    new_atoms = (goal.atoms[:pivot_index]
                 + tuple(stamp(a, "generated", gen_clock) for a in body.atoms)
                 + goal.atoms[pivot_index + 1:])
    out = Goal.make(goal.constraints + body.constraints, new_atoms)
    if prune and is_unsat(out.constraints):
        return None
    return out


def unfold_left(entailment: Entailment, pivot_index: int, program: Program,
                session: Session, clock: int) -> UnfoldResult:
    """All satisfiable reducts of the LHS at the pivot; pivot stamped killed."""
    pivot = entailment.lhs.atoms[pivot_index]
    killed = stamp(pivot, "killed", clock)
    branches: list[Goal] = []
    idx: list[int] = []
    for i, rule in enumerate(program.rules(pivot.pred)):
        g = reduct(entailment.lhs, pivot_index, rule, session, clock, prune=True)
        if g is not None:
            branches.append(g)
            idx.append(i)
    return UnfoldResult(branches, idx, killed, clock)


def unfold_right(entailment: Entailment, pivot_index: int, program: Program,
                 session: Session, clock: int) -> UnfoldResult:
    """One RHS goal per clause of the pivot's predicate, no pruning."""
    pivot = entailment.rhs.atoms[pivot_index]
    killed = stamp(pivot, "killed", clock)
    branches: list[Goal] = []
    idx: list[int] = []
    for i, rule in enumerate(program.rules(pivot.pred)):
        g = reduct(entailment.rhs, pivot_index, rule, session, clock, prune=False)
        branches.append(g)
        idx.append(i)
    return UnfoldResult(branches, idx, killed, clock)
