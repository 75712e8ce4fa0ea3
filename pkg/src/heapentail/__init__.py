"""Entailment prover for symbolic-heap assertions with recursive predicates."""

from .lang import (Atom, Cell, Entailment, Goal, HeapEq, HeapTerm, Program,
                   Pure, Rule, Session, Subst, Term, Var, apply_subst,
                   fresh_rename, stamp)
from .parser import ParseError, parse_entailment, parse_file, parse_program

__all__ = [
    "Atom", "Cell", "Entailment", "Goal", "HeapEq", "HeapTerm", "Program",
    "Pure", "Rule", "Session", "Subst", "Term", "Var", "apply_subst",
    "fresh_rename", "stamp", "ParseError", "parse_entailment", "parse_file",
    "parse_program",
]
