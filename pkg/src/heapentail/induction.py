"""Dynamic induction hypotheses: the assumption set and the two
induction-application rewrites with the gen/kill progress check.

An assumption is recorded by every left unfold; IA-1 rewrites the LHS of a
descendant obligation using the assumption's conclusion, IA-2 replaces the
RHS by the assumption's premise.  Both consume an atom generated at or
after the assumption pivot's kill time, which rules out circular reasoning.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from .lang import (Atom, Entailment, Goal, HeapTerm, Subst, Term, Var)
from .direct import DirectProofResult, direct_proof
from .solver import ConstraintStore


@dataclass(frozen=True)
class Assumption:
    """Entailment snapshot plus the left-unfold pivot (kill stamp set)."""

    entailment: Entailment
    pivot: Atom
    pivot_index: int

    def __post_init__(self):
        assert self.pivot.kill is not None, "assumption pivot must be killed"

    @property
    def lhs_rest(self) -> Goal:
        return self.entailment.lhs.without_atom(self.pivot_index)

    @property
    def rhs(self) -> Goal:
        return self.entailment.rhs

    def vars(self) -> set[Var]:
        return self.entailment.lhs.vars() | self.entailment.rhs.vars()


AssumptionSet = tuple[Assumption, ...]


@dataclass
class IACandidate:
    entailment: Entailment
    rule: str                  # "IA-1" | "IA-2"
    assumption_index: int
    atom_index: int
    theta: Subst
    consumed: tuple[int, ...]  # LHS atom indices removed (incl. the pivot image)


def _forced_renaming(pivot_args, atom_args) -> Optional[Subst]:
    """x~ = y~theta componentwise; variables map to variables, injectively."""
    theta = Subst()
    images = []
    for pa, aa in zip(pivot_args, atom_args):
        if isinstance(pa, HeapTerm):
            pv = pa.as_var
            av = aa.as_var if isinstance(aa, HeapTerm) else None
        else:
            pv = pa.as_var
            av = aa.as_var if isinstance(aa, Term) else None
        if pv is None:
            # non-variable pivot argument: accept only syntactic equality
            if pa == aa:
                continue
            return None
        if av is None:
            return None
        prev = theta.get(pv)
        if prev is not None:
            if prev.as_var != av:
                return None
            continue
        theta.bind(pv, av)
        images.append(av)
    if len(set(images)) != len(images):
        return None
    return theta


def _policy_extend(theta: Subst, assumption: Assumption, fresh: Callable,
                   lhs_atom_vars_fresh: bool) -> tuple[Subst, set[Var]]:
    """Complete theta over all assumption variables.

    Variables of the premise-side atoms become fresh when
    ``lhs_atom_vars_fresh`` (IA-2: they are witnesses to be found);
    constraint-only premise variables keep their identity; conclusion-only
    variables (the assumption's own existentials) are always freshened.
    Returns the completed substitution and the set of fresh images.
    """
    theta = theta.copy()
    freshened: set[Var] = set()
    lhs_vars = assumption.entailment.lhs.vars()
    atom_vars: set[Var] = set()
    for a in assumption.lhs_rest.atoms:
        atom_vars.update(a.vars())
    rhs_only = assumption.rhs.vars() - lhs_vars
    for v in sorted(assumption.vars(), key=lambda v: v.vid):
        if v in theta:
            continue
        if v in rhs_only or (lhs_atom_vars_fresh and v in atom_vars):
            img = fresh(v)
            theta.bind(v, img)
            freshened.add(img)
        else:
            theta.bind(v, v)
    return theta, freshened


def _restamp(goal: Goal, clock: int) -> Goal:
    return Goal(goal.constraints,
                tuple(replace(a, gen=clock, kill=None) for a in goal.atoms))


def candidates_ia1(entailment: Entailment, assumptions: AssumptionSet,
                   session, next_clock: Callable[[], int]
                   ) -> list[IACandidate]:
    """All IA-1 rewrites: consume a progressed atom plus a directly-provable
    premise context, add the instantiated conclusion to the LHS."""
    out: list[IACandidate] = []
    lhs = entailment.lhs
    store = ConstraintStore.of_goal(lhs)
    for ai, asm in enumerate(assumptions):
        prem = asm.lhs_rest                       # L' (goal)
        concl = asm.rhs                           # R'
        prem_preds = {a.pred for a in prem.atoms}
        for li, atom in enumerate(lhs.atoms):
            if atom.pred != asm.pivot.pred or atom.kill is not None:
                continue
            if atom.gen < asm.pivot.kill:
                continue
            forced = _forced_renaming(asm.pivot.args, atom.args)
            if forced is None:
                continue
            unforced = frozenset(v for v in prem.vars() if v not in forced)
            prem_f = forced.goal(prem)
            cand = _find_premise_match(entailment, li, prem_f, unforced,
                                       prem_preds, store)
            if cand is None:
                continue
            l1_indices, dp = cand
            theta = forced.copy()
            for v, t in dp.theta.items():
                theta.map[v] = t
            if not _extension_injective(theta):
                continue
            # the renaming applies simultaneously: no resolution across pairs
            full, _ = _policy_extend(theta, asm, lambda v: session.fresh_like(v),
                                     lhs_atom_vars_fresh=False)
            clock = next_clock()
            added = _restamp(full.goal(concl), clock)
            removed = {li, *l1_indices}
            kept = tuple(a for i, a in enumerate(lhs.atoms) if i not in removed)
            assert lhs.atoms[li].gen >= asm.pivot.kill  # progress
            new_lhs = Goal.make(lhs.constraints + added.constraints,
                                kept + added.atoms)
            out.append(IACandidate(Entailment(new_lhs, entailment.rhs),
                                   "IA-1", ai, li, full,
                                   tuple(sorted(removed))))
    return out


def _extension_injective(theta: Subst) -> bool:
    images = []
    for v, t in theta.items():
        w = t.as_var
        if w is not None:
            images.append(w)
    return len(set(images)) == len(images)


def _find_premise_match(entailment: Entailment, pivot_li: int, prem_f: Goal,
                        unforced: frozenset, prem_preds: set,
                        store: ConstraintStore
                        ) -> Optional[tuple[tuple[int, ...], DirectProofResult]]:
    """Choose L1 and directly prove L1 |= L'theta.

    Tier (a): atoms sharing a variable with the instantiated premise atoms;
    tier (b): all atoms of matching predicate symbols.  The premise check
    always sees the full constraint store of the obligation.
    """
    lhs = entailment.lhs
    shared_vars: set[Var] = set()
    for a in prem_f.atoms:
        shared_vars.update(a.vars())
    shared_vars -= unforced
    tiers: list[list[int]] = []
    tier_a = [i for i, a in enumerate(lhs.atoms)
              if i != pivot_li and a.pred in prem_preds
              and (set(a.vars()) & shared_vars)]
    tier_b = [i for i, a in enumerate(lhs.atoms)
              if i != pivot_li and a.pred in prem_preds]
    tiers.append(tier_a)
    if tier_b != tier_a:
        tiers.append(tier_b)
    for indices in tiers:
        sub_goal = Goal(lhs.constraints, tuple(lhs.atoms[i] for i in indices))
        dp = direct_proof(Entailment(sub_goal, prem_f), store=store,
                          existentials=unforced, identity_pool=unforced,
                          def_match=True)
        if dp is not None:
            used = tuple(indices[j] for _, j in dp.pairs)
            return used, dp
    return None


def candidates_ia2(entailment: Entailment, assumptions: AssumptionSet,
                   session, next_clock: Callable[[], int]
                   ) -> list[IACandidate]:
    """All IA-2 rewrites: the assumption's conclusion must directly prove
    the current RHS; the new obligation proves the instantiated premise."""
    out: list[IACandidate] = []
    lhs, rhs = entailment.lhs, entailment.rhs
    for ai, asm in enumerate(assumptions):
        if not any(a.pred == asm.pivot.pred and a.kill is None
                   and a.gen >= asm.pivot.kill for a in lhs.atoms):
            continue
        theta1 = direct_proof(Entailment(asm.rhs, rhs))
        if theta1 is None:
            continue
        merged = _merge_theta1(theta1.theta, asm)
        if merged is None:
            continue
        for li, atom in enumerate(lhs.atoms):
            if atom.pred != asm.pivot.pred or atom.kill is not None:
                continue
            if atom.gen < asm.pivot.kill:
                continue
            forced = _forced_renaming(asm.pivot.args, atom.args)
            if forced is None:
                continue
            conflict = False
            for v, t in merged.items():
                prev = forced.get(v)
                if prev is None:
                    forced.map[v] = t
                elif prev != t:
                    conflict = True
                    break
            if conflict or not _extension_injective(forced):
                continue
            full, freshened = _policy_extend(
                forced, asm, lambda v: session.fresh_like(v),
                lhs_atom_vars_fresh=True)
            clock = next_clock()
            new_rhs = _restamp(full.goal(asm.lhs_rest), clock)
            if not _ia2_guard(entailment, li, asm, full, new_rhs, freshened,
                              clock):
                continue
            new_lhs = lhs.without_atom(li)
            assert atom.gen >= asm.pivot.kill  # progress
            out.append(IACandidate(Entailment(new_lhs, new_rhs),
                                   "IA-2", ai, li, full, (li,)))
    return out


def _merge_theta1(theta1: Subst, asm: Assumption) -> Optional[Subst]:
    """Orient theta1's bindings onto assumption variables where possible."""
    a_vars = asm.vars()
    out = Subst()
    for v, t in theta1.items():
        if v in a_vars:
            out.map[v] = t
        else:
            w = t.as_var
            if w is not None and w in a_vars:
                if w in out and out.get(w).as_var != v:
                    return None
                out.bind(w, v)
    return out


def _ia2_guard(entailment: Entailment, li: int, asm: Assumption, theta: Subst,
               new_rhs: Goal, freshened: set[Var], clock: int) -> bool:
    """Soundness check with the final renaming: assuming the rewritten
    premise, the instantiated conclusion must directly prove the current
    RHS.  Residues pinned only by the sub-proof's witnesses are waived.
    An instantiation whose conclusion contradicts the context is useless
    and rejected (a vacuous check would otherwise let it through)."""
    lhs, rhs = entailment.lhs, entailment.rhs
    concl_f = _restamp(theta.goal(asm.rhs), clock)
    hyp = Goal.make(
        lhs.constraints + new_rhs.constraints + concl_f.constraints,
        lhs.without_atom(li).atoms + new_rhs.atoms + concl_f.atoms)
    store = ConstraintStore.of_goal(hyp)
    if store.unsat:
        return False
    waived = frozenset(freshened)
    dp = direct_proof(Entailment(hyp, rhs), store=store, waived=waived)
    return dp is not None
