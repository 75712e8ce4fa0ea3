"""Direct proof: match RHS atoms against LHS atoms, bind existentials,
discharge the residue with the constraint solver.

This is the search's base case.  The induction module reuses it in two
special modes: ``identity_pool`` lets designated unbound variables fall
back to themselves, and ``waived`` drops residue conjuncts that mention
designated variables (their values are pinned by a later sub-proof).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .lang import (Atom, Cell, Constraint, Entailment, Goal, HeapEq, HeapTerm,
                   Pure, Subst, Term, Var, EQ)
from .solver import VALID, ConstraintStore, entail_check, _term_of_lin

_MATCH_LIMIT = 64  # cap on enumerated matchings per query


@dataclass
class MatchCandidate:
    theta: Subst
    pairs: list[tuple[int, int]]  # (rhs atom index, lhs atom index)


@dataclass
class DirectProofResult:
    theta: Subst
    pairs: list[tuple[int, int]]
    residue: tuple[Constraint, ...]


def _unify_term(pattern: Term, value: Term, theta: Subst,
                exist: frozenset, store: ConstraintStore) -> bool:
    pattern = theta.term(pattern)
    fixed: dict[Var, int] = {}
    open_vars: list[tuple[Var, int]] = []
    for v, c in pattern.coeffs:
        if v in exist and v not in theta:
            open_vars.append((v, c))
        else:
            fixed[v] = c
    if not open_vars:
        return store.canon_term(pattern) == store.canon_term(value)
    if len(open_vars) == 1 and abs(open_vars[0][1]) == 1:
        v, c = open_vars[0]
        # v = (value - fixed-part) / c
        rest = Term.build(fixed, pattern.const)
        sol = (value - rest) if c == 1 else (rest - value)
        theta.bind(v, sol)
        return True
    return False


def _unify_hterm(pattern: HeapTerm, value: HeapTerm, theta: Subst,
                 exist: frozenset, store: ConstraintStore) -> bool:
    pattern = theta.hterm(pattern)
    pv = pattern.as_var
    if pv is not None and pv in exist and pv not in theta:
        theta.bind(pv, value)
        return True
    open_vars = [f for f in pattern.factors
                 if isinstance(f, Var) and f in exist and f not in theta]
    if not open_vars:
        return store.multiset(pattern) == store.multiset(value) or \
            store.expand(store.multiset(pattern)) == store.expand(store.multiset(value))
    if len(open_vars) == 1:
        # subtraction: v := value minus the grounded factors of the pattern
        v = open_vars[0]
        val_ms = store.expand(store.multiset(value))
        rest = HeapTerm(tuple(f for f in pattern.factors if f != v))
        rest_ms = store.expand(store.multiset(rest))
        if val_ms is None or rest_ms is None:
            return False
        remaining = list(val_ms)
        for f in rest_ms:
            if f in remaining:
                remaining.remove(f)
            else:
                return False
        solved = _hterm_of_multiset(tuple(remaining), store)
        if solved is None:
            return False
        theta.bind(v, solved)
        return True
    return False


def _hterm_of_multiset(ms: tuple, store: ConstraintStore) -> Optional[HeapTerm]:
    parts = []
    for f in ms:
        if f[0] == "hv":
            parts.append(store._hvar(f[1]))
        else:
            from .solver import _term_of_lin
            parts.append(Cell(_term_of_lin(*f[1]), _term_of_lin(*f[2])))
    return HeapTerm.star(parts)


def _unify_args(r_atom: Atom, l_atom: Atom, theta: Subst,
                exist: frozenset, store: ConstraintStore) -> Optional[Subst]:
    if r_atom.pred != l_atom.pred:
        return None
    out = theta.copy()
    for pa, va in zip(r_atom.args, l_atom.args):
        if isinstance(pa, HeapTerm) != isinstance(va, HeapTerm):
            return None
        ok = (_unify_hterm(pa, va, out, exist, store)
              if isinstance(pa, HeapTerm)
              else _unify_term(pa, va, out, exist, store))
        if not ok:
            return None
    return out


def enumerate_matchings(lhs_atoms: tuple[Atom, ...], rhs_atoms: tuple[Atom, ...],
                        existentials: frozenset, store: ConstraintStore,
                        limit: int = _MATCH_LIMIT) -> list[MatchCandidate]:
    """All injective predicate-respecting assignments of RHS atoms to LHS
    atoms whose argument unification succeeds, lexicographic by positions."""
    out: list[MatchCandidate] = []

    def rec(i: int, used: set[int], theta: Subst, pairs):
        if len(out) >= limit:
            return
        if i == len(rhs_atoms):
            out.append(MatchCandidate(theta.copy(), list(pairs)))
            return
        for j, la in enumerate(lhs_atoms):
            if j in used:
                continue
            t2 = _unify_args(rhs_atoms[i], la, theta, existentials, store)
            if t2 is not None:
                rec(i + 1, used | {j}, t2, pairs + [(i, j)])

    rec(0, set(), Subst(), [])
    return out


def bind_remaining_existentials(residue: Iterable[Constraint],
                                store: ConstraintStore, theta: Subst,
                                existentials: frozenset,
                                matching: bool = True,
                                def_match: bool = False) -> Subst:
    """Extend theta by obvious bindings to a fixpoint.

    Pure equalities bind a lone open variable to a grounded expression;
    unit heap equations ``v ~ H`` bind v to H (H may still be open).
    With ``matching`` enabled, ``T1 ~ T2`` additionally binds a lone open
    heap-variable factor by multiset subtraction when the rest is grounded.
    With ``def_match`` (induction-premise solving), a pattern ``v ~ P``
    with open variables inside P is first matched against the store's
    heap definitions, recognising folded occurrences.
    """
    theta = theta.copy()
    residue = [c for c in residue
               if any(v in existentials for v in c.vars())]
    for _ in range(12):
        changed = False
        for c in residue:
            c2 = theta.constraint(c)
            if isinstance(c2, Pure):
                if c2.op != EQ:
                    continue
                open_vars = [(v, k) for v, k in c2.expr.coeffs
                             if v in existentials and v not in theta]
                if len(open_vars) == 1 and abs(open_vars[0][1]) == 1:
                    v, k = open_vars[0]
                    rest = Term(tuple((w, cc) for w, cc in c2.expr.coeffs
                                      if w != v), c2.expr.const)
                    sol = rest.scaled(-1) if k == 1 else rest
                    theta.bind(v, sol)
                    changed = True
            else:
                if def_match and _try_def_match(c2, store, theta,
                                                existentials):
                    changed = True
                    continue
                for one, other in ((c2.lhs, c2.rhs), (c2.rhs, c2.lhs)):
                    v = one.as_var
                    if v is not None and v in existentials and v not in theta:
                        if v not in set(other.vars()):  # occurs check
                            theta.bind(v, other)
                            changed = True
                        break
                else:
                    if matching:
                        changed |= _try_subtraction(c2, store, theta,
                                                    existentials)
        if not changed:
            break
    return theta


def _try_def_match(c: HeapEq, store: ConstraintStore, theta: Subst,
                   existentials: frozenset) -> bool:
    """Solve ``v ~ P`` (v open, P containing open variables) by matching P
    against a defined heap variable's expansion; recognises a fold."""

    def is_open(v: Var) -> bool:
        return v in existentials and v not in theta

    for one, other in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
        v = one.as_var
        if v is None or not is_open(v):
            continue
        opens = [w for w in other.vars() if is_open(w)]
        if not opens or len(other.factors) > 4:
            continue
        open_cells = [f for f in other.factors if isinstance(f, Cell)
                      and any(is_open(w) for w in f.vars())]
        open_hvs = [f for f in other.factors if isinstance(f, Var)
                    and is_open(f)]
        if len(open_hvs) > 1:
            continue
        closed = HeapTerm(tuple(f for f in other.factors
                                if f not in open_cells
                                and f not in open_hvs))
        closed_ms = store.expand(store.multiset(closed))
        if closed_ms is None:
            continue
        for anchor_vid in sorted(store.defs):
            anchor = store._hvar(anchor_vid)
            if anchor.vid == v.vid:
                continue
            target = store.expand((("hv", anchor_vid),))
            if target is None:
                continue
            remaining = list(target)
            ok = True
            for f in closed_ms:
                if f in remaining:
                    remaining.remove(f)
                else:
                    ok = False
                    break
            if not ok:
                continue
            g_cells = [f for f in remaining if f[0] == "cell"]
            trial = _match_open_cells(open_cells, g_cells, theta,
                                      existentials, store)
            if trial is None:
                continue
            matched = []
            bad = False
            for f in open_cells:
                ms = store.expand(store.multiset(trial.hterm(HeapTerm.of(f))))
                if ms is None:
                    bad = True
                    break
                matched.extend(ms)
            if bad:
                continue
            leftover = list(remaining)
            for f in matched:
                if f in leftover:
                    leftover.remove(f)
                else:
                    bad = True
                    break
            if bad:
                continue
            if open_hvs:
                solved = _hterm_of_multiset(tuple(leftover), store)
                if solved is None or open_hvs[0] in set(solved.vars()):
                    continue
                trial.bind(open_hvs[0], solved)
            elif leftover:
                continue
            trial.bind(v, anchor)
            for w, t in trial.items():
                if w not in theta:
                    theta.bind(w, t)
            return True
    return False


def _match_open_cells(open_cells, g_cells, theta, existentials, store):
    def rec(i, used, trial):
        if i == len(open_cells):
            return trial
        pcell = trial.hterm(HeapTerm.of(open_cells[i])).factors[0]
        for j, gc in enumerate(g_cells):
            if j in used:
                continue
            t2 = trial.copy()
            ga = _term_of_lin(*gc[1])
            gv = _term_of_lin(*gc[2])
            if not _unify_term(pcell.addr, ga, t2, existentials, store):
                continue
            if not _unify_term(pcell.value, gv, t2, existentials, store):
                continue
            r = rec(i + 1, used | {j}, t2)
            if r is not None:
                return r
        return None

    return rec(0, set(), theta.copy())


def _try_subtraction(c: HeapEq, store: ConstraintStore, theta: Subst,
                     existentials: frozenset) -> bool:
    for one, other in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
        open_vars = [f for f in one.factors if isinstance(f, Var)
                     and f in existentials and f not in theta]
        other_open = any(isinstance(f, Var) and f in existentials and f not in theta
                         for f in other.factors)
        if len(open_vars) == 1 and not other_open:
            rest = HeapTerm(tuple(f for f in one.factors if f != open_vars[0]))
            if any(v in existentials and v not in theta for v in rest.vars()):
                continue
            val_ms = store.expand(store.multiset(other))
            rest_ms = store.expand(store.multiset(rest))
            if val_ms is None or rest_ms is None:
                continue
            remaining = list(val_ms)
            ok = True
            for f in rest_ms:
                if f in remaining:
                    remaining.remove(f)
                else:
                    ok = False
                    break
            if not ok:
                continue
            solved = _hterm_of_multiset(tuple(remaining), store)
            if solved is not None and open_vars[0] not in set(solved.vars()):
                theta.bind(open_vars[0], solved)
                return True
    return False


_DP_CACHE: dict = {}


def direct_proof(entailment: Entailment,
                 store: Optional[ConstraintStore] = None,
                 existentials: Optional[frozenset] = None,
                 identity_pool: Optional[frozenset] = None,
                 waived: Optional[frozenset] = None,
                 def_match: bool = False
                 ) -> Optional[DirectProofResult]:
    """The composed (sub)+(cp) base case; None when no candidate closes.

    ``existentials`` defaults to the entailment's own existential set.
    """
    key = (entailment.lhs, entailment.rhs,
           existentials if existentials is not None else None,
           identity_pool, waived, def_match)
    hit = _DP_CACHE.get(key, _MISS)
    if hit is not _MISS:
        return hit
    out = _direct_proof(entailment, store, existentials, identity_pool, waived,
                        def_match)
    if len(_DP_CACHE) > 60000:
        _DP_CACHE.clear()
    _DP_CACHE[key] = out
    return out


_MISS = object()


def _direct_proof(entailment: Entailment,
                  store: Optional[ConstraintStore] = None,
                  existentials: Optional[frozenset] = None,
                  identity_pool: Optional[frozenset] = None,
                  waived: Optional[frozenset] = None,
                  def_match: bool = False
                  ) -> Optional[DirectProofResult]:
    lhs, rhs = entailment.lhs, entailment.rhs
    exist = existentials if existentials is not None else entailment.existentials
    lhs_preds = {a.pred for a in lhs.atoms}
    for a in rhs.atoms:
        if a.pred not in lhs_preds:
            return None
    store = store if store is not None else ConstraintStore.of_goal(lhs)
    if rhs.atoms:
        candidates = enumerate_matchings(lhs.atoms, rhs.atoms, exist, store)
    else:
        candidates = [MatchCandidate(Subst(), [])]
    exist_cs = [c for c in rhs.constraints
                if any(v in exist for v in c.vars())]
    plain_cs = [c for c in rhs.constraints if c not in exist_cs]
    for cand in candidates:
        theta = bind_remaining_existentials(exist_cs, store, cand.theta, exist,
                                            def_match=def_match)
        if identity_pool:
            for v in sorted(identity_pool, key=lambda v: v.vid):
                if v in exist and v not in theta:
                    theta.bind(v, v)
        if not theta.resolve():
            continue
        unresolved = set()
        applied = [theta.constraint(c) for c in exist_cs]
        for c2 in applied:
            for v in c2.vars():
                if v in exist and v not in theta:
                    unresolved.add(v)
        if waived:
            unresolved -= waived
        if unresolved:
            continue
        residue = []
        for c2 in plain_cs + applied:
            if waived and any(v in waived for v in c2.vars()):
                continue
            residue.append(c2)
        if entail_check(store, residue) == VALID:
            return DirectProofResult(theta, cand.pairs, tuple(residue))
    return None
