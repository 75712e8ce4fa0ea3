"""Satisfiability and entailment for the constraint-only parts of goals.

Pure side: linear integer constraints decided by equality substitution,
Fourier-Motzkin elimination over the rationals and disequality checks.
Heap side: star-lists matched as multisets modulo the equality closure,
with definition expansion, cancellation-derived definitions, and a
provable-disjointness closure.

The procedure is deliberately incomplete: UNSAT/VALID are only returned
when justified; everything else is UNKNOWN.  Callers in pruning positions
must treat UNKNOWN as satisfiable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Optional, Union

from .lang import (EQ, LE, NE, Atom, Cell, Constraint, Goal, HeapEq, HeapTerm,
                   Pure, Subst, Term, Var)

SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"
VALID = "VALID"
NOT_VALID = "NOT_VALID"

_FM_LIMIT = 600  # cap on inequalities produced during elimination


class ExistentialLeak(Exception):
    """entail_check received a query containing existential variables."""


_STORE_CACHE: dict = {}


# ---------------------------------------------------------------------------
# linear expressions; canonical forms use integer coefficients throughout,
# rationals appear only inside Gaussian / Fourier-Motzkin elimination

Lin = tuple[tuple[int, int], ...]  # ((vid, coeff)...), sorted


def _lin(term: Term, intsub: dict[int, Term]) -> tuple[Lin, int]:
    items: dict[int, int] = {}
    const = term.const

    def add(t: Term, k: int):
        nonlocal const
        const += t.const * k
        for v, c in t.coeffs:
            r = intsub.get(v.vid)
            if r is not None:
                add(r, k * c)
            else:
                items[v.vid] = items.get(v.vid, 0) + k * c

    add(term, 1)
    lin = tuple(sorted((vid, c) for vid, c in items.items() if c != 0))
    return lin, const


def _lin_sub(lin, const, vid, rep_lin, rep_const):
    items = dict(lin)
    k = items.pop(vid, 0)
    if k == 0:
        return lin, const
    for w, c in rep_lin:
        items[w] = items.get(w, 0) + k * c
    return tuple(sorted((w, c) for w, c in items.items() if c != 0)), \
        const + k * rep_const


# ---------------------------------------------------------------------------
# the store


@dataclass
class ConstraintStore:
    pures: list[Pure] = field(default_factory=list)
    heaps: list[HeapEq] = field(default_factory=list)

    # populated by normalize()
    unsat: bool = False
    int_union: dict[int, Term] = field(default_factory=dict)   # vid -> rep term
    heap_union: dict[int, HeapTerm] = field(default_factory=dict)
    defs: dict[int, tuple] = field(default_factory=dict)        # hvar vid -> multiset
    eq_pairs: list[tuple[tuple, tuple]] = field(default_factory=list)
    disj: set[frozenset] = field(default_factory=set)
    derived_rows: list[tuple] = field(default_factory=list)  # (op, (lin, const))
    var_names: dict[int, Var] = field(default_factory=dict)
    _normalized: bool = False
    _frozen: bool = False
    _rows: Optional[tuple] = None
    _canon_cache: dict = field(default_factory=dict)
    _ms_cache: dict = field(default_factory=dict)
    _exp_cache: dict = field(default_factory=dict)
    _implies_cache: dict = field(default_factory=dict)

    @staticmethod
    def of(constraints: Iterable[Constraint]) -> "ConstraintStore":
        key = tuple(constraints)
        hit = _STORE_CACHE.get(key)
        if hit is not None:
            return hit
        st = ConstraintStore()
        for c in key:
            if isinstance(c, Pure):
                st.pures.append(c)
            else:
                st.heaps.append(c)
        st.normalize()
        if len(_STORE_CACHE) > 50000:
            _STORE_CACHE.clear()
        _STORE_CACHE[key] = st
        return st

    @staticmethod
    def of_goal(goal: Goal) -> "ConstraintStore":
        return ConstraintStore.of(goal.constraints)

    # -- canonical forms -------------------------------------------------

    def canon_term(self, t: Term) -> tuple[Lin, int]:
        hit = self._canon_cache.get(t)
        if hit is None:
            hit = _lin(t, self.int_union)
            self._canon_cache[t] = hit
        return hit

    def canon_hvar(self, v: Var) -> Union[int, str]:
        seen = set()
        while v.vid in self.heap_union and v.vid not in seen:
            seen.add(v.vid)
            rep = self.heap_union[v.vid]
            if rep.is_emp:
                return "emp"
            v = rep.as_var
        return v.vid

    def canon_factor(self, f) -> Optional[tuple]:
        """('cell', addr, val) | ('hv', vid); None for an emp-bound variable."""
        if isinstance(f, Cell):
            return ("cell", self.canon_term(f.addr), self.canon_term(f.value))
        r = self.canon_hvar(f)
        if r == "emp":
            return None
        return ("hv", r)

    def multiset(self, h: HeapTerm) -> tuple:
        if self._frozen:
            hit = self._ms_cache.get(h)
            if hit is not None:
                return hit
        out = []
        for f in h.factors:
            cf = self.canon_factor(f)
            if cf is not None:
                out.append(cf)
        res = tuple(sorted(out))
        if self._frozen:
            self._ms_cache[h] = res
        return res

    def expand(self, ms: tuple, _depth: int = 0) -> Optional[tuple]:
        """Recursively expand heap-variable factors via definitions.

        Returns None on a cyclic definition chain.
        """
        if self._frozen and _depth == 0:
            hit = self._exp_cache.get(ms)
            if hit is not None:
                return hit[0]
        if _depth > 24:
            return None
        out = []
        for f in ms:
            if f[0] == "hv" and f[1] in self.defs:
                sub = self.expand(self.defs[f[1]], _depth + 1)
                if sub is None:
                    return None
                out.extend(sub)
            else:
                out.append(f)
        res = tuple(sorted(out))
        if self._frozen and _depth == 0:
            self._exp_cache[ms] = (res,)
        return res

    # -- normalization ----------------------------------------------------

    def normalize(self) -> "ConstraintStore":
        if self._normalized:
            return self
        self._normalized = True
        for c in self.pures:
            for v in c.vars():
                self.var_names.setdefault(v.vid, v)
        for h in self.heaps:
            for v in h.vars():
                self.var_names.setdefault(v.vid, v)

        self._close_int_equalities()
        if not self.unsat:
            self._close_heap_equalities()
        if self.unsat:
            self._frozen = True
            return self
        self._build_defs()
        if not self.unsat:
            self._derive_facts()
        if not self.unsat:
            self._check_pure_unsat()
        self._frozen = True
        return self

    def _close_int_equalities(self):
        # extract var=var / var=const bindings from equalities, to fixpoint
        for _ in range(40):
            changed = False
            for c in self.pures:
                if c.op != EQ:
                    continue
                lin, const = _lin(c.expr, self.int_union)
                if not lin:
                    if const != 0:
                        self.unsat = True
                        return
                    continue
                if len(lin) == 1 and const % lin[0][1] == 0:
                    vid = lin[0][0]
                    self.int_union[vid] = Term.of(-(const // lin[0][1]))
                    changed = True
                elif len(lin) == 2 and const == 0 and lin[0][1] == -lin[1][1]:
                    a, b = lin[0][0], lin[1][0]
                    lo, hi = min(a, b), max(a, b)
                    if hi not in self.int_union:
                        self.int_union[hi] = Term(((self._var(lo), 1),), 0)
                        changed = True
            if not changed:
                break

    def _var(self, vid: int) -> Var:
        return self.var_names.get(vid, Var(vid, f"v{vid}"))

    def _close_heap_equalities(self):
        for _ in range(40):
            changed = False
            for h in self.heaps:
                lm = self.multiset(h.lhs)
                rm = self.multiset(h.rhs)
                lone = lm[0][1] if len(lm) == 1 and lm[0][0] == "hv" else None
                rone = rm[0][1] if len(rm) == 1 and rm[0][0] == "hv" else None
                if lone is not None and rone is not None:
                    if lone != rone:
                        hi, lo = max(lone, rone), min(lone, rone)
                        self.heap_union[hi] = HeapTerm.of(self._hvar(lo))
                        changed = True
                elif lone is not None and not rm:
                    self.heap_union[lone] = HeapTerm(())
                    changed = True
                elif rone is not None and not lm:
                    self.heap_union[rone] = HeapTerm(())
                    changed = True
                elif not lm and not rm:
                    pass
                elif (not lm) != (not rm):
                    # emp equated with a term containing a cell
                    other = rm if not lm else lm
                    if any(f[0] == "cell" for f in other):
                        self.unsat = True
                        return
                    # all-variable side: every factor is empty
                    for f in other:
                        if f[1] not in self.heap_union:
                            self.heap_union[f[1]] = HeapTerm(())
                            changed = True
            if not changed:
                break

    def _hvar(self, vid: int) -> Var:
        v = self.var_names.get(vid)
        return v if v is not None else Var(vid, f"h{vid}", True)

    def _build_defs(self):
        pairs = []
        for h in self.heaps:
            lm = self.multiset(h.lhs)
            rm = self.multiset(h.rhs)
            pairs.append((lm, rm))
        self.eq_pairs = pairs
        # direct definitions: single-var side
        for lm, rm in pairs:
            for one, other in ((lm, rm), (rm, lm)):
                if len(one) == 1 and one[0][0] == "hv":
                    vid = one[0][1]
                    if vid not in self.defs and not _mentions(other, vid):
                        self.defs[vid] = other
        # cancellation-derived definitions
        for _ in range(6):
            if not self._derive_cancellations():
                break
        # emp-forced variables: v defined by emp multiset handled via heap_union
        for vid, ms in list(self.defs.items()):
            exp = self.expand(ms)
            if exp is None:
                self.unsat = True
                return
        # conflicting definition sizes
        for lm, rm in pairs:
            le, re = self.expand(lm), self.expand(rm)
            if le is None or re is None:
                self.unsat = True
                return
            lcells = [f for f in le if f[0] == "cell"]
            rcells = [f for f in re if f[0] == "cell"]
            lvars = [f for f in le if f[0] == "hv"]
            rvars = [f for f in re if f[0] == "hv"]
            if not lvars and not rvars and len(lcells) != len(rcells):
                self.unsat = True
                return
            if not lvars and len(rcells) > len(lcells):
                self.unsat = True
                return
            if not rvars and len(lcells) > len(rcells):
                self.unsat = True
                return

    def _derive_cancellations(self) -> bool:
        changed = False
        for lm, rm in self.eq_pairs:
            le, re = self.expand(lm), self.expand(rm)
            if le is None or re is None:
                self.unsat = True
                return False
            l_rest, r_rest = _multiset_diff(le, re)
            for one, other in ((l_rest, r_rest), (r_rest, l_rest)):
                if len(one) == 1 and one[0][0] == "hv":
                    vid = one[0][1]
                    if vid not in self.defs and not _mentions(other, vid):
                        self.defs[vid] = other
                        changed = True
        return changed

    def _derive_facts(self):
        """Positivity and address disequalities implied by disjointness."""
        seen_terms = []
        for lm, rm in self.eq_pairs:
            for ms in (lm, rm):
                exp = self.expand(ms)
                if exp is None:
                    self.unsat = True
                    return
                seen_terms.append(exp)
        seen_exp = set()
        pos_rows = set()
        for exp in seen_terms:
            if exp in seen_exp:
                continue
            seen_exp.add(exp)
            cells = [f for f in exp if f[0] == "cell"]
            for f in cells:
                pos_rows.add((LE, _row_sub(((), 1), f[1])))  # 1 - addr <= 0
            for a, b in itertools.combinations(exp, 2):
                if a[0] == "cell" and b[0] == "cell" and a[1] == b[1]:
                    self.unsat = True
                    return
                self.disj.add(frozenset((_disj_key(a), _disj_key(b))))
            # duplicate heap variables under one star force emptiness; the
            # factors were sorted, so equal neighbours indicate duplicates
            for a, b in zip(exp, exp[1:]):
                if a == b and a[0] == "hv":
                    self.defs.setdefault(a[1], ())
        self.derived_rows.extend(sorted(pos_rows))
        # propagate disjointness into definitions
        for _ in range(4):
            new = set()
            for pair in self.disj:
                items = tuple(pair)
                if len(items) == 1:
                    continue
                a, b = items
                for x, y in ((a, b), (b, a)):
                    if x[0] == "hv" and x[1] in self.defs:
                        for sub in self.defs[x[1]]:
                            cf = frozenset((_disj_key(sub), y))
                            if len(cf) == 2:
                                new.add(cf)
            if new <= self.disj:
                break
            self.disj |= new

    # -- pure reasoning ---------------------------------------------------

    def _pure_rows(self) -> tuple[list, list, list]:
        if self._rows is not None:
            eqs, les, nes = self._rows
            return list(eqs), list(les), list(nes)
        eqs, les, nes = [], [], []
        seen = set()
        rows = [(c.op, _lin(c.expr, self.int_union)) for c in self.pures]
        for op, row in itertools.chain(rows, self.derived_rows):
            if (op, row) in seen:
                continue
            seen.add((op, row))
            if op == EQ:
                eqs.append(row)
            elif op == LE:
                les.append(row)
            else:
                nes.append(row)
        self._rows = (tuple(eqs), tuple(les), tuple(nes))
        return eqs, les, nes

    def _check_pure_unsat(self):
        eqs, les, nes = self._pure_rows()
        if _pure_unsat(eqs, les, nes):
            self.unsat = True

    def implies_pure(self, psi: Pure) -> bool:
        """Does the store's pure closure imply ``psi``?"""
        return self.implies_row(psi.op, _lin(psi.expr, self.int_union))

    def implies_row(self, op: str, row: tuple) -> bool:
        if self.unsat:
            return True
        key = (op, row)
        hit = self._implies_cache.get(key)
        if hit is not None:
            return hit
        if op == NE and self._disj_implies_ne(row):
            self._implies_cache[key] = True
            return True
        eqs, les, nes = self._pure_rows()
        lin, const = row
        if op == EQ:
            # unsat under expr >= 1 and under expr <= -1
            hi = _neg_row((lin, const), shift=1)      # -expr + 1 <= 0
            lo = (lin, const + 1)                      # expr + 1 <= 0
            out = _pure_unsat(eqs, les + [hi], nes) and \
                _pure_unsat(eqs, les + [lo], nes)
        elif op == LE:
            # unsat under expr >= 1
            out = _pure_unsat(eqs, les + [_neg_row((lin, const), shift=1)], nes)
        else:
            # NE: unsat under expr = 0
            out = _pure_unsat(eqs + [(lin, const)], les, nes)
        self._implies_cache[key] = out
        return out

    # -- heap entailment --------------------------------------------------

    def _disj_implies_ne(self, row: tuple) -> bool:
        """Address disequalities implied by cell disjointness, checked
        lazily: the query row must equal a difference of two disjoint
        cell addresses."""
        neg = _neg_row(row)
        for pair in self.disj:
            items = tuple(pair)
            if len(items) != 2:
                continue
            a, b = items
            if a[0] == "cell" and b[0] == "cell":
                diff = _row_sub(a[1], b[1])
                if diff == row or diff == neg:
                    return True
        return False

    def provably_disjoint(self, a: tuple, b: tuple) -> bool:
        ka, kb = _disj_key(a), _disj_key(b)
        if ka == kb:
            return False
        if frozenset((ka, kb)) in self.disj:
            return True
        if a[0] == "cell" and b[0] == "cell":
            return self.implies_row(NE, _row_sub(a[1], b[1]))
        return False

    def implies_heap_eq(self, eq: HeapEq) -> bool:
        lm = self.expand(self.multiset(eq.lhs))
        rm = self.expand(self.multiset(eq.rhs))
        if lm is None or rm is None:
            return False
        if lm != rm:
            return False
        # realizability: factors provably pairwise disjoint
        for a, b in itertools.combinations(lm, 2):
            if not self.provably_disjoint(a, b):
                return False
        return True


def _disj_key(f: tuple) -> tuple:
    """Disjointness is a property of the address for cells."""
    return ("cell", f[1]) if f[0] == "cell" else f


def _row_sub(a: tuple, b: tuple) -> tuple:
    """Row subtraction a - b over canonical (lin, const) pairs."""
    items = dict(a[0])
    for vid, c in b[0]:
        items[vid] = items.get(vid, 0) - c
    lin = tuple(sorted((v, c) for v, c in items.items() if c != 0))
    return (lin, a[1] - b[1])


def _mentions(ms: tuple, vid: int) -> bool:
    return any(f[0] == "hv" and f[1] == vid for f in ms)


def _multiset_diff(a: tuple, b: tuple) -> tuple[tuple, tuple]:
    la, lb = list(a), list(b)
    for x in a:
        if x in lb:
            la.remove(x)
            lb.remove(x)
    return tuple(la), tuple(lb)


def _term_of_lin(lin: Lin, const: int) -> Term:
    items = {Var(vid, f"v{vid}"): c for vid, c in lin}
    return Term.build(items, const)


def _neg_row(row: tuple[Lin, int], shift: int = 0) -> tuple[Lin, int]:
    lin, const = row
    return tuple((v, -c) for v, c in lin), -const + shift


# ---------------------------------------------------------------------------
# pure UNSAT core: Gaussian elimination + Fourier-Motzkin


def _pure_unsat(eqs: list, les: list, nes: list) -> bool:
    les = list(les)
    nes = list(nes)
    # Gaussian elimination on equalities
    sub: dict[int, tuple[Lin, Fraction]] = {}

    def reduce(row):
        lin, const = row
        for _ in range(len(sub) + 1):
            nlin, nconst = lin, const
            for vid, rep in sub.items():
                nlin, nconst = _lin_sub(nlin, nconst, vid, *rep)
            if (nlin, nconst) == (lin, const):
                break
            lin, const = nlin, nconst
        return lin, const

    for row in eqs:
        lin, const = reduce(row)
        if not lin:
            if const != 0:
                return True
            continue
        vid, c = lin[0]
        rest = tuple((w, Fraction(-k, c)) for w, k in lin[1:])
        sub[vid] = (rest, Fraction(-const, c))

    rles = []
    for row in les:
        lin, const = reduce(row)
        if not lin:
            if const > 0:
                return True
        else:
            rles.append((lin, const))
    for row in nes:
        lin, const = reduce(row)
        if not lin and const == 0:
            return True
    # Fourier-Motzkin over the remaining inequalities (expr <= 0 rows)
    rows = rles
    while rows:
        vids = sorted({vid for lin, _ in rows for vid, _ in lin})
        if not vids:
            break
        # eliminate the variable with fewest pairings
        best, best_cost = None, None
        for vid in vids:
            pos = sum(1 for lin, _ in rows for w, c in lin if w == vid and c > 0)
            neg = sum(1 for lin, _ in rows for w, c in lin if w == vid and c < 0)
            cost = pos * neg
            if best_cost is None or cost < best_cost:
                best, best_cost = vid, cost
        vid = best
        pos, neg, rest = [], [], []
        for lin, const in rows:
            coeff = dict(lin).get(vid, 0)
            if coeff > 0:
                pos.append((lin, const, coeff))
            elif coeff < 0:
                neg.append((lin, const, coeff))
            else:
                rest.append((lin, const))
        new = rest
        for (l1, c1, k1), (l2, c2, k2) in itertools.product(pos, neg):
            # k1 > 0, k2 < 0:  combine to cancel vid
            items = dict(l1)
            scale = -(Fraction(k1) / Fraction(k2))
            for w, c in l2:
                items[w] = items.get(w, 0) + c * scale
            items.pop(vid, None)
            const = c1 + c2 * scale
            lin = tuple(sorted((w, c) for w, c in items.items() if c != 0))
            if not lin:
                if const > 0:
                    return True
                continue
            new.append((lin, const))
            if len(new) > _FM_LIMIT:
                return False  # give up: cannot justify UNSAT
        rows = new
    for lin, const in rows:
        if not lin and const > 0:
            return True
    return False


# ---------------------------------------------------------------------------
# public checks


_BRIDGE = None  # optional SMT bridge, installed by the CLI / prover


def install_bridge(bridge) -> None:
    """Install (or clear) the external SMT bridge; flushes result caches."""
    global _BRIDGE
    _BRIDGE = bridge
    _STORE_CACHE.clear()
    from . import direct
    direct._DP_CACHE.clear()


def sat_check(store: ConstraintStore, witness: bool = False,
              effort: int = 200000) -> tuple[str, Optional[dict]]:
    """(verdict, witness-or-None).  UNSAT only when justified."""
    store.normalize()
    if store.unsat:
        return UNSAT, None
    if _BRIDGE is not None:
        v = _BRIDGE.check_pure(list(store.pures), store.derived_rows)
        if v == UNSAT:
            return UNSAT, None
    if witness:
        w = _find_witness(store, effort=effort)
        if w is not None:
            return SAT, w
    return UNKNOWN, None


def is_unsat(constraints: Iterable[Constraint]) -> bool:
    verdict, _ = sat_check(ConstraintStore.of(constraints))
    return verdict == UNSAT


def entail_check(phi: ConstraintStore, psi: Iterable[Constraint],
                 existentials: frozenset = frozenset()) -> str:
    """VALID iff every model of phi satisfies every conjunct of psi."""
    phi.normalize()
    psi = list(psi)
    for c in psi:
        for v in c.vars():
            if v in existentials:
                raise ExistentialLeak(f"existential {v.name} in entail query")
    if phi.unsat:
        return VALID
    all_proved = True
    for c in psi:
        if isinstance(c, Pure):
            ok = phi.implies_pure(c)
            if not ok and _BRIDGE is not None:
                ok = _BRIDGE.implies(list(phi.pures), phi.derived_rows, c)
        else:
            ok = phi.implies_heap_eq(c)
        if not ok:
            all_proved = False
            break
    if all_proved:
        return VALID
    # try to refute with a small witness of phi /\ not(c) for a pure c
    for c in psi:
        if isinstance(c, Pure):
            neg = _negate_pure(c)
            if neg is not None:
                st = ConstraintStore.of(list(phi.pures) + list(phi.heaps) + [neg])
                v, w = sat_check(st, witness=True, effort=2000)
                if v == SAT:
                    return NOT_VALID
    return UNKNOWN


def _negate_pure(c: Pure) -> Optional[Pure]:
    if c.op == EQ:
        return None  # negation is a disjunction
    if c.op == NE:
        return Pure(EQ, c.expr)
    return Pure(LE, Term.of(1) - c.expr)  # not(e<=0) == 1-e <= 0


# ---------------------------------------------------------------------------
# small witness search


def _find_witness(store: ConstraintStore, max_val: int = 6,
                  effort: int = 200000) -> Optional[dict]:
    int_vars = sorted({v.vid for c in store.pures for v in c.vars() if not v.heap} |
                      {vid for _, (lin, _) in store.derived_rows for vid, _ in lin} |
                      {v.vid for h in store.heaps for v in h.vars() if not v.heap})
    int_vars = [v for v in int_vars if v not in store.int_union]
    if len(int_vars) > 7:
        return None
    budget = [effort]
    eqs, les, nes = store._pure_rows()

    def eval_rows(assign):
        for lin, const in eqs:
            if any(vid not in assign for vid, _ in lin):
                continue
            if const + sum(c * assign[vid] for vid, c in lin) != 0:
                return False
        for lin, const in les:
            if any(vid not in assign for vid, _ in lin):
                continue
            if const + sum(c * assign[vid] for vid, c in lin) > 0:
                return False
        for lin, const in nes:
            if any(vid not in assign for vid, _ in lin):
                continue
            if const + sum(c * assign[vid] for vid, c in lin) == 0:
                return False
        return True

    domain = list(range(-1, max_val))

    def rec(i, assign):
        if budget[0] <= 0:
            return None
        if i == len(int_vars):
            return dict(assign) if eval_rows(assign) else None
        for val in domain:
            budget[0] -= 1
            assign[int_vars[i]] = val
            if eval_rows(assign):
                r = rec(i + 1, assign)
                if r is not None:
                    return r
        assign.pop(int_vars[i], None)
        return None

    assign = rec(0, {})
    if assign is None:
        return None
    # resolve eliminated variables
    full = {vid: int(val) for vid, val in assign.items()}
    for vid, t in store.int_union.items():
        lin, const = _lin(t, {})
        full[vid] = const + sum(c * full.get(w, 0) for w, c in lin)
    # heaps: free variables empty, defined ones built from definitions
    heaps: dict[int, Optional[frozenset]] = {}

    def heap_of(ms, depth=0):
        if depth > 16:
            return None
        cells = {}
        for f in ms:
            if f[0] == "cell":
                lin, const = f[1]
                a = const + sum(c * full.get(w, 0) for w, c in lin)
                lin2, const2 = f[2]
                v = const2 + sum(c * full.get(w, 0) for w, c in lin2)
                if a <= 0 or a in cells:
                    return None
                cells[a] = v
            else:
                sub = heaps.get(f[1])
                if sub is None:
                    sub = heap_of(store.defs.get(f[1], ()), depth + 1)
                    if sub is None:
                        return None
                    heaps[f[1]] = sub
                for a, v in sub:
                    if a in cells:
                        return None
                    cells[a] = v
        return frozenset(cells.items())

    for lm, rm in store.eq_pairs:
        hl = heap_of(lm)
        hr = heap_of(rm)
        if hl is None or hr is None or hl != hr:
            return None
    return {"ints": full}
