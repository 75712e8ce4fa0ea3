"""Top-level proof search: depth-first over rule applications with bounds,
pruning predicates and the five-pass heuristic ordering.

``Prover.prove`` implements: direct proof attempt; induction-application
candidates (bounded by ib); complete left unfolds with assumption recording
(bounded by lb, trivially-true branches dropped, empty branch set proves
immediately); right unfolds guarded by the contradiction check (bounded by
rb); then heuristic ordering and depth-first conjunction of the first
obligation set whose members all prove.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .direct import bind_remaining_existentials, direct_proof
from .induction import (Assumption, AssumptionSet, IACandidate,
                        candidates_ia1, candidates_ia2)
from .lang import (Entailment, Goal, Program, Session, Subst,
                   pretty_atom, pretty_entailment, pretty_goal)
from .solver import ConstraintStore, is_unsat
from .unfold import unfold_left, unfold_right

PROVED = "Proved"
NOT_PROVED = "NotProved"
TIMEOUT = "Timeout"


class SearchTimeout(Exception):
    pass


@dataclass
class SearchConfig:
    max_left: int = 5
    max_right: int = 5
    max_induction: int = 3
    timeout_ms: int = 10000
    smt_cmd: Optional[str] = None
    proof_format: str = "text"

    def __post_init__(self):
        if min(self.max_left, self.max_right, self.max_induction) < 0:
            raise ValueError("bounds must be non-negative")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class Obligation:
    entailment: Entailment
    assumptions: AssumptionSet
    lb: int
    rb: int
    ib: int
    provenance: str = "root"  # root | lu | ru | ia1 | ia2
    seq: int = 0
    _key: Optional[tuple] = None


@dataclass
class ProofNode:
    rule: str  # CP | SUB | LU+I | RU | IA-1 | IA-2 | TRIV
    entailment: Entailment
    counters: tuple[int, int, int]
    substitution: Optional[Subst] = None
    details: dict = field(default_factory=dict)
    children: list["ProofNode"] = field(default_factory=list)

    def rules_used(self) -> list[str]:
        out = [self.rule]
        for c in self.children:
            out.extend(c.rules_used())
        return out

    def count_rule(self, rule: str) -> int:
        return sum(1 for r in self.rules_used() if r == rule)


@dataclass
class ProofResult:
    status: str
    tree: Optional[ProofNode]
    elapsed_s: float
    nodes: int

    @property
    def proved(self) -> bool:
        return self.status == PROVED


@dataclass
class _ObSet:
    obligations: list[Obligation]
    provenance: str
    seq: int
    make_node: object  # callable(children: list[ProofNode]) -> ProofNode


class Prover:
    """One prover instance: single-threaded, owns its session and clock."""

    def __init__(self, program: Program, config: Optional[SearchConfig] = None,
                 session: Optional[Session] = None):
        self.program = program
        self.config = config or SearchConfig()
        self.session = session or Session()
        self._clock = 0
        self._seq = 0
        self._deadline = 0.0
        self._nodes = 0
        self._contradict_cache: dict = {}
        self._failed: set = set()
        self._reach_cache: dict = {}
        self._asm_code_cache: dict = {}

    # -- clocks and bookkeeping -----------------------------------------

    def _tick(self) -> int:
        self._clock += 1
        return self._clock

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _check_time(self):
        if time.monotonic() > self._deadline:
            raise SearchTimeout()

    # -- pruning predicates ----------------------------------------------

    def trivially_true(self, ob: Obligation) -> bool:
        return is_unsat(ob.entailment.lhs.constraints)

    def contradict(self, e: Entailment) -> bool:
        key = (e.lhs.constraints, e.rhs.constraints)
        hit = self._contradict_cache.get(key)
        if hit is None:
            hit = is_unsat(e.lhs.constraints + e.rhs.constraints)
            self._contradict_cache[key] = hit
        return hit

    # -- heuristic ordering ------------------------------------------------

    def _ob_key(self, ob: Obligation) -> tuple:
        if ob._key is not None:
            return ob._key
        e = ob.entailment
        k1 = 1 if self.contradict(e) else 0
        k2 = 1 if e.rhs.atoms else 0
        lhs_preds = {a.pred for a in e.lhs.atoms}
        k3 = 1 if any(a.pred not in lhs_preds for a in e.rhs.atoms) else 0
        k4 = self._unbindable(e)
        k5 = 1 if ob.provenance == "ru" else 0
        ob._key = (k1, k2, k3, k4, k5)
        return ob._key

    def _unbindable(self, e: Entailment) -> int:
        exist = e.existentials
        if not exist:
            return 0
        constraint_vars: set = set()
        for c in e.rhs.constraints:
            constraint_vars.update(c.vars())
        # existentials occurring only in atom arguments are bound by atom
        # matching during (sub); the fixpoint notion applies to the rest
        exist_c = [v for v in exist if v in constraint_vars]
        if not exist_c:
            return 0
        store = ConstraintStore.of_goal(e.lhs)
        theta = bind_remaining_existentials(e.rhs.constraints, store, Subst(),
                                            exist)
        return sum(1 for v in exist_c if v not in theta)

    def order_by_heuristics(self, or_sets: list[_ObSet]) -> list[_ObSet]:
        """Within each set the hardest obligation comes first (failing
        conjunctions die early); sets are compared by their last member."""
        for s in or_sets:
            s.obligations.sort(
                key=lambda ob: tuple(-k for k in self._ob_key(ob)) + (ob.seq,))
        return sorted(or_sets,
                      key=lambda s: (self._ob_key(s.obligations[-1]), s.seq))

    # -- slicing -----------------------------------------------------------

    def _slice(self, e: Entailment) -> Entailment:
        """Drop LHS constraints sharing no variables (transitively) with the
        RHS or any LHS atom; skipped when the LHS is already inconsistent."""
        if is_unsat(e.lhs.constraints):
            return e
        seeds = set(e.rhs.vars())
        for a in e.lhs.atoms:
            seeds.update(a.vars())
        keep = list(e.lhs.constraints)
        changed = True
        connected: set = set(seeds)
        marked = [False] * len(keep)
        while changed:
            changed = False
            for i, c in enumerate(keep):
                if not marked[i] and (set(c.vars()) & connected or not set(c.vars())):
                    marked[i] = True
                    connected.update(c.vars())
                    changed = True
        kept = tuple(c for i, c in enumerate(keep) if marked[i])
        if len(kept) == len(keep):
            return e
        return Entailment(Goal(kept, e.lhs.atoms), e.rhs)

    # -- main entry ----------------------------------------------------------

    def prove(self, entailment: Entailment) -> ProofResult:
        self._clock = 0
        self._seq = 0
        self._nodes = 0
        self._deadline = time.monotonic() + self.config.timeout_ms / 1000.0
        start = time.monotonic()
        root = Obligation(self._slice(entailment), (), 0, 0, 0, "root",
                          self._next_seq())
        self._failed.clear()
        self._asm_code_cache.clear()
        try:
            node = self._prove(root)
        except SearchTimeout:
            return ProofResult(TIMEOUT, None, time.monotonic() - start,
                               self._nodes)
        status = PROVED if node is not None else NOT_PROVED
        return ProofResult(status, node, time.monotonic() - start, self._nodes)

    # -- failure memo ------------------------------------------------------

    def _asm_codes(self, asm) -> dict:
        """Role of each assumption variable: pivot-argument positions plus
        premise/conclusion membership.  Cached per assumption object."""
        hit = self._asm_code_cache.get(id(asm))
        if hit is not None:
            return hit
        code: dict = {}
        for j, arg in enumerate(asm.pivot.args):
            for v in arg.vars():
                code.setdefault(v, [[], False, False])[0].append(j)
        for v in asm.entailment.lhs.vars():
            code.setdefault(v, [[], False, False])[1] = True
        for v in asm.entailment.rhs.vars():
            code.setdefault(v, [[], False, False])[2] = True
        out = {v: (tuple(p), l, r) for v, (p, l, r) in code.items()}
        self._asm_code_cache[id(asm)] = out
        return out

    def _reachable_preds(self, seed: frozenset) -> frozenset:
        hit = self._reach_cache.get(seed)
        if hit is not None:
            return hit
        out = set(seed)
        frontier = list(seed)
        while frontier:
            p = frontier.pop()
            info = self.program.preds.get(p)
            if info is None:
                continue
            for rule in info.rules:
                for a in rule.body.atoms:
                    if a.pred not in out:
                        out.add(a.pred)
                        frontier.append(a.pred)
        res = frozenset(out)
        self._reach_cache[seed] = res
        return res

    def _memo_key(self, ob: Obligation) -> tuple:
        """Joint alpha-canonical form of the obligation: entailment,
        assumptions, counters, with timestamps replaced by their ranks.

        Assumptions whose pivot predicate can never occur among the LHS
        atoms reachable from the current goal are unusable by the
        induction rules and are erased from the key, together with the
        timestamps when no assumption remains usable."""
        from .lang import Cell, HeapTerm, Pure
        order: dict = {}
        stamps: set[int] = set()
        if ob.ib >= self.config.max_induction:
            usable = ()  # induction exhausted: assumptions and stamps inert
        else:
            reachable = self._reachable_preds(
                frozenset(a.pred for a in ob.entailment.lhs.atoms))
            usable = tuple(a for a in ob.assumptions
                           if a.pivot.pred in reachable)
        codes = [self._asm_codes(a) for a in usable]

        def v_of(v):
            s = order.get(v)
            if s is None:
                link = tuple((i, c[v]) for i, c in enumerate(codes) if v in c)
                s = (v.heap, len(order), link)
                order[v] = s
            return s

        def term(t):
            return tuple(("v", v_of(v), c) for v, c in t.coeffs) \
                + (("#", t.const, 0),)

        def ht(h):
            return tuple(
                ("c", term(f.addr), term(f.value)) if isinstance(f, Cell)
                else ("v", v_of(f)) for f in h.factors)

        def atom(a, rank):
            stamps.add(a.gen)
            if a.kill is not None:
                stamps.add(a.kill)
            return (a.pred,
                    tuple(ht(x) if isinstance(x, HeapTerm) else term(x)
                          for x in a.args),
                    rank(a.gen), rank(a.kill) if a.kill is not None else None)

        def goal(g, rank):
            # atoms first so variable naming is insensitive to the order
            # in which constraints were accumulated along the path
            atoms = tuple(atom(a, rank) for a in g.atoms)
            cs = tuple(sorted(
                ("p", c.op, term(c.expr)) if isinstance(c, Pure)
                else ("h", ht(c.lhs), ht(c.rhs)) for c in g.constraints))
            return (cs, atoms)

        # assumptions are compared by identity: they are immutable and shared;
        # the variable linkage between the obligation and each assumption is
        # captured by the per-variable role codes above
        asms = tuple(id(a) for a in usable)

        def build(rank):
            ent = (goal(ob.entailment.lhs, rank), goal(ob.entailment.rhs, rank))
            return (ent, asms, ob.lb, ob.rb, ob.ib)

        if not usable:
            return build(lambda s: 0)
        build(lambda s: 0)  # first pass: collect variables and stamps
        ranks = {s: i for i, s in enumerate(sorted(stamps))}
        order.clear()
        return build(lambda s: ranks[s])

    # -- the recursion ---------------------------------------------------

    def _prove(self, ob: Obligation) -> Optional[ProofNode]:
        self._check_time()
        memo = self._memo_key(ob)
        if memo in self._failed:
            return None
        node = self._prove_inner(ob)
        if node is None:
            self._failed.add(memo)
        return node

    def _prove_inner(self, ob: Obligation) -> Optional[ProofNode]:
        self._nodes += 1
        e = ob.entailment
        counters = (ob.lb, ob.rb, ob.ib)

        dp = direct_proof(e)
        if dp is not None:
            cp = ProofNode("CP", Entailment(Goal(e.lhs.constraints, ()),
                                            Goal(dp.residue, ())), counters)
            if dp.pairs or len(dp.theta):
                return ProofNode("SUB", e, counters, substitution=dp.theta,
                                 details={"matched": len(dp.pairs)},
                                 children=[cp])
            return ProofNode("CP", e, counters)

        or_sets: list[_ObSet] = []

        if ob.ib < self.config.max_induction:
            for cand in candidates_ia1(e, ob.assumptions, self.session,
                                       self._tick):
                or_sets.append(self._ia_set(ob, cand))
            for cand in candidates_ia2(e, ob.assumptions, self.session,
                                       self._tick):
                or_sets.append(self._ia_set(ob, cand))

        if ob.lb < self.config.max_left:
            for li in range(len(e.lhs.atoms)):
                res = unfold_left(e, li, self.program, self.session,
                                  self._tick())
                asm = Assumption(e, res.pivot, li)
                assumptions = ob.assumptions + (asm,)
                branch_obs = []
                for bi, goal in enumerate(res.branches):
                    child = Obligation(Entailment(goal, e.rhs), assumptions,
                                       ob.lb + 1, ob.rb, ob.ib, "lu",
                                       self._next_seq())
                    if self.trivially_true(child):
                        continue
                    branch_obs.append((res.branch_rules[bi], child))
                details = {"pivot": li, "pivot_atom": pretty_atom(res.pivot),
                           "clauses": [c for c, _ in branch_obs]}
                if not branch_obs:
                    # complete unfold with no satisfiable branch: proved
                    return ProofNode("LU+I", e, counters, details=details)
                or_sets.append(self._lu_set(ob, e, branch_obs, details))

        if ob.rb < self.config.max_right and not self.contradict(e):
            for ri in range(len(e.rhs.atoms)):
                res = unfold_right(e, ri, self.program, self.session,
                                   self._tick())
                for ci, goal in zip(res.branch_rules, res.branches):
                    child = Obligation(Entailment(e.lhs, goal),
                                       ob.assumptions, ob.lb, ob.rb + 1,
                                       ob.ib, "ru", self._next_seq())
                    or_sets.append(self._ru_set(ob, e, child, ri, ci, res))

        if not or_sets:
            return None
        for s in self.order_by_heuristics(or_sets):
            self._check_time()
            children = self._prove_all(s.obligations)
            if children is not None:
                return s.make_node(children)
        return None

    def _prove_all(self, obs: list[Obligation]) -> Optional[list[ProofNode]]:
        out = []
        for ob in obs:
            node = self._prove(ob)
            if node is None:
                return None
            out.append(node)
        return out

    # -- or-set builders ----------------------------------------------------

    def _ia_set(self, ob: Obligation, cand: IACandidate) -> _ObSet:
        child = Obligation(cand.entailment, ob.assumptions, ob.lb, ob.rb,
                           ob.ib + 1, "ia1" if cand.rule == "IA-1" else "ia2",
                           self._next_seq())
        counters = (ob.lb, ob.rb, ob.ib)
        details = {"assumption": cand.assumption_index,
                   "atom": cand.atom_index,
                   "consumed": list(cand.consumed)}

        def make(children: list[ProofNode]) -> ProofNode:
            return ProofNode(cand.rule, ob.entailment, counters,
                             substitution=cand.theta, details=details,
                             children=children)

        return _ObSet([child], child.provenance, child.seq, make)

    def _lu_set(self, ob: Obligation, e: Entailment,
                branch_obs: list, details: dict) -> _ObSet:
        counters = (ob.lb, ob.rb, ob.ib)
        by_seq = {c.seq: i for i, (_, c) in enumerate(branch_obs)}
        s = _ObSet([c for _, c in branch_obs], "lu",
                   min(c.seq for _, c in branch_obs), None)

        def make(children: list[ProofNode]) -> ProofNode:
            # children arrive in exploration order; emit in clause order
            paired = sorted(zip(s.obligations, children),
                            key=lambda p: by_seq[p[0].seq])
            return ProofNode("LU+I", e, counters, details=details,
                             children=[n for _, n in paired])

        s.make_node = make
        return s

    def _ru_set(self, ob: Obligation, e: Entailment, child: Obligation,
                pivot: int, clause: int, res) -> _ObSet:
        counters = (ob.lb, ob.rb, ob.ib)
        details = {"pivot": pivot, "pivot_atom": pretty_atom(res.pivot),
                   "clause": clause}

        def make(children: list[ProofNode]) -> ProofNode:
            return ProofNode("RU", e, counters, details=details,
                             children=children)

        return _ObSet([child], "ru", child.seq, make)


def prove_all(prover: Prover, obs: list[Obligation]) -> bool:
    """True iff every obligation proves; short-circuits, preserves order."""
    try:
        return prover._prove_all(obs) is not None
    except SearchTimeout:
        return False


# ---------------------------------------------------------------------------
# proof tree rendering


def tree_to_json(node: ProofNode) -> dict:
    sub = {}
    if node.substitution is not None:
        for v, t in node.substitution.items():
            sub[v.name] = repr(t)
    return {
        "rule": node.rule,
        "entailment": pretty_entailment(node.entailment),
        "substitution": sub,
        "counters": {"lb": node.counters[0], "rb": node.counters[1],
                     "ib": node.counters[2]},
        "details": {k: v for k, v in sorted(node.details.items())},
        "children": [tree_to_json(c) for c in node.children],
    }


def tree_to_text(node: ProofNode, indent: int = 0) -> str:
    pad = "  " * indent
    line = f"{pad}[{node.rule}] {pretty_entailment(node.entailment)}"
    out = [line]
    for c in node.children:
        out.append(tree_to_text(c, indent + 1))
    return "\n".join(out)
