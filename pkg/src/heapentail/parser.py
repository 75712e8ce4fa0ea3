"""Concrete syntax for predicate definitions and entailment queries.

File format (``.clph``): ``#`` line comments, ``.``-terminated clauses.

    list(x, L) :- x = 0, L ~ emp.
    list(x, L) :- L ~ (x -> t) * L1, list(t, L1).
    entail list(x, L) |- ls(x, y, L1), list(y, L2), L ~ L1 * L2.

A conjunct that is a bare heap term (``L1 * L2``) is shorthand for naming
the surrounding heap: it desugars to ``H ~ L1 * L2`` with a fresh heap
variable.  This is only permitted in entailment queries.

Variable kinds are inferred: a variable is heap-kinded iff it occurs on a
side of ``~``, as a star factor, or in a heap argument position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .lang import (Atom, Cell, Entailment, Goal, HeapEq, HeapTerm, PredInfo,
                   Program, Pure, Rule, Session, Term, Var)


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


@dataclass
class EntailmentQuery:
    entailment: Entailment
    expect: Optional[str]  # "proved" | "not-proved" | None
    line: int


@dataclass
class SourceFile:
    path: str
    text: str
    program: Program
    queries: list[EntailmentQuery]
    session: Session


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<entails>\|-)
  | (?P<def>:-)
  | (?P<arrow>->)
  | (?P<op><=|!=|=|<)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[(),.*+~-])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> tuple[list[Tok], list[str]]:
    toks: list[Tok] = []
    expects: list[str] = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "comment":
            em = re.match(r"#\s*expect:\s*(proved|not-proved)", s)
            if em:
                expects.append(em.group(1))
        elif kind != "ws":
            toks.append(Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        i = m.end()
    toks.append(Tok("eof", "", line, col))
    return toks, expects


# ---------------------------------------------------------------------------
# raw (kind-unresolved) syntax

INT_KIND, HEAP_KIND, ANY_KIND = "int", "heap", "any"


@dataclass
class RawExpr:
    """Sum of +/- signed items; each item an int literal or a name."""
    items: list[tuple[int, Union[int, str]]]
    line: int
    col: int

    def single_name(self) -> Optional[str]:
        if len(self.items) == 1 and self.items[0][0] == 1 \
                and isinstance(self.items[0][1], str):
            return self.items[0][1]
        return None


@dataclass
class RawCell:
    addr: RawExpr
    value: RawExpr


@dataclass
class RawStar:
    factors: list[Union[RawCell, str]]  # names are heap variables / emp markers
    has_emp: bool
    line: int
    col: int


RawArg = Union[RawExpr, RawStar, RawCell]


@dataclass
class RawAtom:
    pred: str
    args: list[RawArg]
    line: int
    col: int


@dataclass
class RawPure:
    lhs: RawExpr
    op: str
    rhs: RawExpr


@dataclass
class RawHeapEq:
    lhs: RawStar
    rhs: RawStar


@dataclass
class RawBare:
    term: RawStar


RawConjunct = Union[RawAtom, RawPure, RawHeapEq, RawBare]


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, text: str) -> Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def fail(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # -- expressions ----------------------------------------------------

    def parse_expr(self) -> RawExpr:
        t0 = self.peek()
        items: list[tuple[int, Union[int, str]]] = []
        sign = 1
        if self.peek().text == "-":
            self.next()
            sign = -1
        while True:
            t = self.next()
            if t.kind == "int":
                items.append((sign, int(t.text)))
            elif t.kind == "id":
                items.append((sign, t.text))
            else:
                raise ParseError("expected integer or variable", t.line, t.col)
            nxt = self.peek()
            if nxt.text == "+":
                self.next()
                sign = 1
            elif nxt.text == "-":
                self.next()
                sign = -1
            else:
                return RawExpr(items, t0.line, t0.col)

    def parse_heap_factor(self) -> Union[RawCell, str, None]:
        t = self.peek()
        if t.text == "(":
            self.next()
            addr = self.parse_expr()
            self.expect("->")
            val = self.parse_expr()
            self.expect(")")
            return RawCell(addr, val)
        if t.kind == "id":
            self.next()
            return None if t.text == "emp" else t.text
        self.fail("expected heap factor")

    def parse_heap_term(self) -> RawStar:
        t0 = self.peek()
        factors: list[Union[RawCell, str]] = []
        has_emp = False
        while True:
            f = self.parse_heap_factor()
            if f is None:
                has_emp = True
            else:
                factors.append(f)
            if self.peek().text == "*":
                self.next()
            else:
                return RawStar(factors, has_emp, t0.line, t0.col)

    def at_heap_context(self) -> bool:
        """Lookahead: does a conjunct starting here contain '~', '->' or '*'
        before the next ',', '.', or '|-'?"""
        depth = 0
        k = 0
        while True:
            t = self.peek(k)
            if t.kind == "eof":
                return False
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
                if depth < 0:
                    return False
            elif depth == 0 and t.text in (",", ".") or t.kind == "entails":
                return False
            elif t.text in ("~", "*") or t.kind == "arrow":
                return True
            k += 1

    def parse_conjunct(self) -> RawConjunct:
        t = self.peek()
        # atom: id followed by '('
        if t.kind == "id" and self.peek(1).text == "(" and t.text != "emp":
            # distinguish atom from parenthesised cell in heap term context:
            # an atom name is directly followed by '(' and we are not mid-term.
            name = self.next().text
            self.expect("(")
            args: list[RawArg] = []
            if self.peek().text != ")":
                while True:
                    args.append(self.parse_arg())
                    if self.peek().text == ",":
                        self.next()
                    else:
                        break
            self.expect(")")
            return RawAtom(name, args, t.line, t.col)
        if self.at_heap_context() or t.text == "(" or t.text == "emp":
            lhs = self.parse_heap_term()
            if self.peek().text == "~":
                self.next()
                rhs = self.parse_heap_term()
                return RawHeapEq(lhs, rhs)
            return RawBare(lhs)
        lhs = self.parse_expr()
        op = self.next()
        if op.kind != "op":
            # a lone variable conjunct is not meaningful
            raise ParseError("expected relation or '~'", op.line, op.col)
        rhs = self.parse_expr()
        return RawPure(lhs, op.text, rhs)

    def parse_arg(self) -> RawArg:
        """An atom argument: integer expression or heap term."""
        depth_probe = self.peek()
        if depth_probe.text == "(" or depth_probe.text == "emp":
            return self.parse_heap_term()
        # name possibly followed by '*' (heap star) or arithmetic
        save = self.pos
        if self.peek().kind in ("id", "int") or self.peek().text == "-":
            # try expression first; if '*' follows a lone name, it is a heap term
            expr = self.parse_expr()
            if self.peek().text == "*":
                self.pos = save
                return self.parse_heap_term()
            return expr
        self.fail("expected argument")


# ---------------------------------------------------------------------------
# kind inference and elaboration


class _Kinds:
    """Per-clause variable kind table with conflict detection."""

    def __init__(self):
        self.kinds: dict[str, str] = {}

    def mark(self, name: str, kind: str, line: int, col: int):
        old = self.kinds.get(name, ANY_KIND)
        if old == ANY_KIND:
            self.kinds[name] = kind
        elif kind != ANY_KIND and old != kind:
            raise ParseError(
                f"variable {name} used both as {old} and {kind}", line, col)

    def kind(self, name: str) -> str:
        return self.kinds.get(name, ANY_KIND)


def _scan_kinds(conjs: list[RawConjunct], preds: dict[str, PredInfo],
                kinds: _Kinds):
    """First pass: record heap/int evidence for every variable occurrence."""

    def scan_expr(e: RawExpr, kind: str):
        for _, item in e.items:
            if isinstance(item, str):
                kinds.mark(item, kind, e.line, e.col)

    def scan_star(s: RawStar):
        for f in s.factors:
            if isinstance(f, str):
                kinds.mark(f, HEAP_KIND, s.line, s.col)
            else:
                scan_expr(f.addr, INT_KIND)
                scan_expr(f.value, INT_KIND)

    for c in conjs:
        if isinstance(c, RawPure):
            scan_expr(c.lhs, INT_KIND)
            scan_expr(c.rhs, INT_KIND)
        elif isinstance(c, RawHeapEq):
            scan_star(c.lhs)
            scan_star(c.rhs)
        elif isinstance(c, RawBare):
            scan_star(c.term)
        else:
            info = preds.get(c.pred)
            for i, a in enumerate(c.args):
                if isinstance(a, RawStar):
                    scan_star(a)
                elif isinstance(a, RawCell):
                    scan_expr(a.addr, INT_KIND)
                    scan_expr(a.value, INT_KIND)
                else:
                    nm = a.single_name()
                    if info is not None:
                        want = HEAP_KIND if info.kinds[i] else INT_KIND
                        if nm is not None:
                            kinds.mark(nm, want, a.line, a.col)
                        elif want == HEAP_KIND:
                            raise ParseError(
                                f"argument {i + 1} of {c.pred} must be a heap term",
                                a.line, a.col)
                    elif nm is None:
                        # multi-item arithmetic argument: integer-kinded
                        scan_expr(a, INT_KIND)


class ClauseElaborator:
    def __init__(self, session: Session, kinds: _Kinds):
        self.session = session
        self.kinds = kinds
        self.vars: dict[str, Var] = {}

    def var(self, name: str, heap: bool, line: int, col: int) -> Var:
        v = self.vars.get(name)
        if v is None:
            v = self.session.fresh(name, heap)
            self.vars[name] = v
        elif v.heap != heap:
            raise ParseError(
                f"variable {name} used both as "
                f"{'heap' if v.heap else 'int'} and "
                f"{'heap' if heap else 'int'}", line, col)
        return v

    def expr(self, e: RawExpr) -> Term:
        out = Term.of(0)
        for sign, item in e.items:
            if isinstance(item, int):
                out = out + sign * item
            else:
                v = self.var(item, False, e.line, e.col)
                out = out + Term.of(v).scaled(sign)
        return out

    def star(self, s: RawStar) -> HeapTerm:
        parts = []
        for f in s.factors:
            if isinstance(f, str):
                parts.append(self.var(f, True, s.line, s.col))
            else:
                parts.append(Cell(self.expr(f.addr), self.expr(f.value)))
        return HeapTerm.star(parts)

    def arg(self, a: RawArg, heap: bool, where: RawAtom, idx: int):
        if isinstance(a, RawStar):
            if not heap:
                raise ParseError(
                    f"argument {idx + 1} of {where.pred} is integer-kinded",
                    where.line, where.col)
            return self.star(a)
        nm = a.single_name()
        if heap:
            if nm is None:
                raise ParseError(
                    f"argument {idx + 1} of {where.pred} must be a heap term",
                    where.line, where.col)
            return HeapTerm.of(self.var(nm, True, a.line, a.col))
        return self.expr(a)


def _arg_kind(a: RawArg, kinds: _Kinds) -> str:
    if isinstance(a, (RawStar, RawCell)):
        return HEAP_KIND
    nm = a.single_name()
    if nm is None:
        return INT_KIND
    return kinds.kind(nm)


def _elaborate_conjuncts(
        conjs: list[RawConjunct], preds: dict[str, PredInfo],
        session: Session, el: ClauseElaborator,
        allow_bare: bool, declare: bool,
        ctx_line: int) -> Goal:
    kinds = el.kinds
    constraints: list = []
    atoms: list[Atom] = []
    bare_var: Optional[Var] = None
    for c in conjs:
        if isinstance(c, RawPure):
            constraints.append(Pure.make(el.expr(c.lhs), c.op, el.expr(c.rhs)))
        elif isinstance(c, RawHeapEq):
            constraints.append(HeapEq(el.star(c.lhs), el.star(c.rhs)))
        elif isinstance(c, RawBare):
            if not allow_bare:
                raise ParseError("bare heap term only allowed in entail queries",
                                 c.term.line, c.term.col)
            if bare_var is None:
                bare_var = session.fresh("H_all", True)
            constraints.append(HeapEq(HeapTerm.of(bare_var), el.star(c.term)))
        else:
            info = preds.get(c.pred)
            if info is None:
                if not declare:
                    raise ParseError(f"undeclared predicate {c.pred}",
                                     c.line, c.col)
                ks = tuple(_arg_kind(a, kinds) == HEAP_KIND for a in c.args)
                info = PredInfo(c.pred, ks)
                preds[c.pred] = info
            if len(c.args) != info.arity:
                raise ParseError(
                    f"{c.pred} expects {info.arity} arguments, got {len(c.args)}",
                    c.line, c.col)
            args = tuple(el.arg(a, info.kinds[i], c, i)
                         for i, a in enumerate(c.args))
            atoms.append(Atom(c.pred, args, gen=0))
    return Goal.make(constraints, atoms)


def parse_program(text: str, session: Optional[Session] = None,
                  path: str = "<string>") -> SourceFile:
    """Parse a full source file: clauses followed (or interleaved) by queries."""
    session = session or Session()
    toks, _ = _lex(text)
    # recover expects in positional order: re-lex keeping comment positions
    program = Program()
    queries: list[EntailmentQuery] = []
    p = _Parser(toks)
    expect_map = _collect_expects(text)
    while p.peek().kind != "eof":
        t = p.peek()
        if t.kind == "id" and t.text == "entail":
            p.next()
            lhs_conjs = _parse_body(p)
            tk = p.next()
            if tk.kind != "entails":
                raise ParseError("expected '|-'", tk.line, tk.col)
            rhs_conjs = _parse_body(p)
            p.expect(".")
            kinds = _Kinds()
            _seed_kinds_from_sigs(lhs_conjs + rhs_conjs, program.preds, kinds)
            _scan_kinds(lhs_conjs + rhs_conjs, program.preds, kinds)
            el = ClauseElaborator(session, kinds)
            lhs = _elaborate_conjuncts(lhs_conjs, program.preds, session, el,
                                       allow_bare=True, declare=False,
                                       ctx_line=t.line)
            rhs = _elaborate_conjuncts(rhs_conjs, program.preds, session, el,
                                       allow_bare=True, declare=False,
                                       ctx_line=t.line)
            queries.append(EntailmentQuery(Entailment(lhs, rhs),
                                           expect_map.pop(0) if expect_map else None,
                                           t.line))
        else:
            _parse_clause(p, program, session)
    return SourceFile(path, text, program, queries, session)


def _collect_expects(text: str) -> list[str]:
    return re.findall(r"#\s*expect:\s*(proved|not-proved)", text)


def _parse_body(p: _Parser) -> list[RawConjunct]:
    out = [p.parse_conjunct()]
    while p.peek().text == ",":
        p.next()
        out.append(p.parse_conjunct())
    return out


def _seed_kinds_from_sigs(conjs: list[RawConjunct], preds: dict[str, PredInfo],
                          kinds: _Kinds):
    for c in conjs:
        if isinstance(c, RawAtom) and c.pred in preds:
            info = preds[c.pred]
            if len(c.args) != info.arity:
                raise ParseError(
                    f"{c.pred} expects {info.arity} arguments, got {len(c.args)}",
                    c.line, c.col)
            for i, a in enumerate(c.args):
                if isinstance(a, RawExpr):
                    nm = a.single_name()
                    if nm is not None:
                        kinds.mark(nm, HEAP_KIND if info.kinds[i] else INT_KIND,
                                   a.line, a.col)


def _parse_clause(p: _Parser, program: Program, session: Session):
    t = p.peek()
    if t.kind != "id":
        raise ParseError("expected clause or 'entail'", t.line, t.col)
    name = p.next().text
    p.expect("(")
    params_raw: list[Tok] = []
    if p.peek().text != ")":
        while True:
            pt = p.next()
            if pt.kind != "id":
                raise ParseError("clause head parameters must be variables",
                                 pt.line, pt.col)
            params_raw.append(pt)
            if p.peek().text == ",":
                p.next()
            else:
                break
    p.expect(")")
    names = [pt.text for pt in params_raw]
    if len(set(names)) != len(names):
        raise ParseError("clause head parameters must be distinct",
                         t.line, t.col)
    dt = p.next()
    if dt.kind != "def":
        raise ParseError("expected ':-'", dt.line, dt.col)
    body_conjs = _parse_body(p)
    p.expect(".")

    kinds = _Kinds()
    _seed_kinds_from_sigs(body_conjs, program.preds, kinds)
    info = program.preds.get(name)
    if info is not None:
        if len(names) != info.arity:
            raise ParseError(
                f"{name} expects {info.arity} arguments, got {len(names)}",
                t.line, t.col)
        for nm, heap in zip(names, info.kinds):
            kinds.mark(nm, HEAP_KIND if heap else INT_KIND, t.line, t.col)
    _scan_kinds(body_conjs, program.preds, kinds)
    el = ClauseElaborator(session, kinds)
    params = tuple(el.var(nm, kinds.kind(nm) == HEAP_KIND, t.line, t.col)
                   for nm in names)
    if info is None:
        info = PredInfo(name, tuple(v.heap for v in params))
        program.preds[name] = info
    body = _elaborate_conjuncts(body_conjs, program.preds, session, el,
                                allow_bare=False, declare=False,
                                ctx_line=t.line)
    info.rules.append(Rule(name, params, body))


def parse_entailment(text: str, program: Program,
                     session: Optional[Session] = None) -> Entailment:
    """Parse a single ``entail ... |- ... .`` line against a loaded program."""
    session = session or Session()
    src = text.strip()
    if not src.startswith("entail"):
        src = "entail " + src
    if not src.endswith("."):
        src += "."
    toks, _ = _lex(src)
    p = _Parser(toks)
    p.next()  # 'entail'
    lhs_conjs = _parse_body(p)
    tk = p.next()
    if tk.kind != "entails":
        raise ParseError("expected '|-'", tk.line, tk.col)
    rhs_conjs = _parse_body(p)
    p.expect(".")
    kinds = _Kinds()
    _seed_kinds_from_sigs(lhs_conjs + rhs_conjs, program.preds, kinds)
    _scan_kinds(lhs_conjs + rhs_conjs, program.preds, kinds)
    el = ClauseElaborator(session, kinds)
    lhs = _elaborate_conjuncts(lhs_conjs, program.preds, session, el,
                               allow_bare=True, declare=False, ctx_line=1)
    rhs = _elaborate_conjuncts(rhs_conjs, program.preds, session, el,
                               allow_bare=True, declare=False, ctx_line=1)
    return Entailment(lhs, rhs)


def parse_file(path: str, session: Optional[Session] = None) -> SourceFile:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_program(text, session, path)
