"""Labelled while-language: syntax tree, parser, expression evaluation,
loop unrolling and atomic sets.

Program text looks like::

    init: x = 0, y = 0
    1: r1 := [x];
    2: [y] := r1 + 1
    |||
    3: r2 := [y];
    4: [x] := 1

Threads are numbered from 1 in the order they appear.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union


class ParseError(ValueError):
    """Raised for malformed program or assertion text."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


class EvalError(ValueError):
    """Raised when an expression mentions a register with no value."""


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Reg:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"

    def __str__(self) -> str:
        return f"{self.op}{self.operand}"


@dataclass(frozen=True)
class Call:
    """Built-in function application; only used inside assertions."""

    name: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


Expr = Union[Const, Reg, BinOp, UnOp, Call]

_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a // b,
    "%": lambda a, b: a % b,
}
_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_expr(e: Expr, regs: Mapping[str, int]) -> int | bool:
    """Value of ``e`` under the register file ``regs``.

    Comparisons and connectives produce ``bool``; arithmetic treats booleans
    as 0/1 like C does.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Reg):
        try:
            return regs[e.name]
        except KeyError:
            raise EvalError(f"unbound register {e.name!r}") from None
    if isinstance(e, UnOp):
        v = eval_expr(e.operand, regs)
        if e.op == "!":
            return not v
        return -v
    if isinstance(e, BinOp):
        if e.op in ("&", "&&"):
            return bool(eval_expr(e.left, regs)) and bool(eval_expr(e.right, regs))
        if e.op in ("|", "||"):
            return bool(eval_expr(e.left, regs)) or bool(eval_expr(e.right, regs))
        a = eval_expr(e.left, regs)
        b = eval_expr(e.right, regs)
        if e.op in _CMP:
            return _CMP[e.op](a, b)
        if e.op in ("/", "%") and b == 0:
            raise EvalError(f"division by zero in {e}")
        return _ARITH[e.op](a, b)
    raise EvalError(f"cannot evaluate {e!r} in a program context")


def expr_registers(e: Expr) -> frozenset[str]:
    if isinstance(e, Reg):
        return frozenset((e.name,))
    if isinstance(e, BinOp):
        return expr_registers(e.left) | expr_registers(e.right)
    if isinstance(e, UnOp):
        return expr_registers(e.operand)
    return frozenset()


# ---------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class Skip:
    label: str | None = None

    def __str__(self) -> str:
        return f"{self.label}: skip" if self.label else "skip"


@dataclass(frozen=True)
class Store:
    label: str
    var: str
    expr: Expr
    release: bool = False

    def __str__(self) -> str:
        return f"{self.label}: [{self.var}] :={'^R' if self.release else ''} {self.expr}"


@dataclass(frozen=True)
class Load:
    label: str
    reg: str
    var: str
    acquire: bool = False

    def __str__(self) -> str:
        return f"{self.label}: {self.reg} :={'^A' if self.acquire else ''} [{self.var}]"


@dataclass(frozen=True)
class RegAssign:
    label: str
    reg: str
    expr: Expr

    def __str__(self) -> str:
        return f"{self.label}: {self.reg} := {self.expr}"


@dataclass(frozen=True)
class Update:
    """``upd^RA([x], old, new)``: succeeds only by reading ``old``."""

    label: str
    var: str
    old: Expr
    new: Expr

    def __str__(self) -> str:
        return f"{self.label}: upd^RA([{self.var}], {self.old}, {self.new})"


@dataclass(frozen=True)
class Seq:
    items: tuple["Command", ...]

    def __str__(self) -> str:
        return "; ".join(str(c) for c in self.items)


@dataclass(frozen=True)
class If:
    guard: Expr
    then: "Command"
    orelse: "Command" = Skip()

    def __str__(self) -> str:
        return f"if {self.guard} then {{ {self.then} }} else {{ {self.orelse} }}"


@dataclass(frozen=True)
class While:
    guard: Expr
    body: "Command"

    def __str__(self) -> str:
        return f"while {self.guard} do {{ {self.body} }}"


Atomic = Union[Skip, Store, Load, RegAssign, Update]
Command = Union[Skip, Store, Load, RegAssign, Update, Seq, If, While]
ATOMIC_TYPES = (Skip, Store, Load, RegAssign, Update)


@dataclass(frozen=True)
class Program:
    threads: Mapping[int, Command]
    init: Mapping[str, int] = field(default_factory=dict)
    reg_init: Mapping[str, int] = field(default_factory=dict)

    @property
    def tids(self) -> tuple[int, ...]:
        return tuple(sorted(self.threads))

    def variables(self) -> tuple[str, ...]:
        names = set(self.init)
        for cmd in self.threads.values():
            for a in iter_atomics(cmd):
                if isinstance(a, (Store, Load, Update)):
                    names.add(a.var)
        return tuple(sorted(names))

    def registers(self, tid: int) -> tuple[str, ...]:
        return tuple(sorted(command_registers(self.threads[tid])))

    def register_owner(self) -> dict[str, int]:
        """Map each register to the single thread using it.

        Registers shared by several threads are omitted; assertions cannot
        refer to them unambiguously.
        """
        seen: dict[str, set[int]] = {}
        for t in self.tids:
            for r in self.registers(t):
                seen.setdefault(r, set()).add(t)
        return {r: next(iter(ts)) for r, ts in seen.items() if len(ts) == 1}

    def initial_registers(self, tid: int) -> dict[str, int]:
        return {r: self.reg_init.get(r, 0) for r in self.registers(tid)}

    def has_loops(self) -> bool:
        return any(_has_while(c) for c in self.threads.values())

    def command(self, tid: int, label: str) -> Atomic:
        for a in iter_atomics(self.threads[tid]):
            if a.label == label:
                return a
        raise KeyError(label)


def iter_atomics(cmd: Command) -> Iterator[Atomic]:
    """Atomic commands of ``cmd`` in textual order, both branches included."""
    if isinstance(cmd, ATOMIC_TYPES):
        yield cmd
    elif isinstance(cmd, Seq):
        for c in cmd.items:
            yield from iter_atomics(c)
    elif isinstance(cmd, If):
        yield from iter_atomics(cmd.then)
        yield from iter_atomics(cmd.orelse)
    elif isinstance(cmd, While):
        yield from iter_atomics(cmd.body)


def command_registers(cmd: Command) -> set[str]:
    regs: set[str] = set()

    def walk(c: Command) -> None:
        if isinstance(c, Load):
            regs.add(c.reg)
        elif isinstance(c, RegAssign):
            regs.add(c.reg)
            regs.update(expr_registers(c.expr))
        elif isinstance(c, Store):
            regs.update(expr_registers(c.expr))
        elif isinstance(c, Update):
            regs.update(expr_registers(c.old) | expr_registers(c.new))
        elif isinstance(c, Seq):
            for d in c.items:
                walk(d)
        elif isinstance(c, If):
            regs.update(expr_registers(c.guard))
            walk(c.then)
            walk(c.orelse)
        elif isinstance(c, While):
            regs.update(expr_registers(c.guard))
            walk(c.body)

    walk(cmd)
    return regs


def _has_while(cmd: Command) -> bool:
    if isinstance(cmd, While):
        return True
    if isinstance(cmd, Seq):
        return any(_has_while(c) for c in cmd.items)
    if isinstance(cmd, If):
        return _has_while(cmd.then) or _has_while(cmd.orelse)
    return False


# ---------------------------------------------------------------------------
# Lexer and parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<num>\d+(\.\d+)*)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\|\|\||:=|\.\.|&&|\|\||=>|!=|<=|>=|\^|[-+*/%()\[\]{};:,=<>!&|~._@])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class TokenStream:
    """Cursor over tokens with the helpers shared by both parsers."""

    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        return self.cur.text in texts and self.cur.kind != "eof"

    def advance(self) -> Token:
        t = self.cur
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.cur.text or 'end of input'!r}")
        return self.advance()

    def name(self) -> str:
        if self.cur.kind != "name":
            self.error(f"expected a name, found {self.cur.text or 'end of input'!r}")
        return self.advance().text

    def integer(self) -> int:
        neg = self.accept("-")
        if self.cur.kind != "num" or "." in self.cur.text:
            self.error(f"expected an integer, found {self.cur.text or 'end of input'!r}")
        v = int(self.advance().text)
        return -v if neg else v

    def error(self, message: str) -> None:
        raise ParseError(message, self.cur.line, self.cur.col)

    # Expression grammar, lowest precedence first.  ``stop`` lists binary
    # operators the caller wants left alone (assertions reserve ``||``/``&&``).

    def expr(self, stop: frozenset[str] = frozenset()) -> Expr:
        return self._or(stop)

    def _or(self, stop) -> Expr:
        e = self._and(stop)
        while self.cur.text in ("|", "||") and self.cur.text not in stop:
            op = self.advance().text
            e = BinOp(op, e, self._and(stop))
        return e

    def _and(self, stop) -> Expr:
        e = self._cmp(stop)
        while self.cur.text in ("&", "&&") and self.cur.text not in stop:
            op = self.advance().text
            e = BinOp(op, e, self._cmp(stop))
        return e

    def _cmp(self, stop) -> Expr:
        e = self._sum()
        if self.cur.text in _CMP and self.cur.text not in stop:
            op = self.advance().text
            e = BinOp(op, e, self._sum())
        return e

    def _sum(self) -> Expr:
        e = self._term()
        while self.cur.text in ("+", "-"):
            op = self.advance().text
            e = BinOp(op, e, self._term())
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while self.cur.text in ("*", "/", "%"):
            op = self.advance().text
            e = BinOp(op, e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.accept("-"):
            return UnOp("-", self._unary())
        if self.at("!") and not self.peek().text == "[":
            self.advance()
            return UnOp("!", self._unary())
        return self._atom()

    def _atom(self) -> Expr:
        t = self.cur
        if t.kind == "num":
            if "." in t.text:
                self.error(f"malformed number {t.text!r}")
            self.advance()
            return Const(int(t.text))
        if t.kind == "name":
            self.advance()
            if t.text == "true":
                return Const(1)
            if t.text == "false":
                return Const(0)
            if self.at("(") and t.text in ("maxv", "minv"):
                self.advance()
                arg = self.name()
                self.expect(")")
                return Call(t.text, (arg,))
            return Reg(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "[":
            self.error("shared variables may not appear in expressions; load them into a register first")
        self.error(f"unexpected {t.text or 'end of input'!r} in expression")
        raise AssertionError  # unreachable


class _ProgramParser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)
        self.labels: dict[str, Token] = {}

    def parse(self) -> Program:
        ts = self.ts
        init: dict[str, int] = {}
        if ts.at("init") and ts.peek().text == ":":
            ts.advance()
            ts.advance()
            while True:
                names = [ts.name()]
                ts.expect("=")
                # chained initialisers: ``x = y = r1 = 0``
                while ts.cur.kind == "name" and ts.peek().text == "=":
                    names.append(ts.name())
                    ts.expect("=")
                v = ts.integer()
                for n in names:
                    init[n] = v
                if not ts.accept(","):
                    break
        threads: dict[int, Command] = {}
        if ts.cur.kind == "eof":
            return Program(threads={}, init=init)
        tid = 1
        threads[tid] = self.thread()
        while ts.accept("|||"):
            tid += 1
            threads[tid] = self.thread()
        if ts.cur.kind != "eof":
            ts.error(f"unexpected {ts.cur.text!r}")
        return _split_init(threads, init)

    def thread(self) -> Command:
        items = [self.stmt()]
        while self.ts.accept(";"):
            if self.ts.at("|||", "}") or self.ts.cur.kind == "eof":
                break
            items.append(self.stmt())
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def block(self) -> Command:
        self.ts.expect("{")
        if self.ts.accept("}"):
            return Skip()
        body = self.thread()
        self.ts.expect("}")
        return body

    def stmt(self) -> Command:
        ts = self.ts
        if ts.at("if"):
            ts.advance()
            guard = self.guard()
            ts.expect("then")
            then = self.block()
            orelse: Command = Skip()
            if ts.accept("else"):
                orelse = self.block()
            return If(guard, then, orelse)
        if ts.at("while"):
            ts.advance()
            guard = self.guard()
            ts.expect("do")
            return While(guard, self.block())
        if ts.at("skip"):
            ts.advance()
            return Skip()
        tok = ts.cur
        if tok.kind not in ("num", "name") or ts.peek().text != ":":
            ts.error(f"expected 'label:' before statement, found {tok.text or 'end of input'!r}")
        ts.advance()
        ts.advance()
        label = tok.text
        if label in self.labels:
            prev = self.labels[label]
            raise ParseError(f"duplicate label {label!r} (first used at {prev.line}:{prev.col})", tok.line, tok.col)
        self.labels[label] = tok
        return self.atomic(label)

    def guard(self) -> Expr:
        return self.ts.expr()

    def atomic(self, label: str) -> Atomic:
        ts = self.ts
        if ts.accept("skip"):
            return Skip(label)
        if ts.at("upd") and ts.peek().text == "^":
            ts.advance()
            ts.advance()
            if ts.name() != "RA":
                ts.error("only upd^RA is supported")
            ts.expect("(")
            ts.expect("[")
            var = ts.name()
            ts.expect("]")
            ts.expect(",")
            old = ts.expr()
            ts.expect(",")
            new = ts.expr()
            ts.expect(")")
            return Update(label, var, old, new)
        if ts.accept("["):
            var = ts.name()
            ts.expect("]")
            ts.expect(":=")
            release = False
            if ts.accept("^"):
                if ts.name() != "R":
                    ts.error("stores accept only the ^R annotation")
                release = True
            return Store(label, var, ts.expr(), release)
        reg = ts.name()
        ts.expect(":=")
        acquire = False
        if ts.accept("^"):
            if ts.name() != "A":
                ts.error("loads accept only the ^A annotation")
            acquire = True
            ts.expect("[")
        elif not ts.accept("["):
            return RegAssign(label, reg, ts.expr())
        var = ts.name()
        ts.expect("]")
        return Load(label, reg, var, acquire)


def _split_init(threads: dict[int, Command], init: dict[str, int]) -> Program:
    regs: set[str] = set()
    for c in threads.values():
        regs |= command_registers(c)
    mem = {k: v for k, v in init.items() if k not in regs}
    reg_init = {k: v for k, v in init.items() if k in regs}
    return Program(threads=threads, init=mem, reg_init=reg_init)


def parse_program(text: str) -> Program:
    """Parse program text; raises :class:`ParseError` with a position."""
    return _ProgramParser(text).parse()


# ---------------------------------------------------------------------------
# Unrolling and atomic sets


def _relabel(cmd: Command, suffix: str) -> Command:
    if isinstance(cmd, Skip):
        return Skip(f"{cmd.label}.{suffix}") if cmd.label else cmd
    if isinstance(cmd, Store):
        return Store(f"{cmd.label}.{suffix}", cmd.var, cmd.expr, cmd.release)
    if isinstance(cmd, Load):
        return Load(f"{cmd.label}.{suffix}", cmd.reg, cmd.var, cmd.acquire)
    if isinstance(cmd, RegAssign):
        return RegAssign(f"{cmd.label}.{suffix}", cmd.reg, cmd.expr)
    if isinstance(cmd, Update):
        return Update(f"{cmd.label}.{suffix}", cmd.var, cmd.old, cmd.new)
    if isinstance(cmd, Seq):
        return Seq(tuple(_relabel(c, suffix) for c in cmd.items))
    if isinstance(cmd, If):
        return If(cmd.guard, _relabel(cmd.then, suffix), _relabel(cmd.orelse, suffix))
    if isinstance(cmd, While):
        return While(cmd.guard, _relabel(cmd.body, suffix))
    raise TypeError(cmd)


def _seq(*cmds: Command) -> Command:
    items: list[Command] = []
    for c in cmds:
        if isinstance(c, Seq):
            items.extend(c.items)
        elif not (isinstance(c, Skip) and c.label is None):
            items.append(c)
    if not items:
        return Skip()
    return items[0] if len(items) == 1 else Seq(tuple(items))


def _unroll_cmd(cmd: Command, depth: int) -> Command:
    if isinstance(cmd, Seq):
        return _seq(*(_unroll_cmd(c, depth) for c in cmd.items))
    if isinstance(cmd, If):
        return If(cmd.guard, _unroll_cmd(cmd.then, depth), _unroll_cmd(cmd.orelse, depth))
    if isinstance(cmd, While):
        result: Command = Skip()
        for k in range(depth, 0, -1):
            body = _unroll_cmd(_relabel(cmd.body, str(k)), depth)
            result = If(cmd.guard, _seq(body, result), Skip())
        return result
    return cmd


def unroll(p: Program, depth: int) -> Program:
    """Replace every loop by ``depth`` nested conditionals.

    Iteration ``k`` of a loop body labelled ``5`` is relabelled ``5.k``; any
    iteration past ``depth`` is dropped (treated as ``skip``).
    """
    if depth < 0:
        raise ValueError("unroll depth must be non-negative")
    if not p.has_loops():
        return p
    threads = {t: _unroll_cmd(c, depth) for t, c in p.threads.items()}
    return Program(threads=threads, init=dict(p.init), reg_init=dict(p.reg_init))


def atomic_set(p: Program) -> dict[int, frozenset[Atomic]]:
    """Per-thread set of labelled atomic commands (loop-free programs)."""
    if p.has_loops():
        raise ValueError("atomic_set needs a loop-free program; unroll it first")
    return {t: frozenset(a for a in iter_atomics(c) if a.label is not None) for t, c in p.threads.items()}


# ---------------------------------------------------------------------------
# Actions

READ_KINDS = frozenset("RU")
WRITE_KINDS = frozenset("WU")


@dataclass(frozen=True, order=True)
class Action:
    """A labelled action.

    ``kind`` is ``R``/``W``/``U`` for memory reads, writes and updates, or
    ``S`` for a register assignment, whose ``var`` is the destination
    register and ``wval`` the value assigned.  ``mode`` is one of ``rlx``,
    ``rel``, ``acq`` or ``ra``.
    """

    kind: str
    line: str
    var: str | None
    rval: int | None = None
    wval: int | None = None
    mode: str = "rlx"

    @property
    def is_read(self) -> bool:
        return self.kind in READ_KINDS

    @property
    def is_write(self) -> bool:
        return self.kind in WRITE_KINDS

    @property
    def is_memory(self) -> bool:
        return self.kind != "S"

    @property
    def releasing(self) -> bool:
        return self.mode in ("rel", "ra")

    @property
    def acquiring(self) -> bool:
        return self.mode in ("acq", "ra")

    def values(self) -> tuple[int, ...]:
        if self.kind == "U":
            return (self.rval, self.wval)
        return (self.rval,) if self.kind == "R" else (self.wval,)

    def short(self) -> str:
        """Compact notation, e.g. ``W2y1`` or ``U5x0,1``."""
        vals = ",".join(str(v) for v in self.values())
        return f"{self.kind}{self.line}{self.var}{vals}"

    def __str__(self) -> str:
        vals = " ".join(str(v) for v in self.values())
        mode = "" if self.mode == "rlx" else f" {self.mode}"
        return f"{self.kind} {self.line} {self.var} {vals}{mode}"
