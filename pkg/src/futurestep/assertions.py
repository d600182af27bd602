"""View-based assertions over configurations.

Surface syntax::

    true | false | ( A ) | ! A | A && A | A || A | A => A
    e cmp e            cmp in = != < <= > >=
    e in S | e notin S
    [x = e]_T          synchronised view, for every thread in T
    [x ~ e]_T          possible view
    ![x ~ e]_T         not possible, for every thread in T
    forall i in S. A

``T`` is a thread id or ``{1,2,3}``.  ``S`` is ``{e, ...}``, ``lo..hi`` or
``domain(x)``, optionally minus an enumerated set: ``domain(x) - {0,1}``.
``domain(x)`` is the configured value domain of ``x`` together with every
value some write to ``x`` in the current graph carries, so a quantifier over
it never misses an observable value.  ``maxv(x)``/``minv(x)`` are the bounds
of that set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .lang import BinOp, Call, Const, Expr, ParseError, TokenStream, UnOp, eval_expr, expr_registers


class AssertionEvalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Bool:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Cmp:
    op: str
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class SetSpec:
    kind: str  # enum | range | domain
    items: tuple[Expr, ...] = ()
    var: str | None = None
    minus: tuple[Expr, ...] = ()

    def __str__(self) -> str:
        if self.kind == "enum":
            base = "{" + ", ".join(map(str, self.items)) + "}"
        elif self.kind == "range":
            base = f"{self.items[0]}..{self.items[1]}"
        else:
            base = f"domain({self.var})"
        if self.minus:
            base += " - {" + ", ".join(map(str, self.minus)) + "}"
        return base


@dataclass(frozen=True)
class InSet:
    expr: Expr
    set: SetSpec
    negated: bool = False

    def __str__(self) -> str:
        return f"{self.expr} {'notin' if self.negated else 'in'} {self.set}"


@dataclass(frozen=True)
class View:
    kind: str  # "=" synchronised, "~" possible, "!~" not possible
    var: str
    expr: Expr
    tids: tuple[int, ...]

    def __str__(self) -> str:
        ts = str(self.tids[0]) if len(self.tids) == 1 else "{" + ",".join(map(str, self.tids)) + "}"
        return f"[{self.var} {self.kind} {self.expr}]_{ts}"


@dataclass(frozen=True)
class Not:
    body: "Assertion"

    def __str__(self) -> str:
        return f"!({self.body})"


@dataclass(frozen=True)
class And:
    items: tuple["Assertion", ...]

    def __str__(self) -> str:
        return " && ".join(_paren(a) for a in self.items)


@dataclass(frozen=True)
class Or:
    items: tuple["Assertion", ...]

    def __str__(self) -> str:
        return " || ".join(_paren(a) for a in self.items)


@dataclass(frozen=True)
class Implies:
    left: "Assertion"
    right: "Assertion"

    def __str__(self) -> str:
        return f"{_paren(self.left)} => {_paren(self.right)}"


@dataclass(frozen=True)
class Forall:
    var: str
    set: SetSpec
    body: "Assertion"

    def __str__(self) -> str:
        return f"forall {self.var} in {self.set}. {_paren(self.body)}"


Assertion = Union[Bool, Cmp, InSet, View, Not, And, Or, Implies, Forall]

TRUE = Bool(True)


def _paren(a) -> str:
    return f"({a})" if isinstance(a, (And, Or, Implies, Forall)) else str(a)


def conj(items) -> Assertion:
    items = tuple(items)
    if not items:
        return TRUE
    return items[0] if len(items) == 1 else And(items)


# ---------------------------------------------------------------------------
# Parser


class _AssertionParser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    def parse(self) -> Assertion:
        a = self.implies()
        if self.ts.cur.kind != "eof":
            self.ts.error(f"unexpected {self.ts.cur.text!r}")
        return a

    def implies(self) -> Assertion:
        left = self.disj()
        if self.ts.accept("=>"):
            return Implies(left, self.implies())
        return left

    def disj(self) -> Assertion:
        items = [self.conj()]
        while self.ts.at("||"):
            self.ts.advance()
            items.append(self.conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conj(self) -> Assertion:
        items = [self.unary()]
        while self.ts.at("&&"):
            self.ts.advance()
            items.append(self.unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary(self) -> Assertion:
        ts = self.ts
        if ts.at("!"):
            if ts.peek().text == "[":
                ts.advance()
                v = self.view()
                if v.kind != "~":
                    ts.error("only possible views can be negated with ![..]; write !([x = e]_T) or [x !~ e]_T")
                return View("!~", v.var, v.expr, v.tids)
            ts.advance()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Assertion:
        ts = self.ts
        if ts.at("forall"):
            ts.advance()
            var = ts.name()
            ts.expect("in")
            s = self.setspec()
            ts.expect(".")
            return Forall(var, s, self.implies())
        if ts.at("true", "false") and ts.peek().text not in _CMP_OPS | {"in", "notin", "+", "-", "*"}:
            return Bool(ts.advance().text == "true")
        if ts.at("["):
            return self.view()
        if ts.at("("):
            # either a parenthesised assertion or an arithmetic term
            save = ts.i
            ts.advance()
            try:
                a = self.implies()
                ts.expect(")")
                if not (ts.cur.text in _CMP_OPS or ts.at("in", "notin")):
                    return a
            except ParseError:
                pass
            ts.i = save
        left = ts._sum()
        if ts.at("in", "notin"):
            neg = ts.advance().text == "notin"
            return InSet(left, self.setspec(), neg)
        if ts.cur.text in _CMP_OPS:
            op = ts.advance().text
            return Cmp(op, left, ts._sum())
        ts.error(f"expected a comparison after {left}")
        raise AssertionError

    def view(self) -> View:
        ts = self.ts
        ts.expect("[")
        var = ts.name()
        if ts.accept("="):
            kind = "="
        elif ts.accept("~"):
            kind = "~"
        elif ts.at("!") and ts.peek().text == "~":
            ts.advance()
            ts.advance()
            kind = "!~"
        else:
            ts.error("expected '=', '~' or '!~' in a view")
        e = ts._sum()
        ts.expect("]")
        # the lexer reads "_2" as a name
        sub = ts.cur
        if sub.kind == "name" and sub.text.startswith("_") and sub.text[1:].isdigit():
            ts.advance()
            return View(kind, var, e, (int(sub.text[1:]),))
        if sub.text != "_":
            ts.error("expected a thread subscript such as _1 or _{1,2}")
        ts.advance()
        return View(kind, var, e, self.tids())

    def tids(self) -> tuple[int, ...]:
        ts = self.ts
        if ts.accept("{"):
            out = [ts.integer()]
            while ts.accept(","):
                out.append(ts.integer())
            ts.expect("}")
        else:
            out = [ts.integer()]
        if len(set(out)) != len(out):
            ts.error("repeated thread id in view subscript")
        return tuple(sorted(out))

    def setspec(self) -> SetSpec:
        ts = self.ts
        if ts.at("{"):
            base = SetSpec("enum", self.enum())
        elif ts.at("domain"):
            ts.advance()
            ts.expect("(")
            var = ts.name()
            ts.expect(")")
            base = SetSpec("domain", var=var)
        else:
            lo = ts._sum()
            ts.expect("..")
            base = SetSpec("range", (lo, ts._sum()))
        if ts.at("-") and ts.peek().text == "{":
            ts.advance()
            return SetSpec(base.kind, base.items, base.var, self.enum())
        return base

    def enum(self) -> tuple[Expr, ...]:
        ts = self.ts
        ts.expect("{")
        items: list[Expr] = []
        if not ts.at("}"):
            items.append(ts._sum())
            while ts.accept(","):
                items.append(ts._sum())
        ts.expect("}")
        return tuple(items)


_CMP_OPS = {"=", "!=", "<", "<=", ">", ">="}


def parse_assertion(text: str) -> Assertion:
    return _AssertionParser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalContext:
    """What an assertion can see: the graph, registers and value domains."""

    graph: object
    registers: Mapping[str, int]
    domain: Mapping[str, frozenset[int]]
    tids: tuple[int, ...]

    def values(self, x: str) -> frozenset[int]:
        if x not in self.graph.mo and x not in self.domain:
            raise AssertionEvalError(f"unknown variable {x!r}")
        written = {self.graph.acts[w].action.wval for w in self.graph.mo.get(x, ())}
        return frozenset(self.domain.get(x, frozenset())) | written

    def observable(self, t: int, x: str) -> list[int]:
        if t not in self.tids:
            raise AssertionEvalError(f"no thread {t} in this program")
        if x not in self.graph.mo:
            raise AssertionEvalError(f"unknown variable {x!r}")
        return [self.graph.acts[w].action.wval for w in self.graph.observable(t, x)]


def context_for(config, explorer) -> EvalContext:
    """Evaluation context of an executor configuration."""
    owner = explorer.program.register_owner()
    regs = {}
    for t, rf in config.regs:
        for r, v in rf:
            if owner.get(r) == t:
                regs[r] = v
    return EvalContext(config.graph, regs, explorer.domain, explorer.tids)


def _expr(e: Expr, env: Mapping[str, int], ctx: EvalContext) -> int:
    e = _subst_calls(e, ctx)
    missing = expr_registers(e) - set(env)
    if missing:
        raise AssertionEvalError(f"unknown or ambiguous register {sorted(missing)[0]!r}")
    return eval_expr(e, env)


def _subst_calls(e: Expr, ctx: EvalContext) -> Expr:
    if isinstance(e, Call):
        vals = ctx.values(e.args[0])
        return Const(max(vals) if e.name == "maxv" else min(vals))
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst_calls(e.left, ctx), _subst_calls(e.right, ctx))
    if isinstance(e, UnOp):
        return UnOp(e.op, _subst_calls(e.operand, ctx))
    return e


def _set(s: SetSpec, env, ctx: EvalContext) -> frozenset[int]:
    if s.kind == "enum":
        base = frozenset(_expr(e, env, ctx) for e in s.items)
    elif s.kind == "range":
        lo, hi = (_expr(e, env, ctx) for e in s.items)
        base = frozenset(range(lo, hi + 1))
    else:
        base = ctx.values(s.var)
    if s.minus:
        base -= frozenset(_expr(e, env, ctx) for e in s.minus)
    return base


def evaluate(a: Assertion, ctx: EvalContext, env: Mapping[str, int] | None = None) -> bool:
    env = ctx.registers if env is None else env
    if isinstance(a, Bool):
        return a.value
    if isinstance(a, Cmp):
        return bool(eval_expr(BinOp(a.op, Const(_expr(a.left, env, ctx)), Const(_expr(a.right, env, ctx))), {}))
    if isinstance(a, InSet):
        return (_expr(a.expr, env, ctx) in _set(a.set, env, ctx)) != a.negated
    if isinstance(a, View):
        v = _expr(a.expr, env, ctx)
        if a.kind == "=":
            return all(ctx.observable(t, a.var) == [v] for t in a.tids)
        if a.kind == "~":
            return all(v in ctx.observable(t, a.var) for t in a.tids)
        return all(v not in ctx.observable(t, a.var) for t in a.tids)
    if isinstance(a, Not):
        return not evaluate(a.body, ctx, env)
    if isinstance(a, And):
        return all(evaluate(b, ctx, env) for b in a.items)
    if isinstance(a, Or):
        return any(evaluate(b, ctx, env) for b in a.items)
    if isinstance(a, Implies):
        return (not evaluate(a.left, ctx, env)) or evaluate(a.right, ctx, env)
    if isinstance(a, Forall):
        inner = dict(env)
        for i in sorted(_set(a.set, env, ctx)):
            inner[a.var] = i
            if not evaluate(a.body, ctx, inner):
                return False
        return True
    raise TypeError(a)


def eval_assertion(a: Assertion | str, config, explorer) -> bool:
    """Truth of ``a`` at an executor configuration."""
    if isinstance(a, str):
        a = parse_assertion(a)
    return evaluate(a, context_for(config, explorer))


__all__ = [
    "And",
    "Assertion",
    "AssertionEvalError",
    "Bool",
    "Cmp",
    "EvalContext",
    "Forall",
    "Implies",
    "InSet",
    "Not",
    "Or",
    "SetSpec",
    "TRUE",
    "View",
    "conj",
    "context_for",
    "eval_assertion",
    "evaluate",
    "parse_assertion",
]
