"""Shape-hypothesis predicates: a small DSL parsed to an AST and evaluated
against a fitted model.

Grammar (precedence loosest to tightest: or, and, comparisons/in, not,
then the usual arithmetic):

    predicate  = or_expr
    or_expr    = and_expr { ("||" | "or") and_expr }
    and_expr   = cmp_expr { ("&&" | "and") cmp_expr }
    cmp_expr   = sum [ relop sum | "in" "[" sum "," sum "]" ]
    relop      = "<" | "<=" | ">" | ">=" | "=" | "=="
    sum        = term { ("+" | "-") term }
    term       = unary { ("*" | "/") unary }
    unary      = ("-" | "!" | "not") unary | primary
    primary    = NUMBER | "inf" | "n" | "curv" "(" ")" | "vertex" "(" ")"
               | "pred" "(" sum ")" | "coef" "(" coefkey ")" | "(" or_expr ")"
    coefkey    = INTEGER | IDENT [ "^" INTEGER ]

Comparisons are exact floating point (no epsilon) and `in` is closed on both
ends. An undefined vertex anywhere in a predicate makes the whole predicate
false; evaluation is strict, so this holds even under `!`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import format_number
from .ols import FitResult


class PredicateError(ValueError):
    """Problem with a predicate, carrying the character offset it was found at."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class PredicateLexError(PredicateError):
    """A character sequence that is not part of the predicate language."""


class PredicateSyntaxError(PredicateError):
    """Tokens that do not form a predicate."""


class PredicateTypeError(PredicateError):
    """A structurally valid predicate that is ill-typed, or that references
    model features the fitted specification does not have."""


class VertexUndefined(ArithmeticError):
    """The fitted parabola has zero curvature, so its vertex does not exist."""


# --- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: float
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class SampleSize(Expr):
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Coef(Expr):
    key: str | int
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Curv(Expr):
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Vertex(Expr):
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Pred(Expr):
    arg: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Arith(Expr):
    op: str  # one of + - * /
    a: Expr
    b: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Cmp(Expr):
    op: str  # one of < <= > >= =
    a: Expr
    b: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class InInterval(Expr):
    value: Expr
    lo: Expr
    hi: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Not(Expr):
    a: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class And(Expr):
    a: Expr
    b: Expr
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Or(Expr):
    a: Expr
    b: Expr
    pos: int = field(default=-1, compare=False, repr=False)


PredicateExpr = Expr

_NUMERIC = (Num, SampleSize, Coef, Curv, Vertex, Pred, Neg, Arith)
_BOOLEAN = (Cmp, InInterval, Not, And, Or)


def expr_type(node: Expr) -> str:
    """'num' or 'bool', fixed by the node class."""
    if isinstance(node, _NUMERIC):
        return "num"
    if isinstance(node, _BOOLEAN):
        return "bool"
    raise TypeError(f"not a predicate node: {node!r}")


def children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, (Neg, Not)):
        return (node.a,)
    if isinstance(node, (Arith, Cmp, And, Or)):
        return (node.a, node.b)
    if isinstance(node, Pred):
        return (node.arg,)
    if isinstance(node, InInterval):
        return (node.value, node.lo, node.hi)
    return ()


# --- Lexer ---------------------------------------------------------------------

_NUM_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TWO_CHAR = ("<=", ">=", "==", "&&", "||")
_ONE_CHAR = "()[],^+-*/<>=!"


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | end
    text: str
    pos: int
    value: float = 0.0


def _lex(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        m = _NUM_RE.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(0), i, value=float(m.group(0))))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(0), i))
            i = m.end()
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(_Token("op", two, i))
            i += 2
            continue
        if ch in ("&", "|"):
            raise PredicateLexError(f"single {ch!r}; use {ch * 2!r}", i)
        if ch in _ONE_CHAR:
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        raise PredicateLexError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# --- Parser --------------------------------------------------------------------

_RELOPS = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "=": "=", "==": "="}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str):
        tok = self.tok
        if tok.kind == "end":
            raise PredicateSyntaxError(f"{message}, got end of input", tok.pos)
        raise PredicateSyntaxError(f"{message}, got {tok.text!r}", tok.pos)

    def at_op(self, *names) -> bool:
        return self.tok.kind == "op" and self.tok.text in names

    def at_word(self, *names) -> bool:
        return self.tok.kind == "ident" and self.tok.text in names

    def expect_op(self, name: str) -> _Token:
        if not self.at_op(name):
            self.fail(f"expected {name!r}")
        return self.advance()

    def require_num(self, node: Expr):
        if expr_type(node) != "num":
            raise PredicateTypeError("expected a numeric expression", node.pos)

    def require_bool(self, node: Expr):
        if expr_type(node) != "bool":
            raise PredicateTypeError("expected a boolean expression", node.pos)

    def parse_or(self) -> Expr:
        node = self.parse_and()
        while self.at_op("||") or self.at_word("or"):
            pos = self.advance().pos
            rhs = self.parse_and()
            self.require_bool(node)
            self.require_bool(rhs)
            node = Or(node, rhs, pos=pos)
        return node

    def parse_and(self) -> Expr:
        node = self.parse_cmp()
        while self.at_op("&&") or self.at_word("and"):
            pos = self.advance().pos
            rhs = self.parse_cmp()
            self.require_bool(node)
            self.require_bool(rhs)
            node = And(node, rhs, pos=pos)
        return node

    def parse_cmp(self) -> Expr:
        node = self.parse_sum()
        if self.tok.kind == "op" and self.tok.text in _RELOPS:
            op_tok = self.advance()
            rhs = self.parse_sum()
            self.require_num(node)
            self.require_num(rhs)
            return Cmp(_RELOPS[op_tok.text], node, rhs, pos=op_tok.pos)
        if self.at_word("in"):
            pos = self.advance().pos
            self.expect_op("[")
            lo = self.parse_sum()
            self.expect_op(",")
            hi = self.parse_sum()
            self.expect_op("]")
            for part in (node, lo, hi):
                self.require_num(part)
            return InInterval(node, lo, hi, pos=pos)
        return node

    def parse_sum(self) -> Expr:
        node = self.parse_term()
        while self.at_op("+", "-"):
            op_tok = self.advance()
            rhs = self.parse_term()
            self.require_num(node)
            self.require_num(rhs)
            node = Arith(op_tok.text, node, rhs, pos=op_tok.pos)
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while self.at_op("*", "/"):
            op_tok = self.advance()
            rhs = self.parse_unary()
            self.require_num(node)
            self.require_num(rhs)
            node = Arith(op_tok.text, node, rhs, pos=op_tok.pos)
        return node

    def parse_unary(self) -> Expr:
        if self.at_op("-"):
            pos = self.advance().pos
            inner = self.parse_unary()
            self.require_num(inner)
            return Neg(inner, pos=pos)
        if self.at_op("!") or self.at_word("not"):
            pos = self.advance().pos
            inner = self.parse_unary()
            self.require_bool(inner)
            return Not(inner, pos=pos)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(tok.value, pos=tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_or()
            self.expect_op(")")
            return node
        if tok.kind == "ident":
            name = tok.text
            if name == "inf":
                self.advance()
                return Num(math.inf, pos=tok.pos)
            if name == "n":
                self.advance()
                return SampleSize(pos=tok.pos)
            if name in ("curv", "vertex"):
                self.advance()
                self.expect_op("(")
                self.expect_op(")")
                return (Curv if name == "curv" else Vertex)(pos=tok.pos)
            if name == "pred":
                self.advance()
                self.expect_op("(")
                arg = self.parse_sum()
                self.require_num(arg)
                self.expect_op(")")
                return Pred(arg, pos=tok.pos)
            if name == "coef":
                self.advance()
                self.expect_op("(")
                key = self.parse_coefkey()
                self.expect_op(")")
                return Coef(key, pos=tok.pos)
            self.fail(f"unknown name {name!r}")
        self.fail("expected a number, name, or '('")

    def parse_coefkey(self) -> str | int:
        tok = self.tok
        if tok.kind == "num":
            if tok.value != int(tok.value):
                raise PredicateSyntaxError("coefficient index must be an integer", tok.pos)
            self.advance()
            return int(tok.value)
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.at_op("^"):
                self.advance()
                power = self.tok
                if power.kind != "num" or power.value != int(power.value):
                    self.fail("expected an integer power")
                self.advance()
                name = f"{name}^{int(power.value)}"
            return name
        self.fail("expected a coefficient name or index")


def parse(text: str) -> Expr:
    """Parse a predicate string; the result must be boolean at the top level."""
    parser = _Parser(text)
    node = parser.parse_or()
    if parser.tok.kind != "end":
        parser.fail("unexpected trailing input")
    if expr_type(node) != "bool":
        raise PredicateTypeError("predicate must be a boolean expression", node.pos)
    return node


# --- Printer ---------------------------------------------------------------------

_LEVEL = {
    Or: 1,
    And: 2,
    Cmp: 3,
    InInterval: 3,
    Not: 4,
    Arith: 5,  # refined to 6 for * and / below
    Neg: 7,
}
_ATOM_LEVEL = 9


def _level(node: Expr) -> int:
    if isinstance(node, Arith):
        return 6 if node.op in "*/" else 5
    return _LEVEL.get(type(node), _ATOM_LEVEL)


def _wrap(node: Expr, parent_level: int, right_side: bool = False) -> str:
    text = to_text(node)
    level = _level(node)
    if level < parent_level or (right_side and level == parent_level):
        return f"({text})"
    return text


def to_text(node: Expr) -> str:
    """Canonical text form; ``parse(to_text(e)) == e`` for parser-shaped trees."""
    if isinstance(node, Num):
        return "inf" if node.value == math.inf else format_number(node.value)
    if isinstance(node, SampleSize):
        return "n"
    if isinstance(node, Coef):
        return f"coef({node.key})"
    if isinstance(node, Curv):
        return "curv()"
    if isinstance(node, Vertex):
        return "vertex()"
    if isinstance(node, Pred):
        return f"pred({to_text(node.arg)})"
    if isinstance(node, Neg):
        return f"-{_wrap(node.a, 7)}"
    if isinstance(node, Not):
        return f"!{_wrap(node.a, 4)}"
    if isinstance(node, Arith):
        level = _level(node)
        return f"{_wrap(node.a, level)} {node.op} {_wrap(node.b, level, right_side=True)}"
    if isinstance(node, Cmp):
        return f"{_wrap(node.a, 3)} {node.op} {_wrap(node.b, 3, right_side=True)}"
    if isinstance(node, InInterval):
        return f"{_wrap(node.value, 3)} in [{to_text(node.lo)}, {to_text(node.hi)}]"
    if isinstance(node, And):
        return f"{_wrap(node.a, 2)} && {_wrap(node.b, 2, right_side=True)}"
    if isinstance(node, Or):
        return f"{_wrap(node.a, 1)} || {_wrap(node.b, 1, right_side=True)}"
    raise TypeError(f"not a predicate node: {node!r}")


# --- Evaluation ---------------------------------------------------------------------


@dataclass(frozen=True)
class ModelContext:
    """A fitted model plus the control values predictions are adjusted to."""

    fit: FitResult
    adjustment: np.ndarray | None = None

    def __post_init__(self):
        if self.fit.spec is None:
            raise ValueError("model context needs a fit carrying its ModelSpec")
        k = len(self.fit.spec.controls)
        adj = self.adjustment
        adj = np.zeros(k) if adj is None else np.asarray(adj, dtype=np.float64)
        if adj.shape != (k,):
            raise ValueError(f"adjustment must have one value per control ({k})")
        object.__setattr__(self, "adjustment", adj)


def curvature(ctx: ModelContext) -> float:
    """Coefficient of the squared focal term: negative means an inverted U."""
    j = ctx.fit.spec.curvature_index()
    return float(ctx.fit.coefficients[j])


def vertex(ctx: ModelContext) -> float:
    """Focal value at the parabola's optimum, -b1 / (2 b2)."""
    b2 = curvature(ctx)
    if b2 == 0.0:
        raise VertexUndefined("zero curvature: the fitted parabola has no vertex")
    b1 = float(ctx.fit.coefficients[1])
    return -b1 / (2.0 * b2)


def predicted(ctx: ModelContext, x: float) -> float:
    """Adjusted prediction at focal value ``x`` with controls held fixed."""
    spec = ctx.fit.spec
    coef = ctx.fit.coefficients
    total = float(coef[0])
    for d in range(1, spec.degree + 1):
        total += float(coef[d]) * x**d
    offset = 1 + spec.degree
    for k in range(len(spec.controls)):
        total += float(coef[offset + k]) * float(ctx.adjustment[k])
    return total


def _divide(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _eval(node: Expr, ctx: ModelContext):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, SampleSize):
        return float(ctx.fit.n)
    if isinstance(node, Coef):
        return float(ctx.fit.coefficients[ctx.fit.spec.coef_index(node.key)])
    if isinstance(node, Curv):
        return curvature(ctx)
    if isinstance(node, Vertex):
        return vertex(ctx)
    if isinstance(node, Pred):
        return predicted(ctx, _eval(node.arg, ctx))
    if isinstance(node, Neg):
        return -_eval(node.a, ctx)
    if isinstance(node, Arith):
        a = _eval(node.a, ctx)
        b = _eval(node.b, ctx)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return _divide(a, b)
    if isinstance(node, Cmp):
        a = _eval(node.a, ctx)
        b = _eval(node.b, ctx)
        if node.op == "<":
            return a < b
        if node.op == "<=":
            return a <= b
        if node.op == ">":
            return a > b
        if node.op == ">=":
            return a >= b
        return a == b
    if isinstance(node, InInterval):
        v = _eval(node.value, ctx)
        lo = _eval(node.lo, ctx)
        hi = _eval(node.hi, ctx)
        return lo <= v <= hi
    if isinstance(node, Not):
        return not _eval(node.a, ctx)
    if isinstance(node, And):
        a = _eval(node.a, ctx)  # strict: both sides always evaluated
        b = _eval(node.b, ctx)
        return a and b
    if isinstance(node, Or):
        a = _eval(node.a, ctx)
        b = _eval(node.b, ctx)
        return a or b
    raise TypeError(f"not a predicate node: {node!r}")


def evaluate_flagged(expr: Expr, ctx: ModelContext) -> tuple[bool, bool]:
    """Evaluate strictly; an undefined vertex anywhere yields (False, True)."""
    try:
        return bool(_eval(expr, ctx)), False
    except VertexUndefined:
        return False, True


def evaluate(expr: Expr, ctx: ModelContext) -> bool:
    return evaluate_flagged(expr, ctx)[0]


def validate_predicate(expr: Expr, spec) -> None:
    """Check that a predicate makes sense for ``spec``; raises PredicateTypeError."""
    if isinstance(expr, (Curv, Vertex)) and spec.degree < 2:
        raise PredicateTypeError(
            f"{'curv()' if isinstance(expr, Curv) else 'vertex()'} needs a model of "
            f"degree >= 2, this model has degree {spec.degree}",
            expr.pos,
        )
    if isinstance(expr, Coef):
        try:
            spec.coef_index(expr.key)
        except (IndexError, LookupError) as exc:
            raise PredicateTypeError(str(exc), expr.pos) from None
    for child in children(expr):
        validate_predicate(child, spec)


# --- Named hypotheses ---------------------------------------------------------------------


@dataclass(frozen=True)
class Hypothesis:
    """A named predicate; ``vertex_bin`` marks optimum-interval hypotheses whose
    report counting excludes the upper bound so adjacent bins partition."""

    name: str
    text: str
    expr: Expr
    vertex_bin: tuple[float, float] | None = None

    @classmethod
    def from_text(cls, name: str, text: str) -> "Hypothesis":
        return cls(name=name, text=text, expr=parse(text))


def inverted_u() -> Hypothesis:
    return Hypothesis.from_text("inverted_u", "curv() < 0 && vertex() > 0")


def negative(threshold: float = 25.0) -> Hypothesis:
    high = format_number(threshold)
    return Hypothesis.from_text(
        "negative" if threshold == 25.0 else f"negative({high})",
        f"!(curv() < 0 && vertex() > 0) && pred({high}) < pred(0)",
    )


def optimum_in(lo: float, hi: float) -> Hypothesis:
    lo_s = format_number(lo) if math.isfinite(lo) else "inf"
    hi_s = format_number(hi) if math.isfinite(hi) else "inf"
    base = Hypothesis.from_text(
        f"optimum_in({lo_s},{hi_s})",
        f"curv() < 0 && vertex() > 0 && vertex() in [{lo_s}, {hi_s}]",
    )
    return Hypothesis(base.name, base.text, base.expr, vertex_bin=(lo, hi))


_NUM_ARG = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|inf"
_NEGATIVE_RE = re.compile(rf"negative\(\s*({_NUM_ARG})\s*\)\Z")
_OPTIMUM_RE = re.compile(rf"optimum_in\(\s*({_NUM_ARG})\s*,\s*({_NUM_ARG})\s*\)\Z")


def builtin_hypothesis(name: str) -> Hypothesis | None:
    """Resolve a built-in hypothesis name, or None if it is not one."""
    name = name.strip()
    if name == "inverted_u":
        return inverted_u()
    if name == "negative":
        return negative()
    m = _NEGATIVE_RE.match(name)
    if m:
        return negative(float(m.group(1)))
    m = _OPTIMUM_RE.match(name)
    if m:
        return optimum_in(float(m.group(1)), float(m.group(2)))
    return None


def make_hypothesis(name: str, text: str | None = None) -> Hypothesis:
    """Build a hypothesis from an explicit predicate or a built-in name."""
    if text is not None:
        return Hypothesis.from_text(name, text)
    built = builtin_hypothesis(name)
    if built is None:
        raise ValueError(
            f"{name!r} is not a built-in hypothesis; "
            "expected inverted_u, negative[(X)], or optimum_in(a,b)"
        )
    return built


def default_hypotheses() -> tuple[Hypothesis, ...]:
    """Inverted U, its negative-relationship rival, and three optimum bins."""
    return (
        inverted_u(),
        negative(),
        optimum_in(0.0, 10.0),
        optimum_in(10.0, 20.0),
        optimum_in(20.0, math.inf),
    )


def evaluate_hypothesis(h: Hypothesis, ctx: ModelContext) -> tuple[bool, bool]:
    """(outcome, vertex_undefined) with bin upper bounds counted exclusively."""
    value, undefined = evaluate_flagged(h.expr, ctx)
    if value and h.vertex_bin is not None and vertex(ctx) == h.vertex_bin[1]:
        value = False
    return value, undefined


def confidence_level(outcomes) -> float:
    """Fraction of replicates whose refit satisfied the hypothesis."""
    arr = np.asarray(outcomes, dtype=bool)
    if arr.size == 0:
        raise ValueError("confidence level needs at least one replicate outcome")
    return float(arr.mean())
