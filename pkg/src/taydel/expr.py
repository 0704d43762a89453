"""Expression trees and the text grammar for right-hand sides, initial
functions and time-dependent delay laws.

The grammar (``^`` binds tighter than unary minus, which binds tighter
than ``*``/``/``, which bind tighter than ``+``/``-``; all left
associative)::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := ('-')? power
    power    := atom ('^' number-or-parenthesized-rational)?
    atom     := number | 't' | funcall | stateref | '(' expr ')'
    funcall  := ('exp'|'ln'|'sin'|'cos') '(' expr ')'
    stateref := ident prime* ('@' ident)?

State references name a variable, an optional chain of primes for the
derivative order, and an optional ``@id`` naming a declared delay, e.g.
``u2``, ``u1''`` or ``u1'''@a1``.  Parsed trees are immutable; constant
subexpressions of the arithmetic operators are folded at parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence, Union

from .series import Series, SeriesDomainError, compose_elementary, monomial


class ParseError(ValueError):
    """Syntax or resolution error, carrying the source location."""

    def __init__(self, message: str, line: int = 1, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class StructureError(ValueError):
    """A parsed system violates a structural rule (bad derivative order,
    undeclared delay, variable index out of range)."""


class EvaluationError(ValueError):
    """Numeric evaluation hit a domain error (division by zero, log of a
    nonpositive value, fractional power of a negative base)."""


# AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Time:
    pass


TIME = Time()


@dataclass(frozen=True)
class StateRef:
    """Occurrence of variable ``var`` (1-based), derivative ``deriv``,
    optionally evaluated at the delayed argument named by ``delay``."""

    var: int
    deriv: int
    delay: str | None = None


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float


@dataclass(frozen=True)
class Func:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class KnownSeries:
    """A leaf holding an already-known series; produced by history
    substitution, never by the parser."""

    series: Series


Expr = Union[Const, Time, StateRef, Add, Sub, Mul, Div, Neg, Pow, Func, KnownSeries]

FUNCTIONS = ("exp", "ln", "sin", "cos")
RESERVED = FUNCTIONS + ("t",)


def _fold_binary(cls, left: Expr, right: Expr) -> Expr:
    node = cls(left, right)
    if isinstance(left, Const) and isinstance(right, Const):
        try:
            if cls is Add:
                value = left.value + right.value
            elif cls is Sub:
                value = left.value - right.value
            elif cls is Mul:
                value = left.value * right.value
            else:
                value = left.value / right.value
        except ZeroDivisionError:
            return node
        if math.isfinite(value):
            return Const(value)
    return node


def _fold_neg(operand: Expr) -> Expr:
    if isinstance(operand, Const):
        return Const(-operand.value)
    return Neg(operand)


def _fold_pow(base: Expr, exponent: float) -> Expr:
    if isinstance(base, Const):
        try:
            value = base.value**exponent
        except (ValueError, OverflowError, ZeroDivisionError):
            return Pow(base, exponent)
        if isinstance(value, float) and math.isfinite(value):
            return Const(value)
    return Pow(base, exponent)


# tokenizer / parser ----------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
    | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<prime>')
    | (?P<at>@)
    | (?P<op>[-+*/^()])
    | (?P<ws>[ \t]+)
    | (?P<newline>\n)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(
        self,
        tokens: list[_Token],
        variables: Sequence[str],
        delays: Sequence[str],
        max_deriv: int,
    ):
        self.tokens = tokens
        self.pos = 0
        self.variables = list(variables)
        self.delays = set(delays)
        self.max_deriv = max_deriv

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.column)

    def expect_op(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise self.error(f"unexpected trailing input {tok.text!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = _fold_binary(Add if op == "+" else Sub, node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.factor()
            node = _fold_binary(Mul if op == "*" else Div, node, rhs)
        return node

    def factor(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return _fold_neg(self.power())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return _fold_pow(base, self.exponent())
        return base

    def exponent(self) -> float:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return float(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            num = self.signed_number()
            if self.peek().kind == "op" and self.peek().text == "/":
                self.advance()
                den = self.signed_number()
                if den == 0:
                    raise self.error("zero denominator in exponent")
                num = num / den
            self.expect_op(")")
            return num
        raise self.error("expected a numeric exponent")

    def signed_number(self) -> float:
        sign = 1.0
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            sign = -1.0
        tok = self.peek()
        if tok.kind != "number":
            raise self.error("expected a number")
        self.advance()
        return sign * float(tok.text)

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if tok.kind == "ident":
            return self.identifier()
        raise self.error(
            f"expected a number, 't', a function call or a state reference, "
            f"found {tok.text or 'end of input'!r}"
        )

    def identifier(self) -> Expr:
        tok = self.advance()
        name = tok.text
        if name == "t":
            return TIME
        if name in FUNCTIONS:
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(")")
            return Func(name, arg)
        if name not in self.variables:
            raise self.error(f"unknown identifier {name!r}", tok)
        var = self.variables.index(name) + 1
        deriv = 0
        while self.peek().kind == "prime":
            self.advance()
            deriv += 1
        if deriv > self.max_deriv:
            raise self.error(
                f"derivative order {deriv} of {name!r} exceeds the system "
                f"order {self.max_deriv}",
                tok,
            )
        delay = None
        if self.peek().kind == "at":
            self.advance()
            dtok = self.peek()
            if dtok.kind != "ident":
                raise self.error("expected a delay name after '@'")
            self.advance()
            if dtok.text not in self.delays:
                raise self.error(f"unknown delay {dtok.text!r}", dtok)
            delay = dtok.text
        return StateRef(var, deriv, delay)


def parse_expression(
    text: str,
    *,
    variables: Sequence[str] = (),
    delays: Sequence[str] = (),
    max_deriv: int = 0,
) -> Expr:
    """Parse an expression.  ``variables`` fixes the admissible state names
    (empty for time-only expressions such as initial functions and delay
    laws); ``max_deriv`` bounds the prime chain length."""
    return _Parser(_tokenize(text), variables, delays, max_deriv).parse()


# pretty printer ---------------------------------------------------------------

def _precedence(node: Expr) -> int:
    if isinstance(node, (Add, Sub)):
        return 1
    if isinstance(node, (Mul, Div)):
        return 2
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Const) and node.value < 0:
        return 3  # renders with a leading minus
    if isinstance(node, Pow):
        return 4
    return 5


def _fmt_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return f"{value:.17g}"


def pretty(node: Expr, variables: Sequence[str] | None = None) -> str:
    """Render an expression in the input grammar.  Without ``variables``,
    state names default to ``u<index>``."""

    def name(ref: StateRef) -> str:
        base = variables[ref.var - 1] if variables else f"u{ref.var}"
        out = base + "'" * ref.deriv
        if ref.delay is not None:
            out += f"@{ref.delay}"
        return out

    def wrap(child: Expr, minimum: int) -> str:
        text = render(child)
        if _precedence(child) < minimum:
            return f"({text})"
        return text

    def render(n: Expr) -> str:
        if isinstance(n, Const):
            if n.value < 0:
                return f"-{_fmt_number(-n.value)}"
            return _fmt_number(n.value)
        if isinstance(n, Time):
            return "t"
        if isinstance(n, StateRef):
            return name(n)
        if isinstance(n, Add):
            return f"{wrap(n.left, 1)} + {wrap(n.right, 2)}"
        if isinstance(n, Sub):
            return f"{wrap(n.left, 1)} - {wrap(n.right, 2)}"
        if isinstance(n, Mul):
            return f"{wrap(n.left, 2)} * {wrap(n.right, 3)}"
        if isinstance(n, Div):
            return f"{wrap(n.left, 2)} / {wrap(n.right, 5)}"
        if isinstance(n, Neg):
            return f"-{wrap(n.operand, 4)}"
        if isinstance(n, Pow):
            exponent = n.exponent
            if exponent == int(exponent):
                suffix = f"^{int(exponent)}"
            else:
                suffix = f"^({exponent:.17g})"
            return f"{wrap(n.base, 5)}{suffix}"
        if isinstance(n, Func):
            return f"{n.fn}({render(n.arg)})"
        if isinstance(n, KnownSeries):
            inner = ", ".join(_fmt_number(c) for c in n.series.coeffs[:4])
            if n.series.trunc_order > 3:
                inner += ", ..."
            return f"<series {inner}>"
        raise TypeError(f"not an expression node: {n!r}")

    return render(node)


# structure analysis -----------------------------------------------------------

def iter_refs(node: Expr) -> Iterator[StateRef]:
    """All state references in the tree, in depth-first order."""
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, StateRef):
            yield n
        elif isinstance(n, (Add, Sub, Mul, Div)):
            stack.append(n.right)
            stack.append(n.left)
        elif isinstance(n, Neg):
            stack.append(n.operand)
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Func):
            stack.append(n.arg)


@dataclass(frozen=True)
class StructureReport:
    """Delay usage summary of a system of right-hand sides."""

    max_deriv_per_delay: dict[str, int]
    max_delayed_deriv: int
    total_delayed_derivs: int
    neutral: bool
    neutral_proportional_refs: tuple[tuple[int, StateRef], ...]
    ref_count: int


def analyze(
    equations: Sequence[Expr],
    *,
    order: int,
    num_vars: int,
    delays: Mapping[str, bool],
) -> StructureReport:
    """Check every state reference of a system and summarize the delay
    structure.

    ``delays`` maps each declared delay id to True when it is proportional.
    For each delay the maximal referenced derivative order is recorded; the
    system is neutral when that maximum reaches the system order.  Delayed
    references may carry up to ``order`` primes, undelayed ones at most
    ``order - 1``.
    """
    max_deriv = {delay_id: 0 for delay_id in delays}
    neutral_refs = []
    count = 0
    for eq_index, equation in enumerate(equations, start=1):
        for ref in iter_refs(equation):
            count += 1
            if not 1 <= ref.var <= num_vars:
                raise StructureError(
                    f"equation {eq_index}: variable index {ref.var} out of "
                    f"range 1..{num_vars}"
                )
            if ref.deriv > order:
                raise StructureError(
                    f"equation {eq_index}: derivative order {ref.deriv} "
                    f"exceeds the system order {order}"
                )
            if ref.delay is None:
                if ref.deriv >= order:
                    raise StructureError(
                        f"equation {eq_index}: undelayed derivative order "
                        f"must be below the system order {order}"
                    )
                continue
            if ref.delay not in delays:
                raise StructureError(
                    f"equation {eq_index}: undeclared delay {ref.delay!r}"
                )
            max_deriv[ref.delay] = max(max_deriv[ref.delay], ref.deriv)
            if ref.deriv == order and delays[ref.delay]:
                neutral_refs.append((eq_index, ref))
    overall = max(max_deriv.values(), default=0)
    return StructureReport(
        max_deriv_per_delay=max_deriv,
        max_delayed_deriv=overall,
        total_delayed_derivs=sum(max_deriv.values()),
        neutral=bool(delays) and overall == order,
        neutral_proportional_refs=tuple(neutral_refs),
        ref_count=count,
    )


# evaluation -------------------------------------------------------------------

def eval_series(
    node: Expr,
    time: Series,
    resolve: Callable[[StateRef], Series] | None = None,
) -> Series:
    """Evaluate the tree over series arithmetic.

    ``time`` supplies the series substituted for ``t`` and fixes the
    working truncation order.  ``resolve`` maps state references to series
    of that order; without it any state reference is an error.  Known
    series leaves are truncated to the working order (a leaf shorter than
    that is a bookkeeping error and raises).
    """
    order = time.trunc_order

    def ev(n: Expr) -> Series:
        if isinstance(n, Const):
            return Series.constant(n.value, order)
        if isinstance(n, Time):
            return time
        if isinstance(n, KnownSeries):
            return n.series.truncated(order)
        if isinstance(n, StateRef):
            if resolve is None:
                raise EvaluationError(
                    f"state reference {pretty(n)} not allowed in this context"
                )
            return resolve(n)
        if isinstance(n, Add):
            return ev(n.left) + ev(n.right)
        if isinstance(n, Sub):
            return ev(n.left) - ev(n.right)
        if isinstance(n, Mul):
            return ev(n.left) * ev(n.right)
        if isinstance(n, Div):
            try:
                return ev(n.left) / ev(n.right)
            except SeriesDomainError as exc:
                raise SeriesDomainError(f"{exc} in {pretty(n)}") from None
        if isinstance(n, Neg):
            return -ev(n.operand)
        if isinstance(n, Pow):
            try:
                return compose_elementary("pow", ev(n.base), exponent=n.exponent)
            except SeriesDomainError as exc:
                raise SeriesDomainError(f"{exc} in {pretty(n)}") from None
        if isinstance(n, Func):
            try:
                return compose_elementary(n.fn, ev(n.arg))
            except SeriesDomainError as exc:
                raise SeriesDomainError(f"{exc} in {pretty(n)}") from None
        raise TypeError(f"not an expression node: {n!r}")

    return ev(node)


def time_series(order: int) -> Series:
    """The identity substitution for ``t``."""
    return monomial(1, order)


def eval_numeric(
    node: Expr,
    t: float,
    resolve: Callable[[StateRef], float] | None = None,
) -> float:
    """Evaluate the tree at a single time value."""

    def ev(n: Expr) -> float:
        if isinstance(n, Const):
            return n.value
        if isinstance(n, Time):
            return t
        if isinstance(n, KnownSeries):
            return n.series.evaluate(t)
        if isinstance(n, StateRef):
            if resolve is None:
                raise EvaluationError(
                    f"state reference {pretty(n)} not allowed in this context"
                )
            return resolve(n)
        if isinstance(n, Add):
            return ev(n.left) + ev(n.right)
        if isinstance(n, Sub):
            return ev(n.left) - ev(n.right)
        if isinstance(n, Mul):
            return ev(n.left) * ev(n.right)
        if isinstance(n, Div):
            denom = ev(n.right)
            if denom == 0.0:
                raise EvaluationError(f"division by zero in {pretty(n)} at t={t:g}")
            return ev(n.left) / denom
        if isinstance(n, Neg):
            return -ev(n.operand)
        if isinstance(n, Pow):
            base = ev(n.base)
            try:
                value = base**n.exponent
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise EvaluationError(
                    f"{exc} in {pretty(n)} at t={t:g}"
                ) from None
            if isinstance(value, complex):
                raise EvaluationError(
                    f"fractional power of negative base in {pretty(n)} at t={t:g}"
                )
            return value
        if isinstance(n, Func):
            arg = ev(n.arg)
            if n.fn == "exp":
                return math.exp(arg)
            if n.fn == "ln":
                if arg <= 0.0:
                    raise EvaluationError(
                        f"ln of nonpositive value {arg:g} in {pretty(n)} at t={t:g}"
                    )
                return math.log(arg)
            if n.fn == "sin":
                return math.sin(arg)
            if n.fn == "cos":
                return math.cos(arg)
            raise EvaluationError(f"unknown function {n.fn!r}")
        raise TypeError(f"not an expression node: {n!r}")

    return ev(node)
