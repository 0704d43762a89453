"""Problem-definition file format.

A problem file is line oriented; ``#`` starts a comment.  Sections::

    order = <int>
    vars = <name>, <name>, ...
    delay <id> = constant(<num>) | proportional(<num>) | vary(<expr in t>)
    eq <var><primes> = <expr>
    init <var> = [<num>, ...]
    phi <var> = <expr in t>
    horizon = <num>
    taylor_order = <int>

Numbers accept rationals (``1/3``).  The left-hand side of every ``eq``
must carry exactly ``order`` primes; each variable needs one equation and
one ``init`` row of ``order`` values.  ``phi`` rows are required exactly
when a constant or time-dependent delay is declared.
"""

from __future__ import annotations

import re
from pathlib import Path

from . import expr as ex
from .problem import (
    CauchyProblem,
    ConstantDelay,
    DelaySpec,
    ProblemError,
    ProportionalDelay,
    TimeVaryingDelay,
)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")
_DELAY_LINE_RE = re.compile(r"(?P<kind>constant|proportional|vary)\((?P<body>.*)\)$")


def _fail(message: str, line_no: int) -> ex.ParseError:
    return ex.ParseError(message, line=line_no)


def _parse_number(text: str, line_no: int) -> float:
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError):
            raise _fail(f"bad rational literal {text!r}", line_no) from None
    try:
        return float(text)
    except ValueError:
        raise _fail(f"bad number {text!r}", line_no) from None


def parse_problem(text: str, *, name: str = "<string>") -> CauchyProblem:
    """Parse a problem file's contents into a validated problem."""
    order = None
    var_names: list[str] | None = None
    delay_lines: list[tuple[int, str, str]] = []
    eq_lines: list[tuple[int, str, str]] = []
    init_lines: list[tuple[int, str, str]] = []
    phi_lines: list[tuple[int, str, str]] = []
    horizon = None
    taylor_order = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise _fail(f"expected 'key = value', got {line!r}", line_no)
        key = key.strip()
        value = value.strip()
        parts = key.split()
        if parts[0] == "order" and len(parts) == 1:
            order = int(_parse_number(value, line_no))
        elif parts[0] == "vars" and len(parts) == 1:
            var_names = [v.strip() for v in value.split(",") if v.strip()]
        elif parts[0] == "horizon" and len(parts) == 1:
            horizon = _parse_number(value, line_no)
        elif parts[0] == "taylor_order" and len(parts) == 1:
            taylor_order = int(_parse_number(value, line_no))
        elif parts[0] == "delay" and len(parts) == 2:
            delay_lines.append((line_no, parts[1], value))
        elif parts[0] == "eq" and len(parts) == 2:
            eq_lines.append((line_no, parts[1], value))
        elif parts[0] == "init" and len(parts) == 2:
            init_lines.append((line_no, parts[1], value))
        elif parts[0] == "phi" and len(parts) == 2:
            phi_lines.append((line_no, parts[1], value))
        else:
            raise _fail(f"unrecognized section {key!r}", line_no)

    if order is None:
        raise _fail("missing 'order' section", 1)
    if var_names is None or not var_names:
        raise _fail("missing 'vars' section", 1)
    if horizon is None:
        raise _fail("missing 'horizon' section", 1)
    if taylor_order is None:
        raise _fail("missing 'taylor_order' section", 1)
    for v in var_names:
        if not _NAME_RE.match(v):
            raise _fail(f"bad variable name {v!r}", 1)
        if v in ex.RESERVED:
            raise _fail(f"variable name {v!r} is reserved", 1)
    if len(set(var_names)) != len(var_names):
        raise _fail("duplicate variable names", 1)

    delays = []
    for line_no, delay_id, value in delay_lines:
        if not _NAME_RE.match(delay_id) or delay_id in ex.RESERVED:
            raise _fail(f"bad delay name {delay_id!r}", line_no)
        m = _DELAY_LINE_RE.match(value)
        if not m:
            raise _fail(
                f"delay must be constant(...), proportional(...) or "
                f"vary(...), got {value!r}",
                line_no,
            )
        kind, body = m.group("kind"), m.group("body")
        try:
            if kind == "constant":
                law = ConstantDelay(_parse_number(body, line_no))
            elif kind == "proportional":
                law = ProportionalDelay(_parse_number(body, line_no))
            else:
                law = TimeVaryingDelay(ex.parse_expression(body))
        except ProblemError as exc:
            raise ProblemError(f"{name}:{line_no}: {exc}") from None
        delays.append(DelaySpec(id=delay_id, law=law))
    delay_ids = [d.id for d in delays]

    equations: dict[str, ex.Expr] = {}
    for line_no, lhs, value in eq_lines:
        base = lhs.rstrip("'")
        primes = len(lhs) - len(base)
        if base not in var_names:
            raise _fail(f"equation for unknown variable {base!r}", line_no)
        if primes != order:
            raise _fail(
                f"left-hand side must carry exactly {order} primes, "
                f"got {primes}",
                line_no,
            )
        if base in equations:
            raise _fail(f"duplicate equation for {base!r}", line_no)
        equations[base] = ex.parse_expression(
            value, variables=var_names, delays=delay_ids, max_deriv=order
        )
    missing = [v for v in var_names if v not in equations]
    if missing:
        raise ProblemError(f"{name}: missing equation for {', '.join(missing)}")

    init: dict[str, tuple[float, ...]] = {}
    for line_no, var, value in init_lines:
        if var not in var_names:
            raise _fail(f"initial data for unknown variable {var!r}", line_no)
        if var in init:
            raise _fail(f"duplicate initial data for {var!r}", line_no)
        body = value.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise _fail("initial data must be a bracketed list", line_no)
        entries = [e for e in body[1:-1].split(",") if e.strip()]
        init[var] = tuple(_parse_number(e, line_no) for e in entries)
        if len(init[var]) != order:
            raise ProblemError(
                f"{name}:{line_no}: initial data for {var!r} must list "
                f"{order} values, got {len(init[var])}"
            )
    missing = [v for v in var_names if v not in init]
    if missing:
        raise ProblemError(f"{name}: missing initial data for {', '.join(missing)}")

    phi: dict[str, ex.Expr] = {}
    for line_no, var, value in phi_lines:
        if var not in var_names:
            raise _fail(f"history for unknown variable {var!r}", line_no)
        if var in phi:
            raise _fail(f"duplicate history for {var!r}", line_no)
        phi[var] = ex.parse_expression(value)

    needs_history = any(not d.proportional for d in delays)
    if needs_history:
        missing = [v for v in var_names if v not in phi]
        if missing:
            raise ProblemError(
                f"{name}: constant or time-dependent delays are declared, "
                f"so history is required for {', '.join(missing)}"
            )
    elif phi:
        raise ProblemError(
            f"{name}: history given but every declared delay is "
            "proportional; remove the phi rows"
        )

    try:
        return CauchyProblem(
            order=order,
            var_names=tuple(var_names),
            equations=tuple(equations[v] for v in var_names),
            delays=tuple(delays),
            init=tuple(init[v] for v in var_names),
            horizon=horizon,
            trunc_order=taylor_order,
            phi=tuple(phi[v] for v in var_names) if needs_history else None,
        )
    except ProblemError as exc:
        raise ProblemError(f"{name}: {exc}") from None


def load_problem(path: str | Path) -> CauchyProblem:
    path = Path(path)
    return parse_problem(path.read_text(), name=path.name)
