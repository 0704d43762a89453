"""Command line interface.

Subcommands: ``info`` (structural report and checks), ``solve``
(coefficient table), ``eval`` (evaluate the solution at given times) and
``compare`` (solve and integrate the reference, report per-variable
errors next to the truncation bound).

Exit codes: 0 success, 1 parse error, 2 validation or domain error,
3 marching (math) error, 4 comparison failure.

Reals are serialized with 17 significant digits so that every double
round-trips exactly; identical inputs and flags produce byte-identical
output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import engine, oracle
from . import expr as ex
from .problem import ProblemError, check_compatibility, check_h2, compute_validity
from .problemfile import load_problem
from .reduce import substitute_history
from .series import SeriesError

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_VALIDATION = 2
EXIT_ENGINE = 3
EXIT_COMPARISON = 4

# discrepancies below this floor are within the reference integrator's own
# error budget and never count as a comparison failure
ORACLE_NOISE_FLOOR = 1e-9


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _json_render(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return "null"
        return _fmt(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_render(v) for v in value) + "]"
    if isinstance(value, dict):
        return (
            "{"
            + ", ".join(
                f"{json.dumps(k)}: {_json_render(v)}" for k, v in value.items()
            )
            + "}"
        )
    raise TypeError(f"cannot serialize {value!r}")


def _aggregate_bound(estimate: engine.ErrorEstimate | None) -> float | None:
    if estimate is None:
        return None
    if any(b is None for b in estimate.bound):
        return None
    return max(estimate.bound)


def _solution_json(
    var_names,
    coefficients,
    validity,
    estimate: engine.ErrorEstimate | None,
    pivot_log,
) -> str:
    payload = {
        "variables": [
            {"name": name, "coefficients": list(coeffs)}
            for name, coeffs in zip(var_names, coefficients)
        ],
        "validity": {
            "t_star": validity.t_star,
            "t_alpha": validity.t_alpha,
            "upper": validity.upper,
        },
        "error_estimate": (
            None
            if estimate is None
            else {
                "N": estimate.trunc_order,
                "delta": estimate.delta,
                "bound": _aggregate_bound(estimate),
            }
        ),
        "pivot_log": [
            {"var": var_names[entry.var - 1], "k": entry.k, "pivot": entry.pivot}
            for entry in pivot_log
        ],
    }
    return _json_render(payload) + "\n"


def _solution_csv(var_names, coefficients) -> str:
    width = max(len(c) for c in coefficients)
    lines = ["var," + ",".join(f"k{k}" for k in range(width))]
    for name, coeffs in zip(var_names, coefficients):
        lines.append(name + "," + ",".join(_fmt(c) for c in coeffs))
    return "\n".join(lines) + "\n"


def _solution_text(var_names, coefficients, validity, estimate) -> str:
    lines = []
    for name, coeffs in zip(var_names, coefficients):
        lines.append(f"{name}: " + " ".join(_fmt(c) for c in coeffs))
    lines.append(
        f"validity: t_star={_fmt(validity.t_star)} "
        f"t_alpha={_fmt(validity.t_alpha)} upper={_fmt(validity.upper)}"
    )
    if estimate is not None:
        parts = []
        for name, bound in zip(var_names, estimate.bound):
            parts.append(f"{name}={'n/a' if bound is None else _fmt(bound)}")
        lines.append(
            f"error bound on [0, {_fmt(estimate.delta)}]: " + " ".join(parts)
        )
    return "\n".join(lines) + "\n"


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _error(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _run_checks(problem, strict: bool) -> int | None:
    """Shared validation: returns an exit code on failure, None to go on."""
    h2 = check_h2(problem)
    if not h2.ok:
        v = h2.violations[0]
        _error(
            f"equation {problem.var_names[v.equation - 1]} references the top "
            f"derivative of {problem.var_names[v.variable - 1]} through "
            f"proportional delay {v.delay!r}"
        )
        return EXIT_VALIDATION
    compat = check_compatibility(problem)
    if not compat.ok:
        worst = max(
            (e for e in compat.entries if not e.ok), key=lambda e: abs(e.residual)
        )
        message = (
            f"history/initial-data mismatch for "
            f"{problem.var_names[worst.var - 1]}: derivative {worst.deriv} has "
            f"residual {worst.residual:.6g}"
        )
        if strict:
            _error(message)
            return EXIT_VALIDATION
        _warn(message)
    return None


def cmd_info(args) -> int:
    problem = load_problem(args.file)
    structure = problem.structure()
    validity = compute_validity(problem)
    compat = check_compatibility(problem)
    h2 = check_h2(problem, structure)
    print(f"order: {problem.order}")
    print(f"variables: {len(problem.var_names)} ({', '.join(problem.var_names)})")
    print(f"delays: {len(problem.delays)}")
    for spec in problem.delays:
        law = spec.law
        if spec.proportional:
            kind = f"proportional ratio={_fmt(law.ratio)}"
        elif hasattr(law, "tau"):
            kind = f"constant lag={_fmt(law.tau)}"
        else:
            kind = f"time-dependent lag={ex.pretty(law.lag)}"
        print(
            f"delay {spec.id}: {kind} "
            f"max_deriv={structure.max_deriv_per_delay[spec.id]}"
        )
    print(f"max delayed derivative: {structure.max_delayed_deriv}")
    print(f"total delayed derivatives: {structure.total_delayed_derivs}")
    print(f"neutral: {'yes' if structure.neutral else 'no'}")
    print(f"t_star: {_fmt(validity.t_star)}")
    print(f"t_alpha: {_fmt(validity.t_alpha)}")
    print(f"upper: {_fmt(validity.upper)}")
    for note in validity.notes:
        print(f"note: {note}")
    print(f"compatibility: {'pass' if compat.ok else 'FAIL'}")
    for entry in compat.entries:
        if not entry.ok:
            print(
                f"  {problem.var_names[entry.var - 1]} derivative "
                f"{entry.deriv}: history {_fmt(entry.history_value)} vs "
                f"initial {_fmt(entry.init_value)}"
            )
    print(f"h2: {'pass' if h2.ok else 'FAIL'}")
    for v in h2.violations:
        print(
            f"  equation {problem.var_names[v.equation - 1]} references "
            f"{problem.var_names[v.variable - 1]} top derivative via "
            f"{v.delay!r}"
        )
    return EXIT_OK if compat.ok and h2.ok else EXIT_VALIDATION


def _solve_one(args, path) -> tuple[int, str]:
    problem = load_problem(path)
    failed = _run_checks(problem, args.strict)
    if failed is not None:
        return failed, ""
    validity = compute_validity(problem)
    try:
        solution = engine.solve(problem, trunc_order=args.order)
    except engine.ZeroPivot as exc:
        _error(str(exc))
        names = exc.var_names or problem.var_names
        coeffs = exc.partial_coeffs or ()
        if args.json:
            text = _solution_json(names, coeffs, validity, None, ())
        elif args.csv:
            text = _solution_csv(names, coeffs)
        else:
            text = _solution_text(names, coeffs, validity, None)
        return EXIT_ENGINE, text
    solution = engine.with_error_estimate(solution, solution.validity.upper)
    coeffs = [s.coeffs for s in solution.series]
    if args.json:
        text = _solution_json(
            solution.var_names,
            coeffs,
            solution.validity,
            solution.error_estimate,
            solution.pivot_log,
        )
    elif args.csv:
        text = _solution_csv(solution.var_names, coeffs)
    else:
        text = _solution_text(
            solution.var_names, coeffs, solution.validity, solution.error_estimate
        )
    return EXIT_OK, text


def cmd_solve(args) -> int:
    if args.all:
        directory = Path(args.file)
        if not directory.is_dir():
            _error(f"--all needs a directory, got {args.file!r}")
            return EXIT_VALIDATION
        files = sorted(directory.glob("*.fde"))
        if not files:
            _error(f"no .fde files in {directory}")
            return EXIT_VALIDATION
        worst = EXIT_OK
        for path in files:
            code, text = _solve_one(args, path)
            worst = max(worst, code)
            if args.out:
                suffix = ".json" if args.json else ".csv" if args.csv else ".txt"
                target = Path(args.out) / (path.stem + suffix)
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(text)
            else:
                sys.stdout.write(f"# {path.name}\n{text}")
        return worst
    code, text = _solve_one(args, args.file)
    if text:
        _write(text, args.out)
    return code


def cmd_eval(args) -> int:
    problem = load_problem(args.file)
    failed = _run_checks(problem, args.strict)
    if failed is not None:
        return failed
    solution = engine.solve(problem, trunc_order=args.order)
    points = [float(part) for part in args.at.split(",") if part.strip()]
    if not points:
        _error("--at needs at least one time value")
        return EXIT_VALIDATION
    rows = []
    for t in points:
        try:
            values = engine.evaluate_solution(solution, t, unchecked=args.unchecked)
        except engine.ValidityError as exc:
            _error(str(exc))
            return EXIT_VALIDATION
        rows.append((t, values))
    lines = ["t," + ",".join(solution.var_names)]
    for t, values in rows:
        lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in values))
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    problem = load_problem(args.file)
    failed = _run_checks(problem, args.strict)
    if failed is not None:
        return failed
    target = args.order if args.order is not None else problem.trunc_order
    reduced = substitute_history(problem, trunc_order=target)
    try:
        # restriction check happens before any solving so that unsupported
        # systems report the offending term rather than a marching error
        oracle.check_supported(reduced)
    except oracle.OracleRestriction as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    if args.interval:
        a, b = (float(x) for x in args.interval.split(","))
    else:
        a, b = 0.0, reduced.validity.upper
    if not 0.0 <= a < b <= reduced.validity.upper + 1e-12:
        _error(
            f"comparison interval [{a:g}, {b:g}] must lie inside "
            f"[0, {reduced.validity.upper:g}]"
        )
        return EXIT_VALIDATION
    solution = engine.solve_reduced(reduced)
    estimate = engine.estimate_error(solution, b)
    trajectory = oracle.integrate_reference(reduced, args.step, b)
    errors = oracle.compare(solution, trajectory, (a, b), args.samples)
    failed_vars = []
    for name, measured, bound in zip(solution.var_names, errors, estimate.bound):
        if bound is None:
            bound_text = "n/a"
        elif bound == 0.0:
            bound_text = "0 (exact)"
        else:
            bound_text = _fmt(bound)
        print(f"{name}: max_error={_fmt(measured)} bound={bound_text}")
        if bound is not None and measured > max(bound, ORACLE_NOISE_FLOOR):
            failed_vars.append(name)
    if failed_vars:
        _error(
            "measured error exceeds the truncation bound for "
            + ", ".join(failed_vars)
        )
        return EXIT_COMPARISON
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taydel",
        description=(
            "Solve initial-value problems for delay differential equations "
            "by Taylor-coefficient recurrences and validate against a "
            "Runge-Kutta reference."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    info = sub.add_parser("info", help="structural report and checks")
    info.add_argument("file")
    info.set_defaults(handler=cmd_info)

    solve = sub.add_parser("solve", help="compute the coefficient table")
    solve.add_argument("file", help="problem file, or a directory with --all")
    solve.add_argument("--order", type=int, default=None, help="override taylor_order")
    solve.add_argument("--json", action="store_true")
    solve.add_argument("--csv", action="store_true")
    solve.add_argument("--out", default=None)
    solve.add_argument("--strict", action="store_true")
    solve.add_argument("--all", action="store_true", help="solve every .fde file in a directory")
    solve.set_defaults(handler=cmd_solve)

    evaluate = sub.add_parser("eval", help="evaluate the solution at given times")
    evaluate.add_argument("file")
    evaluate.add_argument("--at", required=True, help="comma-separated times")
    evaluate.add_argument("--order", type=int, default=None)
    evaluate.add_argument("--unchecked", action="store_true")
    evaluate.add_argument("--strict", action="store_true")
    evaluate.add_argument("--out", default=None)
    evaluate.set_defaults(handler=cmd_eval)

    compare = sub.add_parser("compare", help="engine vs reference integrator")
    compare.add_argument("file")
    compare.add_argument("--h", dest="step", type=float, default=1e-3)
    compare.add_argument("--samples", type=int, default=200)
    compare.add_argument("--interval", default=None, help="a,b")
    compare.add_argument("--order", type=int, default=None)
    compare.add_argument("--strict", action="store_true")
    compare.set_defaults(handler=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ex.ParseError as exc:
        _error(str(exc))
        return EXIT_PARSE
    except (ProblemError, ex.StructureError, ex.EvaluationError, SeriesError) as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    except engine.ValidityError as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    except oracle.OracleRestriction as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    except engine.EngineError as exc:
        _error(str(exc))
        return EXIT_ENGINE
    except oracle.OracleError as exc:
        _error(str(exc))
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        _error(str(exc))
        return EXIT_PARSE


def entry() -> None:
    sys.exit(main())
