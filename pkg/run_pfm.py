# run_pfm.py

import sys
import json
import logging
import argparse
from typing import Any, Dict, List, Optional

import mpmath as mp
import sympy

from pfm import (
    PFMError, ParseError, RunConfig, Operator, parse_operator, singular_points, cy_type_check, catalog_case,
    list_cases, verify_many, export_catalog, monodromy_generators, monodromy_via_point, extract_invariants,
    theorem1_matrix, cy_conjugate, exact_generators, congruence_level, group_index, theorem3_fit,
)
from pfm.config import add_config_arguments
from pfm.numerics import GUARD_DIGITS, evaluate_exact, matrix_to_json
from pfm.utils import format_time, timed


logger = logging.getLogger("run_pfm")


def parse_args(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(description="Monodromy of Picard-Fuchs operators of Calabi-Yau type")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Repeat for more log output")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Singularities, exponents and Calabi-Yau type conditions")
    analyze.add_argument("operator", nargs="?", help="Operator JSON file")
    analyze.add_argument("--case", type=str, default=None, help="Use a catalogued operator instead of a file")
    analyze.add_argument("--integrality-terms", dest="integrality_terms", type=int, default=30,
                         help="Coefficients of the holomorphic solution checked for integrality")
    analyze.add_argument("--skip-infinity", dest="skip_infinity", action="store_true",
                         help="Do not continue to infinity; the cyclotomic half of (e) is then not checked")

    monodromy = sub.add_parser("monodromy", help="Monodromy generators, invariants and congruence level")
    monodromy.add_argument("operator", nargs="?", help="Operator JSON file")
    monodromy.add_argument("--case", type=str, default=None, help="Use a catalogued operator instead of a file")
    monodromy.add_argument("--point", type=str, default=None,
                           help="Common evaluation point for a single fixed-truncation hop (no refinement)")
    monodromy.add_argument("--target", type=str, default=None, help="Singularity for --point (default: nearest one)")
    monodromy.add_argument("--basis", choices=["raw", "nice", "both"], default="both", help="Basis of the reported matrices")

    catalog = sub.add_parser("catalog", help="List, verify or export the built-in fixtures")
    catalog.add_argument("case", nargs="?", help="Show one case")
    catalog.add_argument("--verify", type=str, default=None, help="Case id, comma separated ids, or 'all'")
    catalog.add_argument("--export", type=str, default=None, help="Write the fixtures as JSON into this directory")

    index = sub.add_parser("index", help="Index of Gamma(d1, d2) in Sp(4, Z)")
    index.add_argument("d1", type=int)
    index.add_argument("d2", type=int)

    for p in (analyze, monodromy, catalog, index):
        add_config_arguments(p)
    return parser.parse_args(argv)


def setup_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else (logging.INFO if verbosity == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def load_operator(args) -> Operator:
    if args.case is not None:
        return catalog_case(args.case).operator()
    if not args.operator:
        raise ParseError("an operator file or --case is required")
    try:
        with open(args.operator) as fp:
            text = fp.read()
    except OSError as e:
        raise ParseError(f"cannot read {args.operator}: {e}") from e
    return parse_operator(text)


def emit(result: Dict[str, Any], text: str, config: RunConfig):
    out = json.dumps(result, indent=1, default=str) if config.json else text
    if config.output:
        with open(config.output, "w") as fp:
            fp.write(out + "\n")
    else:
        print(out)


def _matrix_text(M: Any, digits: int = 12) -> str:
    if isinstance(M, sympy.MatrixBase):
        return "\n".join("  [" + ", ".join(str(x) for x in M.row(i)) + "]" for i in range(M.rows))
    return "\n".join("  [" + ", ".join(mp.nstr(mp.chop(M[i, j], 10 ** -(digits + 2)), digits) for j in range(M.cols)) + "]"
                     for i in range(M.rows))


# ----------------------------------------------------------------------------
# Commands


def cmd_analyze(args, config: RunConfig) -> int:
    op = load_operator(args)
    points = singular_points(op)
    rows = []
    for s in points:
        rows.append({"point": s.point.label(), "exponents": [str(e) for e in s.exponents],
                     "classification": s.classification})
    result: Dict[str, Any] = {"order": op.order, "singularities": rows}
    lines = [f"order {op.order}, {len(rows)} singularities"]
    lines += [f"  {r['point']:>28}  exponents {', '.join(r['exponents']) or '-':<20} {r['classification']}" for r in rows]
    if op.order == 4:
        report = cy_type_check(op, N=args.integrality_terms, config=config, compute_infinity=not args.skip_infinity)
        result["calabi_yau"] = report.as_dict()
        result["calabi_yau_type"] = report.calabi_yau_type
        summary = "all hold" if report.calabi_yau_type else "not all hold"
        lines.append(f"Calabi-Yau type conditions ({summary}):")
        lines += [f"  ({c}) {v}" for c, v in report.verdicts.items()]
    emit(result, "\n".join(lines), config)
    return 0


def _nearest_singularity(op: Operator) -> Any:
    finite = [s.point for s in singular_points(op) if not s.point.infinity and not s.point.is_origin]
    if not finite:
        raise ParseError("operator has no finite singularity besides the origin")
    return min(finite, key=lambda p: abs(p.approx()))


def _single_hop(op: Operator, args, config: RunConfig) -> int:
    target = args.target or _nearest_singularity(op)
    T = monodromy_via_point(op, target, args.point, config)
    result: Dict[str, Any] = {"target": T.label(), "point": args.point, "terms": config.terms,
                              "raw": matrix_to_json(T.matrix), "error_estimate": mp.nstr(T.error_estimate, 5)}
    lines = [f"monodromy about {T.label()} via {args.point} with {config.terms} terms", _matrix_text(T.matrix)]
    if op.order == 4:
        with mp.workdps(config.precision + GUARD_DIGITS):
            d = int(mp.nint(mp.re(-T.matrix[3, 0])))
            inv = extract_invariants(T, tol=0.5) if d >= 1 else None
            if inv is not None:
                _, expected = theorem1_matrix(inv)
                E = evaluate_exact(expected)
                worst = max(abs(T.matrix[i, j] - E[i, j]) / max(1, abs(E[i, j])) for i in range(4) for j in range(4))
                digits = int(mp.floor(-mp.log10(worst))) if worst > 0 else config.precision
                result["invariants"] = list(inv.as_tuple())
                result["raw_form_digits"] = digits
                lines.append(f"invariants {inv.as_tuple()}, agreement with the raw conifold form: {digits} digits")
    emit(result, "\n".join(lines), config)
    return 0


def cmd_monodromy(args, config: RunConfig) -> int:
    op = load_operator(args)
    if args.point is not None:
        return _single_hop(op, args, config)

    gens = monodromy_generators(op, config, progress=args.verbose > 0)
    result: Dict[str, Any] = {"generators": []}
    lines = []
    for g in gens:
        entry = {"point": g.label(), "classification": g.classification, "flags": g.flags,
                 "error_estimate": mp.nstr(g.error_estimate, 5), "terms": g.terms, "precision": g.precision,
                 "seconds": g.seconds}
        if args.basis in ("raw", "both"):
            entry["raw"] = matrix_to_json(g.matrix)
        result["generators"].append(entry)
        lines.append(f"T at {g.label()} ({g.classification}{', identity' if g.is_identity else ''}), "
                     f"error {mp.nstr(g.error_estimate, 3)}, {format_time(g.seconds)}")
        if args.basis in ("raw", "both"):
            lines.append(_matrix_text(g.matrix))
    if gens.product_residual is not None:
        result["product_residual"] = mp.nstr(gens.product_residual, 5)
        lines.append(f"product check at infinity: residual {mp.nstr(gens.product_residual, 3)}")

    conifolds = [g for g in gens.finite() if g.flags.get("conifold") and not g.target.is_origin]
    if op.order == 5 and conifolds:
        fit = theorem3_fit(min(conifolds, key=lambda g: abs(g.target.approx())))
        result["order5"] = {k: mp.nstr(v, 15) for k, v in fit._asdict().items()}
        lines.append("order-five fit: " + ", ".join(f"{k}={mp.nstr(v, 12)}" for k, v in fit._asdict().items()))
    elif op.order == 4 and conifolds:
        conifold = min(conifolds, key=lambda g: abs(g.target.approx()))
        with mp.workdps(conifold.precision + GUARD_DIGITS):
            inv = extract_invariants(conifold)
            nontrivial = [g.matrix for g in gens.finite() if not g.is_identity]
            worst = max(float(g.error_estimate) for g in gens.finite())
            nice = exact_generators(cy_conjugate(nontrivial, inv), config.max_den, max(config.rat_tol, 1000 * worst))
        level = congruence_level(nice)
        result["invariants"] = {"H3": inv.d, "c2H": inv.c2H, "c3": inv.c3}
        result["level"] = list(level.as_tuple())
        lines.append(f"invariants H^3={inv.d} c2.H={inv.c2H} c3={inv.c3}")
        lines.append(f"level {level}")
        if level.d3 is None:
            result["index"] = group_index(level)
            lines.append(f"index {result['index']}")
        if args.basis in ("nice", "both"):
            result["nice"] = [matrix_to_json(M) for M in nice]
            for M in nice:
                lines.append(_matrix_text(M))
    emit(result, "\n".join(lines), config)
    return 0


def cmd_catalog(args, config: RunConfig) -> int:
    if args.export:
        paths = export_catalog(args.export)
        emit({"exported": paths}, "\n".join(paths), config)
        return 0
    if args.verify:
        ids = [r.id for r in list_cases()] if args.verify == "all" else args.verify.split(",")
        reports = verify_many(ids, config, progress=len(ids) > 1)
        lines = []
        for r in reports:
            failed = [c.name for c in r.checks if not c.passed and not c.advisory]
            lines.append(f"{r.case:>6}  {'pass' if r.passed else 'FAIL':<5} {format_time(r.seconds):>8}  "
                         f"{r.level or '':<16} {', '.join(failed)}")
            lines += [f"{'':>8}note: {n}" for n in r.notes]
        emit({"reports": [r.as_dict() for r in reports]}, "\n".join(lines), config)
        return 0 if all(r.passed for r in reports) else 1
    if args.case:
        record = catalog_case(args.case)
        emit(record.as_dict(), json.dumps(record.as_dict(), indent=1), config)
        return 0
    records = list_cases()
    lines = []
    for r in records:
        inv = r.invariants.as_tuple() if r.invariants else ""
        lines.append(f"{r.id:>6}  {r.family:<16} {str(inv):<18} {str(r.level) if r.level else '':<16} {r.description}")
    emit({"cases": [r.as_dict() for r in records]}, "\n".join(lines), config)
    return 0


def cmd_index(args, config: RunConfig) -> int:
    value = group_index((args.d1, args.d2))
    emit({"d1": args.d1, "d2": args.d2, "index": value}, str(value), config)
    return 0


COMMANDS = {"analyze": cmd_analyze, "monodromy": cmd_monodromy, "catalog": cmd_catalog, "index": cmd_index}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    setup_logging(args.verbose)
    timing: Dict[str, float] = {}
    try:
        config = RunConfig.from_args(args)
        with timed(timing), mp.workdps(config.precision + GUARD_DIGITS):
            code = COMMANDS[args.command](args, config)
    except PFMError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    logger.info("%s finished in %s", args.command, format_time(timing["seconds"]))
    return code


if __name__ == '__main__':
    sys.exit(main())
