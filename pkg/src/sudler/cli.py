"""Command-line front end: ``sudler <command> [options]``.

Every command builds an output record (command, params, rows, runtime_ms,
schema_version).  ``--json`` prints it as JSON, ``--csv`` prints the rows as
CSV, and the default prints one ``key=value`` line per row.  Floats are
written with ``%.12e`` in all formats, and JSON carries them as strings, so
the numeric payloads agree exactly.

Exit codes: 0 ok, 2 usage error, 3 budget exceeded, 4 inconclusive certificate.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np

from . import growth, kernel, limitfn, qcf
from .errors import BudgetExceeded, SudlerError

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_INCONCLUSIVE = 0, 2, 3, 4

CB_TABULATED = {1: 2.406152, 2: 2.159658, 3: 1.800517, 4: 1.499350, 5: 1.267273,
                6: 1.089429, 7: 0.951175, 8: 0.841663, 9: 0.753296, 10: 0.680773}
B6_MIN_TABULATED = {1: 0.977, 7: 0.907, 44: 0.849, 272: 0.794, 1677: 0.742, 10335: 0.693}
B6_MAX_TABULATED = {30: 1.061, 184: 1.213, 1133: 1.286, 6981: 1.378}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "%.12e" % x
    if x is None:
        return ""
    return str(x)


def _fmt_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _fmt_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt_tree(v) for v in obj]
    return fmt(obj)


def make_record(command: str, params: dict, rows: list[dict], start: float, meta: dict | None = None) -> dict:
    rec = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": _fmt_tree(params),
        "rows": [_fmt_tree(r) for r in rows],
        "runtime_ms": fmt(int(round((time.perf_counter() - start) * 1000))),
    }
    if meta:
        rec["meta"] = _fmt_tree(meta)
    return rec


def render(rec: dict, mode: str) -> str:
    if mode == "json":
        return json.dumps(rec, indent=2, sort_keys=False)
    rows = rec["rows"]
    if mode == "csv":
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        return buf.getvalue().rstrip("\n")
    lines = [f"# {rec['command']} " + " ".join(f"{k}={v}" for k, v in rec["params"].items())]
    for r in rows:
        lines.append(" ".join(f"{k}={v}" for k, v in r.items()))
    for k, v in rec.get("meta", {}).items():
        lines.append(f"# {k}: {json.dumps(v) if isinstance(v, (dict, list)) else v}")
    return "\n".join(lines)


def _parse_grid(text: str):
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"grid must be lo:hi:step, got {text!r}") from exc
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)) or step <= 0 or hi < lo:
        raise UsageError("grid needs finite lo <= hi and step > 0")
    return lo, hi, step


def cmd_eval(args, start):
    if args.rational is not None:
        try:
            alpha = Fraction(args.rational)
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"bad rational {args.rational!r}") from exc
        label = str(alpha)
    elif args.golden:
        alpha, label = qcf.make_surd(1), "golden"
    elif args.b is not None:
        alpha, label = qcf.make_surd(args.b), f"beta({args.b})"
    else:
        raise UsageError("one of --b, --rational, --golden is required")
    res = kernel.sudler_product(alpha, args.N, budget=args.budget, threads=args.threads)
    row = {"N": args.N, "value": res.value, "abs_err": res.abs_err, "zero": res.is_zero}
    return make_record("eval", {"alpha": label, "N": args.N}, [row], start), EXIT_OK


def cmd_limit(args, start):
    if args.grid is not None:
        lo, hi, step = _parse_grid(args.grid)
        rows = [
            {"eps": e, "G": g, "abs_err": err, "root": bool(root)}
            for e, g, err, root in limitfn.G_grid(args.b, lo, hi, step, args.tol)
        ]
        params = {"b": args.b, "grid": args.grid, "tol": args.tol}
        roots = [r["eps"] for r in rows if r["root"]]
        return make_record("limit", params, rows, start, {"roots": roots}), EXIT_OK
    if args.eps is None:
        raise UsageError("--eps or --grid is required")
    g = limitfn.G_eval(args.b, args.eps, args.tol)
    row = {"eps": args.eps, "G": g.value, "abs_err": g.abs_err, "root": g.is_zero}
    return make_record("limit", {"b": args.b, "eps": args.eps, "tol": args.tol}, [row], start), EXIT_OK


def cmd_constant(args, start):
    bs = range(1, args.b + 1) if args.upto else [args.b]
    rows = []
    for b in bs:
        c = limitfn.C_const(b, args.tol)
        rows.append({"b": b, "C_b": c.value, "abs_err": c.abs_err, "above_one": c.lo > 1.0})
    return make_record("constant", {"b": args.b, "upto": args.upto, "tol": args.tol}, rows, start), EXIT_OK


def cmd_table(args, start):
    which = args.which
    meta = {}
    rows = []
    if which == "cb":
        for b, tab in CB_TABULATED.items():
            c = limitfn.C_const(b, args.tol)
            rows.append({"b": b, "computed": c.value, "abs_err": c.abs_err, "tabulated": tab,
                         "delta": c.value - tab, "within_1e-5": abs(c.value - tab) <= 1e-5})
    elif which == "b6-min":
        surd = qcf.make_surd(6)
        for N, tab in B6_MIN_TABULATED.items():
            p = kernel.sudler_product(surd, N, budget=args.budget, threads=args.threads)
            rows.append({"N": N, "P_N": p.value, "abs_err": p.abs_err, "tabulated": tab,
                         "delta": p.value - tab, "within_1e-3": abs(p.value - tab) <= 1e-3})
    else:
        surd = qcf.make_surd(6)
        value_ok, ratio_ok = True, True
        for N, tab in B6_MAX_TABULATED.items():
            p = kernel.sudler_product(surd, N, budget=args.budget, threads=args.threads)
            ratio = p.value / N
            value_ok &= abs(p.value - tab) <= 1e-3
            ratio_ok &= abs(ratio - tab) <= 1e-3
            rows.append({"N": N, "P_N": p.value, "P_N_over_N": ratio, "tabulated": tab,
                         "delta_value": p.value - tab, "delta_ratio": ratio - tab})
        meta["reading"] = "ratio" if ratio_ok and not value_ok else ("value" if value_ok else "none")
    return make_record("table", {"which": which, "tol": args.tol}, rows, start, meta), EXIT_OK


def _cert_row(label, cert):
    ends = [g for _, g in cert.endpoints]
    return {"part": label, "lo": cert.lo, "hi": cert.hi, "threshold": cert.threshold,
            "kind": cert.kind, "status": cert.status,
            "G_lo": ends[0].value if ends else None, "G_hi": ends[1].value if ends else None,
            "abs_err": max((g.abs_err for g in ends), default=None)}


def cmd_certify(args, start):
    b = args.b
    if not 1 <= b <= 20:
        raise UsageError("--b must be in 1..20")
    verdict = growth.growth_verdict(b)
    ev = verdict.evidence
    rows = []
    if "certificate" in ev:
        rows.append(_cert_row("interval", ev["certificate"]))
    if "forward" in ev:
        for key in ("forward", "reflected"):
            r = ev[key]
            rows.append({"part": f"groups-{key}", "lo": None, "hi": None, "threshold": 1.0,
                         "kind": "above", "status": "pass" if r["passed"] else "fail",
                         "G_lo": r["min_bound"], "G_hi": None, "abs_err": None})
    if "case_analysis" in ev:
        for case in ev["case_analysis"]["cases"]:
            for k, cert in enumerate(case.certificates):
                rows.append(_cert_row(f"case{case.name}.{k + 1}", cert))
    if "C_b" in ev:
        c = ev["C_b"]
        rows.append({"part": "C_b", "lo": None, "hi": None, "threshold": 1.0, "kind": "below",
                     "status": "pass" if c.hi < 1.0 else "fail", "G_lo": c.value, "G_hi": None,
                     "abs_err": c.abs_err})
    meta = {"route": ev.get("route"), "liminf_positive": verdict.liminf_positive,
            "limsup_over_N_finite": verdict.limsup_over_N_finite, "conclusive": verdict.conclusive}
    if "case_analysis" in ev:
        ca = ev["case_analysis"]
        meta["case_analysis_passed"] = ca["passed"]
        meta["case_products"] = {c.name: c.product for c in ca["cases"]}
    code = EXIT_OK if verdict.conclusive and all(r["status"] == "pass" for r in rows) else EXIT_INCONCLUSIVE
    return make_record("certify", {"b": b}, rows, start, meta), code


def cmd_ostrowski(args, start):
    if args.N < 1:
        raise UsageError("N must be positive")
    d = qcf.ostrowski_expand(args.N, args.b)
    dec = growth.decompose(args.N, args.b, args.reflected, budget=args.budget, threads=args.threads)
    rows = [{"level": bl.level, "q": bl.q, "digit": bl.digit, "sub": bl.sub, "eps": bl.eps,
             "value": bl.value.value, "abs_err": bl.value.abs_err} for bl in dec.blocks]
    direct = kernel.sudler_product(qcf.make_surd(args.b), args.N, budget=args.budget, threads=args.threads)
    terms = [str(q) for c, _, q in d.terms() for _ in range(c)]
    meta = {"digits": list(d.digits), "expansion": "+".join(terms), "product": dec.product,
            "direct": direct.value, "rel_diff": abs(dec.product / direct.value - 1.0)}
    if dec.reflected:
        meta["numerator"] = dec.numerator.value
        meta["top"] = dec.top
    params = {"N": args.N, "b": args.b, "reflected": args.reflected}
    return make_record("ostrowski", params, rows, start, meta), EXIT_OK


def cmd_witness(args, start):
    fn = growth.liminf_witness if args.kind == "liminf" else growth.limsup_witness
    w = fn(args.b, args.k_max, construction=args.construction, budget=args.budget, threads=args.threads)
    rows = [{"N": n, "P_N": v, "abs_err": e, "P_N_over_N": r} for n, v, e, r in w.rows()]
    meta = {"construction": w.construction, "truncated": w.truncated}
    if "eta" in w.params:
        meta["eta"] = w.params["eta"]
    params = {"b": args.b, "kind": args.kind, "k_max": args.k_max}
    return make_record("witness", params, rows, start, meta), EXIT_OK


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--tol", type=float, default=d(1e-7), help="target absolute error")
    fmt_group = parser.add_mutually_exclusive_group()
    fmt_group.add_argument("--json", dest="mode", action="store_const", const="json", default=d("text"))
    fmt_group.add_argument("--csv", dest="mode", action="store_const", const="csv", default=d("text"))
    parser.add_argument("--budget", type=int, default=d(kernel.DEFAULT_BUDGET), help="max factors per evaluation")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads for long products")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sudler", description="Sudler products and their limit functions")
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="P_N(alpha)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--b", type=int)
    g.add_argument("--rational")
    g.add_argument("--golden", action="store_true")
    p.add_argument("-N", type=int, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("limit", parents=[common], help="G_beta(eps) or a grid of it")
    p.add_argument("--b", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--eps", type=float)
    g.add_argument("--grid", help="lo:hi:step")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("constant", parents=[common], help="C_b")
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--upto", action="store_true", help="all of 1..b")
    p.set_defaults(func=cmd_constant)

    p = sub.add_parser("table", parents=[common], help="reproduce reference tables")
    p.add_argument("which", choices=["cb", "b6-min", "b6-max"])
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("certify", parents=[common], help="growth certificate for beta(b)")
    p.add_argument("--b", type=int, required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("ostrowski", parents=[common], help="digits and block decomposition")
    p.add_argument("-N", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--reflected", action="store_true")
    p.set_defaults(func=cmd_ostrowski)

    p = sub.add_parser("witness", parents=[common], help="liminf/limsup witness sequences")
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--kind", choices=["liminf", "limsup"], default="liminf")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--construction", choices=["auto", "convergent_sums", "lemma"], default="auto")
    p.set_defaults(func=cmd_witness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    if args.tol <= 0 or args.threads < 1 or args.budget < 1:
        print("error: --tol, --threads and --budget must be positive", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        rec, code = args.func(args, start)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, ValueError, SudlerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(render(rec, args.mode))
    return code


if __name__ == "__main__":
    sys.exit(main())
