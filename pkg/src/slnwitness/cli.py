"""Command-line front end (``slnwitness``).

Exit status is 0 on success, 2 for usage or input errors and 3 when a
numerical routine fails.  All floats are written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from typing import Any, Sequence

import numpy as np

from .cases import CASES, get_case
from .errors import (
    ConditioningError,
    ConsistencyError,
    DomainError,
    InfeasibleRegionError,
    SLNError,
    TailBoundError,
    UnphysicalVectorError,
)
from .geometry import reduce_to_independent
from .optimizer import SearchConfig, optimize
from .physics import ExperimentParams, classicality_margin, gamma_min, joint_table
from .stats import Events, estimate, simulate
from .witness import Verdict, ViolationReport, evaluate, find_witness

__all__ = ["EXIT_NUMERICAL", "EXIT_USAGE", "main", "format_float", "dumps"]

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("slnwitness")


class UsageError(SLNError):
    pass


# -- output --------------------------------------------------------------------


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, type(None), str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _flatten(obj: Any, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}{i}."))
    else:
        out[prefix[:-1]] = obj
    return out


def _csv_cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if v is None:
        return ""
    return str(v)


def _csv_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_csv_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _format(args) -> str:
    return args.format or args.default_format


def _emit(args, payload: Any, csv_rows: tuple[Sequence[str], Sequence[Sequence[Any]]] | None = None) -> None:
    if _format(args) == "csv":
        if csv_rows is None:
            flat = _flatten(payload)
            csv_rows = (list(flat), [list(flat.values())])
        text = _csv_table(*csv_rows)
    else:
        text = dumps(payload) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- helpers -------------------------------------------------------------------


def _params(args, require_gammas: bool = True) -> ExperimentParams:
    missing = [f"--{n.replace('_', '-')}" for n in ("r", "eta_a", "eta_b") if getattr(args, n) is None]
    if require_gammas:
        missing += [f"--{n}" for n in ("gamma1", "gamma2") if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required flags: {' '.join(missing)}")
    g1 = args.gamma1 if args.gamma1 is not None else 0.0
    g2 = args.gamma2 if args.gamma2 is not None else 1.0
    params = ExperimentParams(args.r, args.eta_a, args.eta_b, g1, g2)
    params.check_physical()
    return params


def _case_or_params(args) -> ExperimentParams:
    if getattr(args, "case", None):
        return get_case(args.case).params
    return _params(args)


def _parse_vector(text: str) -> np.ndarray:
    try:
        values = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse numeric vector {text!r}") from None
    return np.array(values)


def _load_lambda(args) -> np.ndarray:
    if args.lam is not None:
        return _parse_vector(args.lam)
    if args.report is not None:
        with open(args.report) as fh:
            data = json.load(fh)
        data = data.get("report", data) or {}
        if not data.get("lambda"):
            raise UsageError(f"{args.report} holds no witness")
        return np.asarray(data["lambda"], dtype=float)
    if getattr(args, "case", None):
        return get_case(args.case).lam
    raise UsageError("give a witness with --lambda, --report or --case")


def _report_fields(report: ViolationReport | None) -> dict:
    """``report`` (exact serialized fields, or null) plus diagnostics as siblings."""
    if report is None:
        return {"verdict": Verdict.NO_VIOLATION.value, "report": None}
    out = {"verdict": report.verdict.value, "report": report.to_dict()}
    out["margins"] = {f"g{s}_na{a}": m for (s, a), m in report.margins.items()}
    if report.search_info:
        out["search_info"] = report.search_info
    return out


# -- commands ------------------------------------------------------------------


def cmd_table1(args) -> None:
    case = get_case(args.case)
    params = case.params
    if args.published_lambda:
        report = evaluate(case.lam, params)
        source = "published"
    else:
        report = find_witness(reduce_to_independent(joint_table(params)), M=args.grid_m, method=args.method)
        source = args.method
    payload = {
        "case": case.name,
        "params": params.to_dict(),
        "lambda_source": source,
        "published_v_coeff": case.published_v_coeff,
        **_report_fields(report),
    }
    if args.n is not None:
        if report is None:
            raise UsageError("no witness to estimate with")
        events = simulate(params, args.n, args.seed)
        payload["estimate"] = estimate(report.lam, events).to_dict(args.seed)
    _emit(args, payload)


def cmd_gamma_min_scan(args) -> None:
    if args.r is None or args.eta_a is None:
        raise UsageError("missing required flags: --r --eta-a")
    if args.eta_b_steps < 1 or not 0 < args.eta_b_min <= args.eta_b_max <= 1:
        raise UsageError("need 0 < --eta-b-min <= --eta-b-max <= 1 and --eta-b-steps >= 1")
    etas = np.linspace(args.eta_b_min, args.eta_b_max, args.eta_b_steps)
    rows = [(float(e), gamma_min(args.r, args.eta_a, float(e))) for e in etas]
    payload = {"r": args.r, "eta_a": args.eta_a, "rows": [{"eta_b": e, "gamma_min": g} for e, g in rows]}
    _emit(args, payload, (["eta_b", "gamma_min"], rows))


def cmd_search(args) -> None:
    params = _case_or_params(args)
    if args.lam is not None or args.report is not None:
        report = evaluate(_load_lambda(args), params)
    else:
        report = find_witness(reduce_to_independent(joint_table(params)), M=args.grid_m, method=args.method)
    _emit(args, {"params": params.to_dict(), **_report_fields(report)})


def cmd_simulate(args) -> None:
    if args.n is None:
        raise UsageError("missing required flag: --n")
    params = _case_or_params(args)
    events = simulate(params, args.n, args.seed, shards=args.shards, workers=args.threads)
    if args.out and args.out != "-":
        events.to_csv(args.out)
    else:
        buf = io.StringIO()
        buf.write("setting,n_a,n_b\n")
        np.savetxt(buf, np.stack([events.setting, events.n_a, events.n_b], axis=1), fmt="%d", delimiter=",")
        sys.stdout.write(buf.getvalue())


def cmd_estimate(args) -> None:
    if args.events is None:
        raise UsageError("missing required flag: --events")
    lam = _load_lambda(args)
    result = estimate(lam, Events.from_csv(args.events))
    _emit(args, result.to_dict(args.seed))


def cmd_check_classical(args) -> None:
    q = _parse_vector(args.probs)
    if q.size != 3 or (q < 0).any() or not math.isclose(q.sum(), 1.0, abs_tol=1e-9):
        raise UsageError("expected three nonnegative probabilities summing to 1, e.g. 0.5,0.3,0.2")
    margin = float(classicality_margin(q))
    _emit(args, {"probs": q.tolist(), "margin": margin, "classical": margin >= -1e-12})


def cmd_optimize(args) -> None:
    if args.r is None or args.eta_a is None or args.eta_b is None:
        raise UsageError("missing required flags: --r --eta-a --eta-b")
    config = SearchConfig(
        lo=args.gamma_lo,
        hi=args.gamma_hi,
        h=args.step,
        grid_m=args.grid_m,
        method=args.method,
        threads=args.threads,
    )
    result = optimize(args.r, args.eta_a, args.eta_b, config)
    if result is None:
        payload = {"r": args.r, "eta_a": args.eta_a, "eta_b": args.eta_b, "result": None}
    else:
        payload = {"r": args.r, "eta_a": args.eta_a, "eta_b": args.eta_b, "result": result.to_dict()}
    if _format(args) == "csv":
        trace = result.trace if result else []
        _emit(args, payload, (["gamma1", "gamma2", "v_coeff"], trace))
    else:
        _emit(args, payload)


# -- parser --------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--r", type=float, help="squeezing parameter")
    common.add_argument("--eta-a", type=float, help="Alice's detection efficiency")
    common.add_argument("--eta-b", type=float, help="Bob's detection efficiency")
    common.add_argument("--gamma1", type=float, help="LO amplitude, setting 1")
    common.add_argument("--gamma2", type=float, help="LO amplitude, setting 2")
    common.add_argument("--grid-m", type=_positive_int, default=30, help="vertex grid size per curve")
    common.add_argument("--method", choices=("lp", "hull"), default="lp")
    common.add_argument("--n", type=_positive_int, help="samples per setting")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--threads", type=_positive_int, default=1, help="worker cap")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="slnwitness", description=__doc__.splitlines()[0])
    parser.set_defaults(default_format="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", parents=[common], help="reference cases A, B, C")
    p.add_argument("case", choices=sorted(CASES) + [c.lower() for c in CASES])
    p.add_argument("--published-lambda", action="store_true", help="use the published witness")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("gamma-min-scan", parents=[common], help="gamma_min versus eta_b")
    p.add_argument("--eta-b-min", type=float, default=0.05)
    p.add_argument("--eta-b-max", type=float, default=1.0)
    p.add_argument("--eta-b-steps", type=int, default=20)
    p.set_defaults(func=cmd_gamma_min_scan, default_format="csv")

    witness_src = argparse.ArgumentParser(add_help=False)
    witness_src.add_argument("--case", choices=sorted(CASES) + [c.lower() for c in CASES])
    witness_src.add_argument("--lambda", dest="lam", help="comma-separated witness")
    witness_src.add_argument("--report", help="JSON report holding a witness")

    p = sub.add_parser("search", parents=[common, witness_src], help="find or evaluate a witness")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("simulate", parents=[common, witness_src], help="draw click records as CSV")
    p.add_argument("--shards", type=_positive_int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common, witness_src], help="estimate V from click records")
    p.add_argument("--events", help="CSV of click records")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check-classical", parents=[common], help="classicality of a click triple")
    p.add_argument("probs", help="P0,P1,P2")
    p.set_defaults(func=cmd_check_classical)

    p = sub.add_parser("optimize", parents=[common], help="maximise V over the LO amplitudes")
    p.add_argument("--gamma-lo", type=float, default=0.0)
    p.add_argument("--gamma-hi", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.05)
    p.set_defaults(func=cmd_optimize)
    return parser


_NUMERICAL = (ConsistencyError, ConditioningError, TailBoundError, InfeasibleRegionError, ArithmeticError)
_USAGE = (UsageError, DomainError, UnphysicalVectorError, OSError, KeyError, ValueError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except _NUMERICAL as exc:
        print(f"slnwitness: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _USAGE as exc:
        print(f"slnwitness: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
