"""Command-line entry point.

Exit codes: 0 success, 1 bad input, 2 solver did not converge,
3 instance too large for the exact solver.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .entropic import SinkhornConvergenceError
from .excess import excess_mass_report
from .lp import MAX_EXACT_SIZE, SizeLimitError
from .measures import load_measure, marginal_violation, save_measure, write_plan_csv
from .orlicz import parse_phi
from .simulation import DEFAULT_LAMBDA, DEFAULT_N, run_simulation
from .solver import OWSolverError, SolveReport, solve_entropic_ow, solve_exact_ow, wasserstein_r

log = logging.getLogger("orlicz_ot")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_TOO_LARGE = 3


def _positive(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return val


def _seed(text: str) -> int:
    val = int(text)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _status_code(report: SolveReport) -> int:
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_dist(args) -> int:
    a, b = load_measure(args.a), load_measure(args.b)
    report = solve_entropic_ow(a, b, parse_phi(args.phi), args.lam, args.epsilon)
    if args.format == "json":
        _emit(_dump(report.to_dict()), args.out)
    else:
        print(f"{report.value!r} {report.status}")
        if args.out:
            Path(args.out).write_text(_dump(report.to_dict()), encoding="utf-8")
    return _status_code(report)


def cmd_plan(args) -> int:
    a, b = load_measure(args.a), load_measure(args.b)
    report = solve_entropic_ow(a, b, parse_phi(args.phi), args.lam, args.epsilon)
    out = Path(args.out)
    plan = report.plan
    sidecar = {
        "value": report.value,
        "status": report.status,
        "lambda": args.lam,
        "phi": args.phi,
        "row_marginal": plan.row_marginal.tolist(),
        "col_marginal": plan.col_marginal.tolist(),
        "marginal_violation": marginal_violation(plan),
        "plan_entropy": plan.entropy(),
    }
    if args.format == "csv":
        write_plan_csv(plan, out)
        out.with_suffix(".json").write_text(_dump(sidecar), encoding="utf-8")
    else:
        out.write_text(_dump({**sidecar, "plan": plan.matrix.tolist()}), encoding="utf-8")
    print(f"{report.value!r} {report.status}")
    return _status_code(report)


def cmd_simulate(args) -> int:
    phi = parse_phi(args.phi)
    result = run_simulation(args.seed, args.n, args.lam, phi, args.epsilon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_measure(result.nu1, out / "nu1.json")
    save_measure(result.nu2, out / "nu2.json")
    write_plan_csv(result.w1.plan, out / "plan_w1.csv")
    write_plan_csv(result.ow.plan, out / "plan_ow.csv")
    (out / "summary.json").write_text(_dump(result.summary), encoding="utf-8")
    s = result.summary
    print(f"ow={s['ow_value']!r} w1_outlier_mass={s['w1_outlier_mass']!r} ow_outlier_mass={s['ow_outlier_mass']!r}")
    return _status_code(result.ow) if result.w1.converged else EXIT_NOT_CONVERGED


def cmd_excess(args) -> int:
    g, g0 = load_measure(args.g), load_measure(args.g0)
    phi = parse_phi(args.phi)
    if g.size * g0.size <= MAX_EXACT_SIZE:
        report = solve_exact_ow(g, g0, phi, args.epsilon)
        source = "exact"
    else:
        report = solve_entropic_ow(g, g0, phi, args.lam, args.epsilon)
        source = "entropic"
    res = excess_mass_report(g, g0, phi, args.eta, report.value, w_source=source)
    out = {**res.to_dict(), "w_status": report.status}
    _emit(_dump(out), args.out)
    if not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_oracle(args) -> int:
    a, b = load_measure(args.a), load_measure(args.b)
    report = solve_exact_ow(a, b, parse_phi(args.phi), args.epsilon)
    if args.format == "json":
        _emit(_dump(report.to_dict()), args.out)
    else:
        print(f"{report.value!r} {report.status}")
    return _status_code(report)


def cmd_wr(args) -> int:
    a, b = load_measure(args.a), load_measure(args.b)
    value = wasserstein_r(a, b, args.r)
    if args.format == "json":
        _emit(_dump({"value": value, "order": args.r}), args.out)
    else:
        print(repr(value))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orlicz-ot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def pair(p):
        p.add_argument("a", help="source measure JSON")
        p.add_argument("b", help="target measure JSON")

    def common(p, lam_default=1.0):
        p.add_argument("--phi", default="exp:1.1", help="Orlicz function descriptor (default: exp:1.1)")
        p.add_argument("--lambda", dest="lam", type=_positive, default=lam_default)
        p.add_argument("--epsilon", type=_positive, default=None,
                       help="bracket width (default: 1e-6 * max distance)")

    p = sub.add_parser("dist", help="entropic Orlicz-Wasserstein distance")
    pair(p)
    common(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("plan", help="write the entropic OW transport plan")
    pair(p)
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="normal vs Laplace mixture experiment")
    common(p, DEFAULT_LAMBDA)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("excess", help="outlier mass and its OW bounds")
    p.add_argument("g")
    p.add_argument("g0")
    common(p)
    p.add_argument("--eta", type=_positive, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_excess)

    p = sub.add_parser("oracle", help="exact OW distance for small instances")
    pair(p)
    p.add_argument("--phi", default="exp:1.1")
    p.add_argument("--epsilon", type=_positive, default=None)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("wr", help="classical Wasserstein distance of order r")
    pair(p)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_wr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "n", 1) < 1:
        parser.error("--n must be >= 1")
    try:
        return args.func(args)
    except SizeLimitError as exc:
        log.error("%s", exc)
        return EXIT_TOO_LARGE
    except (OWSolverError, SinkhornConvergenceError) as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
