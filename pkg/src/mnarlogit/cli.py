"""Command-line interface: ``fit``, ``simulate``, ``dgp`` and ``verify``.

Exit codes: 0 success, 1 identity verification failed, 2 identification
failure (no finite ``delta_y``), 3 data/config error, 4 non-convergence.
"""

import argparse
import sys

from . import __version__
from ._jsonutil import dumps, to_plain
from .correction import AUTO, BRANCHES, fit_corrected
from .data import BINARY, CONTINUOUS, read_csv, write_csv
from .exceptions import (
    BootstrapFailureError,
    IdentificationError,
    InputError,
    McFailureError,
    MnarLogitError,
    NonConvergenceError,
)
from .oracle import DEFAULT_TRUTH, CovariateLaw, TruthSpec
from .simulation import SimConfig, generate_dataset, run_monte_carlo
from .smoother import SMOOTHER_KINDS, SPLINE_GAM
from .verify import CHECKS, IDENTITY_TOL, check_point, summarize, verify_identities

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_IDENTIFICATION = 2
EXIT_DATA = 3
EXIT_NONCONVERGENCE = 4

STEP_NAMES = {1: "step 1 (smoother)", 2: "step 2 (marginal selection fit)",
              3: "step 3 (corrected outcome fit)"}


def exit_code_for(exc):
    if isinstance(exc, IdentificationError):
        return EXIT_IDENTIFICATION
    if isinstance(exc, BootstrapFailureError):
        counts = exc.failures
        if counts and max(counts, key=counts.get) == "IdentificationError":
            return EXIT_IDENTIFICATION
        return EXIT_NONCONVERGENCE
    if isinstance(exc, (NonConvergenceError, McFailureError)):
        return EXIT_NONCONVERGENCE
    return EXIT_DATA


def _error(exc):
    where = STEP_NAMES.get(getattr(exc, "step", None))
    prefix = f"error in {where}" if where else "error"
    print(f"{prefix}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return exit_code_for(exc) if isinstance(exc, MnarLogitError) else EXIT_DATA


def _floats(text):
    if text is None or text.strip() == "":
        return ()
    return tuple(float(v) for v in text.split(","))


def _names(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else []


def _write_json(obj, path):
    text = dumps(obj)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


# --------------------------------------------------------------------------- fit


def build_fit_report(est, n, n_observed, smoother, branch):
    labels = list(est.labels)
    report = {
        "n": n,
        "n_observed": n_observed,
        "smoother": smoother,
        "branch_requested": branch,
        "labels": labels,
        "corrected": {"beta": est.beta, "plugin_se": est.beta_se},
        "naive": {"beta": est.naive_beta, "se": est.naive_se},
        "delta": est.delta.to_dict() if est.delta is not None else None,
        "approx_quality": est.approx_quality,
        "pi_hat": est.pi_hat.summary() if est.pi_hat is not None else None,
        "warnings": [w.to_dict() for w in est.warnings],
        "bootstrap": est.bootstrap.to_dict() if est.bootstrap is not None else None,
    }
    return to_plain(report)


def render_fit_report(r):
    lines = [f"n = {r['n']}, observed = {r['n_observed']}, smoother = {r['smoother']}"]
    boot = r["bootstrap"]
    head = f"{'coef':<12} {'corrected':>11} {'plugin_se':>10}"
    head += f" {'boot_se':>9}" if boot else ""
    head += f" {'naive':>11} {'naive_se':>10}"
    lines.append(head)
    for j, lab in enumerate(r["labels"]):
        row = (f"{lab:<12} {r['corrected']['beta'][j]:>11.5f} "
               f"{r['corrected']['plugin_se'][j]:>10.5f}")
        if boot:
            row += f" {boot['beta_se'][j]:>9.5f}"
        row += f" {r['naive']['beta'][j]:>11.5f} {r['naive']['se'][j]:>10.5f}"
        lines.append(row)
    if r["delta"]:
        dl = r["delta"]
        lines.append(f"delta: delta0 = {dl['delta0']:.5f}, delta_x = "
                     f"{[round(v, 5) for v in dl['delta_x']]}, delta_y = {dl['delta_y']:.5f} "
                     f"(branch {dl['branch']}, gamma_hat = {dl['gamma_hat']:.5f} "
                     f"± {dl['gamma_se']:.5f})")
        lines.append(f"approx_quality = {r['approx_quality']:.4f}")
    if r["pi_hat"]:
        p = r["pi_hat"]
        lines.append(f"pi_hat: min {p['min']:.4g}, median {p['median']:.4g}, max {p['max']:.4g}, "
                     f"clipped {p['clip_count']}")
    if boot:
        lines.append(f"bootstrap: {boot['successes']}/{boot['reps']} replicates ok, "
                     f"failures {boot['failures']}")
    for w in r["warnings"]:
        lines.append(f"warning [{w['code']}]: {w['message']}")
    return "\n".join(lines)


def cmd_fit(args):
    try:
        kinds = None
        covs = _names(args.covariates) or None
        d = read_csv(args.data, args.outcome, covs)
        overrides = set(_names(args.binary)), set(_names(args.continuous))
        if overrides[0] or overrides[1]:
            unknown = (overrides[0] | overrides[1]) - set(d.column_names)
            if unknown:
                raise InputError(f"--binary/--continuous name unknown columns: {sorted(unknown)}")
            kinds = [BINARY if c in overrides[0] else CONTINUOUS if c in overrides[1] else k
                     for c, k in zip(d.column_names, d.column_kinds)]
            d = read_csv(args.data, args.outcome, list(d.column_names), kinds)
    except (MnarLogitError, OSError) as exc:
        return _error(exc)
    try:
        est = fit_corrected(d, args.smoother, args.branch, args.bootstrap, seed=args.seed,
                            n_jobs=args.threads)
    except MnarLogitError as exc:
        return _error(exc)
    report = build_fit_report(est, d.n, int(d.s.sum()), args.smoother, args.branch)
    if args.output:
        _write_json(report, args.output)
    if args.format == "json":
        _write_json(report, None)
    else:
        print(render_fit_report(report))
    return EXIT_OK


# ---------------------------------------------------------------------- simulate


def cmd_simulate(args):
    try:
        cfg = SimConfig.load(args.config) if args.config else SimConfig()
        overrides = {k: v for k, v in (("replications", args.replications), ("seed", args.seed),
                                       ("n", args.n)) if v is not None}
        if overrides:
            cfg = SimConfig.from_dict({**cfg.to_dict(), **overrides})
    except MnarLogitError as exc:
        return _error(exc)
    code = EXIT_OK
    try:
        report = run_monte_carlo(cfg, n_jobs=args.threads)
    except McFailureError as exc:
        code = _error(exc)
        report = exc.report
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if args.format == "json":
        print(report.to_json())
    else:
        print(report.render_table())
    return code


# --------------------------------------------------------------------------- dgp


def truth_from_args(args):
    bx = _floats(args.beta_x) if args.beta_x is not None else DEFAULT_TRUTH.beta_x
    dx = _floats(args.delta_x) if args.delta_x is not None else DEFAULT_TRUTH.delta_x
    if args.laws:
        laws = tuple(CovariateLaw.parse(s) for s in args.laws.split(","))
    else:
        laws = tuple(CovariateLaw() for _ in bx)
    return TruthSpec(
        DEFAULT_TRUTH.beta0 if args.beta0 is None else args.beta0, bx,
        DEFAULT_TRUTH.delta0 if args.delta0 is None else args.delta0, dx,
        DEFAULT_TRUTH.delta_y if args.delta_y is None else args.delta_y, laws)


def cmd_dgp(args):
    try:
        truth = truth_from_args(args)
        if args.n < 1:
            raise InputError("n must be >= 1")
        d, full_y = generate_dataset(truth, args.n, args.seed)
    except (MnarLogitError, ValueError) as exc:
        return _error(exc)
    extra = {"y_full": full_y} if args.include_full else None
    write_csv(args.output if args.output and args.output != "-" else sys.stdout,
              d, "y", True, extra)
    return EXIT_OK


# ------------------------------------------------------------------------ verify


def _parse_point(text):
    point = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        point[key.strip()] = float(val)
    missing = {"beta0", "beta_x", "delta0", "delta_x", "delta_y", "x"} - set(point)
    if missing:
        raise InputError(f"--point is missing {sorted(missing)}")
    return point


def cmd_verify(args):
    try:
        if args.point:
            checks = []
            for p in args.point:
                checks.extend(check_point(_parse_point(p), args.tol, args.inject_sign_error))
        else:
            checks = verify_identities(tol=args.tol, inject_sign_error=args.inject_sign_error)
    except (MnarLogitError, ValueError) as exc:
        return _error(exc)
    ok = all(c.passed for c in checks)
    if args.format == "json":
        _write_json({"tol": args.tol, "passed": ok, "summary": summarize(checks),
                     "points": len(checks) // 5}, None)
    elif args.point:
        print(f"{'point':<58}" + "".join(f" {name:>15}" for name in CHECKS) + "  result")
        for start in range(0, len(checks), len(CHECKS)):
            row = checks[start:start + len(CHECKS)]
            pt = ", ".join(f"{k}={v:g}" for k, v in row[0].point.items())
            errs = "".join(f" {c.error:>15.3e}" for c in row)
            print(f"{pt:<58}{errs}  {'PASS' if all(c.passed for c in row) else 'FAIL'}")
    else:
        print(f"{'check':<16} {'points':>6} {'max_error':>11} {'failures':>8}  result")
        for r in summarize(checks):
            print(f"{r['check']:<16} {r['points']:>6} {r['max_error']:>11.3e} "
                  f"{r['failures']:>8}  {'PASS' if r['passed'] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


# --------------------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mnarlogit",
        description="Logistic regression with a relative-risk correction for "
                    "outcome-dependent missingness.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the corrected model to a CSV file")
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--outcome", default="y", help="outcome column (0, 1, empty or NA)")
    p.add_argument("--covariates", help="comma-separated covariate columns "
                                        "(default: all except outcome, s, y_full)")
    p.add_argument("--binary", help="columns forced to enter the smoother linearly")
    p.add_argument("--continuous", help="columns forced to get a spline term")
    p.add_argument("--smoother", choices=SMOOTHER_KINDS[:2], default=SPLINE_GAM)
    p.add_argument("--branch", choices=BRANCHES, default=AUTO)
    p.add_argument("--bootstrap", type=int, default=0, metavar="REPS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", help="write the JSON report here")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run a Monte Carlo study")
    p.add_argument("--config", help="JSON config (default: built-in MNAR config)")
    p.add_argument("--replications", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", help="write the JSON report here")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dgp", help="draw a dataset from the outcome/selection models")
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta-x", help="comma-separated (default 1)")
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta-x", help="comma-separated (default -0.5)")
    p.add_argument("--delta-y", type=float)
    p.add_argument("--laws", help="comma-separated: normal | bernoulli:q | uniform:a:b")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-full", action="store_true", help="add the unmasked y_full column")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_dgp)

    p = sub.add_parser("verify", help="check the log-RR identities against enumeration")
    p.add_argument("--tol", type=float, default=IDENTITY_TOL)
    p.add_argument("--point", action="append",
                   help="beta0=..,beta_x=..,delta0=..,delta_x=..,delta_y=..,x=.. (repeatable)")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--inject-sign-error", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
