"""Command-line surface.

Subcommands map one-to-one onto the library entry points:

  simulate   integrate one flow run and write the trajectory
  basin      Monte-Carlo convergence statistics from Haar starts
  saddle     perturbation runs near a saddle component
  spectrum   linearized-flow spectrum at a critical point
  critical   construct / classify / connect critical points
  verify     structural checks plus the full validation suite

Exit codes: 0 success, 1 usage or I/O error, 2 integration hit t_max,
3 numerical failure, 4 a report violates its operation's contract.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .errors import SonFlowError
from .critical import classify, connect_in_component, make_critical
from .experiments import (
    check_morse_bott,
    resolve_threads,
    run_basin,
    run_saddle_escape,
    run_validation_suite,
)
from .fileio import (
    atomic_write_text,
    csv_report,
    json_report,
    read_matrix_file,
)
from .flow import (
    CONVERGED,
    MAX_TIME,
    FlowConfig,
    integrate,
    trajectory_to_csv,
    trajectory_to_jsonl,
)
from .linearize import EXPONENTIALLY_STABLE, SADDLE, linearize
from .manifold import RotationMatrix, haar_sample_batch, skew_dim

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MAX_TIME = 2
EXIT_NUMERICAL = 3
EXIT_CONTRACT = 4

log = logging.getLogger("son_flow")


def _add_flow_flags(parser: argparse.ArgumentParser, t_max: float = 100.0) -> None:
    parser.add_argument("--method", default="lie_rk4",
                        choices=("lie_euler", "lie_rk4", "ambient_rk4_project"))
    parser.add_argument("--h", type=float, default=1e-2, help="step size")
    parser.add_argument("--t-max", type=float, default=t_max)
    parser.add_argument("--scale", type=float, default=2.0,
                        help="flow scale: 2 is T' = (T^t - T) T")
    parser.add_argument("--grad-tol", type=float, default=1e-10)


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None,
                        help="output path (stdout when omitted)")
    parser.add_argument("--format", default="json", choices=("json", "csv"))


def _flow_config(args) -> FlowConfig:
    return FlowConfig(
        scale=args.scale,
        method=args.method,
        h=args.h,
        t_max=args.t_max,
        grad_tol=args.grad_tol,
    )


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return resolve_threads(args.threads)
    env = os.environ.get("SON_FLOW_THREADS")
    if env:
        try:
            return resolve_threads(int(env))
        except ValueError as exc:
            raise SonFlowError(f"SON_FLOW_THREADS is not an integer: {env!r}") from exc
    return resolve_threads(None)


def _emit(args, text: str) -> None:
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _emit_report(args, data: dict) -> None:
    _emit(args, json_report(data) if args.format == "json" else csv_report(data))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="son-flow",
        description="Descent flow of the trace cost on the rotation group SO(n).",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one flow run")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="Haar-random start")
    p.add_argument("--init-file", default=None,
                   help="matrix file: first line n, then n rows of n numbers")
    _add_flow_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("basin", help="Monte-Carlo basin statistics")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    _add_flow_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("saddle", help="saddle-escape perturbation runs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--kind", default="unstable",
                   choices=("unstable", "kernel", "random"))
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    _add_flow_flags(p, t_max=500.0)
    _add_output_flags(p)

    p = sub.add_parser("spectrum", help="linearized-flow spectrum at a critical point")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--frame", default="identity", choices=("identity", "haar"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    _add_output_flags(p)

    p = sub.add_parser("critical", help="construct, classify or connect critical points")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--frame", default="identity", choices=("identity", "haar"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classify", default=None, metavar="FILE",
                   help="classify the matrix in FILE instead of constructing")
    p.add_argument("--connect-seed", type=int, default=None,
                   help="connect to a second Haar-framed point inside the component")
    p.add_argument("--steps", type=int, default=100)
    _add_output_flags(p)

    p = sub.add_parser("verify", help="validation suite and structural checks")
    p.add_argument("--n", default="2,3,4",
                   help="comma-separated dimensions, e.g. 2,3,4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    _add_output_flags(p)

    return parser


# --------------------------------------------------------------------------
# Subcommand bodies
# --------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    if (args.seed is None) == (args.init_file is None):
        raise SonFlowError("exactly one of --seed and --init-file is required")
    cfg = _flow_config(args)
    if args.init_file is not None:
        matrix = read_matrix_file(args.init_file)
        if args.n is not None and args.n != matrix.shape[0]:
            raise SonFlowError(
                f"--n {args.n} does not match the {matrix.shape[0]}x"
                f"{matrix.shape[0]} matrix in {args.init_file}"
            )
        theta0 = RotationMatrix(matrix)
    else:
        if args.n is None or args.n < 2:
            raise SonFlowError("--n >= 2 is required with --seed")
        theta0 = RotationMatrix(haar_sample_batch(args.n, 1, args.seed)[0])
    traj = integrate(theta0, cfg)
    text = trajectory_to_csv(traj) if args.format == "csv" else trajectory_to_jsonl(traj)
    _emit(args, text)
    kind = traj.verdict.kind
    if kind == CONVERGED:
        log.info("converged to component %s", traj.verdict.component)
        return EXIT_OK
    if kind == MAX_TIME:
        return EXIT_MAX_TIME
    return EXIT_NUMERICAL


def _cmd_basin(args) -> int:
    if args.n < 2:
        raise SonFlowError("--n must be at least 2")
    if args.trials < 0:
        raise SonFlowError("--trials must be nonnegative")
    report = run_basin(args.n, args.trials, _flow_config(args), args.seed,
                       threads=_threads(args))
    log.info("basin run finished in %.2fs", report.wall_time)
    _emit_report(args, report.to_json_dict())
    pure = report.failures == 0 and all(
        v == 0 for k, v in report.counts.items() if k != 0
    )
    return EXIT_OK if pure else EXIT_CONTRACT


def _cmd_saddle(args) -> int:
    report = run_saddle_escape(
        args.n, args.k, args.eps, args.kind, args.trials,
        _flow_config(args), args.seed, threads=_threads(args),
    )
    log.info("saddle run finished in %.2fs", report.wall_time)
    _emit_report(args, report.to_json_dict())
    if args.kind == "kernel":
        bound = max(10.0 * args.eps, 1e-12)
        ok = all(r <= bound for r in report.membership_residuals)
    elif args.eps == 0.0:
        ok = all(o == args.k for o in report.outcomes)
    else:
        ok = all(o == 0 for o in report.outcomes)
    return EXIT_OK if ok else EXIT_CONTRACT


def _cmd_spectrum(args) -> int:
    frame = None if args.frame == "identity" else args.seed
    report = linearize(make_critical(args.n, args.k, frame=frame), args.scale)
    _emit_report(args, report.to_json_dict())
    ns, nu, nz = report.counts
    ok = ns + nu + nz == skew_dim(args.n)
    if args.k == 0:
        ok = ok and report.verdict == EXPONENTIALLY_STABLE
    else:
        ok = ok and report.verdict == SADDLE
    return EXIT_OK if ok else EXIT_CONTRACT


def _cmd_critical(args) -> int:
    if args.classify is not None:
        theta = RotationMatrix(read_matrix_file(args.classify), ortho_tol=1e-6)
        k = classify(theta)
        _emit_report(args, {
            "schema_version": 1,
            "report": "classify",
            "n": theta.n,
            "component": k,
            "trace": float(np.trace(theta.entries)),
        })
        return EXIT_OK
    if args.n is None or args.k is None:
        raise SonFlowError("--n and --k are required to construct a critical point")
    frame = None if args.frame == "identity" else args.seed
    info = make_critical(args.n, args.k, frame=frame)
    data = {
        "schema_version": 1,
        "report": "critical_point",
        "n": args.n,
        "k": args.k,
        "trace": float(np.trace(info.theta.entries)),
        "signs": [float(s) for s in info.signs],
        "theta": [[float(x) for x in row] for row in info.theta.entries],
    }
    violated = False
    if args.connect_seed is not None:
        other = make_critical(args.n, args.k, frame=args.connect_seed)
        curve = connect_in_component(info, other, steps=args.steps)
        residual = 0.0
        for sample in curve:
            s = sample.entries
            residual = max(
                residual,
                float(np.linalg.norm(s - s.T)),
                float(np.linalg.norm(s @ s - np.eye(args.n))),
            )
        membership = [classify(sample, tol=1e-7) for sample in curve]
        end_dev = max(
            float(np.linalg.norm(curve[0].entries - info.theta.entries)),
            float(np.linalg.norm(curve[-1].entries - other.theta.entries)),
        )
        data["connect"] = {
            "steps": args.steps,
            "max_membership_residual": residual,
            "endpoint_deviation": end_dev,
            "all_in_component": all(m == args.k for m in membership),
        }
        violated = residual > 1e-7 or end_dev > 1e-8 or not data["connect"]["all_in_component"]
    _emit_report(args, data)
    return EXIT_CONTRACT if violated else EXIT_OK


def _cmd_verify(args) -> int:
    try:
        n_list = [int(tok) for tok in str(args.n).split(",") if tok.strip()]
    except ValueError as exc:
        raise SonFlowError(f"cannot parse --n {args.n!r} as a dimension list") from exc
    if not n_list or min(n_list) < 2:
        raise SonFlowError("--n needs dimensions >= 2")
    validation = run_validation_suite(n_list, seed=args.seed)
    structure = [check_morse_bott(n) for n in n_list]
    passed = validation.passed and all(r.passed for r in structure)
    _emit_report(args, {
        "schema_version": 1,
        "report": "verify",
        "validation": validation.to_json_dict(),
        "structure_checks": [r.to_json_dict() for r in structure],
        "passed": passed,
    })
    log.info("verify finished in %.2fs", validation.wall_time)
    return EXIT_OK if passed else EXIT_CONTRACT


_COMMANDS = {
    "simulate": _cmd_simulate,
    "basin": _cmd_basin,
    "saddle": _cmd_saddle,
    "spectrum": _cmd_spectrum,
    "critical": _cmd_critical,
    "verify": _cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=getattr(logging, args.log_level))
    try:
        return _COMMANDS[args.command](args)
    except (SonFlowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
