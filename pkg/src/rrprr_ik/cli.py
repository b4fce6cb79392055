"""Command line entry point: ``rrprr-ik {eval,fk,solve,refine}``.

Exit status: 0 on success, 2 on malformed arguments or input rows, 3 on
I/O errors.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys

import numpy as np

from . import batch
from .evaluation import ShellSpec, run_evaluation
from .ik import IkOptions
from .kinematics import forward_kinematics
from .model import JointVector, RobotModel, load_model
from .refine import RefineParams

log = logging.getLogger("rrprr_ik")

EXIT_PARSE = 2
EXIT_IO = 3


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _nonnegative(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _add_solver_flags(p, constraint_tol, d3_slack):
    p.add_argument("--r2z-tol", type=_nonnegative, default=None,
                   help="|R2z| threshold for the coplanar branch (default: same as --constraint-tol)")
    p.add_argument("--constraint-tol", type=_nonnegative, default=constraint_tol,
                   help=f"acceptance tolerance on both identity residuals (default {constraint_tol:g})")
    p.add_argument("--d3-slack", type=_nonnegative, default=d3_slack,
                   help=f"allowed excursion (m) of d3 outside its range (default {d3_slack:g})")


def _options(args) -> IkOptions:
    r2z = args.constraint_tol if args.r2z_tol is None else args.r2z_tol
    return IkOptions(r2z_tol=r2z, constraint_tol=args.constraint_tol, d3_slack=args.d3_slack)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrprr-ik", description="Kinematics of the 5-DoF RRPRR arm")
    parser.add_argument("--robot", metavar="FILE", help="robot geometry key/value file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="Monte-Carlo pose reconstruction study")
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p, 0.05, 0.02)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--source", choices=("shell", "joints"), default="shell",
                   help="free shell sampling, or FK of random in-range joints")
    p.add_argument("--out", metavar="FILE", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", metavar="FILE", help="write per-sample records")

    p = sub.add_parser("fk", help="forward kinematics")
    p.add_argument("--joints", nargs=5, type=float, metavar=("THETA1", "THETA2", "D3", "THETA4", "THETA5"))
    p.add_argument("--degrees", action="store_true", help="angles given on --joints are degrees")
    p.add_argument("--input", metavar="FILE", help="joint CSV (theta1,theta2,d3,theta4,theta5)")
    p.add_argument("--output", metavar="FILE", default="-")

    for name, helptext in (("solve", "analytical IK for a pose CSV"),
                           ("refine", "analytical IK plus damped least-squares refinement")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input", metavar="FILE", help="pose CSV ('-' for stdin)")
        p.add_argument("--output", metavar="FILE", default="-")
        _add_solver_flags(p, 1e-8, 1e-9)
        if name == "refine":
            p.add_argument("--max-iters", type=int, default=RefineParams.max_iters)
            p.add_argument("--damping", type=_positive, default=RefineParams.damping)
    return parser


@contextlib.contextmanager
def _open(path, mode):
    if path in (None, "-"):
        yield sys.stdin if "r" in mode else sys.stdout
    else:
        with open(path, mode, newline="") as fh:
            yield fh


def _cmd_eval(args, model):
    options = _options(args)
    report = run_evaluation(model, ShellSpec.from_model(model), n=args.samples, seed=args.seed,
                            options=options, workers=args.workers, csv_path=args.csv,
                            source=args.source)
    text = report.to_json() + "\n"
    with _open(args.out, "w") as fh:
        fh.write(text)
    log.info("accepted %d / %d in %.2f s", report.accepted_count, report.total_samples,
             report.elapsed_seconds)


def _cmd_fk(args, model):
    if (args.joints is None) == (args.input is None):
        raise batch.RecordError(0, "--joints/--input", "give exactly one of --joints or --input")
    if args.joints is not None:
        q = list(args.joints)
        if args.degrees:
            q = [math.radians(v) if k != 2 else v for k, v in enumerate(q)]
        pose = forward_kinematics(model, JointVector(*q))
        out = {"position": pose.position.tolist(), "rotation": np.asarray(pose.rotation).tolist()}
        with _open(args.output, "w") as fh:
            fh.write(json.dumps(out, indent=2) + "\n")
        return
    with _open(args.input, "r") as fin, _open(args.output, "w") as fout:
        batch.batch_fk(model, fin, fout)


def _cmd_solve(args, model):
    with _open(args.input, "r") as fin, _open(args.output, "w") as fout:
        batch.batch_solve(model, fin, fout, _options(args))


def _cmd_refine(args, model):
    params = RefineParams(max_iters=args.max_iters, damping=args.damping)
    with _open(args.input, "r") as fin, _open(args.output, "w") as fout:
        batch.batch_refine(model, fin, fout, _options(args), params)


COMMANDS = {"eval": _cmd_eval, "fk": _cmd_fk, "solve": _cmd_solve, "refine": _cmd_refine}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        model = load_model(args.robot) if args.robot else RobotModel()
        COMMANDS[args.command](args, model)
    except (batch.RecordError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
