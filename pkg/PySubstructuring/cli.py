# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import argparse
import logging
import sys
from typing import List, Optional

from PySubstructuring.create_experiment import build_config
from PySubstructuring.exceptions import InvalidArgumentError, NumericalError
from PySubstructuring.harness import (
    build_problem,
    convergence_study,
    preset_scenarios,
    frame_to_csv,
    run_experiment,
    write_frame,
)
from PySubstructuring.schemes import (
    parabolic_schemes,
    problems,
    rhs_sampling_rules,
    splittings,
    study_modes,
)
from PySubstructuring.stability import certify, certify_hyperbolic

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ExperimentConfig keys settable from the command line, plus tau and h
_override_names = (
    "problem",
    "n1",
    "n2",
    "l1",
    "l2",
    "N1",
    "N2",
    "T",
    "Nsteps",
    "tau",
    "h",
    "scheme",
    "sigma",
    "rhs_sampling",
    "staged",
    "hhat",
    "splitting",
    "overlap_halfwidth",
    "rel_tol",
    "amplitude",
    "output_path",
    "label",
)


def _add_overrides(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="Configuration file, 'key = value' per line")
    parser.add_argument("--problem", choices=problems)
    parser.add_argument("--n1", type=int, help="Mode index along x1")
    parser.add_argument("--n2", type=int, help="Mode index along x2")
    parser.add_argument("--l1", type=float, help="Domain length along x1")
    parser.add_argument("--l2", type=float, help="Domain length along x2")
    parser.add_argument("--N1", type=int, help="Cells along x1")
    parser.add_argument("--N2", type=int, help="Cells along x2")
    parser.add_argument("--T", type=float, help="Final time")
    parser.add_argument("--Nsteps", type=int, help="Number of time steps")
    parser.add_argument("--tau", type=float, help="Time step, must divide T")
    parser.add_argument("--h", type=float, help="Grid step, must divide l1 and l2")
    parser.add_argument("--scheme", choices=parabolic_schemes)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--rhs-sampling", dest="rhs_sampling", choices=rhs_sampling_rules)
    parser.add_argument(
        "--staged", action=argparse.BooleanOptionalAction, help="Staged componentwise path"
    )
    parser.add_argument("--hhat", type=float, help="Coarse step of the decomposition")
    parser.add_argument("--splitting", choices=splittings)
    parser.add_argument(
        "--overlap", "--overlap-halfwidth", type=int, dest="overlap_halfwidth"
    )
    parser.add_argument("--rel-tol", dest="rel_tol", type=float, help="CG tolerance")
    parser.add_argument("--amplitude", type=float, help="Scale of the initial data")
    parser.add_argument("--output-path", dest="output_path", help="Series CSV path")
    parser.add_argument("--label", help="Run label")
    parser.add_argument("--out", help="Output CSV path (directory for presets)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pysubstructuring",
        description="Domain decomposition time-stepping experiments",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run one experiment or a scenario preset")
    _add_overrides(run)
    run.add_argument("--preset", help="Scenario preset fig5 to fig9, or one of its aliases")

    study = subparsers.add_parser("study", help="Convergence study")
    _add_overrides(study)
    study.add_argument("--mode", choices=study_modes, required=True)
    study.add_argument("--levels", type=int, default=3, help="Number of levels")

    cert = subparsers.add_parser("certify", help="Dense stability certification")
    _add_overrides(cert)
    cert.add_argument("--grid-n", type=int, default=8, help="Cells per axis")
    cert.add_argument("--steps", type=int, default=10, help="Steps per trajectory")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {name: getattr(args, name) for name in _override_names}
    if args.overlap_halfwidth and args.splitting is None:
        overrides["splitting"] = "three-overlap"
    return overrides


def _emit(frame, path: Optional[str]):
    if path:
        write_frame(frame, path)
    else:
        sys.stdout.write(frame_to_csv(frame))


def _run(args: argparse.Namespace):
    if args.preset:
        overrides = _overrides(args)
        # preset entries keep their own labels
        overrides.pop("label")
        summary = preset_scenarios(args.preset, args.config, overrides, args.out)
        if not args.out:
            _emit(summary, None)
        return
    cfg = build_config(args.config, _overrides(args))
    _emit(run_experiment(cfg), args.out or cfg.output_path)


def _study(args: argparse.Namespace):
    cfg = build_config(args.config, _overrides(args))
    _emit(convergence_study(cfg, args.levels, args.mode), args.out)


def _certify(args: argparse.Namespace):
    overrides = _overrides(args)
    overrides.update(N1=args.grid_n, N2=args.grid_n, h=None)
    cfg = build_config(args.config, overrides)
    problem = build_problem(cfg)
    if cfg.problem == "parabolic":
        report = certify(problem.scheme, problem.A, steps=args.steps)
    else:
        report = certify_hyperbolic(
            cfg.scheme, problem.A, cfg.sigma, cfg.tau, problem.decomposition, args.steps
        )
    _emit(report.to_frame(), args.out)


_commands = {"run": _run, "study": _study, "certify": _certify}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the ``pysubstructuring`` command.

    Returns:
        int: 0 on success, 2 for configuration errors, 3 for numerical failures.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        _commands[args.command](args)
    except InvalidArgumentError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("Numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
