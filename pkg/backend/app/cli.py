"""
Command-line entry point.

    python -m app mac --structure equal:p=2000,rho=0.5
    python -m app calibrate --structure ar:p=2000,r=0.9 --out calib/
    python -m app estimate --z z.txt --structure ar:p=2000,r=0.9
    python -m app reproduce --table 2 --scale desk --seed 7 --out results/

Data goes to stdout or files; logs and errors go to stderr.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app import __version__
from app.config import Config
from app.models.calibration import NullReplicates
from app.models.estimate import NullDistribution
from app.services.calibration import calibration_service
from app.services.dependence import dependence_service
from app.services.estimators import estimator_service
from app.services.harness import FIGURE_TARGETS, TABLE_TARGETS, harness_service
from app.utils.errors import SpecSyntaxError
from app.utils.logger import logger
from app.utils.matrix_io import read_matrix_csv, read_response

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad combination of flags or unusable input files."""


def _float_list(text: str) -> List[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list: '{text}'")


def _require_file(path: Optional[str], flag: str) -> None:
    if path is not None and not Path(path).is_file():
        raise UsageError(f"{flag}: file not found: {path}")


def _null_source_count(args) -> int:
    sources = [args.sigma, args.structure, args.null_reps, args.data]
    return sum(source is not None for source in sources)


def _check_data_flags(args) -> None:
    if (args.data is None) != (args.response is None):
        raise UsageError("--data and --response must be given together")
    _require_file(args.data, "--data")
    _require_file(args.response, "--response")


def _null_replicates(args, data=None) -> NullReplicates:
    """Joint-null replicates from whichever single source the flags name."""
    if args.null_reps is not None:
        _require_file(args.null_reps, "--null-reps")
        return calibration_service.load_null_replicates(args.null_reps)
    if args.sigma is not None or args.structure is not None:
        if args.sigma is not None:
            _require_file(args.sigma, "--sigma")
            sigma = dependence_service.load_correlation(args.sigma)
        else:
            sigma = dependence_service.build_from_text(args.structure)
        return calibration_service.simulate_null_replicates_parametric(sigma, args.reps, args.seed, args.threads)
    if data is not None:
        X, y = data
        return calibration_service.permutation_null_replicates(X, y, args.reps, args.seed, args.threads)
    raise UsageError("No null source: give one of --sigma, --structure, --null-reps or --data/--response")


def _load_data(args):
    _check_data_flags(args)
    if args.data is None:
        return None
    return read_matrix_csv(args.data), read_response(args.response)


def _emit_json(payload, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Wrote {path}")


def cmd_mac(args) -> int:
    if (args.sigma is None) == (args.structure is None):
        raise UsageError("Give exactly one of --sigma or --structure")
    if args.sigma is not None:
        _require_file(args.sigma, "--sigma")
        sigma = dependence_service.load_correlation(args.sigma)
    else:
        sigma = dependence_service.build_from_text(args.structure)
    print(f"{dependence_service.mac(sigma).value:#.6g}")
    return EXIT_OK


def cmd_structure(args) -> int:
    sigma = dependence_service.build_from_text(args.structure)
    dependence_service.save_correlation(sigma, args.out)
    logger.info(f"Wrote {sigma.label} (p={sigma.p}) to {args.out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if _null_source_count(args) != 1:
        raise UsageError("Give exactly one null source: --sigma, --structure, --null-reps or --data/--response")
    reps = _null_replicates(args, _load_data(args))
    if args.save_reps:
        calibration_service.save_null_replicates(reps, args.save_reps)

    sequences = calibration_service.calibrate(reps, args.theta, args.alpha, args.grid, args.threads)
    if args.out is None:
        _emit_json([seq.model_dump() for seq in sequences], None)
        return EXIT_OK

    out = Path(args.out)
    for seq in sequences:
        path = calibration_service.save_bounding_sequence(seq, out / f"c_theta{seq.theta:g}_{seq.grid}.json")
        logger.info(f"Wrote {path}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    if (args.z is None) == (args.data is None):
        raise UsageError("Give exactly one of --z or --data/--response")
    if (args.c_half is None) != (args.c_one is None):
        raise UsageError("--c-half and --c-one must be given together")
    inline_sources = sum(source is not None for source in (args.sigma, args.structure, args.null_reps))
    if args.c_half is not None and inline_sources:
        raise UsageError("Give either --c-half/--c-one or inline calibration flags, not both")
    if args.c_half is not None and args.discrete:
        raise UsageError("--discrete needs inline calibration; it cannot be combined with --c-half/--c-one")
    if inline_sources > 1:
        raise UsageError("Give at most one of --sigma, --structure or --null-reps")

    data = _load_data(args)
    if args.z is not None:
        _require_file(args.z, "--z")
        z = estimator_service.load_z(args.z, NullDistribution.parse(args.f0))
    else:
        X, y = data
        z = estimator_service.inverse_normal_transform(calibration_service.marginal_z_scores(X, y), NullDistribution())

    if args.c_half is not None:
        _require_file(args.c_half, "--c-half")
        _require_file(args.c_one, "--c-one")
        report = estimator_service.build_report(
            z,
            calibration_service.load_bounding_sequence(args.c_half),
            calibration_service.load_bounding_sequence(args.c_one),
            gw_alpha=args.gw_alpha,
            jc_gamma=args.jc_gamma,
            baselines=not args.no_baselines,
        )
    else:
        report = estimator_service.estimate_pipeline(
            z,
            _null_replicates(args, data),
            alpha=args.alpha,
            gw_alpha=args.gw_alpha,
            jc_gamma=args.jc_gamma,
            discrete=args.discrete,
            baselines=not args.no_baselines,
            threads=args.threads,
        )
    _emit_json(report.model_dump(), args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    target, number = ("table", args.table) if args.table is not None else ("figure", args.figure)
    if args.sigma is not None:
        _require_file(args.sigma, "--sigma")
    paths = harness_service.reproduce(target, number, args.out, args.scale, args.seed, args.threads, args.sigma)
    for path in paths.values():
        print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    _require_file(args.config, "--config")
    try:
        cfg = harness_service.load_config(args.config)
    except (ValidationError, json.JSONDecodeError, ValueError) as e:
        raise UsageError(f"Invalid experiment config {args.config}: {e}")

    out = Path(args.out)
    if args.kind == "table":
        paths = harness_service.emit_results(harness_service.run_table_experiment(cfg, args.threads), out)
        for path in paths.values():
            print(path)
        return EXIT_OK

    if args.kind == "coverage":
        rows = harness_service.run_coverage_experiment(cfg, args.threads)
    else:
        rows = harness_service.run_variance_check(
            cfg.structures, args.t_grid, cfg.calibration.R, cfg.seed, args.threads
        )
    print(harness_service.emit_rows(rows, out / f"{args.kind}.csv"))
    harness_service.write_manifest(out / "manifest.json", cfg.model_dump())
    return EXIT_OK


def _add_null_sources(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("null source")
    group.add_argument("--sigma", help="Correlation matrix CSV")
    group.add_argument("--structure", help="Structure spec, e.g. ar:p=2000,r=0.9")
    group.add_argument("--null-reps", dest="null_reps", help="CSV of null replicates (rows = replicates)")
    group.add_argument("--data", help="Data matrix CSV (n x p) for permutation calibration")
    group.add_argument("--response", help="Response vector file (n values)")
    group.add_argument("--reps", type=int, default=Config.DEFAULT_REPS, help="Number of null replicates R")
    group.add_argument("--seed", type=int, default=0, help="Seed of the null replicates")
    group.add_argument("--alpha", type=float, default=Config.DEFAULT_ALPHA, help="Control level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Estimate the proportion of signals among arbitrarily correlated test statistics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=Config.THREADS, help="Worker threads (output is unaffected)")
    commands = parser.add_subparsers(dest="command", required=True)

    mac = commands.add_parser("mac", help="Mean absolute correlation of a structure")
    mac.add_argument("--sigma", help="Correlation matrix CSV")
    mac.add_argument("--structure", help="Structure spec")
    mac.set_defaults(handler=cmd_mac)

    structure = commands.add_parser("structure", help="Write a generated correlation matrix as CSV")
    structure.add_argument("--structure", required=True, help="Structure spec")
    structure.add_argument("--out", required=True, help="Output CSV path")
    structure.set_defaults(handler=cmd_structure)

    calibrate = commands.add_parser("calibrate", help="Calibrate bounding sequences")
    _add_null_sources(calibrate)
    calibrate.add_argument("--theta", type=_float_list, default=[0.5, 1.0], help="Comma-separated exponents")
    calibrate.add_argument("--grid", choices=["observed", "integer"], default="observed")
    calibrate.add_argument("--save-reps", dest="save_reps", help="Also write the null replicates to this CSV")
    calibrate.add_argument("--out", help="Output directory (one JSON per theta); stdout when omitted")
    calibrate.set_defaults(handler=cmd_calibrate)

    estimate = commands.add_parser("estimate", help="Estimate the signal proportion")
    estimate.add_argument("--z", help="Statistics file, one value per line")
    estimate.add_argument("--f0", default="identity", help="Null distribution: identity, normal:mu=,sigma=, t:df=")
    estimate.add_argument("--c-half", dest="c_half", help="Bounding sequence JSON for theta = 0.5")
    estimate.add_argument("--c-one", dest="c_one", help="Bounding sequence JSON for theta = 1")
    _add_null_sources(estimate)
    estimate.add_argument(
        "--discrete", action="store_true", help="Also report the integer-grid estimates (inline calibration only)"
    )
    estimate.add_argument("--no-baselines", dest="no_baselines", action="store_true", help="Skip GW and JC")
    estimate.add_argument("--gw-alpha", dest="gw_alpha", type=float, default=Config.GW_ALPHA)
    estimate.add_argument("--jc-gamma", dest="jc_gamma", type=float, default=Config.JC_GAMMA)
    estimate.add_argument("--out", help="Report JSON path; stdout when omitted")
    estimate.set_defaults(handler=cmd_estimate)

    reproduce = commands.add_parser("reproduce", help="Rerun a published table or figure")
    target = reproduce.add_mutually_exclusive_group(required=True)
    target.add_argument("--table", choices=TABLE_TARGETS)
    target.add_argument("--figure", choices=FIGURE_TARGETS)
    reproduce.add_argument("--scale", choices=["desk", "full"], default="desk")
    reproduce.add_argument("--seed", type=int, default=0)
    reproduce.add_argument("--sigma", help="Correlation matrix CSV (figures 6 and 7)")
    reproduce.add_argument("--out", default="results", help="Output directory")
    reproduce.set_defaults(handler=cmd_reproduce)

    run = commands.add_parser("run", help="Run an experiment from a JSON or TOML config")
    run.add_argument("--config", required=True)
    run.add_argument("--kind", choices=["table", "coverage", "variance"], default="table")
    run.add_argument("--t-grid", dest="t_grid", type=_float_list, default=[1.0, 2.0, 3.0])
    run.add_argument("--out", default="results", help="Output directory")
    run.set_defaults(handler=cmd_run)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args)
    except (UsageError, SpecSyntaxError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
