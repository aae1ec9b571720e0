"""Command-line entry point: spectrum | optimize | sweep | factor | verify | replay.

Exit codes: 0 success, 1 usage or instance error, 2 numerical failure,
3 factorization failure.
"""
import argparse
import json
import logging
import sys
from typing import Callable, List, Optional

from pydantic import ValidationError

from annealing import __version__
from annealing.exceptions import AnnealingError, InstanceError, ReadoutError, ScheduleError
from backend.config import configure_logging, settings
from backend.models import ExperimentConfig
from backend.services.experiment_service import experiment_service

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_FACTORIZATION = 0, 1, 2, 3


class CliArgumentParser(argparse.ArgumentParser):
    """Argument errors are usage errors: exit code 1 instead of argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _method_list(text: str) -> List[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in ("crab", "linear", "cd")]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from crab, linear, cd")
    return methods


def _add_common(p: argparse.ArgumentParser, positional_instance: bool = False):
    if positional_instance:
        p.add_argument("instance", help="built-in ω, any odd ω >= 9, or an instance JSON file")
    else:
        p.add_argument("--instance", required=True,
                       help="built-in ω, any odd ω >= 9, or an instance JSON file")
    p.add_argument("--g", type=float, default=settings.field_strength, help="transverse field strength")
    p.add_argument("--steps", type=int, default=settings.evolution_steps, help="integration steps")
    p.add_argument("--unweighted", action="store_true", help="use unit equation weights for built-ins")
    p.add_argument("--output", default=None, help="output file (default: results_dir)")
    p.add_argument("--log-level", default=settings.log_level)


def _add_optimizer(p: argparse.ArgumentParser):
    p.add_argument("--n-c", type=int, default=settings.n_c, help="number of CRAB basis modes")
    p.add_argument("--restarts", type=int, default=settings.restarts)
    p.add_argument("--max-iterations", type=int, default=settings.max_iterations)
    p.add_argument("--gamma", type=float, default=0.0, help="dephasing rate per qubit")
    p.add_argument("--noise-strategy", choices=["optimize", "transfer"], default="optimize")
    p.add_argument("--cost", dest="cost_kind", choices=["energy", "infidelity"], default="energy")
    p.add_argument("--independent-cos", action="store_true",
                   help="draw separate frequency offsets for the cosine modes")
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--workers", type=int, default=settings.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(
        prog="crabfactor",
        description="Adiabatic factorization with CRAB-optimized annealing schedules",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="gap curves, Δ_min and T_QSL")
    _add_common(p)
    p.add_argument("--points", dest="n_points", type=int, default=settings.spectrum_points)

    p = sub.add_parser("optimize", help="CRAB optimization at fixed T")
    _add_common(p)
    _add_optimizer(p)
    p.add_argument("-T", "--T", dest="T", type=float, required=True, help="total evolution time")

    p = sub.add_parser("sweep", help="infidelity versus T")
    _add_common(p)
    _add_optimizer(p)
    p.add_argument("--method", dest="methods", type=_method_list, default=["crab"],
                   help="comma-separated subset of crab,linear,cd")
    p.add_argument("--t", dest="T_list", type=_float_list, default=None,
                   help="comma-separated T values (default: multiples of T_QSL)")

    p = sub.add_parser("factor", help="anneal and read out a·b = ω")
    _add_common(p, positional_instance=True)
    _add_optimizer(p)
    p.add_argument("-T", "--T", dest="T", type=float, required=True)

    p = sub.add_parser("verify", help="brute-force instance report")
    _add_common(p, positional_instance=True)

    p = sub.add_parser("replay", help="re-run the best schedule of an optimize record")
    p.add_argument("record", help="result JSON written by optimize")
    p.add_argument("--gamma", type=float, default=None, help="dephasing rate (default: recorded)")
    p.add_argument("--steps", type=int, default=None, help="integration steps (default: recorded)")
    p.add_argument("--log-level", default=settings.log_level)
    return parser


_CONFIG_KEYS = set(ExperimentConfig.model_fields)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS and v is not None}
    values["weighted"] = not args.unweighted
    return ExperimentConfig(**values)


def cmd_spectrum(cfg: ExperimentConfig) -> int:
    summary, _ = experiment_service.spectrum(cfg)
    print(f"Δ_min = {summary.delta_min:.4f} at s = {summary.s_at_min:.4f}")
    print(f"T_QSL = {summary.t_qsl:.4f}")
    if summary.ground_degeneracy > 1:
        print(f"(terminal ground space is {summary.ground_degeneracy}-fold degenerate)")
    print(f"Gap table written to {summary.csv_path}")
    return EXIT_OK


def cmd_optimize(cfg: ExperimentConfig) -> int:
    record = experiment_service.optimize(cfg)
    res = record.result
    print(f"T = {cfg.T:g}: best infidelity {res['best_infidelity']:.3e} "
          f"(mean {res['infidelity_mean']:.3e} ± {res['infidelity_std']:.3e} over {cfg.restarts} restarts)")
    if res.get("readout"):
        print(f"Readout: {record.instance.omega} = {res['readout']['a']} × {res['readout']['b']}")
    print(f"Master seed {record.master_seed}; results in {record.files[-1]}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    record = experiment_service.sweep(cfg)
    print(f"{'method':<8}{'T':>10}{'mean':>14}{'std':>14}{'best':>14}")
    for row in record.result["rows"]:
        print(f"{row['method']:<8}{row['T']:>10.4g}{row['infidelity_mean']:>14.4e}"
              f"{row['infidelity_std']:>14.4e}{row['infidelity_best']:>14.4e}")
    if record.result.get("threshold_time") is not None:
        print(f"Empirical threshold T_c = {record.result['threshold_time']:g}")
    print(f"Results in {record.files[-1]}")
    return EXIT_OK


def cmd_factor(cfg: ExperimentConfig) -> int:
    result = experiment_service.factor(cfg)
    print(result.equation)
    logger.info("Readout path: %s, ground-space infidelity %.3e", result.readout, result.infidelity)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    report = experiment_service.verify(cfg)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    result = experiment_service.replay(args.record, gamma=args.gamma, steps=args.steps)
    recorded = result.recorded_infidelity
    print(f"T = {result.T:g}, gamma = {result.gamma:g}, steps = {result.steps}: "
          f"infidelity {result.infidelity:.3e}"
          + (f" (recorded {recorded:.3e})" if recorded is not None else ""))
    if result.readout:
        print(f"Readout: {result.readout['a']} × {result.readout['b']}")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "factor": cmd_factor,
    "verify": cmd_verify,
}


def _guarded(run: Callable[[], int]) -> int:
    """Map library exceptions to exit codes."""
    try:
        return run()
    except ValidationError as e:
        print(f"error: invalid configuration\n{e}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, ScheduleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ReadoutError as e:
        print(f"factorization failed: {e}", file=sys.stderr)
        return EXIT_FACTORIZATION
    except AnnealingError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    configure_logging(args.log_level)
    if args.command == "replay":
        return _guarded(lambda: cmd_replay(args))
    return _guarded(lambda: COMMANDS[args.command](config_from_args(args)))


if __name__ == "__main__":
    sys.exit(main())
