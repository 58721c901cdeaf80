"""
Simulator command line

Run single cases, compare all three cases on a shared world, audit the
channel model against Monte Carlo, and summarize comparison logs.

Author: Edgar McOchieng
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import argparse
import json
from pathlib import Path

from rich.console import Console
from rich.table import Table

from config import Config, ConfigValidationError, log_exception, setup_logger
from src.errors import SimulationError
from src.experiment import DEFAULTS, FIELD_DOCS, ExperimentConfig, parse_config
from src.orchestrator import ExperimentCase, prepare_experiment, run_experiment
from src.run_log import COMPARE_NAME, write_compare_csv, write_run_log
from src.validation import (
    DEFAULT_DISTANCES,
    DEFAULT_SAMPLES,
    DEFAULT_TOLERANCE,
    DEFAULT_ZETAS,
    points_from_compare_csv,
    summarize_cases,
    validate_channel,
    write_channel_audit,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_AUDIT_FAILED = 2

console = Console()


def load_config(args) -> ExperimentConfig:
    """Config file (or defaults) with the CLI overrides applied"""
    config = parse_config(args.config) if args.config else ExperimentConfig(output_dir=Config.OUTPUT_DIR)
    workers = getattr(args, "workers", None)
    if workers is None and Config.MAX_WORKERS > 1:
        workers = Config.MAX_WORKERS
    return config.with_overrides(
        seed=getattr(args, "seed", None),
        output_dir=getattr(args, "out", None),
        workers=workers,
    )


def cmd_run(args) -> int:
    """Run one case"""
    config = load_config(args)
    case = ExperimentCase.parse(args.case)
    print(f"\n🚀 Running {case.value} (seed {config.seed}, {config.rounds} rounds)")

    world = prepare_experiment(config)
    records = run_experiment(config, case, world=world, show_progress=not args.no_progress)
    paths = write_run_log(records, Path(config.output_dir) / case.value, config=config, case=case,
                          topology=world.topology)

    final = records[-1]
    print(f"✅ Final loss {final.loss:.4f}, accuracy {final.accuracy:.4f}")
    print(f"   CSV:   {paths.csv}")
    print(f"   JSONL: {paths.jsonl}")
    return EXIT_OK


def cmd_compare_cases(args) -> int:
    """Run the selected cases on one shared world and merge their logs"""
    config = load_config(args)
    cases = [ExperimentCase.parse(label) for label in args.cases]
    print(f"\n🚀 Comparing {', '.join(c.value for c in cases)} (seed {config.seed})")

    world = prepare_experiment(config)
    records_by_case = {}
    for case in cases:
        records_by_case[case] = run_experiment(config, case, world=world, show_progress=not args.no_progress)
        write_run_log(records_by_case[case], Path(config.output_dir) / case.value, config=config, case=case,
                      topology=world.topology)

    compare_path = write_compare_csv(records_by_case, Path(config.output_dir) / COMPARE_NAME)
    print(f"✅ Wrote {compare_path}")
    print_comparison(summarize_cases(records_by_case))
    return EXIT_OK


def cmd_validate_channel(args) -> int:
    """Analytic versus Monte Carlo success probability; exit 2 when out of tolerance"""
    config = load_config(args)
    params = config.channel_params()
    print(f"\n📡 Auditing the channel model ({args.samples} samples per cell)")

    audit = validate_channel(
        params,
        zetas=args.zetas,
        distances=args.distances,
        n_samples=args.samples,
        seed=config.seed,
        tolerance=args.tolerance,
        fault_scale=args.fault_scale,
        show_progress=not args.no_progress,
    )
    out = Path(args.out_csv) if args.out_csv else Path(config.output_dir) / "channel_audit.csv"
    write_channel_audit(audit, out)

    table = Table(title="Channel audit")
    for column in ("zeta [dB]", "r [m]", "S analytic", "S Monte Carlo", "|error|", "ok"):
        table.add_column(column, justify="right")
    for cell in audit.cells:
        table.add_row(f"{cell.zeta_db:g}", f"{cell.r:g}", f"{cell.s_analytic:.5f}", f"{cell.s_montecarlo:.5f}",
                      f"{cell.abs_err:.5f}", "✅" if cell.within_tolerance else "❌")
    console.print(table)

    if not audit.passed:
        print(f"❌ Max error {audit.max_error:.5f} exceeds tolerance {audit.tolerance} ({out})")
        return EXIT_AUDIT_FAILED
    print(f"✅ Max error {audit.max_error:.5f} within tolerance {audit.tolerance} ({out})")
    return EXIT_OK


def cmd_print_defaults(args) -> int:
    """Print a complete config file holding every default"""
    if args.settings:
        Config.print_config()
        return EXIT_OK
    if args.describe:
        table = Table(title="Experiment config keys")
        table.add_column("key")
        table.add_column("default", justify="right")
        table.add_column("description")
        for key, value in DEFAULTS.items():
            table.add_row(key, json.dumps(value), FIELD_DOCS[key])
        console.print(table)
    else:
        print(json.dumps(DEFAULTS, indent=2))
    return EXIT_OK


def cmd_summarize(args) -> int:
    """Summarize a compare CSV"""
    path = Path(args.path)
    if path.is_dir():
        path = path / COMPARE_NAME
    print_comparison(summarize_cases(points_from_compare_csv(path)))
    return EXIT_OK


def print_comparison(summary) -> None:
    table = Table(title="Case comparison")
    table.add_column("case")
    table.add_column("final loss", justify="right")
    table.add_column("final accuracy", justify="right")
    table.add_column("rounds to target", justify="right")
    for label, loss in summary.final_loss.items():
        reach = summary.rounds_to_target.get(label)
        table.add_row(label, f"{loss:.4f}", f"{summary.final_accuracy[label]:.4f}",
                      "-" if reach is None else str(reach))
    console.print(table)

    def verdict(value):
        return "n/a" if value is None else ("✅" if value else "❌")

    print(f"Target loss (final loss of C): {summary.target_loss if summary.target_loss is not None else 'n/a'}")
    print(f"Switch to trusted-only in A at round: {summary.switch_round if summary.switch_round is not None else 'never'}")
    print(f"A final loss <= C: {verdict(summary.risk_aware_beats_conservative)}")
    print(f"A final loss <= B: {verdict(summary.risk_aware_beats_agnostic)}")
    print(f"A reaches target faster than C: {verdict(summary.risk_aware_faster)}")


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Risk-aware wireless federated learning simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Print the default config and run Case A with it
  rafl print-defaults > my_config.json
  rafl run --case A --config my_config.json --seed 7 --out runs/seed7

  # Run all three cases on one world and merge the logs
  rafl compare-cases --config configs/defaults.json --out runs/compare

  # Summarize a comparison
  rafl summarize runs/compare

  # Audit the channel model against Monte Carlo
  rafl validate-channel --config configs/defaults.json --samples 100000
        """
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    parser.add_argument("--no-progress", action="store_true", help="Disable progress bars")

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    def experiment_options(sub, with_workers=True):
        sub.add_argument("--config", help="Experiment JSON file (defaults when omitted)")
        sub.add_argument("--seed", type=int, help="Override the root seed")
        sub.add_argument("--out", help="Override the output directory")
        if with_workers:
            sub.add_argument("--workers", type=int, help="Override intra-round parallelism")

    run_parser = subparsers.add_parser("run", help="Run one case")
    run_parser.add_argument("--case", required=True, help="A, B or C")
    experiment_options(run_parser)

    compare_parser = subparsers.add_parser("compare-cases", help="Run several cases on a shared world")
    compare_parser.add_argument("--cases", nargs="+", default=["A", "B", "C"], help="Cases to run (default: A B C)")
    experiment_options(compare_parser)

    audit_parser = subparsers.add_parser("validate-channel", help="Audit the success probability against Monte Carlo")
    experiment_options(audit_parser, with_workers=False)
    audit_parser.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                              help=f"Monte Carlo draws per cell (default: {DEFAULT_SAMPLES})")
    audit_parser.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                              help=f"Largest accepted absolute error (default: {DEFAULT_TOLERANCE})")
    audit_parser.add_argument("--zetas", type=_float_list, default=list(DEFAULT_ZETAS),
                              help="Comma-separated linear thresholds")
    audit_parser.add_argument("--distances", type=_float_list, default=list(DEFAULT_DISTANCES),
                              help="Comma-separated distances in meters")
    audit_parser.add_argument("--fault-scale", type=float, default=1.0,
                              help="Multiply the analytic column (self-test of the audit)")
    audit_parser.add_argument("--out-csv", help="Audit CSV path (default: <output_dir>/channel_audit.csv)")

    defaults_parser = subparsers.add_parser("print-defaults", help="Print the default experiment config")
    defaults_parser.add_argument("--describe", action="store_true", help="Show a table with descriptions")
    defaults_parser.add_argument("--settings", action="store_true", help="Show the runtime settings read from the environment")

    summarize_parser = subparsers.add_parser("summarize", help="Summarize a compare CSV or run directory")
    summarize_parser.add_argument("path", help="compare.csv or the directory holding it")

    return parser


COMMANDS = {
    "run": cmd_run,
    "compare-cases": cmd_compare_cases,
    "validate-channel": cmd_validate_channel,
    "print-defaults": cmd_print_defaults,
    "summarize": cmd_summarize,
}


def main(argv=None):
    """Main function"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_ERROR

    if args.log_level:
        setup_logger(log_level=args.log_level.upper(), log_file=Config.LOG_FILE,
                     log_to_console=Config.LOG_TO_CONSOLE, log_format=Config.LOG_FORMAT)

    try:
        Config.validate()
        return COMMANDS[args.command](args)
    except ConfigValidationError as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_ERROR
    except SimulationError as e:
        log_exception(e, f"{args.command} failed")
        print(f"❌ Error: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
