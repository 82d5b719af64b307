import argparse
import io
import logging
import os
import sys
import time
from typing import List, Optional

from config.experiment_config import load_config
from core.errors import ErrorHandler, InputError, ToolkitError
from core.experiment_orchestrator import COMMANDS, ExperimentOrchestrator, ExperimentReport
from core.scenario_factory import ScenarioFactory
from tools.artifact_io import read_json, report_diff

# Fix Windows console encoding
if sys.platform.startswith('win'):
    os.environ['PYTHONIOENCODING'] = 'utf-8'
    try:
        sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8', errors='replace')
        sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8', errors='replace')
    except (AttributeError, ValueError):
        pass

EXIT_OK, EXIT_VERDICT = 0, 1


def display_banner(command: str, scenario: str):
    print("=" * 80)
    print("📐 DYADIC CARLESON TOOLKIT")
    print("=" * 80)
    print(f"🧪 Experiment: {command}")
    print(f"🗺️  Scenario:   {scenario}")
    print("=" * 80)


def show_scenarios():
    print("\n🎯 BUILT-IN SCENARIOS")
    print("=" * 60)
    for category, names in ScenarioFactory().list_available_scenarios().items():
        print(f"\n📦 {category}:")
        for i, name in enumerate(names, 1):
            print(f"   {i}. {name}")
    print()


def show_report(report: ExperimentReport, out_dir: str, elapsed: float):
    print(f"\n📊 RESULTS: {report.command}")
    print("=" * 60)
    for key, value in sorted(report.scalars.items()):
        shown = f"{value:.6g}" if isinstance(value, float) else value
        print(f"   {key}: {shown}")
    if report.verdicts:
        print("\n🔍 Verdicts:")
        for key, ok in sorted(report.verdicts.items()):
            print(f"   {'✅' if ok else '❌'} {key}")
    print("\n" + "=" * 60)
    print(f"{'✅ ALL VERDICTS PASSED' if report.passed else '❌ VERDICT FAILURE'}")
    print(f"📁 Artifacts: {os.path.join(out_dir, report.command)}")
    print(f"⏱️  Elapsed: {elapsed:.1f}s")
    print("=" * 60)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Dyadic Carleson-measure experiments on sets in the plane")
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="experiment to run")
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    parser.add_argument("--workers", type=int, help="worker threads")
    parser.add_argument("--depth", type=int, help="finest dyadic generation")
    parser.add_argument("--scenario", help="built-in scenario, e.g. flat, graph(0.25), four-corners(6)")
    parser.add_argument("--list-scenarios", action="store_true", help="list the built-in scenarios and exit")
    parser.add_argument("--diff", nargs=2, metavar=("OLD", "NEW"), help="compare two report.json files")
    parser.add_argument("--rtol", type=float, default=0.0, help="relative tolerance for --diff")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    return parser


def run_diff(old: str, new: str, rtol: float) -> int:
    diff = report_diff(read_json(old), read_json(new), rtol)
    print(f"\n🔁 REPORT DIFF ({'same' if diff['same_config'] else 'different'} config)")
    print("=" * 60)
    for change in diff["changed"]:
        print(f"   {change['key']}: {change['old']} -> {change['new']}")
    if diff["identical"]:
        print("   ✅ identical")
    for key in diff["regressions"]:
        print(f"   ❌ regression: {key}")
    return EXIT_VERDICT if diff["regressions"] else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.list_scenarios:
        show_scenarios()
        return EXIT_OK

    handler = ErrorHandler(args.out or "out")
    try:
        if args.diff:
            return run_diff(args.diff[0], args.diff[1], args.rtol)
        if args.command is None:
            raise InputError("a subcommand is required (or --list-scenarios / --diff)")
        config = load_config(args.config).with_overrides(out=args.out, seed=args.seed, workers=args.workers,
                                                         depth=args.depth, scenario=args.scenario)
        orchestrator = ExperimentOrchestrator(config)
        handler = orchestrator.error_handler
        display_banner(args.command, config.scenario)
        start = time.perf_counter()
        report = orchestrator.run(args.command)
        show_report(report, config.out, time.perf_counter() - start)
        if args.verbose:
            orchestrator.stats.print_summary()
        return EXIT_OK if report.passed else EXIT_VERDICT
    except ToolkitError as e:
        handler.log_error(e, args.command or "cli")
        print(f"\n❌ {type(e).__name__}: {e}")
        print(f"💡 {handler.get_recovery_suggestion(type(e).__name__)}")
        return handler.exit_status(e)


if __name__ == "__main__":
    sys.exit(main())
