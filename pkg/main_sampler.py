"""
Main script for the multilevel DILI sampler.

Generates synthetic data, builds the hierarchical likelihood-informed
subspace, runs one of the sampler modes and aggregates run reports.

Usage:
    python main_sampler.py generate-data [--config config.yml] [--force]
    python main_sampler.py build-lis [--config config.yml] [--workers 4]
    python main_sampler.py run [--config config.yml] [--mode MLDILI] [--eps 0.01] [--seed 1]
    python main_sampler.py report [run_dir/multilevel_report.json ...] [--lis-summary lis_summary.json]
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from data_class.RunConfig import RunConfig
from lis_file import read_lis_file, write_lis_file
from LisBuilder import LisBuilder
from load_default_sampler_settings import load_default_sampler_settings, merge_settings
from model_setup.ForwardModelFactory import ForwardModelFactory
from model_setup.observations import generate_data, read_data_file, write_data_file
from MultilevelSampler import DILI_MODES, MultilevelSampler
from sampler_errors import ConfigError, DimensionError, NumericalError, UsageError
from SamplerReportGenerator import SamplerReportGenerator

SAMPLER_CONFIG_DEFAULT_FILENAME = "sampler_config_default.yml"

EXIT_OK = 0
EXIT_INTERRUPTED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def load_custom_settings(config_file: str) -> Dict[str, Any]:
    """Load a YAML (or JSON) settings file from the usual search locations."""
    search_paths = [
        Path(config_file),  # As given (absolute or relative path)
        Path(__file__).parent / "sampler_configs" / config_file,
        Path(__file__).parent / config_file,
        Path.cwd() / config_file,
    ]
    for path in search_paths:
        if path.exists():
            with open(path, "r") as f:
                return yaml.safe_load(f) or {}
    raise UsageError(f"Config file '{config_file}' not found in search paths: {search_paths}")


def setup_logging(settings, verbose: bool = False):
    """Setup logging configuration."""
    level = logging.DEBUG if verbose else logging.INFO
    output_dir = "sampler_runs"
    try:
        output_dir = settings.get("output", {}).get("output_dir", output_dir)
    except Exception:
        pass

    Path(output_dir).mkdir(parents=True, exist_ok=True)
    log_file_path = Path(output_dir) / "sampler.log"
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(log_file_path),
        ],
    )


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Multilevel MCMC with hierarchical likelihood-informed subspaces"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Settings file merged over the defaults")
    common.add_argument("--workers", type=int, help="Number of parallel workers")
    common.add_argument("--seed", type=int, help="Seed of the sampler run")
    common.add_argument("--output-dir", type=str, help="Output directory for reports")
    common.add_argument("--force", action="store_true", help="Overwrite existing output files")
    common.add_argument("--verbose", action="store_true", help="Enable verbose logging")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("generate-data", parents=[common], help="Generate synthetic observations")
    commands.add_parser("build-lis", parents=[common], help="Build Laplace references and the LIS")
    run_parser = commands.add_parser("run", parents=[common], help="Run a sampler mode")
    run_parser.add_argument(
        "--mode", type=str, help="pCN, DILI, MLpCN, MLDILI or MLmixed (default: from config)"
    )
    run_parser.add_argument("--eps", type=float, help="Target root-mean-square error")
    report_parser = commands.add_parser("report", parents=[common], help="Aggregate run reports")
    report_parser.add_argument("reports", nargs="*", help="multilevel_report.json files")
    report_parser.add_argument("--lis-summary", type=str, help="lis_summary.json with build costs")
    return parser.parse_args(argv)


def build_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults, then the --config file, then command-line flags."""
    settings = load_default_sampler_settings(config_file=SAMPLER_CONFIG_DEFAULT_FILENAME)
    if args.config:
        settings = merge_settings(settings, load_custom_settings(args.config))

    # Overwrite the settings by args if provided
    if getattr(args, "mode", None) is not None:
        settings["run"]["mode"] = args.mode
    if getattr(args, "eps", None) is not None:
        settings["run"]["epsilon"] = args.eps
    if args.seed is not None:
        settings["run"]["seed"] = args.seed
    if args.workers is not None:
        settings["run"]["workers"] = args.workers
    if args.output_dir is not None:
        settings["output"]["output_dir"] = args.output_dir
    return settings


def _models(config: RunConfig, with_data: bool = True):
    hierarchy = config.build_hierarchy()
    observations = read_data_file(config.data.data_file)[0] if with_data else None
    return hierarchy, ForwardModelFactory.create_models(config, hierarchy, observations)


def cmd_generate_data(config: RunConfig, force: bool = False):
    """Draw a truth on the finest level, observe it with noise and write the data file."""
    _, models = _models(config, with_data=False)
    observations, truth = generate_data(
        models[-1], config.data.truth_seed, config.data.noise_seed, config.data.snr
    )
    return write_data_file(observations, truth, config.data.data_file, force=force)


def cmd_build_lis(config: RunConfig, settings: Dict[str, Any], force: bool = False):
    """Laplace references and the hierarchical LIS on every level, with the dimension summary."""
    lis_path = Path(config.lis.lis_file)
    if lis_path.exists() and not force:
        raise UsageError(f"{lis_path} already exists; pass --force to overwrite")
    hierarchy, models = _models(config)
    builder = LisBuilder(models, hierarchy, config.laplace, config.lis, workers=config.run.workers)
    result = builder.build()
    write_lis_file(result, lis_path)
    summary = SamplerReportGenerator(settings).generate_lis_summary(result, lis_path.parent)
    return lis_path, summary


def cmd_run(config: RunConfig, settings: Dict[str, Any]):
    """Run the configured mode and write the run directory."""
    _, models = _models(config)
    lis_path = Path(config.lis.lis_file)
    lis_result = None
    if lis_path.exists():
        lis_result = read_lis_file(lis_path)
    elif config.run.mode in DILI_MODES:
        raise UsageError(f"Mode {config.run.mode} needs {lis_path}; run build-lis first")

    sampler = MultilevelSampler(config, models, lis_result)
    report = sampler.run()
    paths = SamplerReportGenerator(settings).generate_all_reports(
        report, sampler.records, sampler.autocorrelations
    )
    return report, paths


def cmd_report(settings: Dict[str, Any], report_files: List[str], lis_summary: Optional[str] = None):
    """Aggregate run reports into cost_vs_tolerance.csv."""
    if not report_files:
        output_dir = Path(settings["output"]["output_dir"])
        report_files = sorted(str(p) for p in output_dir.glob("run_*/multilevel_report.json"))
    if not report_files:
        raise UsageError("No reports to aggregate")
    return SamplerReportGenerator(settings).generate_cost_vs_tolerance(report_files, lis_summary)


def main(argv: Optional[List[str]] = None) -> int:
    """Main sampler execution function; returns the exit code."""
    args = parse_args(argv)
    logger = logging.getLogger(__name__)

    try:
        settings = build_settings(args)
        setup_logging(settings, args.verbose)
        config = RunConfig.from_settings(settings)

        if args.command == "generate-data":
            data_path, truth_path = cmd_generate_data(config, force=args.force)
            logger.info(f"Data written to {data_path} (truth in {truth_path})")
        elif args.command == "build-lis":
            lis_path, summary = cmd_build_lis(config, settings, force=args.force)
            logger.info(f"LIS written to {lis_path}; summary in {summary['summary']}")
        elif args.command == "run":
            report, _ = cmd_run(config, settings)
            if not report.complete:
                logger.error("The run stopped before the finest level; the report is partial")
                return EXIT_NUMERICAL
        elif args.command == "report":
            path = cmd_report(settings, args.reports, args.lis_summary)
            logger.info(f"Cost table written to {path}")
        return EXIT_OK

    except (ConfigError, UsageError, DimensionError, FileNotFoundError) as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
