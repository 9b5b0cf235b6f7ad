"""
Noise-Tailored QITE Toolkit - Main Entry Point
"""

import argparse
import logging
import os
import sys
from dotenv import load_dotenv

from src.experiment_runner import ExperimentRunner

# Load environment variables
load_dotenv()

# Setup logging
log_level = os.getenv('LOG_LEVEL', 'INFO')
logging.basicConfig(
    level=getattr(logging, log_level.upper()),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler(os.getenv('QITE_LOG_FILE', 'qite_toolkit.log')),
        logging.StreamHandler(sys.stdout)
    ]
)

logger = logging.getLogger(__name__)

COMMANDS = {
    'vshape': ('run_vshape', "Measured vs ideal expectations for a grid of randomization counts"),
    'depth-sweep': ('run_depth_sweep', "Fidelity, Bloch length and angle error versus CZ depth"),
    'cb': ('run_cb', "Cycle benchmarking of the configured hard cycles"),
    'qite': ('run_qite', "QITE trajectories for the configured experiment rows"),
    'phase-diagram': ('run_phase_diagram', "Ground/excited energies and magnetization versus field"),
    'variance': ('run_variance_study', "Variance of the randomized-compiling estimator over (M, N)"),
}


def build_parser() -> argparse.ArgumentParser:
    """CLI with one subcommand per experiment and shared global flags"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=os.getenv('QITE_CONFIG', 'config.json'),
                        help="Config JSON, or a run manifest to replay")
    common.add_argument('--seed', type=int, default=None, help="Master seed (overrides config)")
    common.add_argument('--out', default=os.getenv('QITE_OUTPUT_DIR'), help="Output directory")
    common.add_argument('--preset', default=None, help="Noise preset applied to every experiment")

    parser = argparse.ArgumentParser(description="Noise-tailored QITE experiments on a density-matrix simulator")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        if name == 'qite':
            sub.add_argument('--experiment', action='append', dest='experiments',
                             help="Experiment key from qite.experiments (repeatable)")
    return parser


def main(argv=None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    runner = ExperimentRunner(args.config, seed=args.seed, output_dir=args.out, preset=args.preset)
    method = getattr(runner, COMMANDS[args.command][0])

    logger.info(f"Running {args.command} (outputs in {runner.output_dir})...")
    try:
        if args.command == 'qite':
            method(args.experiments)
        else:
            method()
    except (ValueError, RuntimeError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("Stopping...")
        return 130
    logger.info(f"✅ {args.command} complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
