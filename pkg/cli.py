#!/usr/bin/env python3
"""
Command-line interface for the md-shadow experiments.
"""

import argparse
import logging
import sys

from mdshadow.errors import ConfigError, InstabilityError
from mdshadow.experiments import load_config, run_experiment
from mdshadow.utils import print_summary
from shared.logger import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3

EXPERIMENT_HELP = {
    'exp1': 'Single-particle trajectories for a few canonical initial conditions',
    'exp2': 'Divergence of trajectories from a shared initial condition across step sizes',
    'exp3': 'Equilibrium histograms of path functionals per step size, with a Brownian reference',
    'exp4': 'Non-equilibrium histograms after a velocity kick',
    'exp5': 'Weak-shadowing coupling between numerical and reference path ensembles',
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        help='Key-value YAML configuration file (default: preset values only)'
    )
    common.add_argument(
        '--seed',
        type=int,
        help='Master seed, overrides the configuration'
    )
    common.add_argument(
        '--out',
        help='Output directory, overrides the configuration'
    )
    common.add_argument(
        '--preset',
        choices=['desk', 'paper'],
        default='paper',
        help='Named default set (default: paper)'
    )
    common.add_argument(
        '--workers',
        type=int,
        help='Worker processes for ensemble simulation'
    )
    common.add_argument(
        '--log-level',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        default='INFO',
        help='Set logging level'
    )
    common.add_argument(
        '--log-file',
        help='Save logs to file'
    )

    parser = argparse.ArgumentParser(
        description='Run molecular-dynamics accuracy experiments and write plot-ready outputs',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  md-shadow exp3 --preset desk --out results/exp3        # Desk-scale histograms
  md-shadow exp2 --config my_exp2.yaml --seed 7          # Custom divergence run
  md-shadow exp5 --preset desk --workers 4               # Shadow coupling in parallel
        """
    )
    subparsers = parser.add_subparsers(dest='experiment', required=True)
    for name, help_text in EXPERIMENT_HELP.items():
        subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    """Main CLI entrypoint."""
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level, log_file=args.log_file)

    overrides = {
        'experiment': args.experiment,
        'seed': args.seed,
        'output_dir': args.out,
        'workers': args.workers,
    }

    try:
        config = load_config(args.config, preset=args.preset, overrides=overrides)
        print(f"Running {config.experiment} ({config.preset} preset, seed {config.seed})")
        result = run_experiment(config)
        print_summary(result)
        print(f"\n✅ Success: outputs and manifest in {result.output_dir}")
        return EXIT_OK
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ Error: {e}")
        return EXIT_CONFIG
    except InstabilityError as e:
        logger.error(f"Numerical instability (dt={e.dt}, step={e.step}): {e}")
        print(f"❌ Error: {e}")
        return EXIT_INSTABILITY
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        print(f"❌ Error: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
