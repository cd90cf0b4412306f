import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from data.prediction_data import FORMATS, PredictionDataManager
from data.synthetic import SyntheticConfig, synthesize
from models.belief import KERNELS, kl_matrix, point_to_distribution, smooth_distribution
from models.data_processor import RoundProcessor
from models.evaluation import MAE_MODES, EvaluationReport, ModelEvaluator, build_report
from models.update_models import MARGINAL_SOURCES, SI_CONDITIONING, UpdateError, UpdateModelSuite, parse_model_spec
from utils.config import DEFAULTS, ConfigError, RunConfig
from utils.visualization import VisualizationUtils

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _sibling(path, suffix):
    """report.csv -> report<suffix>"""
    path = Path(path)
    return path.with_name(path.stem + suffix)


def load_rounds(config):
    if not Path(config.input).is_file():
        raise ConfigError(f"input file not found: {config.input}")
    manager = PredictionDataManager(bins=config.bins, padding_fraction=config.padding)
    return manager.ingest(config.input, config.format).rounds


def build_suite(config):
    names = None if config.models == ['all'] else config.models
    try:
        return UpdateModelSuite(names, smoothing=config.smoothing, si_conditioning=config.si_mode,
                                marginal_source=config.marginal)
    except UpdateError as e:
        raise ConfigError(str(e)) from e


def write_report(report, output, plot_json=None):
    """Delimited table, full-precision lines and the per-round figure series"""
    report.to_delimited(output)
    report.to_lines(_sibling(output, '.jsonl'))
    series = report.figure_series()
    series.to_csv(_sibling(output, '_figure.csv'), index=False, lineterminator='\n')

    if plot_json:
        viz = VisualizationUtils()
        viz.figure_to_json(viz.create_mae_comparison_chart(series, report.primary), plot_json)
    logger.info("Wrote report for %d rounds to %s", len(report.rounds), output)


def cmd_compare(config):
    # Resolve models first so a bad list writes nothing
    suite = build_suite(config)
    rounds = load_rounds(config)

    processor = RoundProcessor(bins=config.bins, padding_fraction=config.padding,
                               kernel=config.kernel, bandwidth=config.bandwidth)
    evaluator = ModelEvaluator(suite.specs, processor, config.mae_mode, config.jobs)
    slices = [evaluator.evaluate_round(records) for records in rounds.values()]
    report = build_report(slices, evaluator.primary)

    write_report(report, config.output, config.plot_json)
    return 0


def cmd_simulate(config):
    try:
        generator = parse_model_spec(config.generator)
        synthetic = SyntheticConfig(
            agent_count=config.agents,
            round_count=config.rounds,
            true_value=config.true_value,
            prior_noise_sd=config.prior_sd,
            generator=generator,
            observation_noise_sd=config.noise,
            peer_count=config.peers or None,
            seed=config.seed,
            bin_count=config.bins,
            padding_fraction=config.padding,
            kernel=config.kernel,
            bandwidth=config.bandwidth,
        )
    except ValueError as e:
        raise ConfigError(f"bad generator settings: {e}") from e

    rounds = synthesize(synthetic)
    PredictionDataManager().serialize(rounds, config.output, config.format)
    return 0


def cmd_kl(config):
    rounds = load_rounds(config)
    if not rounds:
        raise ConfigError("input holds no rounds")
    round_id = config.round if config.round is not None else next(iter(rounds))
    if round_id not in rounds:
        raise ConfigError(f"round {round_id!r} not found; rounds: {', '.join(rounds)}")

    records = rounds[round_id]
    grid = records[0].si.grid
    priors = [
        smooth_distribution(point_to_distribution(r.pre_social, grid, config.kernel, config.bandwidth),
                            config.kl_epsilon)
        for r in records
    ]
    users = [r.user_id for r in records]
    matrix = pd.DataFrame(kl_matrix(priors), index=users, columns=users)
    matrix.index.name = 'user_id'

    matrix.to_csv(config.output or sys.stdout, lineterminator='\n')
    if config.plot_json:
        viz = VisualizationUtils()
        viz.figure_to_json(viz.create_kl_heatmap(matrix), config.plot_json)
    logger.info("KL matrix for round %s: %d users", round_id, len(users))
    return 0


def cmd_table(config):
    if not Path(config.input).is_file():
        raise ConfigError(f"input file not found: {config.input}")
    report = EvaluationReport.from_lines(config.input)
    write_report(report, config.output, config.plot_json)
    return 0


COMMANDS = {
    'compare': cmd_compare,
    'simulate': cmd_simulate,
    'kl': cmd_kl,
    'table': cmd_table,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--input', help='Prediction records (compare, kl) or a .jsonl report (table)')
    common.add_argument('--output', help='Output file; kl writes to stdout when omitted')
    common.add_argument('--format', choices=FORMATS, default=DEFAULTS['format'],
                        help='Record file layout (default: %(default)s)')
    common.add_argument('--bins', type=int, default=DEFAULTS['bins'], help='Bins per round grid (default: %(default)s)')
    common.add_argument('--padding', type=float, default=DEFAULTS['padding'],
                        help='Grid padding as a fraction of the value range (default: %(default)s)')
    common.add_argument('--kernel', choices=KERNELS, default=DEFAULTS['kernel'],
                        help='Point-to-distribution kernel (default: %(default)s)')
    common.add_argument('--bandwidth', default=DEFAULTS['bandwidth'],
                        help="Gaussian kernel bandwidth or 'auto' (default: %(default)s)")
    common.add_argument('--smoothing', type=float, default=DEFAULTS['smoothing'],
                        help='Laplace pseudo-count for histograms (default: %(default)s)')
    common.add_argument('--models', default=DEFAULTS['models'],
                        help="Comma-separated model names or 'all' (default: %(default)s)")
    common.add_argument('--mae-mode', choices=MAE_MODES, default=DEFAULTS['mae_mode'],
                        help='Error measure (default: %(default)s)')
    common.add_argument('--seed', type=int, default=DEFAULTS['seed'], help='Random seed (default: %(default)s)')
    common.add_argument('--si-mode', choices=SI_CONDITIONING, default=DEFAULTS['si_mode'],
                        help='How the social histogram is read (default: %(default)s)')
    common.add_argument('--marginal', choices=MARGINAL_SOURCES, default=DEFAULTS['marginal'],
                        help='Post-social marginal for the social Bayesian update (default: %(default)s)')
    common.add_argument('--round', help='Round for the KL matrix (default: first round)')
    common.add_argument('--generator', default=DEFAULTS['generator'],
                        help='Model generating synthetic answers, e.g. degroot:w=0.3 (default: %(default)s)')
    common.add_argument('--agents', type=int, default=DEFAULTS['agents'], help='Agents per round (default: %(default)s)')
    common.add_argument('--rounds', type=int, default=DEFAULTS['rounds'], help='Synthetic rounds (default: %(default)s)')
    common.add_argument('--true-value', type=float, default=DEFAULTS['true_value'],
                        help='True price every round is centered on (default: %(default)s)')
    common.add_argument('--prior-sd', type=float, default=DEFAULTS['prior_sd'],
                        help='Spread of pre-social estimates (default: %(default)s)')
    common.add_argument('--noise', type=float, default=DEFAULTS['noise'],
                        help='Observation noise on post-social answers (default: %(default)s)')
    common.add_argument('--peers', type=int, default=DEFAULTS['peers'],
                        help='Peers sampled into each synthetic histogram; 0 shows every other agent '
                             '(default: %(default)s)')
    common.add_argument('--jobs', type=int, default=DEFAULTS['jobs'],
                        help='Parallel workers per round (default: %(default)s)')
    common.add_argument('--kl-epsilon', type=float, default=DEFAULTS['kl_epsilon'],
                        help='Smoothing added to priors before KL (default: %(default)s)')
    common.add_argument('--plot-json', help='Also write the plot data as plotly figure JSON')
    common.add_argument('--log-level', default='WARNING', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level (default: %(default)s)')

    parser = argparse.ArgumentParser(
        description="Compare belief-update models on pre/post-social prediction data",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s simulate --generator social_bayesian --output rounds.csv
  %(prog)s compare --input rounds.csv --output report.csv --plot-json figure.json
  %(prog)s kl --input rounds.csv --round 1 --output kl.csv
  %(prog)s table --input report.jsonl --output table.csv
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('compare', parents=[common], help='Score every model per round')
    subparsers.add_parser('simulate', parents=[common], help='Write seeded synthetic rounds')
    subparsers.add_parser('kl', parents=[common], help='Pairwise KL matrix of prior beliefs for one round')
    subparsers.add_parser('table', parents=[common], help='Re-render a structured report')
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr, force=True)

    try:
        config = RunConfig.from_args(args)
        return COMMANDS[config.command](config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
