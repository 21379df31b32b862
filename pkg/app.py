"""
kd-tree k-means - Main Application
Command-line interface for dataset generation, clustering runs, sweeps and memory estimates
"""

import json
import logging
from functools import wraps
from typing import List, Optional

import click
import numpy as np

from config import Constants, get_config
from core.geometry import BoundingBox
from services.datagen_service import DatasetGenerator, GenSpec
from services.experiment_service import (
    ExperimentConfig, ExperimentService, estimate_worst_case_bytes,
)
from storage.dataset_store import DatasetStore
from utils.logger import setup_logger

config = get_config()
logger = logging.getLogger(__name__)

MIB = 1024 * 1024


def build_services():
    dataset_store = DatasetStore(config.OUTPUT_FORMAT)
    generator = DatasetGenerator(dataset_store)
    return dataset_store, generator, ExperimentService(dataset_store, generator)


# Error handling decorator
def handle_errors(f):
    @wraps(f)
    def decorated(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ValueError, OSError) as e:
            logger.error(f"{f.__name__} failed: {str(e)}")
            raise click.ClickException(str(e))
    return decorated


def parse_values(text: Optional[str]) -> List[int]:
    if not text:
        return []
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of integers, got '{text}'")


def generator_options(f):
    options = [
        click.option('--n', 'n', type=int, default=None, help='Number of points'),
        click.option('--stress', is_flag=True, help='Use the stress-scale point count'),
        click.option('--dims', type=int, default=config.DEFAULT_DIMS, show_default=True),
        click.option('--clumps', type=int, default=config.DEFAULT_CLUMPS, show_default=True),
        click.option('--stddev-low', type=float, default=config.STDDEV_LOW, show_default=True),
        click.option('--stddev-high', type=float, default=config.STDDEV_HIGH, show_default=True),
        click.option('--domain-low', type=float, default=config.DOMAIN_LOW, show_default=True),
        click.option('--domain-high', type=float, default=config.DOMAIN_HIGH, show_default=True),
        click.option('--seed', type=int, default=config.RNG_SEED, show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def clustering_options(f):
    options = [
        click.option('--algorithm', type=click.Choice(Constants.ALGORITHMS),
                     default=config.DEFAULT_ALGORITHM, show_default=True),
        click.option('--k', 'k', type=int, default=config.DEFAULT_K, show_default=True),
        click.option('--metric', type=click.Choice(Constants.METRICS), default=config.DEFAULT_METRIC,
                     show_default=True),
        click.option('--partitions', type=int, default=config.DEFAULT_PARTITIONS, show_default=True),
        click.option('--workers', type=int, default=config.DEFAULT_WORKERS, show_default=True),
        click.option('--epsilon', type=float, default=config.EPSILON, show_default=True),
        click.option('--max-iters', type=int, default=config.MAX_ITERATIONS, show_default=True),
        click.option('--leaf-capacity', type=int, default=config.LEAF_CAPACITY, show_default=True),
        click.option('--shuffle/--no-shuffle', default=config.SHUFFLE_PARTITIONS,
                     help='Shuffle points before partitioning (two_level)'),
        click.option('--input', 'input_path', type=click.Path(), default=None,
                     help='Dataset file; without it a dataset is generated'),
        click.option('--dataset-format', type=click.Choice(Constants.DATASET_FORMATS), default=None,
                     help='Input format, inferred from the suffix by default'),
        click.option('--output', 'output_path', type=click.Path(), default=None),
        click.option('--format', 'output_format', type=click.Choice(Constants.OUTPUT_FORMATS),
                     default=None,
                     help='Output format; otherwise a .csv or .json suffix, then OUTPUT_FORMAT'),
        click.option('--compare-baseline', is_flag=True, help='Pair every run with a Lloyd run'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def make_gen_spec(n, stress, dims, clumps, stddev_low, stddev_high, domain_low, domain_high,
                  seed) -> GenSpec:
    n = n or (config.STRESS_N if stress else config.DEFAULT_N)
    box = BoundingBox(np.full(dims, domain_low), np.full(dims, domain_high))
    return GenSpec(n=n, dims=dims, n_clumps=clumps, stddev_range=(stddev_low, stddev_high),
                   domain_box=box, rng_seed=seed)


def make_experiment_config(params: dict, sweep: Optional[str] = None,
                           values: Optional[List[int]] = None) -> ExperimentConfig:
    gen_spec = None
    if params['input_path'] is None:
        gen_spec = make_gen_spec(params['n'], params['stress'], params['dims'], params['clumps'],
                                 params['stddev_low'], params['stddev_high'], params['domain_low'],
                                 params['domain_high'], params['seed'])
    return ExperimentConfig(
        algorithm=params['algorithm'], k=params['k'], metric=params['metric'],
        partitions=params['partitions'], workers=params['workers'], epsilon=params['epsilon'],
        max_iterations=params['max_iters'], seed=params['seed'],
        leaf_capacity=params['leaf_capacity'], shuffle=params['shuffle'],
        input_path=params['input_path'], dataset_format=params['dataset_format'],
        gen_spec=gen_spec, output_path=params['output_path'],
        output_format=params['output_format'], sweep=sweep, sweep_values=values or [],
        compare_baseline=params['compare_baseline'], metrics_file=params.get('metrics_file'),
    )


@click.group()
@click.option('--log-level', default=None, help='Override LOG_LEVEL')
def cli(log_level):
    """kd-tree filtering and two-level k-means clustering"""
    setup_logger(level=log_level or config.LOG_LEVEL, log_dir=config.LOG_DIR)


@cli.command()
@generator_options
@click.option('--output', 'output_path', type=click.Path(), required=True)
@click.option('--dataset-format', type=click.Choice(Constants.DATASET_FORMATS), default=None)
@handle_errors
def generate(n, stress, dims, clumps, stddev_low, stddev_high, domain_low, domain_high, seed,
             output_path, dataset_format):
    """Generate a Gaussian-clump dataset and its ground-truth sidecar"""
    spec = make_gen_spec(n, stress, dims, clumps, stddev_low, stddev_high, domain_low, domain_high,
                         seed)
    _, generator, _ = build_services()
    points, truth = generator.generate_to_file(spec, output_path, dataset_format)
    click.echo(json.dumps({'output': output_path, 'n': points.shape[0], 'dims': points.shape[1],
                           'clumps': spec.n_clumps, 'seed': spec.rng_seed,
                           'generator': truth.generator}))


@cli.command()
@clustering_options
@generator_options
@click.option('--metrics-file', type=click.Path(), default=None,
              help='Write run metrics to a Prometheus textfile')
@handle_errors
def cluster(**params):
    """Run one clustering job and write its result file"""
    dataset_store, _, service = build_services()
    experiment = make_experiment_config(params)
    points = service.load_points(experiment)

    baseline = None
    if experiment.compare_baseline and experiment.algorithm != 'lloyd':
        baseline = service.run_single(points, experiment, algorithm='lloyd')
    result = service.run_single(points, experiment)

    if experiment.output_path:
        dataset_store.save_result(result, experiment.output_path, experiment.output_format,
                                  config_echo=experiment.echo())
    metrics_file = experiment.metrics_file or (config.METRICS_FILE if config.ENABLE_METRICS else None)
    if metrics_file:
        service.export_metrics(result, experiment, metrics_file)

    row = service.build_row(points, experiment, experiment.k, result, baseline)
    click.echo(json.dumps(row))


@cli.command()
@click.option('--sweep', 'sweep', type=click.Choice(['k', 'dim']), required=True)
@click.option('--values', default=None, help='Comma-separated sweep values')
@clustering_options
@generator_options
@handle_errors
def sweep(sweep, values, **params):
    """Run a cluster-count or dimensionality sweep and write one report row per run"""
    if sweep == 'k' and params['input_path'] is None and params['dims'] == config.DEFAULT_DIMS:
        params['dims'] = Constants.SWEEP_K_DIMS
    if sweep == 'dim' and params['k'] == config.DEFAULT_K:
        params['k'] = Constants.SWEEP_DIM_K
    dataset_store, _, service = build_services()
    experiment = make_experiment_config(params, sweep=sweep, values=parse_values(values))
    rows = service.run_experiment(experiment)

    if experiment.output_path:
        dataset_store.save_report(rows, experiment.output_path, experiment.output_format,
                                  context=service.report_context())
    for row in rows:
        click.echo(json.dumps(row))


@cli.command('estimate-mem')
@click.option('--n', 'n', type=int, default=Constants.MEMORY_REFERENCE_N, show_default=True)
@click.option('--k', 'k', type=int, default=Constants.MEMORY_REFERENCE_K, show_default=True)
@click.option('--bytes-per-entry', type=float, default=1.0, show_default=True)
@handle_errors
def estimate_mem(n, k, bytes_per_entry):
    """Worst-case candidate-list storage of a degenerate kd-tree"""
    units = estimate_worst_case_bytes(n, k, bytes_per_entry)
    click.echo(json.dumps({
        'n': n,
        'k': k,
        'bytes_per_entry': bytes_per_entry,
        'units': units,
        'as_bits': {'bytes': units / 8, 'mib': units / 8 / MIB},
        'as_bytes': {'bytes': units, 'mib': units / MIB},
    }))


if __name__ == '__main__':
    cli()
