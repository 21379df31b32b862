"""
Configuration Management
Centralized configuration for the clustering engine and its benchmark harness
"""

import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration class"""

    # Logging Configuration
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_DIR = os.getenv('LOG_DIR', 'logs')

    # Clustering Defaults
    DEFAULT_K = int(os.getenv('DEFAULT_K', 8))
    DEFAULT_METRIC = os.getenv('DEFAULT_METRIC', 'euclidean')
    DEFAULT_ALGORITHM = os.getenv('DEFAULT_ALGORITHM', 'two_level')
    DEFAULT_PARTITIONS = int(os.getenv('DEFAULT_PARTITIONS', 4))
    DEFAULT_WORKERS = int(os.getenv('DEFAULT_WORKERS', min(4, os.cpu_count() or 1)))
    EPSILON = float(os.getenv('EPSILON', 1e-9))
    MAX_ITERATIONS = int(os.getenv('MAX_ITERATIONS', 1000))
    LEAF_CAPACITY = int(os.getenv('LEAF_CAPACITY', 1))
    RNG_SEED = int(os.getenv('RNG_SEED', 0))
    SHUFFLE_PARTITIONS = os.getenv('SHUFFLE_PARTITIONS', 'False').lower() == 'true'

    # Output Settings
    OUTPUT_FORMAT = os.getenv('OUTPUT_FORMAT', 'json')

    # Dataset Generation Defaults
    DEFAULT_N = int(os.getenv('DEFAULT_N', 100000))
    STRESS_N = int(os.getenv('STRESS_N', 1000000))
    DEFAULT_DIMS = int(os.getenv('DEFAULT_DIMS', 15))
    DEFAULT_CLUMPS = int(os.getenv('DEFAULT_CLUMPS', 8))
    STDDEV_LOW = float(os.getenv('STDDEV_LOW', 0.5))
    STDDEV_HIGH = float(os.getenv('STDDEV_HIGH', 2.0))
    DOMAIN_LOW = float(os.getenv('DOMAIN_LOW', 0.0))
    DOMAIN_HIGH = float(os.getenv('DOMAIN_HIGH', 100.0))

    # Monitoring Configuration
    ENABLE_METRICS = os.getenv('ENABLE_METRICS', 'False').lower() == 'true'
    METRICS_FILE = os.getenv('METRICS_FILE', 'kdkmeans.prom')


class DevelopmentConfig(Config):
    """Development environment configuration"""
    LOG_LEVEL = 'DEBUG'


class TestingConfig(Config):
    """Testing environment configuration"""

    # Small, fast defaults for the test suite
    DEFAULT_N = 2000
    DEFAULT_DIMS = 3
    DEFAULT_CLUMPS = 4
    DEFAULT_K = 4
    DEFAULT_WORKERS = 1
    ENABLE_METRICS = False


class BenchmarkConfig(Config):
    """Desk-scale benchmark configuration"""
    LOG_LEVEL = 'INFO'

    # Bucketed leaves keep interpreter overhead per traversal low at n = 10^5
    LEAF_CAPACITY = int(os.getenv('LEAF_CAPACITY', 32))
    ENABLE_METRICS = True


# Configuration mapping
config_map = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'benchmark': BenchmarkConfig,
    'default': Config
}


def get_config(env_name: str = None) -> Config:
    """Get configuration based on environment"""
    env_name = env_name or os.getenv('KDKMEANS_ENV', 'default')
    return config_map.get(env_name, Config)


# Application-specific constants
class Constants:
    """Application constants"""

    # Algorithms selectable from the harness
    ALGORITHMS = ['lloyd', 'filter', 'two_level']

    # Distance metrics
    METRICS = ['euclidean', 'manhattan', 'chebyshev']

    # Output formats
    OUTPUT_FORMATS = ['json', 'csv']
    DATASET_FORMATS = ['csv', 'binary']

    # Binary dataset layout
    BINARY_MAGIC = b'KDKM'
    BINARY_VERSION = 1

    # Cluster-count sweep: 2 up to 100 at 15 dimensions
    SWEEP_K_VALUES = [2, 5, 10, 20, 40, 60, 80, 100]
    SWEEP_K_DIMS = 15

    # Dimensionality sweep at 6 clusters
    SWEEP_DIM_VALUES = [2, 4, 6, 8, 10, 15, 20]
    SWEEP_DIM_K = 6

    # Published hardware speedups, carried into reports as context only
    PUBLISHED_SPEEDUPS = {
        'multicore_vs_single_core_filter': 8.5,
        'average_vs_unoptimized_fpga': 210.0,
        'peak_vs_software_only': 330.0,
        'vs_unfiltered_multicore': 12.0
    }

    # Worst-case memory estimate reference point
    MEMORY_REFERENCE_N = 100000
    MEMORY_REFERENCE_K = 1024

    # Generator identifier written to dataset metadata
    GENERATOR_ID = 'numpy.random.RandomState(MT19937)+sklearn.datasets.make_blobs'
