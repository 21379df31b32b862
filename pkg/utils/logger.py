"""
Logger Configuration
Centralized logging setup for the clustering engine
"""

import logging
import logging.handlers
import os
import sys

ROOT_LOGGER_NAME = 'kdkmeans'
PERFORMANCE_LOGGER_NAME = f'{ROOT_LOGGER_NAME}.performance'


def setup_logger(name: str = None, level: str = None, log_dir: str = None) -> logging.Logger:
    """
    Setup centralized logger with console and rotating file handlers.
    With no name the root logger is configured, so every module logger
    (logging.getLogger(__name__)) reaches the same handlers.
    """
    logger = logging.getLogger(name)

    # Prevent duplicate handlers
    if getattr(logger, '_kdkmeans_configured', False):
        return logger

    log_level = level or os.getenv('LOG_LEVEL', 'INFO')
    logger.setLevel(getattr(logging, log_level.upper()))

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(funcName)s - %(message)s'
    )
    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s'
    )

    # Console handler on stderr; stdout carries command results
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    log_dir = log_dir or os.getenv('LOG_DIR', 'logs')
    os.makedirs(log_dir, exist_ok=True)

    file_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, 'kdkmeans.log'),
        maxBytes=10*1024*1024,  # 10MB
        backupCount=5
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(detailed_formatter)
    logger.addHandler(file_handler)

    error_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, 'kdkmeans_errors.log'),
        maxBytes=10*1024*1024,  # 10MB
        backupCount=5
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(detailed_formatter)
    logger.addHandler(error_handler)

    perf_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, 'kdkmeans_performance.log'),
        maxBytes=10*1024*1024,  # 10MB
        backupCount=3
    )
    perf_handler.setLevel(logging.INFO)
    perf_handler.setFormatter(logging.Formatter('%(asctime)s - PERFORMANCE - %(message)s'))

    perf_logger = get_performance_logger()
    if not perf_logger.handlers:
        perf_logger.addHandler(perf_handler)
    else:
        perf_handler.close()
    perf_logger.setLevel(logging.INFO)

    logger._kdkmeans_configured = True
    return logger


def get_performance_logger() -> logging.Logger:
    """Get performance logger"""
    return logging.getLogger(PERFORMANCE_LOGGER_NAME)


def log_phase(phase: str, elapsed: float, **details):
    """Log the wall time of one pipeline phase"""
    extra = ''.join(f" - {key}: {value}" for key, value in details.items())
    get_performance_logger().info(f"PHASE - Name: {phase} - WallTime: {elapsed:.6f}s{extra}")


def log_run(algorithm: str, n: int, k: int, iterations: int, distance_evaluations: int,
            wall_time: float):
    """Log the outcome of one clustering run"""
    get_performance_logger().info(
        f"RUN - Algorithm: {algorithm} - N: {n} - K: {k} - Iterations: {iterations} - "
        f"DistanceEvaluations: {distance_evaluations} - WallTime: {wall_time:.6f}s"
    )
