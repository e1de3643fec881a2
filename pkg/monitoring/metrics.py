import logging
import os
import sys
import time

import psutil
import structlog

logger = structlog.get_logger()


def configure_logging(level: str = "WARNING", json: bool = False) -> None:
    """
    Route structlog output to stderr so stdout stays free for tables and paths.
    """
    renderer = structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level.upper())),
        logger_factory=structlog.PrintLoggerFactory(sys.stderr),
        cache_logger_on_first_use=False,
    )


def collect_run_metrics(start_time: float) -> dict:
    """
    Process metrics for one CLI run: wall time, CPU and resident memory.
    """
    process = psutil.Process(os.getpid())
    memory_info = process.memory_info()
    cpu = process.cpu_times()

    metrics = {
        "wall_seconds": time.time() - start_time,
        "cpu_seconds": cpu.user + cpu.system,
        "memory_usage_mb": memory_info.rss / 1024 / 1024,
        "threads": process.num_threads(),
    }

    logger.info("run_metrics", **metrics)
    return metrics
