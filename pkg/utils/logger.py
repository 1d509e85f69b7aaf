import logging
import sys
import time
from datetime import datetime
from typing import Any, Dict, List, Optional

FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class ReportLogHandler(logging.Handler):
    """Collects warnings so they can be embedded in JSON reports."""

    def __init__(self, level: int = logging.WARNING):
        super().__init__(level)
        self.records: List[Dict[str, str]] = []

    def emit(self, record):
        """Store the formatted record."""
        self.records.append({
            'logger': record.name,
            'level': record.levelname,
            'message': record.getMessage(),
        })

    def clear(self):
        self.records = []


report_handler = ReportLogHandler()


def setup_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """Setup logger with console and report handlers."""
    logger = logging.getLogger(name)
    if level is None:
        from config.settings import config
        level = config.log_level
    logger.setLevel(getattr(logging, level, logging.INFO))

    # Clear existing handlers
    logger.handlers.clear()
    logger.propagate = False

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter(FORMAT))

    logger.addHandler(console_handler)
    logger.addHandler(report_handler)

    return logger


def set_level(level: str) -> None:
    """Apply a level to every polyflex logger already created."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    for name, logger in logging.Logger.manager.loggerDict.items():
        if isinstance(logger, logging.Logger) and name.startswith(("core", "utils", "app", "ui")):
            logger.setLevel(numeric)


class PerformanceLogger:
    """Wall-clock timings per operation. Kept out of reports so they stay reproducible."""

    def __init__(self):
        self.start_times: Dict[str, float] = {}
        self.metrics: List[Dict[str, Any]] = []

    def start_timer(self, operation: str):
        self.start_times[operation] = time.perf_counter()

    def end_timer(self, operation: str) -> float:
        """Stop the timer and return seconds elapsed, 0.0 if it was never started."""
        started = self.start_times.pop(operation, None)
        if started is None:
            return 0.0
        duration = time.perf_counter() - started
        self.metrics.append({
            'operation': operation,
            'duration': duration,
            'timestamp': datetime.now().isoformat()
        })
        return duration

    def get_metrics(self) -> List[Dict[str, Any]]:
        return self.metrics
