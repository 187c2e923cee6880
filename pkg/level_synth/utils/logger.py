"""Logging utilities."""

import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import psutil

PACKAGE_LOGGER = "level_synth"


def setup_logger(
    name: str = PACKAGE_LOGGER,
    level: int = logging.INFO,
    log_file: Optional[Path] = None,
    log_to_console: bool = True,
) -> logging.Logger:
    """Set up logger with consistent formatting.

    Args:
        name: Logger name
        level: Logging level
        log_file: Optional path to log file
        log_to_console: Whether to log to stderr (default: True)

    Returns:
        Configured logger
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Remove existing handlers
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # stdout is left to stage output
    if log_to_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def create_log_directory(
    base_dir: Path,
    run_type: str = "pipeline",
    timestamp: Optional[str] = None,
) -> Path:
    """Create a timestamped log directory for a stage or pipeline run.

    Args:
        base_dir: Base directory for logs (e.g., output_dir)
        run_type: Type of run (e.g., 'segment', 'sweep', 'pipeline')
        timestamp: Optional timestamp string, will be generated if not provided

    Returns:
        Path to the created log directory
    """
    if timestamp is None:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")

    log_dir = Path(base_dir) / "logs" / f"{run_type}_{timestamp}"
    log_dir.mkdir(parents=True, exist_ok=True)

    return log_dir


def setup_run_logger(
    log_dir: Path,
    run_type: str = "pipeline",
    level: int = logging.INFO,
) -> logging.Logger:
    """Set up the package logger for one run.

    Console output plus ``<log_dir>/<run_type>.log``.
    """
    log_file = log_dir / f"{run_type}.log"
    logger = setup_logger(
        name=PACKAGE_LOGGER,
        level=level,
        log_file=log_file,
        log_to_console=True,
    )

    logger.info(f"Logging to: {log_file}")
    return logger


def peak_memory_mb() -> float:
    """Resident set size of this process in MB."""
    return psutil.Process().memory_info().rss / 1024 / 1024


def save_run_metadata(
    log_dir: Path, command: str, arguments: Dict[str, Any], config_file: Optional[Path]
) -> Path:
    """Write ``run_metadata.json``; the only place wall-clock time is recorded."""
    metadata = {
        "command": command,
        "timestamp": datetime.now().isoformat(),
        "arguments": {k: str(v) if isinstance(v, Path) else v for k, v in arguments.items()},
        "config_file": str(config_file) if config_file else None,
    }
    path = log_dir / "run_metadata.json"
    with open(path, "w") as f:
        json.dump(metadata, f, indent=2, default=str)
    return path


def save_run_summary(
    log_dir: Path, run_type: str, elapsed_time: float, details: Dict[str, Any]
) -> Path:
    summary = {
        "run_type": run_type,
        "elapsed_time_seconds": elapsed_time,
        "elapsed_time_minutes": elapsed_time / 60,
        "peak_memory_mb": peak_memory_mb(),
        **details,
    }
    path = log_dir / f"{run_type}_summary.json"
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, default=str)
    logging.getLogger(PACKAGE_LOGGER).info(f"Run summary saved to {path}")
    return path
