"""
Utility functions for run tracking and console summaries.
"""

import datetime
import json
import logging
from functools import wraps
from pathlib import Path
from typing import Any, Dict

logger = logging.getLogger(__name__)


def _write_run_log(log_dir: Path, name: str, log_data: Dict[str, Any]) -> Path:
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / name
    with open(log_file, 'w', encoding='utf-8') as f:
        json.dump(log_data, f, indent=2, default=str)
    return log_file


def log_run_to_file(run_name: str, output_dir: str = "logs"):
    """
    Decorator to log function execution details to a JSON file.

    Results exposing to_dict() have that record stored as result metadata.

    Args:
        run_name (str): Name for this run/operation
        output_dir (str): Directory to store log files
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = datetime.datetime.now()
            timestamp = start_time.strftime("%Y%m%d_%H%M%S")
            log_data: Dict[str, Any] = {
                "run_name": run_name,
                "function": func.__name__,
                "start_time": start_time.isoformat(),
                "args": str(args),
                "kwargs": str(kwargs),
            }

            try:
                result = func(*args, **kwargs)
            except Exception as e:
                end_time = datetime.datetime.now()
                log_data.update({
                    "end_time": end_time.isoformat(),
                    "duration_seconds": (end_time - start_time).total_seconds(),
                    "status": "error",
                    "error_type": type(e).__name__,
                    "error": str(e),
                })
                log_file = _write_run_log(Path(output_dir), f"{run_name}_ERROR_{timestamp}.json", log_data)
                logger.error(f"Error logged to: {log_file}")
                raise

            end_time = datetime.datetime.now()
            log_data.update({
                "end_time": end_time.isoformat(),
                "duration_seconds": (end_time - start_time).total_seconds(),
                "status": "success",
            })
            if hasattr(result, "to_dict"):
                log_data["result_metadata"] = result.to_dict()

            log_file = _write_run_log(Path(output_dir), f"{run_name}_{timestamp}.json", log_data)
            logger.info(f"Run logged to: {log_file}")
            return result

        return wrapper
    return decorator


def print_summary(result) -> None:
    """Print a formatted summary of an experiment run."""
    print(f"\n📊 {result.experiment} Summary:")
    print(f"- Output directory: {result.output_dir}")
    print(f"- Files written: {len(result.files)}")
    for key, value in result.summary.items():
        if isinstance(value, float):
            print(f"  • {key}: {value:.6g}")
        else:
            print(f"  • {key}: {value}")
