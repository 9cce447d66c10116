"""
Shared utilities for the md-shadow tools.
"""

from .csv_io import read_csv, save_json, save_to_csv
from .file_utils import ensure_output_dir, file_sha256, output_filename, validate_config_file
from .logger import get_logger, log_duration, setup_logging

__all__ = [
    'read_csv',
    'save_json',
    'save_to_csv',
    'setup_logging',
    'get_logger',
    'log_duration',
    'validate_config_file',
    'ensure_output_dir',
    'output_filename',
    'file_sha256',
]
