"""
Shared CSV and JSON output operations.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict

import pandas as pd

logger = logging.getLogger(__name__)

# Fixed float format so identical runs produce identical bytes
FLOAT_FORMAT = '%.12g'


def save_to_csv(dataframe: pd.DataFrame, output_path: str, **kwargs) -> str:
    """
    Save DataFrame to CSV file.

    Args:
        dataframe (pd.DataFrame): Data to save
        output_path (str): Output file path
        **kwargs: Additional arguments for pandas.to_csv()

    Returns:
        str: Path to saved file
    """
    output_file = Path(output_path)
    output_file.parent.mkdir(parents=True, exist_ok=True)

    csv_options = {
        'index': False,
        'encoding': 'utf-8',
        'float_format': FLOAT_FORMAT,
        'lineterminator': '\n',
    }
    csv_options.update(kwargs)

    dataframe.to_csv(str(output_file), **csv_options)
    logger.debug(f"Saved {len(dataframe)} rows to: {output_file}")

    return str(output_file)


def save_json(payload: Dict[str, Any], output_path: str) -> str:
    """
    Save a JSON document with sorted keys.

    Args:
        payload (dict): JSON-serializable data
        output_path (str): Output file path

    Returns:
        str: Path to saved file
    """
    output_file = Path(output_path)
    output_file.parent.mkdir(parents=True, exist_ok=True)

    with open(output_file, 'w', encoding='utf-8') as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write('\n')

    logger.debug(f"Saved JSON document to: {output_file}")
    return str(output_file)


def read_csv(input_path: str) -> pd.DataFrame:
    """
    Read a CSV written by save_to_csv.

    Args:
        input_path (str): CSV file path

    Returns:
        pd.DataFrame: Loaded table

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    path = Path(input_path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    return pd.read_csv(path)
