"""
Shared file and path utilities.
"""

import hashlib
import logging
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

CONFIG_SUFFIXES = ('.yaml', '.yml', '.cfg', '.conf', '.txt')


def validate_config_file(file_path: str) -> Path:
    """
    Validate that a configuration file exists and has a text config suffix.

    Args:
        file_path (str): Path to validate

    Returns:
        Path: Validated Path object

    Raises:
        FileNotFoundError: If file doesn't exist
        ValueError: If the suffix is not a supported config format
    """
    path = Path(file_path)

    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    if path.suffix.lower() not in CONFIG_SUFFIXES:
        raise ValueError(f"Config file must be one of {', '.join(CONFIG_SUFFIXES)}, got: {path.suffix}")

    return path


def ensure_output_dir(output_path: str) -> Path:
    """
    Ensure the output directory exists.

    Args:
        output_path (str): Output file or directory path

    Returns:
        Path: Path object for the output
    """
    path = Path(output_path)

    # A path with a suffix is a file; create its parent instead
    if path.suffix:
        path.parent.mkdir(parents=True, exist_ok=True)
    else:
        path.mkdir(parents=True, exist_ok=True)

    return path


def output_filename(stem: str, suffix: str, output_dir: Optional[str] = None, extension: str = ".csv") -> str:
    """
    Build an output file path from a stem and a tag.

    Args:
        stem (str): Base name, e.g. 'hist_F1'
        suffix (str): Tag appended to the stem, e.g. '_dt0.01'
        output_dir (str, optional): Directory for the file. Created if missing.
        extension (str): File extension including the dot

    Returns:
        str: Generated output file path
    """
    directory = ensure_output_dir(output_dir) if output_dir else Path(".")
    return str(directory / f"{stem}{suffix}{extension}")


def file_sha256(file_path: str, chunk_size: int = 1 << 16) -> str:
    """
    Hex SHA-256 digest of a file's contents.

    Args:
        file_path (str): File to hash
        chunk_size (int): Read size in bytes

    Returns:
        str: Hex digest
    """
    digest = hashlib.sha256()
    with open(file_path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()
