"""
Helper functions for the rejection scheduling simulator.
Contains configuration loading, logging setup, numeric tolerances and file helpers.
"""

import os
import json
import yaml
from typing import Dict, Any, List, Optional, Sequence
import pandas as pd
import numpy as np
import logging
from pathlib import Path
from dotenv import load_dotenv

# Auto-load .env file when this module is imported
load_dotenv()

REL_TOLERANCE = 1e-9
ABS_TOLERANCE_FLOOR = 1e-12


def load_config(config_path: str = "config/config.yaml") -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    Args:
        config_path: Path to config file

    Returns:
        Dict: Configuration dictionary ({} when missing or unreadable)
    """
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            config = yaml.safe_load(f)
        return config or {}
    except FileNotFoundError:
        logging.error(f"Config file not found: {config_path}")
        return {}
    except yaml.YAMLError as e:
        logging.error(f"Error parsing YAML config: {e}")
        return {}


def get_env_variable(key: str, default: Any = None, required: bool = False) -> Any:
    """
    Get environment variable with optional default and validation.

    Args:
        key: Environment variable name
        default: Default value if not found
        required: Whether the variable is required

    Returns:
        Any: Environment variable value

    Raises:
        ValueError: If required variable is missing
    """
    value = os.getenv(key, default)

    if required and value is None:
        raise ValueError(f"Required environment variable '{key}' not found")

    return value


def setup_logging(config: Dict[str, Any], level: Optional[str] = None) -> logging.Logger:
    """
    Setup logging configuration.

    Args:
        config: Configuration dictionary
        level: Optional level overriding the config (e.g. from --log-level)

    Returns:
        logging.Logger: Configured logger
    """
    log_config = config.get('logging', {})
    log_dir = get_env_variable('REJECTSCHED_LOG_DIR')

    log_files = dict(log_config.get('files', {}))
    if log_dir:
        log_files = {name: str(Path(log_dir) / Path(path).name) for name, path in log_files.items()}
    main_file = log_files.get('main', 'log/main.log')
    Path(main_file).parent.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=getattr(logging, (level or log_config.get('level', 'INFO')).upper()),
        format=log_config.get('format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s'),
        handlers=[
            logging.FileHandler(main_file),
            logging.StreamHandler()
        ],
        force=True,
    )

    logger = logging.getLogger('rejectsched')
    return logger


def tolerance_for(rhs: float, rel: float = REL_TOLERANCE, floor: float = ABS_TOLERANCE_FLOOR) -> float:
    """Allowed excess of a left side over rhs: relative with an absolute floor."""
    return max(rel * abs(rhs), floor)


def relative_close(a: float, b: float, rel: float = REL_TOLERANCE) -> bool:
    return abs(a - b) <= tolerance_for(b, rel=rel)


def parse_float_list(text: Optional[str]) -> List[float]:
    """
    Parse a comma separated list such as "0.5,1" or "4,16,64".

    Fractions like "1/4" are accepted.

    Raises:
        ValueError: On an empty or malformed entry
    """
    if text is None:
        return []
    values = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            raise ValueError(f"empty entry in list '{text}'")
        if '/' in item:
            num, den = item.split('/', 1)
            values.append(float(num) / float(den))
        else:
            values.append(float(item))
    return values


def ratio(numerator: float, denominator: float) -> float:
    """numerator / denominator, nan when the denominator is not positive."""
    if denominator is None or not (denominator > 0):
        return float('nan')
    return float(numerator) / float(denominator)


def to_builtin(value: Any) -> Any:
    """Convert numpy scalars and arrays inside nested data to JSON-friendly builtins."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def save_json(data: Any, filename: str):
    """Write data as JSON with sorted keys; byte-identical for equal inputs."""
    Path(filename).parent.mkdir(parents=True, exist_ok=True)
    with open(filename, 'w', encoding='utf-8') as f:
        json.dump(to_builtin(data), f, indent=2, sort_keys=True)
        f.write('\n')


def load_json(filename: str) -> Any:
    with open(filename, 'r', encoding='utf-8') as f:
        return json.load(f)


def save_to_csv(df: pd.DataFrame, filename: str, append: bool = False,
                columns: Optional[Sequence[str]] = None):
    """
    Save DataFrame to CSV without the index.

    Args:
        df: DataFrame to save
        filename: Output filename
        append: Whether to append to existing file
        columns: Fixed column order (missing columns are written empty)
    """
    # Create directory if it doesn't exist
    Path(filename).parent.mkdir(parents=True, exist_ok=True)

    if columns is not None:
        df = df.reindex(columns=list(columns))
    mode = 'a' if append else 'w'
    header = not (append and Path(filename).exists())

    df.to_csv(filename, mode=mode, header=header, index=False, float_format='%.12g')


def load_from_csv(filename: str) -> pd.DataFrame:
    """
    Load a CSV written by save_to_csv.

    Returns:
        pd.DataFrame: Loaded data, empty if the file does not exist
    """
    if not Path(filename).exists():
        return pd.DataFrame()
    return pd.read_csv(filename)
