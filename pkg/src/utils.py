# utils.py

import os
import json
import logging
from decimal import Decimal, ROUND_HALF_UP

from errors import ValidationError

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'


def get_project_root():
    return os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


def ensure_directory_exists(directory_path):
    if directory_path:
        os.makedirs(directory_path, exist_ok=True)


def golden_dir():
    return os.path.join(get_project_root(), 'data', 'golden')


def setup_logging(log_name, level=logging.WARNING):
    """
    Sets up logging to file and console.

    Args:
        log_name (str): Base name of the log file written under logs/.
        level (int): Logging level for both handlers.
    """
    log_dir = os.path.join(get_project_root(), "logs")
    ensure_directory_exists(log_dir)
    log_file = os.path.join(log_dir, f"{log_name}.log")

    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ],
        force=True
    )


def load_json(file_path):
    try:
        with open(file_path, 'r', encoding='utf-8') as json_file:
            return json.load(json_file)
    except (OSError, json.JSONDecodeError) as e:
        logging.error(f"Error loading JSON from {file_path}: {e}")
        raise ValidationError(f"cannot read JSON document {file_path}: {e}") from e


def save_json(data, file_path):
    ensure_directory_exists(os.path.dirname(os.path.abspath(file_path)))
    with open(file_path, 'w', encoding='utf-8') as json_file:
        json.dump(data, json_file, indent=4)
        json_file.write("\n")
    logging.info(f"Saved JSON to {file_path}")


def dumps_json(data):
    """Serialize for stdout; same layout as save_json."""
    return json.dumps(data, indent=4) + "\n"


def format_decimal(value, places):
    """
    Round half away from zero to a fixed number of decimal places.

    The shortest repr of the double is rounded, so 0.36788 -> '0.3679' and
    0.125 -> '0.13' regardless of the binary expansion.

    Args:
        value (float): Value to format.
        places (int): Decimal places kept.

    Returns:
        str: The rounded value with exactly `places` decimals.
    """
    quantum = Decimal(1).scaleb(-places)
    rounded = Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP)
    if rounded == 0:
        rounded = abs(rounded)
    return f"{rounded:.{places}f}"
