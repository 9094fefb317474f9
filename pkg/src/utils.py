"""
Utility functions for the rainfall forecasting toolkit.
"""

import json
import math
import os
import tempfile
import yaml
from pathlib import Path
from typing import Dict, Any, Optional, Union
from dotenv import load_dotenv

from .exceptions import ReportIOError

# Load environment variables
load_dotenv()

CONFIG_ENV_VAR = 'RAINFALL_CONFIG'

DEFAULT_SETTINGS: Dict[str, Any] = {
    'input': None,
    'out': 'output',
    'label': None,
    'season': 12,
    'log': True,
    'offset': None,
    'order': '1,0,0,0,1,1',
    'phi': None,
    'phi_fallback': 0.5,
    'M': 12,
    'normalize_weights': True,
    'impute_strategy': 'filter',
    'prefilter': False,
    'divisor': 'calendar',
    'holes': 0,
    'seed': 0,
    'horizon': 12,
    'level': 0.95,
    'force_mean': False,
    'lags': [6, 12, 18, 24, 30, 36],
    'alpha': 0.05,
    'holdout': 0,
    'max_iter': 200,
}


def default_config_path() -> Path:
    """Settings file named by RAINFALL_CONFIG, else config/settings.yaml."""
    override = os.getenv(CONFIG_ENV_VAR)
    if override:
        return Path(override)
    return Path(__file__).parent.parent / 'config' / 'settings.yaml'


def load_config(config_path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    Args:
        config_path: Path to config file. If None, uses RAINFALL_CONFIG or the
            default location.

    Returns:
        Flat configuration dictionary.

    Raises:
        ReportIOError: If the file cannot be read or is not a mapping.
    """
    if config_path is None:
        config_path = default_config_path()
    config_path = Path(config_path)

    if not config_path.exists():
        # Create default config if it doesn't exist
        create_default_config(config_path)

    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ReportIOError(f"cannot read settings {config_path}: {e}") from e
    if not isinstance(config, dict):
        raise ReportIOError(f"settings {config_path} must be a flat mapping")
    return config


def create_default_config(config_path: Path):
    """Create default configuration file."""
    try:
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, 'w') as f:
            yaml.dump(DEFAULT_SETTINGS, f, default_flow_style=False, sort_keys=False)
    except OSError as e:
        raise ReportIOError(f"cannot create settings {config_path}: {e}") from e

    print(f"Created default configuration at {config_path}")


def ensure_output_dir(path: Union[str, Path]) -> Path:
    """Ensure an output directory exists."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportIOError(f"cannot create output directory {path}: {e}") from e
    return path


def write_text_atomic(path: Union[str, Path], text: str) -> Path:
    """
    Write ``text`` to a temporary file beside ``path`` and rename it into place.

    Raises:
        ReportIOError: On any filesystem error.
    """
    path = Path(path)
    directory = ensure_output_dir(path.parent)
    tmp_name = None
    try:
        with tempfile.NamedTemporaryFile('w', dir=directory, prefix=f'.{path.name}.',
                                         suffix='.tmp', delete=False, encoding='utf-8',
                                         newline='\n') as f:
            tmp_name = f.name
            f.write(text)
        os.replace(tmp_name, path)
    except OSError as e:
        if tmp_name and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise ReportIOError(f"cannot write {path}: {e}") from e
    return path


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, 'tolist'):
        return to_jsonable(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json_atomic(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    """Write a JSON report (indent 2, trailing newline) atomically."""
    text = json.dumps(to_jsonable(payload), indent=2) + '\n'
    return write_text_atomic(path, text)
