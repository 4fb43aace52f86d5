import sys
from pathlib import Path
from typing import Any, Dict

import yaml


def load_default_sampler_settings(
    config_file: str = "sampler_config_default.yml",
) -> Dict[str, Any]:
    """
    Expected format (YAML):
    ```yaml
        hierarchy:
        prior:
        model:
        data:
        laplace:
        lis:
        proposal:
        run:
        output:
    ```
    """
    try:
        config_path = Path(__file__).parent / config_file
        with open(config_path, "r") as f:
            config = yaml.safe_load(f)

        return config

    except Exception as e:
        print(f"Failed to load configuration from {config_file}: {e}")
        sys.exit(2)


def merge_settings(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Section-by-section merge; nested dicts merge, everything else is replaced."""
    merged = dict(base or {})
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_settings(merged[key], value)
        else:
            merged[key] = value
    return merged
