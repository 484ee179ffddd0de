"""Config resolution: defaults < preset < config file < CLI flags."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import ValidationError

from errors import ConfigValidationError
from models import PipelineConfig, parse_key_values

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "CIRCUIT_EMBED_CONFIG"

PRESETS: dict[str, dict[str, Any]] = {
    "full": {},
    # Small enough for a laptop on graphs of a few hundred nodes
    "desk": {
        "expansion_size": 40,
        "refinement_size": 20,
        "dimensions": 16,
        "epochs": 5,
        "learning_rate": 0.25,
    },
}


def load_config_file(path: Union[str, Path]) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")

    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigValidationError(f"{path}: invalid UTF-8 byte at offset {exc.start}") from None
    if path.suffix in (".yml", ".yaml"):
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigValidationError(f"{path}: {exc}") from None
        if not raw:
            return {}
        if not isinstance(raw, dict):
            raise ConfigValidationError(f"{path}: expected a flat mapping at the top level")
        return {str(k): v for k, v in raw.items()}

    try:
        return parse_key_values(text)
    except ValueError as exc:
        raise ConfigValidationError(f"{path}: {exc}") from None


def build_config(values: dict[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig(**values)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigValidationError(problems) from None


def resolve_config(
    preset: Optional[str] = None,
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> PipelineConfig:
    values: dict[str, Any] = {}

    if preset is not None:
        if preset not in PRESETS:
            raise ConfigValidationError(f"Unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}")
        values.update(PRESETS[preset])

    if config_path is None:
        config_path = os.environ.get(CONFIG_ENV_VAR) or None
    if config_path is not None:
        values.update(load_config_file(config_path))
        logger.debug("Loaded config file %s", config_path)

    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)
