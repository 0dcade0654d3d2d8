"""
Shipped experiment presets and config loading
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ValidationError

from core.exceptions import ConfigError, PresetNotFound
from harness.models import ExperimentConfig

PRESET_DIR = Path(__file__).parent / "presets"


class PresetInfo(BaseModel):
    name: str
    description: str
    slow: bool = False


def parse_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Validate a config mapping; ``overrides`` replace top-level keys"""
    merged = {**data, **(overrides or {})}
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        errors = [{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()]
        raise ConfigError("invalid experiment config", {"id": merged.get("id"), "errors": errors}) from e


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError("config file not found", {"path": str(path)}) from e
    except json.JSONDecodeError as e:
        raise ConfigError("config file is not valid JSON", {"path": str(path), "error": str(e)}) from e
    return parse_config(data, overrides)


def preset_names() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def _raw(name: str) -> Dict[str, Any]:
    path = PRESET_DIR / f"{name}.json"
    if not path.is_file():
        raise PresetNotFound(f"unknown preset {name!r}", {"available": preset_names()})
    return json.loads(path.read_text())


def load_preset(name: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    return parse_config(_raw(name), overrides)


def list_presets() -> List[PresetInfo]:
    infos = []
    for name in preset_names():
        raw = _raw(name)
        infos.append(PresetInfo(name=name, description=raw.get("description", ""), slow=bool(raw.get("slow", False))))
    return infos
