"""Config files (JSON or YAML) with a schema version and dotted overrides."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import yaml

from mollns.errors import ConfigError, SchemaError

SCHEMA_VERSION = 1


def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    try:
        data = yaml.safe_load(text) if p.suffix in (".yaml", ".yml") else json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p} must hold a mapping at top level")
    check_schema(data, str(p))
    return data


def check_schema(data: dict, origin: str = "config"):
    version = data.get("schema_version")
    if version is None:
        raise SchemaError(f"{origin} has no schema_version (expected {SCHEMA_VERSION})")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{origin} has schema_version {version!r}, this build reads {SCHEMA_VERSION}")


def parse_value(text: str):
    """JSON literal if it parses (numbers, booleans, lists, null), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str] | None) -> dict:
    """Apply ``key.sub=value`` assignments to a copy of ``data``."""
    out = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if not all(parts):
            raise ConfigError(f"override key {key!r} is malformed")
        node = out
        for part in parts[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping at {part!r}")
            node = nxt
        node[parts[-1]] = parse_value(raw)
    return out
