# src/config.py
from __future__ import annotations
import os
from typing import Any, Optional

import yaml

__all__ = ["load_conf", "get", "DEFAULT_CONFIG_PATH"]

DEFAULT_CONFIG_PATH = "config.yaml"


def load_conf(path: str = DEFAULT_CONFIG_PATH) -> dict:
    """Read the YAML configuration; a missing file yields an empty config (all defaults)."""
    if not os.path.exists(path):
        return {}
    with open(path, "r") as f:
        conf = yaml.safe_load(f)
    return conf or {}


def get(cfg: Optional[dict], path: str, default: Any) -> Any:
    cur = cfg or {}
    for k in path.split("."):
        if not isinstance(cur, dict) or k not in cur:
            return default
        cur = cur[k]
    return cur
