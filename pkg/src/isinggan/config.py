"""Flat ``key = value`` config files.

Blank lines and ``#``/``;`` comments are ignored. Keys use the long option
names of the subcommand with ``-`` or ``_`` (``per-temp`` == ``per_temp``);
values use the same syntax as on the command line, lists are comma-separated.
Command-line flags override config values.
"""

from __future__ import annotations

import configparser
from pathlib import Path


class ConfigError(ValueError):
    pass


def load_flat_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if len(parser.sections()) != 1:
        raise ConfigError(f"{path}: sections are not allowed in a flat config file")
    return {k.strip().replace("-", "_"): v.strip() for k, v in parser["config"].items()}


def float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def boolean(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")
