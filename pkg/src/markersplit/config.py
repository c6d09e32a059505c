"""Flat key-value configuration files.

Any INI-style file works; section headers are optional and only group keys
for the reader. All sections are merged into one flat mapping, later
sections winning.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Mapping

DETECTION_KEYS = ("threshold_a", "window_t", "percent_p", "skip_tr")
SILENCE_KEYS = ("max_abs", "min_len")


def parse_config(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_string("[config]\n" + text)
    merged = dict(parser.defaults())
    for section in parser.sections():
        merged.update(parser.items(section))
    return merged


def load_config(path: str | Path | None) -> dict[str, str]:
    if path is None:
        return {}
    return parse_config(Path(path).read_text())


def merge(config: Mapping[str, object], overrides: Mapping[str, object]) -> dict[str, object]:
    """Flags beat the file; ``None`` means the flag was not given."""
    out = dict(config)
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def dump_config(values: Mapping[str, object], section: str = "markersplit") -> str:
    lines = [f"[{section}]"]
    lines += [f"{k} = {v}" for k, v in values.items()]
    return "\n".join(lines) + "\n"
