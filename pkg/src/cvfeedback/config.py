"""Sectioned key-value config documents for :class:`ScenarioConfig`.

Example::

    [sample]
    t = 0.70
    r = 0.19

    [feedback]
    detuning_deg = 5

Keys ending in ``_deg`` are converted to radians. Keys not listed in the
config dataclasses are rejected, and every problem found is reported at once.
"""

from __future__ import annotations

import configparser
import dataclasses
import math

from .scenarios import ScenarioConfig, SweepSpec

SECTIONS = ("nopa", "sample", "feedback", "detection", "analysis", "classical",
            "calibration", "sweep")


class ConfigError(ValueError):
    """Config text could not be turned into a valid :class:`ScenarioConfig`."""

    def __init__(self, problems):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        super().__init__("; ".join(self.problems))


def _section_type(section):
    if section == "sweep":
        return SweepSpec
    return type(getattr(ScenarioConfig(), section))


def _field_types(section):
    return {f.name: f.type for f in dataclasses.fields(_section_type(section))}


def _coerce(value, ftype, where):
    text = value.strip()
    if ftype in (bool, "bool"):
        if text.lower() in ("true", "false"):
            return text.lower() == "true"
        raise ConfigError(f"{where}: expected true/false, got {text!r}")
    if ftype in (str, "str"):
        return text
    try:
        number = float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from None
    if not math.isfinite(number):
        raise ConfigError(f"{where}: value must be finite")
    if ftype in (int, "int"):
        if number != int(number):
            raise ConfigError(f"{where}: expected an integer, got {text!r}")
        return int(number)
    return number


def _resolve_key(section, key):
    """Map a document key to ``(field_name, converter)``."""
    fields = _field_types(section)
    if key in fields:
        return key, fields[key], None
    if key.endswith("_deg") and key[:-4] in fields:
        return key[:-4], fields[key[:-4]], math.radians
    raise KeyError(key)


def apply_overrides(cfg, pairs):
    """Apply ``section.key = value`` pairs on top of ``cfg``; collects all errors."""
    raw = {}
    problems = []
    for dotted, value in pairs:
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or not key:
            problems.append(f"unknown key {dotted!r}")
            continue
        try:
            name, ftype, conv = _resolve_key(section, key)
        except KeyError:
            problems.append(f"unknown key {dotted!r}")
            continue
        try:
            v = _coerce(value, ftype, dotted)
        except ConfigError as exc:
            problems.extend(exc.problems)
            continue
        raw.setdefault(section, {})[name] = conv(v) if conv else v
    return _build(cfg, raw, problems)


def _build(cfg, raw, problems):
    updates = {}
    for section, values in raw.items():
        current = getattr(cfg, section)
        try:
            if current is None:
                missing = {"parameter", "start", "stop", "steps"} - set(values)
                if missing:
                    problems.append(f"sweep: missing keys {sorted(missing)}")
                    continue
                updates[section] = SweepSpec(**values)
            else:
                updates[section] = dataclasses.replace(current, **values)
        except (ValueError, TypeError) as exc:
            problems.append(f"{section}: {exc}")
    if problems:
        raise ConfigError(problems)
    return dataclasses.replace(cfg, **updates)


def parse_config(text, base=None):
    """Parse a config document; missing keys keep their defaults."""
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        where = f"line {line}: " if line is not None else ""
        raise ConfigError(f"syntax error: {where}{exc.message.splitlines()[0]}") from None

    problems = []
    pairs = []
    for section in parser.sections():
        if section not in SECTIONS:
            problems.append(f"unknown section [{section}]")
            continue
        for key, value in parser.items(section):
            pairs.append((f"{section}.{key}", value))
    try:
        cfg = apply_overrides(base or ScenarioConfig(), pairs)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def serialize_config(cfg):
    """Render every field, so the text fully determines the config."""
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        if obj is None:
            continue
        lines.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)
