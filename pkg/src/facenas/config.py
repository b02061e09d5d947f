"""Key-value config files (INI syntax) mapped onto dataclasses.

Values are parsed with :func:`ast.literal_eval` when possible, so
``levels = (2, 3, 4, 5)`` and ``lr = 0.01`` come back typed; anything else is
kept as a string.
"""
import ast
import configparser
import dataclasses


class ConfigError(ValueError):
    pass


def parse_value(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config(path):
    """Parse an INI file into {section: {key: value}}."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return {s: {k: parse_value(v) for k, v in cp.items(s)} for s in cp.sections()}


def write_config(path, sections):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for name in sorted(sections):
        cp[name] = {k: repr(v) for k, v in sorted(sections[name].items())}
    with open(path, "w") as fh:
        cp.write(fh)


def from_section(cls, section, **overrides):
    """Build dataclass ``cls`` from a dict, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    values = dict(section)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for f in dataclasses.fields(cls):
        if f.name in values and isinstance(values[f.name], list):
            values[f.name] = tuple(values[f.name])
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {cls.__name__} section: {exc}") from exc


def to_section(obj):
    return {k: v for k, v in dataclasses.asdict(obj).items()}
