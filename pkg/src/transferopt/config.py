"""Config loading and schema validation for the command line front end.

Every command has a JSON schema shipped inside the package; configs are
validated before any computation runs, and unknown keys are rejected.
Violations surface as ConfigError with a slash-separated field path so the
CLI can point at the offending entry.
"""

import json
from importlib import resources

from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .errors import ConfigError

COMMANDS = ("weights", "simulate", "sweep", "train", "verify")

_schema_cache = {}


def load_schema(command):
    if command not in COMMANDS:
        raise ValueError(f"unknown command '{command}'")
    if command not in _schema_cache:
        ref = resources.files("transferopt") / "schemas" / f"{command}.json"
        _schema_cache[command] = json.loads(ref.read_text(encoding="utf-8"))
    return _schema_cache[command]


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object", field="/")
    return config


def validate_config(command, config):
    """Check a config dict against its command schema.

    Raises ConfigError carrying the best-matching violation and the path
    of the field it occurred at.
    """
    validator = Draft202012Validator(load_schema(command))
    errors = list(validator.iter_errors(config))
    if not errors:
        return
    err = best_match(errors)
    path = "/" + "/".join(str(p) for p in err.absolute_path)
    raise ConfigError(err.message, field=path)
